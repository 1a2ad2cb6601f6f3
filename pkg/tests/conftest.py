import sys
import threading
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # oracles.py et al.


@pytest.fixture(scope="module")
def live_server(tmp_path_factory):
    """A real uvicorn server on a random port, for HTTP-client tests."""
    import uvicorn

    from phyloflow.executor import WorkerPool
    from phyloflow.service import ServiceConfig, create_app

    pool = WorkerPool(n_workers=2).start()
    app = create_app(
        ServiceConfig(data_dir=tmp_path_factory.mktemp("server-data")),
        pool=pool,
    )
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 30
    while not server.started:
        assert time.time() < deadline, "server failed to start"
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=20)
    pool.shutdown(wait=False, cancel=True)
