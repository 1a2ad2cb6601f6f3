"""Simulated grid/cluster backend: a FIFO queue and a pool of worker
processes that run alignment and MCMC tasks and stream progress events.

Workers are separate processes, so independent runs genuinely execute in
parallel. Cancellation is cooperative: a control pipe per worker carries
cancel notices; pending tasks are skipped at pickup, and running MCMC
tasks observe a flag between generations and flush partial output.

Event contract per task: Started, then any Progress events, then exactly
one terminal event (Finished, Failed, or Cancelled), in that order.
Results depend only on task payloads, never on worker count or timing.
"""

from __future__ import annotations

import multiprocessing as mp
import queue
import threading
import time
import traceback
from dataclasses import dataclass, field
from typing import Any, Callable

from .errors import PhyloflowError

PENDING, RUNNING, DONE, FAILED, CANCELLED = (
    "Pending", "Running", "Done", "Failed", "Cancelled",
)
TERMINAL = {DONE, FAILED, CANCELLED}

STARTED, PROGRESS, FINISHED, TASK_FAILED, TASK_CANCELLED = (
    "started", "progress", "finished", "failed", "cancelled",
)


class PoolClosed(PhyloflowError):
    code = "pool_closed"


class UnknownTask(PhyloflowError):
    code = "unknown_task"


@dataclass(frozen=True)
class ExecutionEvent:
    task_id: str
    kind: str
    payload: Any
    timestamp: float


@dataclass
class Task:
    id: str
    job_id: str | None
    kind: str
    payload: Any
    state: str = PENDING
    submitted_at: float = 0.0
    started_at: float | None = None
    finished_at: float | None = None
    result: Any = None
    error: str | None = None
    cancel_requested: bool = False


# Handlers run inside worker processes; register before the pool starts
# (workers inherit the registry via fork).
TASK_HANDLERS: dict[str, Callable] = {}


def register_handler(kind: str, fn: Callable) -> None:
    TASK_HANDLERS[kind] = fn


def _register_builtin_handlers() -> None:
    from . import aligner as _aligner
    from .mcmc import run_single as _run_single
    from .seqio import Alignment, SequenceRecord

    def align_handler(payload, progress, should_cancel):
        records = [SequenceRecord(i, r) for i, r in payload["rows"]]
        params = payload.get("params") or _aligner.ScoringParams()
        aligned = _aligner.realign(Alignment.from_records(records), params)
        profile = _aligner.conservation_profile(aligned)
        progress({"stage": "aligned", "mean_conservation": profile.mean})
        return {
            "rows": [(r.id, r.residues) for r in aligned.records],
            "conservation": list(profile.scores),
            "mean_conservation": profile.mean,
        }

    def mcmc_handler(payload, progress, should_cancel):
        result = _run_single(
            payload["cfg"],
            payload["data"],
            payload["model"],
            payload["run"],
            payload["out_dir"],
            progress=lambda run, gen, lnl: progress(
                {"run": run, "gen": gen, "cold_lnl": lnl}
            ),
            should_cancel=should_cancel,
        )
        return {
            "run": result.run,
            "files": result.files,
            "n_samples": result.n_samples,
            "swaps_attempted": result.swaps_attempted,
            "swaps_accepted": result.swaps_accepted,
            "wall_time": result.wall_time,
            "final_cold_lnl": result.final_cold_lnl,
            "cancelled": result.cancelled,
        }

    register_handler("align", align_handler)
    register_handler("mcmc_run", mcmc_handler)


_register_builtin_handlers()


def _worker_main(worker_index, start_latency, task_queue, event_queue, control):
    cancelled: set[str] = set()
    lock = threading.Lock()

    def listen():
        while True:
            try:
                message = control.recv()
            except (EOFError, OSError):
                return
            if message[0] == "stop":
                return
            with lock:
                cancelled.add(message[1])

    listener = threading.Thread(target=listen, daemon=True)
    listener.start()
    if start_latency > 0:
        time.sleep(start_latency)

    while True:
        item = task_queue.get()
        if item is None:
            return
        task_id, kind, payload = item
        with lock:
            skip = task_id in cancelled
        if skip:
            event_queue.put((task_id, TASK_CANCELLED, None, time.time()))
            continue
        event_queue.put((task_id, STARTED, {"worker": worker_index}, time.time()))

        def emit_progress(data, _tid=task_id):
            event_queue.put((_tid, PROGRESS, data, time.time()))

        def should_cancel(_tid=task_id):
            with lock:
                return _tid in cancelled
        try:
            handler = TASK_HANDLERS[kind]
        except KeyError:
            event_queue.put(
                (task_id, TASK_FAILED, f"no handler for task kind {kind!r}",
                 time.time())
            )
            continue
        try:
            result = handler(payload, emit_progress, should_cancel)
        except Exception:
            event_queue.put(
                (task_id, TASK_FAILED, traceback.format_exc(), time.time())
            )
            continue
        if should_cancel():
            event_queue.put((task_id, TASK_CANCELLED, result, time.time()))
        else:
            event_queue.put((task_id, FINISHED, result, time.time()))


class WorkerPool:
    """FIFO task queue over n worker processes with an event stream."""

    def __init__(self, n_workers: int = 1, start_latency: float = 0.0):
        if n_workers < 1:
            raise PhyloflowError("need at least one worker")
        self.n_workers = n_workers
        self.start_latency = start_latency
        self._ctx = mp.get_context("fork")
        self._task_queue = self._ctx.Queue()
        self._event_queue = self._ctx.Queue()
        self._controls: list = []
        self._workers: list = []
        self._tasks: dict[str, Task] = {}
        self._events: list[ExecutionEvent] = []
        self._task_events: dict[str, list[ExecutionEvent]] = {}
        self._done_flags: dict[str, threading.Event] = {}
        self._subscribers: list[Callable[[ExecutionEvent], None]] = []
        self._lock = threading.Lock()
        self._counter = 0
        self._closed = False
        self._started = False
        self._pump: threading.Thread | None = None

    # -- lifecycle -----------------------------------------------------

    def start(self) -> "WorkerPool":
        if self._started:
            return self
        for i in range(self.n_workers):
            parent_end, child_end = self._ctx.Pipe()
            process = self._ctx.Process(
                target=_worker_main,
                args=(i, self.start_latency, self._task_queue,
                      self._event_queue, child_end),
                daemon=True,
            )
            process.start()
            child_end.close()
            self._controls.append(parent_end)
            self._workers.append(process)
        self._pump = threading.Thread(target=self._drain_events, daemon=True)
        self._pump.start()
        self._started = True
        return self

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.shutdown(wait=exc[0] is None)

    def shutdown(self, wait: bool = True, cancel: bool = False) -> None:
        if self._closed:
            return
        if cancel:
            with self._lock:
                open_ids = [t.id for t in self._tasks.values()
                            if t.state not in TERMINAL]
            for task_id in open_ids:
                self.cancel(task_id)
        if wait:
            with self._lock:
                pending = [t.id for t in self._tasks.values()
                           if t.state not in TERMINAL]
            for task_id in pending:
                self._done_flags[task_id].wait()
        self._closed = True
        for _ in self._workers:
            self._task_queue.put(None)
        for process in self._workers:
            process.join(timeout=30)
        for control in self._controls:
            try:
                control.send(("stop",))
                control.close()
            except (BrokenPipeError, OSError):
                pass
        # let the pump drain whatever is left, then stop it
        self._event_queue.put(None)
        if self._pump is not None:
            self._pump.join(timeout=10)

    # -- submission / control -------------------------------------------

    def submit(self, kind: str, payload: Any, job_id: str | None = None) -> str:
        if self._closed:
            raise PoolClosed("pool has been shut down")
        if not self._started:
            self.start()
        with self._lock:
            self._counter += 1
            task_id = f"task-{self._counter:05d}"
            task = Task(id=task_id, job_id=job_id, kind=kind, payload=payload,
                        submitted_at=time.time())
            self._tasks[task_id] = task
            self._task_events[task_id] = []
            self._done_flags[task_id] = threading.Event()
        self._task_queue.put((task_id, kind, payload))
        return task_id

    def cancel(self, task_id: str) -> bool:
        """Request cancellation; returns True if the task was still open."""
        with self._lock:
            task = self._tasks.get(task_id)
            if task is None:
                raise UnknownTask(f"no task {task_id!r}")
            if task.state in TERMINAL:
                return False
            task.cancel_requested = True
        for control in self._controls:
            try:
                control.send(("cancel", task_id))
            except (BrokenPipeError, OSError):
                pass
        return True

    def subscribe(self, fn: Callable[[ExecutionEvent], None]) -> None:
        """Subscribe to all events; called from the pump thread."""
        self._subscribers.append(fn)

    # -- inspection ------------------------------------------------------

    def task(self, task_id: str) -> Task:
        with self._lock:
            task = self._tasks.get(task_id)
            if task is None:
                raise UnknownTask(f"no task {task_id!r}")
            return task

    def tasks(self) -> list[Task]:
        with self._lock:
            return list(self._tasks.values())

    def events(self, task_id: str | None = None) -> list[ExecutionEvent]:
        with self._lock:
            if task_id is None:
                return list(self._events)
            return list(self._task_events.get(task_id, ()))

    def wait(self, task_ids, timeout: float | None = None) -> bool:
        deadline = None if timeout is None else time.time() + timeout
        for task_id in task_ids:
            flag = self._done_flags.get(task_id)
            if flag is None:
                raise UnknownTask(f"no task {task_id!r}")
            remaining = None if deadline is None else max(0.0, deadline - time.time())
            if not flag.wait(remaining):
                return False
        return True

    # -- internals --------------------------------------------------------

    def _drain_events(self) -> None:
        while True:
            try:
                item = self._event_queue.get(timeout=0.5)
            except queue.Empty:
                if self._closed and all(not w.is_alive() for w in self._workers):
                    return
                continue
            if item is None:
                return
            task_id, kind, payload, timestamp = item
            event = ExecutionEvent(task_id, kind, payload, timestamp)
            with self._lock:
                task = self._tasks.get(task_id)
                if task is not None:
                    if kind == STARTED:
                        task.state = RUNNING
                        task.started_at = timestamp
                    elif kind == FINISHED:
                        task.state = DONE
                        task.result = payload
                        task.finished_at = timestamp
                    elif kind == TASK_FAILED:
                        task.state = FAILED
                        task.error = str(payload)
                        task.finished_at = timestamp
                    elif kind == TASK_CANCELLED:
                        task.state = CANCELLED
                        task.result = payload
                        task.finished_at = timestamp
                self._events.append(event)
                self._task_events.setdefault(task_id, []).append(event)
            if kind in (FINISHED, TASK_FAILED, TASK_CANCELLED):
                flag = self._done_flags.get(task_id)
                if flag is not None:
                    flag.set()
            for fn in list(self._subscribers):
                try:
                    fn(event)
                except Exception:
                    pass  # subscriber errors must not kill the pump


def run_to_completion(pool: WorkerPool, specs) -> tuple[list[ExecutionEvent], float]:
    """Submit (kind, payload) specs, wait for all, return (events, wall time)."""
    started = time.perf_counter()
    ids = [pool.submit(kind, payload) for kind, payload in specs]
    pool.wait(ids)
    wall = time.perf_counter() - started
    events = [e for e in pool.events() if e.task_id in set(ids)]
    return events, wall
