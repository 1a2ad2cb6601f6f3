"""The web service: session login, proxy endpoints, and the job API the
portal drives. All state changes delegate to the workflow engine; GET
endpoints are side-effect-free.

Errors carry stable machine codes: every PhyloflowError maps to one
``{"code", "message", "field"}`` body and a fixed HTTP status.
"""

from __future__ import annotations

import secrets
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .. import __version__
from ..aligner import ScoringParams
from ..errors import PhyloflowError, ValidationError
from ..executor import WorkerPool
from ..seqio import Alignment, SequenceRecord
from ..workflow import WorkflowEngine, status_view

_STATUS_BY_CODE = {
    "unknown_job": 404,
    "unknown_task": 404,
    "no_outputs": 404,
    "invalid_transition": 409,
    "not_configured": 409,
    "content_mismatch": 409,
    "taxa_mismatch": 409,
    "expired_proxy": 403,
    "renew_on_user_proxy": 403,
    "invalid_session": 401,
    "pool_closed": 503,
    "upload_too_large": 413,
}


class AuthError(PhyloflowError):
    code = "invalid_session"


class UploadTooLarge(PhyloflowError):
    code = "upload_too_large"


@dataclass
class ServiceConfig:
    data_dir: Path
    workers: int = 2
    session_lifetime: float = 24 * 3600.0
    upload_limit: int = 10 * 1024 * 1024
    static_dir: Path | None = None


@dataclass
class Session:
    token: str
    user: str
    created_at: float
    expires_at: float


# -- request bodies ----------------------------------------------------------


class LoginBody(BaseModel):
    username: str = Field(min_length=1, max_length=80)


class ProxyInitBody(BaseModel):
    lifetime_s: float = Field(gt=0)
    kind: str = "user"


class JobCreateBody(BaseModel):
    name: str
    description: str = ""


class SequencesBody(BaseModel):
    filename: str = Field(default="data.nex", max_length=255)
    content: str


class ScoringBody(BaseModel):
    match: int = 2
    mismatch: int = -1
    gap_open: int = -4
    gap_extend: int = -1


class AlignBody(BaseModel):
    scoring: ScoringBody | None = None


class RecordBody(BaseModel):
    id: str
    residues: str


class ReplacementBody(BaseModel):
    records: list[RecordBody]


class ConfigBody(BaseModel):
    lset: str
    ngen: int = Field(gt=0)
    samplefreq: int = Field(gt=0)
    runs: int = Field(gt=0, default=1)
    filebase: str = Field(min_length=1)
    seed: int = 0
    nchains: int = Field(gt=0, default=4)


def _job_summary(job) -> dict:
    view = status_view(job.state)
    return {
        "id": job.id,
        "name": job.name,
        "description": job.description,
        "owner": job.owner,
        "state": view.detail,
        "coarse_status": view.coarse,
        "created_at": job.created_at,
        "alignment_accepted": job.alignment_accepted,
        "configured": job.mcmc_cfg is not None,
        "runs": job.runs if job.mcmc_cfg else None,
        "ngen": job.mcmc_cfg.ngen if job.mcmc_cfg else None,
        "samplefreq": job.mcmc_cfg.samplefreq if job.mcmc_cfg else None,
        "filebase": job.mcmc_cfg.filebase if job.mcmc_cfg else None,
        "lset": job.lset_text,
        "datafile": job.datafile,
        "error": job.error,
    }


def create_app(config: ServiceConfig, pool: WorkerPool | None = None,
               engine: WorkflowEngine | None = None) -> FastAPI:
    own_pool = pool is None

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        # drain or checkpoint-cancel whatever is still running
        if own_pool:
            app.state.pool.shutdown(wait=True, cancel=True)

    app = FastAPI(title="phyloflow", version=__version__, lifespan=lifespan)
    app.state.config = config
    app.state.pool = pool if pool is not None else WorkerPool(
        n_workers=config.workers
    ).start()
    app.state.engine = engine if engine is not None else WorkflowEngine(
        config.data_dir, pool=app.state.pool
    )
    app.state.sessions: dict[str, Session] = {}

    def the_engine() -> WorkflowEngine:
        return app.state.engine

    @app.exception_handler(PhyloflowError)
    async def phyloflow_error(request: Request, exc: PhyloflowError):
        status = _STATUS_BY_CODE.get(exc.code, 400)
        body = {"code": exc.code, "message": exc.message}
        if exc.field:
            body["field"] = exc.field
        return JSONResponse(status_code=status, content=body)

    def current_user(authorization: str = Header(default="")) -> str:
        token = authorization.removeprefix("Bearer ").strip()
        session = app.state.sessions.get(token)
        if session is None or session.expires_at < time.time():
            raise AuthError("login required (missing or expired session)")
        return session.user

    def owned_job(job_id: str, user: str):
        engine = the_engine()
        job = engine.job(job_id)
        if job.owner != user:
            from ..workflow import UnknownJob

            raise UnknownJob(f"no job {job_id!r}")  # do not leak other owners
        return job

    # -- health / auth ------------------------------------------------------

    @app.get("/api/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/api/login")
    def login(body: LoginBody):
        username = body.username.strip()
        if not username:
            raise ValidationError("username must not be empty", field="username")
        token = secrets.token_urlsafe(24)
        now = time.time()
        app.state.sessions[token] = Session(
            token=token, user=username, created_at=now,
            expires_at=now + config.session_lifetime,
        )
        return {"token": token, "user": username}

    # -- proxy credentials ----------------------------------------------------

    @app.post("/api/proxy/init")
    def proxy_init(body: ProxyInitBody, user: str = Depends(current_user)):
        proxy = the_engine().init_proxy(user, body.lifetime_s, body.kind)
        return {
            "owner": proxy.owner, "kind": proxy.kind,
            "issued_at": proxy.issued_at, "expires_at": proxy.expires_at,
        }

    @app.post("/api/proxy/renew")
    def proxy_renew(user: str = Depends(current_user)):
        proxy = the_engine().renew_proxy(user)
        return {
            "owner": proxy.owner, "kind": proxy.kind,
            "issued_at": proxy.issued_at, "expires_at": proxy.expires_at,
        }

    # -- jobs -----------------------------------------------------------------

    @app.get("/api/jobs")
    def list_jobs(user: str = Depends(current_user),
                  offset: int = Query(default=0, ge=0),
                  limit: int = Query(default=100, ge=1, le=100)):
        jobs = the_engine().list_jobs(user)
        window = jobs[offset:offset + limit]
        return {
            "total": len(jobs),
            "offset": offset,
            "jobs": [_job_summary(j) for j in window],
        }

    @app.post("/api/jobs", status_code=201)
    def create_job(body: JobCreateBody, user: str = Depends(current_user)):
        job = the_engine().create_job(user, body.name, body.description)
        return _job_summary(job)

    @app.get("/api/jobs/{job_id}")
    def job_detail(job_id: str, user: str = Depends(current_user)):
        return _job_summary(owned_job(job_id, user))

    @app.post("/api/jobs/{job_id}/sequences")
    def upload_sequences(job_id: str, body: SequencesBody,
                         user: str = Depends(current_user)):
        owned_job(job_id, user)
        if len(body.content.encode()) > config.upload_limit:
            raise UploadTooLarge(
                f"upload exceeds the {config.upload_limit} byte limit"
            )
        job = the_engine().attach_sequences(job_id, body.content, body.filename)
        return {
            **_job_summary(job),
            "ntax": job.alignment.ntax,
            "aligned": job.alignment.kind == "aligned",
        }

    @app.post("/api/jobs/{job_id}/align", status_code=202)
    def request_alignment(job_id: str, body: AlignBody | None = None,
                          user: str = Depends(current_user)):
        owned_job(job_id, user)
        params = None
        if body is not None and body.scoring is not None:
            s = body.scoring
            params = ScoringParams(s.match, s.mismatch, s.gap_open, s.gap_extend)
        job = the_engine().request_alignment(job_id, params)
        return _job_summary(job)

    @app.get("/api/jobs/{job_id}/alignment")
    def get_alignment(job_id: str, user: str = Depends(current_user)):
        job = owned_job(job_id, user)
        if job.alignment is None:
            from ..workflow import NoOutputs

            raise NoOutputs("no sequences attached yet")
        conservation = list(job.conservation) if job.conservation else None
        return {
            "kind": job.alignment.kind,
            "accepted": job.alignment_accepted,
            "records": [
                {"id": r.id, "residues": r.residues}
                for r in job.alignment.records
            ],
            "conservation": conservation,
            "mean_conservation": (
                sum(conservation) / len(conservation) if conservation else None
            ),
        }

    @app.put("/api/jobs/{job_id}/alignment")
    def replace_alignment(job_id: str, body: ReplacementBody,
                          user: str = Depends(current_user)):
        owned_job(job_id, user)
        replacement = Alignment.from_records(
            SequenceRecord(r.id, r.residues.upper()) for r in body.records
        )
        return _job_summary(
            the_engine().submit_replacement_alignment(job_id, replacement)
        )

    @app.post("/api/jobs/{job_id}/alignment/accept")
    def accept_alignment(job_id: str, user: str = Depends(current_user)):
        owned_job(job_id, user)
        return _job_summary(the_engine().accept_alignment(job_id))

    @app.post("/api/jobs/{job_id}/config")
    def configure(job_id: str, body: ConfigBody,
                  user: str = Depends(current_user)):
        owned_job(job_id, user)
        job = the_engine().configure(
            job_id, body.lset, body.ngen, body.samplefreq, body.runs,
            body.filebase, seed=body.seed, nchains=body.nchains,
        )
        return _job_summary(job)

    @app.get("/api/jobs/{job_id}/master-block", response_class=PlainTextResponse)
    def master_block(job_id: str, user: str = Depends(current_user)):
        owned_job(job_id, user)
        return the_engine().render_master_block(job_id)

    @app.post("/api/jobs/{job_id}/submit", status_code=202)
    def submit(job_id: str, user: str = Depends(current_user)):
        owned_job(job_id, user)
        return _job_summary(the_engine().submit(job_id))

    @app.get("/api/jobs/{job_id}/status")
    def status(job_id: str, user: str = Depends(current_user)):
        job = owned_job(job_id, user)
        info = the_engine().poll_status(job_id)
        info["name"] = job.name
        info["description"] = job.description
        return info

    @app.get("/api/jobs/{job_id}/outputs")
    def outputs(job_id: str, user: str = Depends(current_user)):
        owned_job(job_id, user)
        return {"outputs": the_engine().fetch_outputs(job_id)}

    @app.get("/api/jobs/{job_id}/outputs/{name}")
    def output_file(job_id: str, name: str, user: str = Depends(current_user)):
        owned_job(job_id, user)
        data = the_engine().output_bytes(job_id, name)
        return Response(content=data, media_type="application/octet-stream")

    @app.get("/api/jobs/{job_id}/consensus")
    def consensus(job_id: str, user: str = Depends(current_user),
                  burnin: float = Query(default=0.25, ge=0.0, lt=1.0)):
        owned_job(job_id, user)
        tree, diag = the_engine().compute_consensus(job_id, burnin)
        return {
            "burnin": burnin,
            "newick": tree.newick(),
            "support": [
                {"split": list(split), "posterior": pp}
                for split, pp in sorted(tree.support.items())
            ],
            "convergence_sd": diag,
        }

    @app.post("/api/jobs/{job_id}/cancel")
    def cancel(job_id: str, user: str = Depends(current_user)):
        owned_job(job_id, user)
        return _job_summary(the_engine().cancel(job_id))

    if config.static_dir is not None and Path(config.static_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.static_dir, html=True),
                  name="portal")

    return app


def serve(config: ServiceConfig, host: str = "127.0.0.1", port: int = 8040):
    """Run the service until interrupted; drains tasks on shutdown."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=host, port=port, log_level="warning")
