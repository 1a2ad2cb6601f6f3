"""The workflow engine: user-owned jobs moving through the staged
pipeline (upload -> convert -> align loop -> configure -> run ->
summarize), gated by proxy credentials and backed by the executor pool.

Persistence is an append-only, human-readable record log per job
(``jobs/<id>/record.log``: ISO timestamp, event kind, one-line JSON).
Replaying the log plus the stored sequence/alignment files reconstructs
every job after a restart. Run outputs are plain files under
``jobs/<id>/out/``.
"""

from __future__ import annotations

import json
import threading
import time
from datetime import datetime, timezone
from pathlib import Path

from .. import aligner, seqio
from ..errors import PhyloflowError, ValidationError
from ..executor import WorkerPool
from ..mcmc import McmcConfig, convergence_diag, majority_rule_consensus
from ..mcmc.outputs import read_tree_trace
from ..mcmc.summary import burn_in
from ..phylomodel import lset_parse, lset_render
from ..phylomodel.likelihood import TaxaMismatch
from .jobs import (
    FETCH_STATES,
    ContentMismatch,
    InvalidTransition,
    Job,
    JobState,
    NoOutputs,
    RunProgress,
    StatusView,
    advance_state,
    status_view,
)
from .master import render_master_block
from .proxy import ExpiredProxy, ProxyCredential, init_proxy, renew_admin_proxy


class NotConfigured(PhyloflowError):
    code = "not_configured"


class UnknownJob(PhyloflowError):
    code = "unknown_job"


def _iso(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat()


class WorkflowEngine:
    """Owns the job store, the proxy registry, and executor wiring."""

    def __init__(self, data_dir, pool: WorkerPool | None = None, clock=time.time):
        self.data_dir = Path(data_dir)
        self.jobs_dir = self.data_dir / "jobs"
        self.jobs_dir.mkdir(parents=True, exist_ok=True)
        self.pool = pool
        self.clock = clock
        self._jobs: dict[str, Job] = {}
        self._locks: dict[str, threading.RLock] = {}
        self._registry_lock = threading.RLock()
        self._proxies: dict[str, ProxyCredential] = {}
        self._task_jobs: dict[str, str] = {}
        self._counter = 0
        self._load_existing()
        if pool is not None:
            pool.subscribe(self._on_event)

    # -- persistence -------------------------------------------------------

    def _job_dir(self, job_id: str) -> Path:
        return self.jobs_dir / job_id

    def _append(self, job_id: str, event: str, payload: dict) -> None:
        line = f"{_iso(self.clock())}\t{event}\t{json.dumps(payload, sort_keys=True)}\n"
        with open(self._job_dir(job_id) / "record.log", "a") as handle:
            handle.write(line)

    def _record_state(self, job: Job, note: str) -> None:
        ts = self.clock()
        job.history.append((ts, job.state.value, note))
        self._append(job.id, "state", {"state": job.state.value, "note": note})

    def _record_note(self, job: Job, text: str) -> None:
        job.history.append((self.clock(), job.state.value, text))
        self._append(job.id, "note", {"text": text})

    def _load_existing(self) -> None:
        for job_dir in sorted(self.jobs_dir.iterdir()) if self.jobs_dir.exists() else []:
            log = job_dir / "record.log"
            if not log.is_file():
                continue
            job = self._replay(job_dir.name, log.read_text(), job_dir)
            if job is not None:
                self._jobs[job.id] = job
                self._locks[job.id] = threading.RLock()
                number = job.id.rsplit("-", 1)[-1]
                if number.isdigit():
                    self._counter = max(self._counter, int(number))

    def _replay(self, job_id: str, log_text: str, job_dir: Path) -> Job | None:
        job: Job | None = None
        for line in log_text.splitlines():
            if not line.strip():
                continue
            ts_text, event, payload_text = line.split("\t", 2)
            ts = datetime.fromisoformat(ts_text).timestamp()
            payload = json.loads(payload_text)
            if event == "created":
                job = Job(
                    id=job_id,
                    owner=payload["owner"],
                    name=payload["name"],
                    description=payload["description"],
                    created_at=ts,
                )
            elif job is None:
                return None
            elif event == "sequences":
                stored = job_dir / payload["stored"]
                job.alignment = seqio.parse(stored.read_text())
                job.datafile = payload["datafile"]
                job.alignment_accepted = False
                job.conservation = None
            elif event == "alignment":
                stored = job_dir / payload["stored"]
                job.alignment = seqio.parse(stored.read_text())
                job.conservation = aligner.conservation_profile(
                    job.alignment
                ).scores
            elif event == "accepted":
                job.alignment_accepted = True
            elif event == "configured":
                job.lset_text = payload["lset"]
                job.model = lset_parse(payload["lset"])
                job.mcmc_cfg = McmcConfig(
                    ngen=payload["ngen"],
                    samplefreq=payload["samplefreq"],
                    nruns=payload["runs"],
                    nchains=payload["nchains"],
                    seed=payload["seed"],
                    filebase=payload["filebase"],
                )
            elif event == "outputs":
                job.outputs = list(payload["names"])
            elif event == "state":
                job.state = JobState(payload["state"])
                job.history.append((ts, payload["state"], payload["note"]))
            elif event == "note":
                job.history.append((ts, job.state.value, payload["text"]))
        return job

    # -- helpers -----------------------------------------------------------

    def _lock(self, job_id: str) -> threading.RLock:
        with self._registry_lock:
            lock = self._locks.get(job_id)
            if lock is None:
                raise UnknownJob(f"no job {job_id!r}")
            return lock

    def job(self, job_id: str) -> Job:
        with self._registry_lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise UnknownJob(f"no job {job_id!r}")
            return job

    def _require_pool(self) -> WorkerPool:
        if self.pool is None:
            raise PhyloflowError("engine started without an executor pool")
        return self.pool

    # -- proxy lifecycle ----------------------------------------------------

    def init_proxy(self, owner: str, lifetime: float,
                   kind: str = "user") -> ProxyCredential:
        proxy = init_proxy(owner, lifetime, kind, now=self.clock())
        with self._registry_lock:
            self._proxies[owner] = proxy
        return proxy

    def renew_proxy(self, owner: str) -> ProxyCredential:
        with self._registry_lock:
            proxy = self._proxies.get(owner)
            if proxy is None:
                raise ExpiredProxy(f"no proxy initialized for {owner!r}")
            renewed = renew_admin_proxy(proxy, now=self.clock())
            self._proxies[owner] = renewed
            return renewed

    def proxy_for(self, owner: str) -> ProxyCredential | None:
        with self._registry_lock:
            return self._proxies.get(owner)

    # -- job operations -----------------------------------------------------

    def create_job(self, owner: str, name: str, description: str = "") -> Job:
        if not name or not name.strip():
            raise ValidationError("job name must not be empty", field="name")
        with self._registry_lock:
            self._counter += 1
            job_id = f"job-{self._counter:04d}"
            job = Job(id=job_id, owner=owner, name=name.strip(),
                      description=description, created_at=self.clock())
            self._jobs[job_id] = job
            self._locks[job_id] = threading.RLock()
        self._job_dir(job_id).mkdir(parents=True, exist_ok=True)
        self._append(job_id, "created", {
            "owner": owner, "name": job.name, "description": description,
        })
        self._record_state(job, "job created")
        return job

    def attach_sequences(self, job_id: str, text: str,
                         filename: str = "data.nex") -> Job:
        job = self.job(job_id)
        with self._lock(job_id):
            new_state = advance_state(job.state, "attach_sequences")
            alignment = seqio.parse(text)  # errors leave the job untouched
            if alignment.kind == "aligned":
                stored = "data.nex"
                (self._job_dir(job_id) / stored).write_text(
                    seqio.write_nexus(alignment)
                )
            else:
                stored = "data.fasta"
                (self._job_dir(job_id) / stored).write_text(
                    seqio.write_fasta(alignment)
                )
            job.alignment = alignment
            job.datafile = filename
            job.alignment_accepted = False
            job.conservation = None
            job.state = new_state
            self._append(job_id, "sequences", {
                "datafile": filename, "stored": stored,
                "kind": alignment.kind, "ntax": alignment.ntax,
            })
            self._record_state(
                job, f"sequences attached ({alignment.ntax} taxa, {alignment.kind})"
            )
            return job

    def request_alignment(self, job_id: str,
                          params: aligner.ScoringParams | None = None) -> Job:
        pool = self._require_pool()
        job = self.job(job_id)
        with self._lock(job_id):
            new_state = advance_state(job.state, "request_alignment")
            if job.alignment is None:
                raise ValidationError("no sequences attached yet")
            job.state = new_state
            self._record_state(job, "alignment task submitted")
            task_id = pool.submit(
                "align",
                {
                    "rows": [(r.id, r.residues) for r in job.alignment.records],
                    "params": params,
                },
                job_id=job_id,
            )
            job.task_ids[task_id] = 0
            with self._registry_lock:
                self._task_jobs[task_id] = job_id
            return job

    def accept_alignment(self, job_id: str) -> Job:
        job = self.job(job_id)
        with self._lock(job_id):
            advance_state(job.state, "accept_alignment")
            if job.alignment is None or job.alignment.kind != "aligned":
                raise seqio.NotAligned("no aligned sequences to accept")
            job.alignment_accepted = True
            self._append(job_id, "accepted", {})
            self._record_state(job, "alignment accepted")
            return job

    def submit_replacement_alignment(self, job_id: str,
                                     replacement: seqio.Alignment) -> Job:
        job = self.job(job_id)
        with self._lock(job_id):
            advance_state(job.state, "replace_alignment")
            if replacement.kind != "aligned":
                raise seqio.NotAligned("replacement must be aligned")
            if job.alignment is None:
                raise ValidationError("no sequences attached yet")
            if set(replacement.taxa) != set(job.alignment.taxa):
                raise TaxaMismatch("replacement taxa differ from the job's")
            stored = {
                r.id: r.residues.replace("-", "") for r in job.alignment.records
            }
            incoming = {
                r.id: r.residues.replace("-", "") for r in replacement.records
            }
            if stored != incoming:
                raise ContentMismatch(
                    "replacement alters residues, only gap structure may change"
                )
            self._store_alignment(job, replacement, note="replacement alignment")
            job.alignment_accepted = True
            self._append(job_id, "accepted", {})
            return job

    def _store_alignment(self, job: Job, alignment: seqio.Alignment,
                         note: str) -> None:
        (self._job_dir(job.id) / "alignment.nex").write_text(
            seqio.write_nexus(alignment)
        )
        job.alignment = alignment
        job.conservation = aligner.conservation_profile(alignment).scores
        self._append(job.id, "alignment", {"stored": "alignment.nex"})
        self._record_state(job, note)

    def configure(self, job_id: str, lset_text: str, ngen: int,
                  samplefreq: int, runs: int, filebase: str,
                  seed: int = 0, nchains: int = 4) -> Job:
        job = self.job(job_id)
        with self._lock(job_id):
            new_state = advance_state(job.state, "configure")
            if not job.alignment_accepted:
                raise InvalidTransition(
                    "alignment must be accepted before configuring"
                )
            model = lset_parse(lset_text)
            cfg = McmcConfig(
                ngen=ngen, samplefreq=samplefreq, nruns=runs, nchains=nchains,
                seed=seed, filebase=filebase,
            )
            job.model = model
            job.lset_text = lset_render(model)
            job.mcmc_cfg = cfg
            job.state = new_state
            self._append(job_id, "configured", {
                "lset": job.lset_text, "ngen": ngen, "samplefreq": samplefreq,
                "runs": runs, "filebase": filebase, "seed": seed,
                "nchains": nchains,
            })
            self._record_state(job, f"configured: lset {job.lset_text}, "
                                    f"ngen={ngen}, samplefreq={samplefreq}, "
                                    f"runs={runs}")
            return job

    def render_master_block(self, job_id: str) -> str:
        job = self.job(job_id)
        if job.mcmc_cfg is None or job.lset_text is None:
            raise NotConfigured("job has no model/run configuration yet")
        cfg = job.mcmc_cfg
        return render_master_block(
            job.datafile, job.lset_text, cfg.ngen, cfg.samplefreq,
            cfg.nruns, cfg.filebase,
        )

    def submit(self, job_id: str) -> Job:
        pool = self._require_pool()
        job = self.job(job_id)
        with self._lock(job_id):
            new_state = advance_state(job.state, "submit")
            proxy = self.proxy_for(job.owner)
            if proxy is None or not proxy.valid(self.clock()):
                raise ExpiredProxy(
                    "a valid proxy credential is required to run compute jobs"
                )
            cfg = job.mcmc_cfg
            out_dir = self._job_dir(job_id) / "out"
            job.state = new_state
            job.progress = {r: RunProgress() for r in range(1, cfg.nruns + 1)}
            self._record_state(job, f"queued {cfg.nruns} run(s)")
            for run in range(1, cfg.nruns + 1):
                task_id = pool.submit(
                    "mcmc_run",
                    {
                        "cfg": cfg, "data": job.alignment, "model": job.model,
                        "run": run, "out_dir": str(out_dir),
                    },
                    job_id=job_id,
                )
                job.task_ids[task_id] = run
                with self._registry_lock:
                    self._task_jobs[task_id] = job_id
            return job

    def cancel(self, job_id: str) -> Job:
        job = self.job(job_id)
        with self._lock(job_id):
            new_state = advance_state(job.state, "cancel")
            pool = self.pool
            if pool is not None:
                for task_id in job.task_ids:
                    try:
                        pool.cancel(task_id)
                    except PhyloflowError:
                        pass
            job.state = new_state
            job.outputs = []  # partial files stay on disk, see fetch_outputs
            self._record_state(job, "cancelled by user")
            return job

    def poll_status(self, job_id: str) -> dict:
        job = self.job(job_id)
        with self._lock(job_id):
            view = status_view(job.state)
            runs = {}
            for run, prog in sorted(job.progress.items()):
                att, acc = self._swap_stats(job, run)
                runs[run] = {
                    "gen": prog.gen,
                    "cold_lnl": prog.cold_lnl,
                    "swaps_attempted": att,
                    "swaps_accepted": acc,
                    "done": prog.done,
                }
            return {
                "coarse": view.coarse,
                "state": view.detail,
                "runs": runs,
                "error": job.error,
            }

    def _swap_stats(self, job: Job, run: int) -> tuple[int, int]:
        if job.mcmc_cfg is None:
            return (0, 0)
        path = self._job_dir(job.id) / "out" / f"{job.mcmc_cfg.filebase}{run}.mcmc"
        if not path.is_file():
            return (0, 0)
        lines = path.read_text().strip().splitlines()
        if len(lines) < 2:
            return (0, 0)
        fields = lines[-1].split("\t")
        try:
            return int(fields[1]), int(fields[2])
        except (IndexError, ValueError):
            return (0, 0)

    def fetch_outputs(self, job_id: str) -> list[dict]:
        job = self.job(job_id)
        with self._lock(job_id):
            if job.state not in FETCH_STATES:
                raise NoOutputs(
                    f"job in state {job.state.value} has no outputs yet"
                )
            out_dir = self._job_dir(job_id) / "out"
            files = sorted(out_dir.iterdir()) if out_dir.is_dir() else []
            consensus = self._job_dir(job_id) / "consensus.tre"
            if consensus.is_file():
                files.append(consensus)
            if not files:
                raise NoOutputs("no output files have been produced")
            return [
                {"name": p.name, "size": p.stat().st_size} for p in files
            ]

    def output_bytes(self, job_id: str, name: str) -> bytes:
        job = self.job(job_id)
        with self._lock(job_id):
            if job.state not in FETCH_STATES:
                raise NoOutputs(f"job in state {job.state.value} has no outputs yet")
            base = self._job_dir(job_id)
            candidate = (base / "out" / name) if name != "consensus.tre" \
                else base / name
            resolved = candidate.resolve()
            if not str(resolved).startswith(str(base.resolve())):
                raise NoOutputs("illegal output path")
            if not resolved.is_file():
                raise NoOutputs(f"no output named {name!r}")
            return resolved.read_bytes()

    def compute_consensus(self, job_id: str, burnin_fraction: float = 0.25):
        """Pool post-burn-in trees across runs; returns (consensus, diag).

        Pure read: the cached ``consensus.tre`` artifact is written once at
        job completion, never from this path (GETs are side-effect-free).
        """
        job = self.job(job_id)
        with self._lock(job_id):
            if job.state not in FETCH_STATES:
                raise NoOutputs(f"job in state {job.state.value} has no outputs yet")
            cfg = job.mcmc_cfg
            if cfg is None:
                raise NotConfigured("job was never configured")
            traces = []
            for run in range(1, cfg.nruns + 1):
                path = self._job_dir(job_id) / "out" / f"{cfg.filebase}{run}.t"
                if path.is_file():
                    trees = [t for _, t in read_tree_trace(path.read_text())]
                    if trees:
                        traces.append(trees)
            if not traces:
                raise NoOutputs("no tree samples available yet")
            pooled = []
            for trace in traces:
                pooled.extend(burn_in(trace, burnin_fraction))
            consensus = majority_rule_consensus(pooled, 0.0)
            diag = (
                convergence_diag(traces, burnin_fraction)
                if len(traces) >= 2 else None
            )
            return consensus, diag

    def list_jobs(self, owner: str) -> list[Job]:
        with self._registry_lock:
            mine = [j for j in self._jobs.values() if j.owner == owner]
        return sorted(mine, key=lambda j: (j.created_at, j.id), reverse=True)

    # -- executor event handling -------------------------------------------

    def _on_event(self, event) -> None:
        with self._registry_lock:
            job_id = self._task_jobs.get(event.task_id)
        if job_id is None:
            return
        job = self._jobs.get(job_id)
        if job is None:
            return
        with self._lock(job_id):
            run = job.task_ids.get(event.task_id, 0)
            if event.kind == "started":
                if run and job.state is JobState.Queued:
                    job.state = advance_state(job.state, "task_started")
                    self._record_state(job, f"run {run} started")
            elif event.kind == "progress":
                self._on_progress(job, run, event.payload)
            elif event.kind == "finished":
                self._on_finished(job, run, event.payload)
            elif event.kind == "failed":
                self._on_failed(job, run, str(event.payload))
            elif event.kind == "cancelled":
                if run and job.state not in (JobState.Cancelled, JobState.Failed):
                    self._record_note(job, f"run {run} cancelled")

    def _on_progress(self, job: Job, run: int, payload) -> None:
        if run and isinstance(payload, dict) and "gen" in payload:
            prog = job.progress.setdefault(run, RunProgress())
            prog.gen = max(prog.gen, int(payload["gen"]))
            prog.cold_lnl = payload.get("cold_lnl", prog.cold_lnl)
        self._check_proxy_mid_run(job)

    def _check_proxy_mid_run(self, job: Job) -> None:
        if job.state is not JobState.Running:
            return
        proxy = self.proxy_for(job.owner)
        if proxy is None or proxy.valid(self.clock()):
            return
        if proxy.kind == "admin":
            renewed = renew_admin_proxy(proxy, now=self.clock())
            with self._registry_lock:
                self._proxies[job.owner] = renewed
            self._record_note(job, "admin proxy auto-renewed mid-run")
        else:
            for task_id in job.task_ids:
                try:
                    self.pool.cancel(task_id)
                except PhyloflowError:
                    pass
            job.state = advance_state(job.state, "job_failed")
            job.error = "user proxy expired mid-run"
            job.outputs = []
            self._record_state(job, "failed: user proxy expired mid-run")

    def _on_finished(self, job: Job, run: int, payload) -> None:
        if run == 0:  # alignment task
            if job.state is not JobState.Aligning:
                return
            records = [
                seqio.SequenceRecord(i, r) for i, r in payload["rows"]
            ]
            alignment = seqio.Alignment.from_records(records)
            job.state = advance_state(job.state, "alignment_done")
            self._store_alignment(
                job, alignment,
                note=f"alignment ready (mean conservation "
                     f"{payload['mean_conservation']:.4f})",
            )
            return
        if job.state in (JobState.Cancelled, JobState.Failed):
            return
        prog = job.progress.setdefault(run, RunProgress())
        prog.done = True
        prog.swaps_attempted = payload.get("swaps_attempted", 0)
        prog.swaps_accepted = payload.get("swaps_accepted", 0)
        for path in payload.get("files", {}).values():
            name = Path(path).name
            if name not in job.outputs:
                job.outputs.append(name)
        self._record_note(job, f"run {run} finished")
        if all(p.done for p in job.progress.values()):
            job.state = advance_state(job.state, "all_runs_done")
            try:
                consensus, _ = self.compute_consensus(job.id, 0.25)
                (self._job_dir(job.id) / "consensus.tre").write_text(
                    consensus.newick() + "\n"
                )
                if "consensus.tre" not in job.outputs:
                    job.outputs.append("consensus.tre")
            except PhyloflowError as exc:
                self._record_note(job, f"consensus not written: {exc}")
            job.outputs.sort()
            self._append(job.id, "outputs", {"names": job.outputs})
            self._record_state(job, "all runs complete")

    def _on_failed(self, job: Job, run: int, reason: str) -> None:
        if run == 0:
            if job.state is not JobState.Aligning:
                return
            job.state = advance_state(job.state, "alignment_failed")
            self._record_state(
                job, f"alignment failed, previous alignment retained: "
                     f"{reason.splitlines()[-1] if reason else 'unknown'}"
            )
            return
        if job.state in (JobState.Cancelled, JobState.Failed):
            return
        for task_id in job.task_ids:
            try:
                self.pool.cancel(task_id)
            except PhyloflowError:
                pass
        job.state = advance_state(job.state, "job_failed")
        job.error = f"run {run} failed"
        job.outputs = []
        self._record_state(
            job, f"failed: run {run}: "
                 f"{reason.splitlines()[-1] if reason else 'unknown'}"
        )
