"""Command-line interface: headless parity with the portal.

Exit codes: 0 success, 1 usage error, 2 data error (parse/validation),
3 runtime error (I/O, server unreachable, internal).
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

from . import __version__, seqio
from .aligner import ScoringParams, conservation_profile, realign
from .errors import PhyloflowError
from .mcmc import (
    McmcConfig,
    burn_in,
    convergence_diag,
    majority_rule_consensus,
    run_mcmc,
)
from .mcmc.outputs import read_tree_trace
from .phylomodel import count_topologies, lset_parse


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _build() -> _Parser:
    parser = _Parser(prog="phyloflow", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert an alignment to canonical NEXUS")
    p.add_argument("input", type=Path)
    p.add_argument("--to", default="nexus", choices=["nexus", "fasta"])
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    p.set_defaults(fn=cmd_convert)

    p = sub.add_parser("align", help="progressively align sequences")
    p.add_argument("input", type=Path)
    p.add_argument("--match", type=int, default=2)
    p.add_argument("--mismatch", type=int, default=-1)
    p.add_argument("--gap-open", type=int, default=-4)
    p.add_argument("--gap-extend", type=int, default=-1)
    p.add_argument("--out", type=Path, help="aligned NEXUS file (default: stdout)")
    p.add_argument("--profile", type=Path, help="write conservation TSV here")
    p.add_argument("--plot", type=Path, help="write conservation.png into this dir")
    p.set_defaults(fn=cmd_align)

    p = sub.add_parser("run", help="run Bayesian MCMC inference on an alignment")
    p.add_argument("input", type=Path, help="aligned input (NEXUS or other)")
    p.add_argument("--lset", default="nst=1 rates=equal",
                   help='model line, e.g. "nst=6 rates=gamma"')
    p.add_argument("--ngen", type=int, required=True)
    p.add_argument("--samplefreq", type=int, required=True)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--filebase", default=None,
                   help="output stem (default: input filename)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--nchains", type=int, default=4)
    p.add_argument("--heat", type=float, default=0.1)
    p.add_argument("--outdir", type=Path, default=Path("."))
    p.add_argument("--report", action="store_true",
                   help="render figures + summary tables after the run")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("consensus", help="majority-rule consensus from .t files")
    p.add_argument("tfiles", nargs="+", type=Path)
    p.add_argument("--burnin", type=float, default=0.25)
    p.add_argument("--out", type=Path, help="write the tree here as well")
    p.set_defaults(fn=cmd_consensus)

    p = sub.add_parser("count-trees", help="count unrooted binary topologies")
    p.add_argument("n", type=int)
    p.set_defaults(fn=cmd_count_trees)

    p = sub.add_parser("report", help="figures + summary tables for run outputs")
    p.add_argument("rundir", type=Path)
    p.add_argument("--burnin", type=float, default=0.25)
    p.add_argument("--figdir", type=Path, default=None,
                   help="target directory (default: <rundir>/report)")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("serve", help="start the web service")
    p.add_argument("--port", type=int, default=8040)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--workers", type=int, default=2)
    p.add_argument("--static", type=Path, default=None,
                   help="portal assets directory to serve at /")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("jobs", help="inspect jobs on a running service")
    p.add_argument("action", choices=["list", "show", "cancel"])
    p.add_argument("job_id", nargs="?")
    p.add_argument("--server", required=True)
    p.add_argument("--user", required=True)
    p.set_defaults(fn=cmd_jobs)

    return parser


def _read(path: Path) -> str:
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return path.read_text()


def cmd_convert(args) -> int:
    text = _read(args.input)
    out = seqio.to_nexus(text) if args.to == "nexus" else seqio.write_fasta(
        seqio.parse(text)
    )
    if args.out:
        args.out.write_text(out)
    else:
        sys.stdout.write(out)
    return 0


def cmd_align(args) -> int:
    params = ScoringParams(args.match, args.mismatch, args.gap_open,
                           args.gap_extend)
    alignment = realign(seqio.parse(_read(args.input)), params)
    profile = conservation_profile(alignment)
    out = seqio.write_nexus(alignment)
    if args.out:
        args.out.write_text(out)
    else:
        sys.stdout.write(out)
    print(f"mean conservation: {profile.mean:.4f}", file=sys.stderr)
    if args.profile:
        with open(args.profile, "w") as handle:
            handle.write("column\tconservation\n")
            for i, score in enumerate(profile.scores, start=1):
                handle.write(f"{i}\t{score:.6g}\n")
    if args.plot:
        from .report import plot_conservation

        args.plot.mkdir(parents=True, exist_ok=True)
        plot_conservation(profile.scores, args.plot / "conservation.png")
    return 0


def cmd_run(args) -> int:
    data = seqio.parse(_read(args.input))
    if data.kind != "aligned":
        raise seqio.NotAligned(
            "input is not aligned; run 'phyloflow align' first"
        )
    model = lset_parse(args.lset)
    filebase = args.filebase or args.input.name
    cfg = McmcConfig(
        ngen=args.ngen, samplefreq=args.samplefreq, nruns=args.runs,
        nchains=args.nchains, heat_lambda=args.heat, seed=args.seed,
        filebase=filebase,
    )
    args.outdir.mkdir(parents=True, exist_ok=True)
    if args.workers > 1:
        from .executor import WorkerPool

        specs = [
            ("mcmc_run", {"cfg": cfg, "data": data, "model": model,
                          "run": r, "out_dir": str(args.outdir)})
            for r in range(1, cfg.nruns + 1)
        ]
        with WorkerPool(n_workers=args.workers) as pool:
            ids = [pool.submit(kind, payload) for kind, payload in specs]
            pool.wait(ids)
            failed = [t for t in pool.tasks() if t.state == "Failed"]
            if failed:
                raise PhyloflowError(f"run failed: {failed[0].error}")
            summaries = [pool.task(i).result for i in ids]
        for summary in summaries:
            print(f"run {summary['run']}: {summary['n_samples']} samples, "
                  f"final lnL {summary['final_cold_lnl']:.6g}")
    else:
        for result in run_mcmc(cfg, data, model, args.outdir):
            print(f"run {result.run}: {result.n_samples} samples, "
                  f"final lnL {result.final_cold_lnl:.6g}")
    if args.report:
        from .report import render_run_report

        written = render_run_report(args.outdir, burnin_fraction=0.25)
        for name, path in sorted(written.items()):
            print(f"report {name}: {path}", file=sys.stderr)
    return 0


def cmd_consensus(args) -> int:
    traces = []
    for path in args.tfiles:
        trees = [t for _, t in read_tree_trace(_read(path))]
        if not trees:
            raise PhyloflowError(f"no trees in {path}")
        traces.append(trees)
    pooled = []
    for trace in traces:
        pooled.extend(burn_in(trace, args.burnin))
    consensus = majority_rule_consensus(pooled, 0.0)
    text = consensus.newick()
    print(text)
    if args.out:
        args.out.write_text(text + "\n")
    if len(traces) >= 2:
        sd = convergence_diag(traces, args.burnin)
        print(f"avg split-frequency sd across runs: {sd:.6g}", file=sys.stderr)
    return 0


def cmd_count_trees(args) -> int:
    exact = count_topologies(args.n)
    print(exact)
    approx = re.sub(r"e\+0*", "e", f"{float(exact):.2e}")
    print(f"≈{approx}")
    return 0


def cmd_report(args) -> int:
    from .report import render_run_report

    written = render_run_report(args.rundir, out_dir=args.figdir,
                                burnin_fraction=args.burnin)
    for name, path in sorted(written.items()):
        print(f"{name}: {path}")
    return 0


def cmd_serve(args) -> int:
    from .service import ServiceConfig, serve

    config = ServiceConfig(data_dir=args.data, workers=args.workers,
                           static_dir=args.static)
    serve(config, host=args.host, port=args.port)
    return 0


def cmd_jobs(args) -> int:
    import httpx

    base = args.server.rstrip("/")
    with httpx.Client(base_url=base, timeout=30.0) as client:
        token = client.post(
            "/api/login", json={"username": args.user}
        ).raise_for_status().json()["token"]
        auth = {"Authorization": f"Bearer {token}"}
        if args.action == "list":
            data = client.get("/api/jobs", headers=auth).raise_for_status().json()
            for job in data["jobs"]:
                print(f"{job['id']}\t{job['coarse_status']}\t{job['state']}\t"
                      f"{job['name']}\t{job['description']}")
            return 0
        if not args.job_id:
            raise PhyloflowError(f"jobs {args.action} requires a job id")
        if args.action == "show":
            response = client.get(f"/api/jobs/{args.job_id}/status", headers=auth)
            _fail_on_api_error(response)
            status = response.json()
            print(f"{args.job_id}: {status['coarse']} ({status['state']})")
            for run, info in sorted(status.get("runs", {}).items()):
                lnl = info.get("cold_lnl")
                lnl_text = f"{lnl:.6g}" if lnl is not None else "-"
                print(f"  run {run}: gen {info['gen']}, lnL {lnl_text}")
            return 0
        response = client.post(f"/api/jobs/{args.job_id}/cancel", headers=auth)
        _fail_on_api_error(response)
        print(f"{args.job_id}: {response.json()['state']}")
        return 0


def _fail_on_api_error(response) -> None:
    if response.status_code >= 400:
        try:
            body = response.json()
            message = f"{body.get('code')}: {body.get('message')}"
        except Exception:
            message = response.text
        raise PhyloflowError(f"server rejected the request: {message}")


def main(argv=None) -> int:
    try:
        args = _build().parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 1
    try:
        return args.fn(args)
    except PhyloflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 3
    except Exception as exc:  # I/O, network, internal
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
