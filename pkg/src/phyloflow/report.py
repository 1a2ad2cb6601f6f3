"""Quick-look report for finished (or partial) runs: matplotlib figures
rendered to files next to delimited summary tables.

Given a directory of ``<filebase><r>.{p,t,mcmc}`` traces, the report
writes into a target directory:

* ``trace.png``     - cold-chain lnL trace per run, burn-in marked
* ``consensus.png`` - rectangular cladogram of the majority-rule
  consensus with posterior probabilities on internal edges
* ``runs.tsv``      - per-run sample counts, post-burn-in mean lnL,
  cumulative swap acceptance
* ``splits.tsv``    - consensus split frequencies

``conservation.png`` is produced by the alignment path from a
conservation profile.
"""

from __future__ import annotations

import statistics
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import PhyloflowError
from .mcmc.outputs import read_param_trace, read_tree_trace
from .mcmc.summary import (
    ConsensusTree,
    burn_in,
    convergence_diag,
    majority_rule_consensus,
)


class ReportError(PhyloflowError):
    code = "report_error"


def find_run_files(run_dir) -> dict[int, dict[str, Path]]:
    """Locate per-run trace files: {run_number: {ext: path}}."""
    run_dir = Path(run_dir)
    runs: dict[int, dict[str, Path]] = {}
    for path in sorted(run_dir.glob("*.p")):
        stem = path.name[:-2]
        digits = ""
        while stem and stem[-1].isdigit():
            digits = stem[-1] + digits
            stem = stem[:-1]
        if not digits:
            continue
        run = int(digits)
        entry = {"p": path}
        for ext in ("t", "mcmc"):
            sibling = path.with_suffix(f".{ext}")
            if sibling.is_file():
                entry[ext] = sibling
        runs[run] = entry
    if not runs:
        raise ReportError(f"no .p trace files found under {run_dir}")
    return runs


def plot_lnl_traces(traces: dict[int, tuple[list[float], list[float]]],
                    burnin_fraction: float, out_path) -> Path:
    """One lnL-vs-generation line per run; dashed line marks burn-in."""
    fig, ax = plt.subplots(figsize=(7, 4))
    last_gen = 0
    for run, (gens, lnls) in sorted(traces.items()):
        ax.plot(gens, lnls, lw=0.9, label=f"run {run}")
        last_gen = max(last_gen, gens[-1] if gens else 0)
    if burnin_fraction > 0 and last_gen:
        ax.axvline(burnin_fraction * last_gen, color="grey", ls="--", lw=0.8,
                   label=f"burn-in {burnin_fraction:g}")
    ax.set_xlabel("generation")
    ax.set_ylabel("cold chain ln L")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def _layout(consensus: ConsensusTree):
    """Rectangular cladogram coordinates: (segments, labels, edge_notes)."""
    ys: dict[int, float] = {}
    xs: dict[int, float] = {}
    next_leaf = [0.0]

    def assign(node, x0):
        xs[id(node)] = x0 + (node.length or 0.0)
        if node.is_leaf:
            ys[id(node)] = next_leaf[0]
            next_leaf[0] += 1.0
            return
        for child in node.children:
            assign(child, xs[id(node)])
        ys[id(node)] = statistics.mean(ys[id(c)] for c in node.children)

    root = consensus.root
    xs[id(root)] = 0.0
    for child in root.children:
        assign(child, 0.0)
    ys[id(root)] = statistics.mean(ys[id(c)] for c in root.children)

    segments, labels, notes = [], [], []
    anchor = min(consensus.taxa)
    all_taxa = set(consensus.taxa)

    def walk(node):
        if node.is_leaf:
            labels.append((xs[id(node)], ys[id(node)], node.name))
            return set([node.name])
        below = set()
        for child in node.children:
            x0, y = xs[id(node)], ys[id(child)]
            segments.append(((x0, y), (xs[id(child)], y)))  # horizontal
            below |= walk(child)
        top = max(ys[id(c)] for c in node.children)
        bottom = min(ys[id(c)] for c in node.children)
        segments.append(((xs[id(node)], bottom), (xs[id(node)], top)))
        if node is not root:
            side = below if anchor in below else all_taxa - below
            pp = consensus.support.get(tuple(sorted(side)))
            if pp is not None:
                x_mid = (xs[id(node)] - (node.length or 0.0) + xs[id(node)]) / 2
                notes.append((x_mid, ys[id(node)], f"{pp:.2f}"))
        return below

    walk(root)
    return segments, labels, notes


def plot_consensus(consensus: ConsensusTree, out_path) -> Path:
    segments, labels, notes = _layout(consensus)
    n = len(consensus.taxa)
    fig, ax = plt.subplots(figsize=(6, max(2.0, 0.45 * n)))
    for (x0, y0), (x1, y1) in segments:
        ax.plot([x0, x1], [y0, y1], color="black", lw=1.0)
    for x, y, name in labels:
        ax.text(x, y, f" {name}", va="center", fontsize=9)
    for x, y, pp in notes:
        ax.text(x, y + 0.08, pp, va="bottom", ha="center", fontsize=7,
                color="firebrick")
    ax.set_yticks([])
    ax.set_xlabel("expected substitutions per site")
    for spine in ("left", "top", "right"):
        ax.spines[spine].set_visible(False)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def plot_conservation(scores, out_path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 2.6))
    ax.bar(range(1, len(scores) + 1), scores, width=1.0, color="seagreen")
    ax.set_xlabel("column")
    ax.set_ylabel("conservation")
    ax.set_ylim(0, 1.02)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def render_run_report(run_dir, out_dir=None, burnin_fraction: float = 0.25) -> dict:
    """Figures plus delimited summaries for every run found in run_dir."""
    run_files = find_run_files(run_dir)
    out_dir = Path(out_dir) if out_dir is not None else Path(run_dir) / "report"
    out_dir.mkdir(parents=True, exist_ok=True)

    traces = {}
    run_rows = []
    tree_traces = []
    for run, files in sorted(run_files.items()):
        header, rows = read_param_trace(files["p"].read_text())
        gen_col = header.index("Gen")
        lnl_col = header.index("LnL")
        gens = [r[gen_col] for r in rows]
        lnls = [r[lnl_col] for r in rows]
        traces[run] = (gens, lnls)
        retained = burn_in(rows, burnin_fraction)
        swaps_att = swaps_acc = 0
        if "mcmc" in files:
            diag_lines = files["mcmc"].read_text().strip().splitlines()
            if len(diag_lines) > 1:
                last = diag_lines[-1].split("\t")
                swaps_att, swaps_acc = int(last[1]), int(last[2])
        run_rows.append({
            "run": run,
            "samples": len(rows),
            "retained": len(retained),
            "mean_lnl": statistics.fmean(r[lnl_col] for r in retained),
            "swaps_attempted": swaps_att,
            "swaps_accepted": swaps_acc,
        })
        if "t" in files:
            trees = [t for _, t in read_tree_trace(files["t"].read_text())]
            if trees:
                tree_traces.append(trees)

    written = {"trace": plot_lnl_traces(traces, burnin_fraction,
                                        out_dir / "trace.png")}

    runs_tsv = out_dir / "runs.tsv"
    with open(runs_tsv, "w") as handle:
        handle.write("run\tsamples\tretained\tmean_lnl\t"
                     "swaps_attempted\tswaps_accepted\n")
        for row in run_rows:
            handle.write(
                f"{row['run']}\t{row['samples']}\t{row['retained']}\t"
                f"{row['mean_lnl']:.6g}\t{row['swaps_attempted']}\t"
                f"{row['swaps_accepted']}\n"
            )
    written["runs"] = runs_tsv

    if tree_traces:
        pooled = []
        for trace in tree_traces:
            pooled.extend(burn_in(trace, burnin_fraction))
        consensus = majority_rule_consensus(pooled, 0.0)
        written["consensus"] = plot_consensus(consensus,
                                              out_dir / "consensus.png")
        splits_tsv = out_dir / "splits.tsv"
        with open(splits_tsv, "w") as handle:
            handle.write("split\tposterior\n")
            for split, pp in sorted(consensus.support.items()):
                handle.write(f"{'|'.join(split)}\t{pp:.6g}\n")
            if len(tree_traces) >= 2:
                sd = convergence_diag(tree_traces, burnin_fraction)
                handle.write(f"#avg_split_freq_sd\t{sd:.6g}\n")
        written["splits"] = splits_tsv
        (out_dir / "consensus.tre").write_text(consensus.newick() + "\n")
        written["tree"] = out_dir / "consensus.tre"
    return written
