"""Writers and readers for the run trace files.

Three files per run, named ``<filebase><run>`` plus extension:

* ``.p``  - parameter trace: an ID line, a tab-separated header, then one
  row per sample with reals at 6 significant digits.
* ``.t``  - tree trace: NEXUS trees block with a translate table mapping
  1-based indices (alignment order) to taxon labels.
* ``.mcmc`` - diagnostics: cumulative swap counts and the cold-chain
  log-likelihood at every sampling point.
"""

from __future__ import annotations

import re
from pathlib import Path

from ..errors import PhyloflowError
from ..phylomodel import PhyloTree, parse_newick, write_newick

P_HEADER = (
    "Gen\tLnL\tAlpha\tpiA\tpiC\tpiG\tpiT\t"
    "rAC\trAG\trAT\trCG\trCT\trGT"
)
MCMC_HEADER = "Gen\tSwapsAttempted\tSwapsAccepted\tColdLnL"


def fmt6(x: float) -> str:
    return f"{x:.6g}"


class TraceReadError(PhyloflowError):
    code = "trace_read_error"


class RunWriter:
    """Streams one run's .p/.t/.mcmc files; flushes cleanly on close."""

    def __init__(self, out_dir, filebase: str, run: int, seed: int, taxa):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        stem = f"{filebase}{run}"
        self.paths = {ext: self.out_dir / f"{stem}.{ext}" for ext in ("p", "t", "mcmc")}
        self.taxa = list(taxa)
        self._index = {name: i + 1 for i, name in enumerate(self.taxa)}

        self._p = open(self.paths["p"], "w")
        self._p.write(f"[ID: {filebase} run {run} seed {seed}]\n")
        self._p.write(P_HEADER + "\n")

        self._t = open(self.paths["t"], "w")
        self._t.write("#NEXUS\nbegin trees;\n  translate\n")
        rows = [f"    {i + 1} {name}" for i, name in enumerate(self.taxa)]
        self._t.write(",\n".join(rows) + ";\n")

        self._m = open(self.paths["mcmc"], "w")
        self._m.write(MCMC_HEADER + "\n")

    def write_sample(self, gen: int, ln_likelihood: float, model,
                     tree: PhyloTree) -> None:
        exch = model.exchangeabilities()
        values = [ln_likelihood, model.gamma_shape, *model.state_freqs, *exch]
        self._p.write(str(gen) + "\t" + "\t".join(fmt6(v) for v in values) + "\n")
        indexed = tree.copy()
        for leaf in indexed.leaves():
            leaf.name = str(self._index[leaf.name])
        self._t.write(f"  tree gen.{gen} = {write_newick(indexed)}\n")

    def write_diag(self, gen: int, attempted: int, accepted: int,
                   cold_lnl: float) -> None:
        self._m.write(f"{gen}\t{attempted}\t{accepted}\t{fmt6(cold_lnl)}\n")

    def flush(self) -> None:
        for handle in (self._p, self._t, self._m):
            handle.flush()

    def close(self) -> None:
        self._t.write("end;\n")
        for handle in (self._p, self._t, self._m):
            handle.close()


def read_tree_trace(text: str) -> list[tuple[int, PhyloTree]]:
    """Parse a .t file back into (generation, tree-with-taxon-names) pairs."""
    m = re.search(r"translate\s+(.*?);", text, re.DOTALL)
    if not m:
        raise TraceReadError("no translate table found")
    table = {}
    for entry in m.group(1).split(","):
        fields = entry.split()
        if len(fields) != 2:
            raise TraceReadError(f"bad translate entry {entry!r}")
        table[fields[0]] = fields[1]
    out = []
    for gen_text, newick in re.findall(r"tree\s+gen\.(\d+)\s*=\s*([^;]+;)", text):
        tree = parse_newick(newick)
        for leaf in tree.leaves():
            if leaf.name not in table:
                raise TraceReadError(f"tree index {leaf.name} missing from translate")
            leaf.name = table[leaf.name]
        out.append((int(gen_text), tree))
    return out


def read_param_trace(text: str) -> tuple[list[str], list[list[float]]]:
    """Parse a .p file into (column names, numeric rows)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2 or not lines[0].startswith("[ID:"):
        raise TraceReadError("not a parameter trace (missing [ID: ...] line)")
    header = lines[1].split("\t")
    rows = []
    for ln in lines[2:]:
        parts = ln.split("\t")
        if len(parts) != len(header):
            raise TraceReadError("row width does not match header")
        rows.append([float(v) for v in parts])
    return header, rows
