"""Bit-exact rendering of the inference master block.

The block drives a run the same way a hand-written command file would:
set/execute preamble, one ``lset`` line, one fully parameterized ``mcmc``
line for run 1, then one abbreviated ``mcmc file=...`` line per extra run.
"""

from __future__ import annotations


def render_master_block(datafile: str, lset_text: str, ngen: int,
                        samplefreq: int, runs: int, filebase: str) -> str:
    lines = [
        "begin mrbayes;",
        "  set autoclose=yes nowarn=yes;",
        f"  execute {datafile};",
        f"  lset {lset_text};",
        f"  mcmc nruns=1 ngen={ngen} samplefreq={samplefreq} file={filebase}1;",
    ]
    lines.extend(f"  mcmc file={filebase}{r};" for r in range(2, runs + 1))
    lines.append("end;")
    return "\n".join(lines) + "\n"
