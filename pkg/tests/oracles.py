"""Independent brute-force oracles used to pin expected test values.

Nothing here shares code with the library paths under test: alignment
scores come from exhaustive enumeration, likelihoods from summing over
all internal-state assignments with scipy's generic matrix exponential,
and rate matrices are rebuilt from first principles.
"""

import itertools
import re

import numpy as np
from scipy.linalg import expm
from scipy.stats import gamma as gamma_dist


def score_explicit_alignment(row_a: str, row_b: str, params) -> float:
    """Score a finished alignment: pair scores plus per-row affine gap runs."""
    assert len(row_a) == len(row_b)
    total = 0.0
    for x, y in zip(row_a, row_b):
        assert not (x == "-" and y == "-")
        if x != "-" and y != "-":
            total += params.match if x == y else params.mismatch
    for row in (row_a, row_b):
        for run in re.findall(r"-+", row):
            total += params.gap_open + (len(run) - 1) * params.gap_extend
    return total


def enumerate_alignments(a: str, b: str):
    """Yield every global alignment of a and b as (row_a, row_b)."""
    if not a and not b:
        yield "", ""
        return
    if a:
        for ra, rb in enumerate_alignments(a[1:], b):
            yield a[0] + ra, "-" + rb
    if b:
        for ra, rb in enumerate_alignments(a, b[1:]):
            yield "-" + ra, b[0] + rb
    if a and b:
        for ra, rb in enumerate_alignments(a[1:], b[1:]):
            yield a[0] + ra, b[0] + rb


def best_alignment_score(a: str, b: str, params) -> float:
    """Exhaustive optimum; only feasible for short sequences (<= ~7)."""
    return max(
        score_explicit_alignment(ra, rb, params)
        for ra, rb in enumerate_alignments(a, b)
    )


# ---------------------------------------------------------------------------
# Likelihood oracle: enumerate internal-state assignments on tiny trees.

_STATE_OF = {"A": 0, "C": 1, "G": 2, "T": 3}


def build_rate_matrix(model) -> np.ndarray:
    """GTR-family Q from scratch: Q[i,j] = s_ij * pi_j, scaled to rate 1."""
    freqs = np.asarray(model.state_freqs, dtype=float)
    s = np.ones((4, 4))
    if model.nst == 2:
        kappa = model.rel_rates[0]
        for i, j in ((0, 2), (1, 3)):
            s[i, j] = s[j, i] = kappa
    elif model.nst == 6:
        rac, rag, rat, rcg, rct, rgt = model.rel_rates
        pairs = {(0, 1): rac, (0, 2): rag, (0, 3): rat,
                 (1, 2): rcg, (1, 3): rct, (2, 3): rgt}
        for (i, j), r in pairs.items():
            s[i, j] = s[j, i] = r
    q = s * freqs[None, :]
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    rate = -float(np.dot(freqs, np.diag(q)))
    return q / rate


def oracle_category_rates(model) -> list[float]:
    """Mean-of-bin discrete gamma rates via numeric quadrature."""
    if model.rates == "equal":
        return [1.0]
    a = model.gamma_shape
    k = model.ncat
    dist = gamma_dist(a, scale=1.0 / a)
    bounds = [dist.ppf(i / k) for i in range(k + 1)]
    rates = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        xs = np.linspace(lo, min(hi, dist.ppf(1 - 1e-12)), 20001)
        ys = np.zeros_like(xs)
        pos = xs > 0
        ys[pos] = xs[pos] * dist.pdf(xs[pos])  # x*pdf(x) -> 0 at x=0
        rates.append(float(np.trapezoid(ys, xs) * k))
    return rates


def _site_probability(tree_root, leaf_states: dict, q: np.ndarray,
                      freqs: np.ndarray, rate: float) -> float:
    """Sum over all internal-node state assignments for one site."""
    nodes = []

    def collect(node):
        nodes.append(node)
        for c in node.children:
            collect(c)

    collect(tree_root)
    internal = [n for n in nodes if n.children]
    edges = [(n, c) for n in nodes for c in n.children]
    p_matrices = {id(c): expm(q * rate * c.length) for _, c in edges}

    total = 0.0
    for assignment in itertools.product(range(4), repeat=len(internal)):
        states = {id(n): s for n, s in zip(internal, assignment)}
        term = freqs[states[id(tree_root)]]
        ok = True
        for parent, child in edges:
            p = p_matrices[id(child)]
            if child.children:
                term *= p[states[id(parent)], states[id(child)]]
            else:
                allowed = leaf_states[child.name]
                term *= sum(p[states[id(parent)], s] for s in allowed)
            if term == 0.0:
                ok = False
                break
        if ok:
            total += term
    return total


def simulate_alignment(tree, model, nsites: int, rng) -> list[tuple[str, str]]:
    """Evolve sites down the tree (expm-based); returns (taxon, residues) rows."""
    freqs = np.asarray(model.state_freqs, dtype=float)
    q = build_rate_matrix(model)
    out = {}

    def down(node, states):
        if not node.children:
            out[node.name] = states
            return
        for child in node.children:
            p = expm(q * child.length)
            cum = p.cumsum(axis=1)
            draws = rng.random(len(states))
            down(child, np.array([
                int(np.searchsorted(cum[s], u)) for s, u in zip(states, draws)
            ]))

    down(tree.root, rng.choice(4, size=nsites, p=freqs))
    return [(name, "".join("ACGT"[s] for s in out[name])) for name in sorted(out)]


def brute_force_log_likelihood(tree, alignment, model, rates=None) -> float:
    """ln P(data | tree, model) by exhaustive enumeration (tiny trees only).

    Pass the model's own discrete category rates to isolate the pruning
    computation; otherwise rates come from the quadrature oracle (which
    carries its own ~1e-7 integration error).
    """
    q = build_rate_matrix(model)
    freqs = np.asarray(model.state_freqs, dtype=float)
    if rates is None:
        rates = oracle_category_rates(model)
    seqs = {r.id: r.residues for r in alignment.records}
    nsites = len(next(iter(seqs.values())))
    total = 0.0
    for site in range(nsites):
        leaf_states = {}
        for name, residues in seqs.items():
            ch = residues[site]
            leaf_states[name] = (
                [_STATE_OF[ch]] if ch in _STATE_OF else [0, 1, 2, 3]
            )
        site_prob = np.mean(
            [_site_probability(tree.root, leaf_states, q, freqs, r) for r in rates]
        )
        total += np.log(site_prob)
    return float(total)
