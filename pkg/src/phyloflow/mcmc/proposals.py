"""Proposal kernel: NNI topology moves, branch-length and scalar
multipliers, and Dirichlet nudges on frequency/rate simplexes.

Every move returns (new_tree, new_model, log_hastings). Unchanged
components are shared, not copied; mutating moves operate on clones.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
from scipy.stats import dirichlet

from ..errors import ValidationError
from ..phylomodel import PhyloTree, SubstitutionModel

MULT_LAMBDA = 2.0 * math.log(1.6)  # multiplier window, branch lengths
SHAPE_LAMBDA = 1.0
KAPPA_LAMBDA = 1.0
FREQ_CONCENTRATION = 200.0
RATE_CONCENTRATION = 150.0
_SIMPLEX_FLOOR = 1e-6

PROPOSAL_KINDS = ("nni", "brlen", "shape", "freqs", "rates")


def default_weights(model: SubstitutionModel, n_taxa: int) -> dict[str, float]:
    """Kernel mixture: topology and branch moves dominate, one slot each
    for whichever model parameters are actually free."""
    weights = {"brlen": 3.0, "freqs": 1.0}
    if n_taxa >= 4:
        weights["nni"] = 3.0
    if model.rates == "gamma":
        weights["shape"] = 1.0
    if model.nst in (2, 6):
        weights["rates"] = 1.0
    return weights


def multiplier_move(x: float, u: float, lam: float) -> tuple[float, float]:
    """x' = x * exp(lam * (u - 0.5)); the Hastings ratio is x'/x."""
    scaled = x * math.exp(lam * (u - 0.5))
    return scaled, math.log(scaled / x)


def nni_move(tree: PhyloTree, rng: np.random.Generator):
    """Swap one subtree across a uniformly chosen internal edge.

    The move picks one of the two alternative configurations around the
    edge with equal probability, so it is symmetric (log Hastings 0).
    """
    clone = tree.copy()
    internal = clone.internal_branch_nodes()
    if not internal:
        raise ValidationError("NNI requires at least 4 taxa")
    v = internal[int(rng.integers(len(internal)))]
    u = clone.parent_map()[id(v)]
    u_side = next(c for c in u.children if c is not v)
    v_side = v.children[int(rng.integers(2))]
    ui, vi = u.children.index(u_side), v.children.index(v_side)
    u.children[ui], v.children[vi] = v_side, u_side
    return clone, None, 0.0


def brlen_move(tree: PhyloTree, rng: np.random.Generator):
    clone = tree.copy()
    branches = clone.branch_nodes()
    node = branches[int(rng.integers(len(branches)))]
    node.length, log_h = multiplier_move(node.length, rng.random(), MULT_LAMBDA)
    return clone, None, log_h


def shape_move(model: SubstitutionModel, rng: np.random.Generator):
    new_shape, log_h = multiplier_move(model.gamma_shape, rng.random(), SHAPE_LAMBDA)
    return None, replace(model, gamma_shape=new_shape), log_h


def _dirichlet_nudge(current: np.ndarray, conc: float, rng: np.random.Generator):
    """Propose from Dirichlet(conc * current); returns (draw, log_hastings).

    A draw that touches the simplex floor is flagged impossible (None) so
    the caller rejects it, keeping the kernel reversible.
    """
    alpha_fwd = conc * current
    draw = rng.dirichlet(alpha_fwd)
    if draw.min() < _SIMPLEX_FLOOR:
        return None, 0.0
    log_h = dirichlet.logpdf(current, conc * draw) - dirichlet.logpdf(
        draw, alpha_fwd
    )
    return draw, float(log_h)


def freqs_move(model: SubstitutionModel, rng: np.random.Generator):
    draw, log_h = _dirichlet_nudge(
        np.array(model.state_freqs), FREQ_CONCENTRATION, rng
    )
    if draw is None:
        return None, None, 0.0
    draw = draw / draw.sum()
    return None, replace(model, state_freqs=tuple(draw)), log_h


def rates_move(model: SubstitutionModel, rng: np.random.Generator):
    if model.nst == 2:
        kappa, log_h = multiplier_move(model.rel_rates[0], rng.random(), KAPPA_LAMBDA)
        new_rel = (kappa,)
    elif model.nst == 6:
        simplex = np.array(model.rel_rates)
        simplex = simplex / simplex.sum()
        draw, log_h = _dirichlet_nudge(simplex, RATE_CONCENTRATION, rng)
        if draw is None:
            return None, None, 0.0
        new_rel = tuple(draw / draw[-1])  # store with rGT pinned to 1
    else:
        raise ValidationError("nst=1 has no rate parameters to move")
    return None, replace(model, rel_rates=new_rel), log_h


_MOVES = {
    "nni": lambda tree, model, rng: nni_move(tree, rng),
    "brlen": lambda tree, model, rng: brlen_move(tree, rng),
    "shape": lambda tree, model, rng: shape_move(model, rng),
    "freqs": lambda tree, model, rng: freqs_move(model, rng),
    "rates": lambda tree, model, rng: rates_move(model, rng),
}


def make_chooser(weights: dict[str, float]):
    """Precompute the weighted kind selector (hot path: one uniform draw)."""
    kinds = sorted(weights)
    probs = np.array([weights[k] for k in kinds], dtype=float)
    if (probs <= 0).any():
        raise ValidationError("proposal weights must be positive")
    cumulative = np.cumsum(probs / probs.sum())

    def choose(rng: np.random.Generator) -> str:
        return kinds[int(np.searchsorted(cumulative, rng.random(), side="right"))]

    return choose


def choose_kind(weights: dict[str, float], rng: np.random.Generator) -> str:
    return make_chooser(weights)(rng)


def propose_move(tree: PhyloTree, model: SubstitutionModel,
                 weights: dict[str, float], rng: np.random.Generator,
                 chooser=None):
    """Pick a move by weight and apply it.

    Returns (kind, new_tree_or_None, new_model_or_None, log_hastings,
    possible) where possible=False marks a blocked draw (auto-reject).
    """
    kind = (chooser or make_chooser(weights))(rng)
    new_tree, new_model, log_h = _MOVES[kind](tree, model, rng)
    if kind in ("freqs", "rates") and new_model is None and new_tree is None:
        return kind, None, None, 0.0, False
    return kind, new_tree, new_model, log_h, True
