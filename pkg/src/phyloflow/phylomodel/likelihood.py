"""Felsenstein pruning over an alignment, vectorized across sites and
gamma categories, with per-node scaling for numerical stability.

'-' and 'N' are missing data (conditional vector of ones), so an
all-missing column contributes exactly zero to the log-likelihood.
"""

from __future__ import annotations

import numpy as np

from ..errors import PhyloflowError
from ..seqio import Alignment
from .model import SubstitutionModel, category_rates, eigen_system
from .tree import Node, PhyloTree

_TIP_ROW = {
    "A": (1.0, 0.0, 0.0, 0.0),
    "C": (0.0, 1.0, 0.0, 0.0),
    "G": (0.0, 0.0, 1.0, 0.0),
    "T": (0.0, 0.0, 0.0, 1.0),
    "N": (1.0, 1.0, 1.0, 1.0),
    "-": (1.0, 1.0, 1.0, 1.0),
}

_P_CACHE_LIMIT = 8192


class TaxaMismatch(PhyloflowError):
    code = "taxa_mismatch"


class LikelihoodEngine:
    """Reusable evaluator: tip encodings are built once per alignment."""

    def __init__(self, alignment: Alignment):
        if alignment.kind != "aligned":
            raise PhyloflowError("likelihood requires an aligned set")
        self.nsites = alignment.nchar
        self.taxa = tuple(sorted(alignment.taxa))
        self._tips = {
            r.id: np.array([_TIP_ROW[c] for c in r.residues])[None, :, :]
            for r in alignment.records
        }
        self._p_cache: dict = {}

    def _p_matrices(self, model: SubstitutionModel, length: float) -> np.ndarray:
        """(ncat, 4, 4) transition matrices for one branch."""
        key = (model, length)
        hit = self._p_cache.get(key)
        if hit is not None:
            return hit
        evals, u, u_inv = eigen_system(model)
        rates = category_rates(model)
        expd = np.exp(np.outer(rates, evals) * length)  # (K, 4)
        p = (u[None, :, :] * expd[:, None, :]) @ u_inv[None, :, :]
        np.clip(p, 0.0, None, out=p)
        if len(self._p_cache) >= _P_CACHE_LIMIT:
            self._p_cache.clear()
        self._p_cache[key] = p
        return p

    def log_likelihood(self, tree: PhyloTree, model: SubstitutionModel) -> float:
        if tree.taxa != self.taxa:
            raise TaxaMismatch("tree taxa do not match alignment taxa")
        log_scale = np.zeros(self.nsites)

        def conditionals(node: Node) -> np.ndarray:
            nonlocal log_scale
            if node.is_leaf:
                return self._tips[node.name]
            partial = None
            for child in node.children:
                p = self._p_matrices(model, child.length)
                contrib = conditionals(child) @ np.transpose(p, (0, 2, 1))
                partial = contrib if partial is None else partial * contrib
            scale = partial.max(axis=(0, 2))
            scale[scale <= 0.0] = 1.0
            partial /= scale[None, :, None]
            log_scale += np.log(scale)
            return partial

        freqs = np.array(model.state_freqs)
        site_lik = conditionals(tree.root) @ freqs  # (K, S)
        site_log = np.log(site_lik.mean(axis=0)) + log_scale
        return float(site_log.sum())


def log_likelihood(
    tree: PhyloTree, alignment: Alignment, model: SubstitutionModel
) -> float:
    """One-shot ln P(data | tree, model); build a LikelihoodEngine to reuse."""
    return LikelihoodEngine(alignment).log_likelihood(tree, model)
