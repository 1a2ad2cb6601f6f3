"""Chain state and log-prior for the posterior the sampler targets.

Priors: uniform over topologies, iid Exponential(mean brlen_prior_mean)
branch lengths, flat Dirichlet on base frequencies and (for nst=6) on the
normalized exchangeability simplex, Exponential(1) on the gamma shape and
on the nst=2 rate ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

from ..phylomodel import PhyloTree, SubstitutionModel, count_topologies


@lru_cache(maxsize=None)
def _log_topology_count(n: int) -> float:
    return math.log(count_topologies(n))


@dataclass
class ChainState:
    tree: PhyloTree
    model: SubstitutionModel
    ln_likelihood: float
    ln_prior: float
    beta: float
    origin: int = 0  # starting slot, for swap-ledger replay

    @property
    def ln_posterior(self) -> float:
        return self.ln_likelihood + self.ln_prior

    def with_updates(self, **kw) -> "ChainState":
        return replace(self, **kw)


def log_prior(tree: PhyloTree, model: SubstitutionModel,
              brlen_prior_mean: float = 0.1) -> float:
    rate = 1.0 / brlen_prior_mean
    total = -_log_topology_count(tree.n_taxa)
    log_rate = math.log(rate)
    for node in tree.branch_nodes():
        total += log_rate - rate * node.length
    total += math.lgamma(4)  # flat Dirichlet(1,1,1,1) density on frequencies
    if model.nst == 6:
        total += math.lgamma(6)  # flat Dirichlet on the rate simplex
    elif model.nst == 2:
        total += -model.rel_rates[0]  # Exponential(1) on the ratio
    if model.rates == "gamma":
        total += -model.gamma_shape  # Exponential(1) on the shape
    return total
