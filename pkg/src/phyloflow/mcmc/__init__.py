"""Metropolis-coupled MCMC sampling, trace files, and summaries."""

from .outputs import (
    MCMC_HEADER,
    P_HEADER,
    RunWriter,
    read_param_trace,
    read_tree_trace,
)
from .proposals import default_weights, multiplier_move, propose_move
from .runner import (
    Cancelled,
    ChainState,
    McmcConfig,
    RunResult,
    SampleRow,
    mh_accept,
    run_mcmc,
    run_single,
    swap_attempt,
)
from .state import log_prior
from .summary import (
    ConsensusTree,
    EmptyRetained,
    burn_in,
    convergence_diag,
    exact_topology_posterior,
    majority_rule_consensus,
    split_frequencies,
)

__all__ = [
    "McmcConfig",
    "RunResult",
    "SampleRow",
    "ChainState",
    "ConsensusTree",
    "Cancelled",
    "EmptyRetained",
    "RunWriter",
    "P_HEADER",
    "MCMC_HEADER",
    "run_mcmc",
    "run_single",
    "mh_accept",
    "swap_attempt",
    "propose_move",
    "multiplier_move",
    "default_weights",
    "log_prior",
    "burn_in",
    "split_frequencies",
    "majority_rule_consensus",
    "convergence_diag",
    "exact_topology_posterior",
    "read_param_trace",
    "read_tree_trace",
]
