"""Metropolis-coupled MCMC over (topology, branch lengths, model params).

Each run keeps ``nchains`` chains at heats beta_k = 1/(1 + lambda*k)
(k = 0 is the cold chain; heats stay attached to chain slots while states
move between them on accepted swaps). A generation is one proposal per
chain followed by one swap attempt. The cold chain is sampled every
``samplefreq`` generations, including generation 0, giving
floor(ngen/samplefreq) + 1 rows per trace file.

Determinism: every random stream is a counter-based Philox generator
keyed by (seed, run, role, chain), so outputs are byte-identical for a
given (seed, config, data) regardless of how runs are scheduled.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..errors import PhyloflowError, ValidationError
from ..phylomodel import SubstitutionModel, random_tree
from ..phylomodel.likelihood import LikelihoodEngine
from ..seqio import Alignment
from .outputs import RunWriter
from .proposals import default_weights, make_chooser, propose_move
from .state import ChainState, log_prior


class Cancelled(PhyloflowError):
    code = "cancelled"


@dataclass(frozen=True)
class McmcConfig:
    ngen: int
    samplefreq: int = 100
    nruns: int = 1
    nchains: int = 4
    heat_lambda: float = 0.1
    seed: int = 0
    filebase: str = "run.nex"
    proposal_weights: dict[str, float] | None = None
    brlen_prior_mean: float = 0.1
    fixed_branch_length: float | None = None
    track_swaps: bool = False
    debug_checks: bool = False

    def __post_init__(self):
        if self.ngen < 1:
            raise ValidationError("ngen must be >= 1")
        if not 1 <= self.samplefreq <= self.ngen:
            raise ValidationError("need 1 <= samplefreq <= ngen")
        if self.nruns < 1 or self.nchains < 1:
            raise ValidationError("nruns and nchains must be >= 1")
        if self.heat_lambda <= 0:
            raise ValidationError("heat_lambda must be > 0")
        if self.proposal_weights is not None:
            if not self.proposal_weights:
                raise ValidationError("proposal_weights must not be empty")
            if any(w <= 0 for w in self.proposal_weights.values()):
                raise ValidationError("proposal weights must be positive")
        if self.fixed_branch_length is not None:
            if self.fixed_branch_length <= 0:
                raise ValidationError("fixed_branch_length must be positive")
            if self.proposal_weights and "brlen" in self.proposal_weights:
                raise ValidationError(
                    "fixed_branch_length excludes branch-length moves"
                )


@dataclass(frozen=True)
class SampleRow:
    gen: int
    ln_likelihood: float
    gamma_shape: float
    state_freqs: tuple[float, ...]
    rel_rates: tuple[float, ...]
    newick: str


@dataclass
class RunResult:
    run: int
    files: dict[str, str]
    n_samples: int
    swaps_attempted: int
    swaps_accepted: int
    wall_time: float
    final_cold_lnl: float
    cancelled: bool = False
    rows: list[SampleRow] | None = None
    swap_history: list[tuple[int, int, int, bool]] | None = None
    ending_origins: tuple[int, ...] | None = None


def chain_stream(seed: int, run: int, chain: int) -> np.random.Generator:
    """Counter-based stream for one chain: id = hash(seed, run, chain)."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(run, 0, chain)))
    )


def swap_stream(seed: int, run: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(run, 1)))
    )


def mh_accept(current: ChainState, candidate: ChainState, log_hastings: float,
              beta: float, rng: np.random.Generator) -> bool:
    """Accept with probability min(1, exp(beta * dposterior + log_hastings))."""
    log_ratio = beta * (candidate.ln_posterior - current.ln_posterior) + log_hastings
    if log_ratio >= 0:
        return True
    return float(rng.random()) < math.exp(log_ratio)


def swap_attempt(chains: list[ChainState], rng: np.random.Generator):
    """Try exchanging the states of one uniformly chosen chain pair.

    Returns (i, j, accepted) or None when there is nothing to swap. Heats
    stay attached to slots; only the states travel.
    """
    n = len(chains)
    if n < 2:
        return None
    i = int(rng.integers(n))
    j = int(rng.integers(n - 1))
    if j >= i:
        j += 1
    log_ratio = (chains[i].beta - chains[j].beta) * (
        chains[j].ln_posterior - chains[i].ln_posterior
    )
    accepted = log_ratio >= 0 or float(rng.random()) < math.exp(log_ratio)
    if accepted:
        beta_i, beta_j = chains[i].beta, chains[j].beta
        chains[i], chains[j] = chains[j], chains[i]
        chains[i].beta, chains[j].beta = beta_i, beta_j
    return i, j, accepted


def _propose(state: ChainState, engine: LikelihoodEngine,
             weights: dict[str, float], rng: np.random.Generator,
             brlen_prior_mean: float, chooser=None):
    """One kernel draw -> (candidate, log_hastings, possible)."""
    kind, new_tree, new_model, log_h, possible = propose_move(
        state.tree, state.model, weights, rng, chooser
    )
    if not possible:
        return state, 0.0, False
    tree = new_tree if new_tree is not None else state.tree
    model = new_model if new_model is not None else state.model
    candidate = ChainState(
        tree=tree,
        model=model,
        ln_likelihood=engine.log_likelihood(tree, model),
        ln_prior=log_prior(tree, model, brlen_prior_mean),
        beta=state.beta,
        origin=state.origin,
    )
    return candidate, log_h, True


def run_single(
    cfg: McmcConfig,
    data: Alignment,
    model: SubstitutionModel,
    run: int,
    out_dir,
    progress: Callable[[int, int, float], None] | None = None,
    should_cancel: Callable[[], bool] | None = None,
    collect_samples: bool = False,
) -> RunResult:
    """Execute one independent run and write its three trace files."""
    if data.kind != "aligned":
        raise ValidationError("MCMC needs an aligned data set")
    engine = LikelihoodEngine(data)
    taxa = list(data.taxa)
    if len(taxa) < 3:
        raise ValidationError("MCMC needs at least 3 taxa")
    weights = dict(cfg.proposal_weights) if cfg.proposal_weights else \
        default_weights(model, len(taxa))
    if len(taxa) < 4:
        weights.pop("nni", None)  # 3 taxa: single topology, nothing to move
        if not weights:
            raise ValidationError("no applicable proposals for this setup")

    started = time.perf_counter()
    chain_rngs = [chain_stream(cfg.seed, run, k) for k in range(cfg.nchains)]
    swaps = swap_stream(cfg.seed, run)
    if cfg.fixed_branch_length is not None:
        weights.pop("brlen", None)
    chains: list[ChainState] = []
    for k, rng in enumerate(chain_rngs):
        tree = random_tree(taxa, rng, brlen_mean=cfg.brlen_prior_mean)
        if cfg.fixed_branch_length is not None:
            for node in tree.branch_nodes():
                node.length = cfg.fixed_branch_length
        chains.append(
            ChainState(
                tree=tree,
                model=model,
                ln_likelihood=engine.log_likelihood(tree, model),
                ln_prior=log_prior(tree, model, cfg.brlen_prior_mean),
                beta=1.0 / (1.0 + cfg.heat_lambda * k),
                origin=k,
            )
        )

    writer = RunWriter(out_dir, cfg.filebase, run, cfg.seed, taxa)
    rows: list[SampleRow] | None = [] if collect_samples else None
    history: list[tuple[int, int, int, bool]] | None = (
        [] if cfg.track_swaps else None
    )
    attempted = accepted = 0
    samples = 0
    cancelled = False

    def record(gen: int) -> None:
        nonlocal samples
        cold = chains[0]
        if cfg.debug_checks:
            fresh = engine.log_likelihood(cold.tree, cold.model)
            assert abs(fresh - cold.ln_likelihood) <= 1e-9, (
                f"stale lnL cache at gen {gen}: {cold.ln_likelihood} vs {fresh}"
            )
            assert sum(1 for c in chains if c.beta == 1.0) == 1
        writer.write_sample(gen, cold.ln_likelihood, cold.model, cold.tree)
        writer.write_diag(gen, attempted, accepted, cold.ln_likelihood)
        writer.flush()  # partial tails stay readable mid-run
        samples += 1
        if rows is not None:
            rows.append(
                SampleRow(
                    gen=gen,
                    ln_likelihood=cold.ln_likelihood,
                    gamma_shape=cold.model.gamma_shape,
                    state_freqs=cold.model.state_freqs,
                    rel_rates=cold.model.exchangeabilities(),
                    newick=cold.tree.newick(),
                )
            )
        if progress is not None:
            progress(run, gen, cold.ln_likelihood)

    chooser = make_chooser(weights)
    try:
        record(0)
        for gen in range(1, cfg.ngen + 1):
            if should_cancel is not None and should_cancel():
                cancelled = True
                break
            for k, rng in enumerate(chain_rngs):
                candidate, log_h, possible = _propose(
                    chains[k], engine, weights, rng, cfg.brlen_prior_mean, chooser
                )
                if possible and mh_accept(chains[k], candidate, log_h,
                                          chains[k].beta, rng):
                    chains[k] = candidate
            decision = swap_attempt(chains, swaps)
            if decision is not None:
                attempted += 1
                accepted += decision[2]
                if history is not None:
                    history.append((gen, *decision))
            if gen % cfg.samplefreq == 0:
                record(gen)
    finally:
        writer.flush()
        writer.close()

    return RunResult(
        run=run,
        files={ext: str(path) for ext, path in writer.paths.items()},
        n_samples=samples,
        swaps_attempted=attempted,
        swaps_accepted=accepted,
        wall_time=time.perf_counter() - started,
        final_cold_lnl=chains[0].ln_likelihood,
        cancelled=cancelled,
        rows=rows,
        swap_history=history,
        ending_origins=tuple(c.origin for c in chains),
    )


def run_mcmc(
    cfg: McmcConfig,
    data: Alignment,
    model: SubstitutionModel,
    out_dir,
    progress: Callable[[int, int, float], None] | None = None,
    should_cancel: Callable[[], bool] | None = None,
    collect_samples: bool = False,
) -> list[RunResult]:
    """All nruns runs, sequentially; each is independent and deterministic.

    Run-level parallelism lives in the executor: submitting one
    ``run_single`` task per run yields byte-identical files.
    """
    out_dir = Path(out_dir)
    return [
        run_single(cfg, data, model, r, out_dir, progress, should_cancel,
                   collect_samples)
        for r in range(1, cfg.nruns + 1)
    ]
