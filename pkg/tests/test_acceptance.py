"""Acceptance suite: one test per acceptance criterion, each printing a
PASS/FAIL line (run with ``pytest -v -s tests/test_acceptance.py``).

Every tolerance is pinned here; nothing is deferred to calibration.
"""

import random
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from phyloflow import seqio
from phyloflow.aligner import ScoringParams, pairwise_align, realign
from phyloflow.errors import PhyloflowError
from phyloflow.executor import WorkerPool, run_to_completion
from phyloflow.mcmc import (
    McmcConfig,
    burn_in,
    exact_topology_posterior,
    run_mcmc,
    run_single,
)
from phyloflow.mcmc.outputs import read_param_trace, read_tree_trace
from phyloflow.phylomodel import (
    SubstitutionModel,
    category_rates,
    count_topologies,
    log_likelihood,
    parse_newick,
    random_tree,
)
from phyloflow.workflow import (
    ExpiredProxy,
    InvalidTransition,
    JobState,
    TRANSITIONS,
    WorkflowEngine,
    advance_state,
    render_master_block,
)

from oracles import (
    best_alignment_score,
    brute_force_log_likelihood,
    simulate_alignment,
)
from test_likelihood import random_alignment
from test_model import random_model

PAPER_BLOCK = (
    "begin mrbayes;\n"
    "  set autoclose=yes nowarn=yes;\n"
    "  execute primates.nex;\n"
    "  lset nst=6 rates=gamma;\n"
    "  mcmc nruns=1 ngen=10000 samplefreq=100 file=primates.nex1;\n"
    "  mcmc file=primates.nex2;\n"
    "  mcmc file=primates.nex3;\n"
    "end;\n"
)


def check(name: str, ok: bool, detail: str = ""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def small_alignment(seed, taxa, nsites):
    rng = np.random.default_rng(seed)
    return seqio.Alignment.from_records(
        seqio.SequenceRecord(t, "".join(rng.choice(list("ACGT"), nsites)))
        for t in taxa
    )


def test_tree_count_reproduction():
    started = time.perf_counter()
    exact = count_topologies(30)
    rounds_ok = f"{exact:.2e}" == "8.69e+36"
    recurrence_ok = all(
        count_topologies(n + 1) == count_topologies(n) * (2 * n - 3)
        for n in range(3, 51)
    )
    elapsed = time.perf_counter() - started
    check(
        "tree-count: (2n-5)!! at n=30 rounds to 8.69e36, recurrence n=3..50",
        rounds_ok and recurrence_ok and elapsed < 1.0,
        f"value {exact:.3e}, {elapsed * 1000:.0f} ms",
    )


def test_likelihood_oracle():
    started = time.perf_counter()
    rng = np.random.default_rng(987)
    worst = 0.0
    instances = 0
    for nst in (1, 2, 6):
        for gamma in (False, True):
            for _ in range(17):
                n = int(rng.choice([4, 5]))
                taxa = [f"t{i}" for i in range(n)]
                tree = random_tree(taxa, rng)
                base = random_model(rng)
                model = SubstitutionModel(
                    nst=nst,
                    state_freqs=base.state_freqs,
                    rel_rates=(
                        base.rel_rates if base.nst == nst
                        else ((1.0,) * 6 if nst == 6 else (2.0,))
                    ),
                    rates="gamma" if gamma else "equal",
                    gamma_shape=base.gamma_shape,
                )
                aln = random_alignment(rng, taxa, int(rng.integers(1, 7)))
                mine = log_likelihood(tree, aln, model)
                oracle = brute_force_log_likelihood(
                    tree, aln, model, rates=list(category_rates(model))
                )
                worst = max(worst, abs(mine - oracle) / abs(oracle))
                instances += 1
    elapsed = time.perf_counter() - started
    check(
        "likelihood oracle: pruning equals enumeration within 1e-10 relative",
        instances >= 100 and worst <= 1e-10 and elapsed < 30.0,
        f"{instances} instances, worst rel err {worst:.2e}, {elapsed:.1f} s",
    )


def test_posterior_oracle(tmp_path):
    started = time.perf_counter()
    model = SubstitutionModel()
    truth = parse_newick("((a:0.1,b:0.1):0.03,c:0.1,d:0.1);")
    rows = simulate_alignment(truth, model, 16, np.random.default_rng(3))
    aln = seqio.Alignment.from_records(
        seqio.SequenceRecord(n, s) for n, s in rows
    )
    exact = exact_topology_posterior(aln, model, 0.1)
    cfg = McmcConfig(
        ngen=100_000, samplefreq=2, nruns=1, nchains=1, seed=2026,
        filebase="posterior.nex", proposal_weights={"nni": 1.0},
        fixed_branch_length=0.1,
    )
    (result,) = run_mcmc(cfg, aln, model, tmp_path)
    trees = read_tree_trace(Path(result.files["t"]).read_text())
    counts = Counter(t.topology_id() for _, t in trees)
    total = sum(counts.values())
    freqs = {k: counts.get(k, 0) / total for k in exact}
    tv = 0.5 * sum(abs(freqs[k] - exact[k]) for k in exact)
    elapsed = time.perf_counter() - started
    check(
        "posterior oracle: 100k-generation MCMC within 0.02 TV of exact",
        tv <= 0.02 and elapsed < 60.0,
        f"TV {tv:.4f}, {total} samples, {elapsed:.1f} s",
    )


def test_master_block_golden():
    out = render_master_block(
        "primates.nex", "nst=6 rates=gamma", 10000, 100, 3, "primates.nex"
    )
    check(
        "master block: published example reproduced byte-for-byte",
        out == PAPER_BLOCK,
    )


def test_determinism_across_workers_and_invocations(tmp_path):
    aln = small_alignment(11, [f"t{i}" for i in range(5)], 60)
    model = SubstitutionModel(nst=6, rel_rates=(1.0,) * 6, rates="gamma")
    cfg = McmcConfig(ngen=600, samplefreq=100, nruns=2, nchains=2, seed=31,
                     filebase="det.nex")
    outputs = {}
    for label, workers in (("w1", 1), ("w2", 2), ("w4", 4), ("w1-again", 1)):
        out_dir = tmp_path / label
        specs = [
            ("mcmc_run", {"cfg": cfg, "data": aln, "model": model,
                          "run": r, "out_dir": str(out_dir)})
            for r in (1, 2)
        ]
        with WorkerPool(n_workers=workers) as pool:
            run_to_completion(pool, specs)
        outputs[label] = {
            p.name: p.read_bytes() for p in sorted(out_dir.iterdir())
        }
    names = set(outputs["w1"])
    all_equal = (
        len(names) == 6
        and all(outputs["w1"] == outputs[k] for k in ("w2", "w4", "w1-again"))
    )
    check(
        "determinism: byte-identical .p/.t/.mcmc across workers 1/2/4 "
        "and repeat invocation",
        all_equal,
        f"{len(names)} files compared",
    )


def test_speedup_four_workers(tmp_path):
    """4 equal runs on 4 workers must finish in <= 0.5x the 1-worker wall.

    Runs are calibrated to >= 2 s of compute each via a pilot run.
    """
    rng = np.random.default_rng(0)
    taxa = [f"t{i}" for i in range(6)]
    aln = seqio.Alignment.from_records(
        seqio.SequenceRecord(t, "".join(rng.choice(list("ACGT"), 120)))
        for t in taxa
    )
    model = SubstitutionModel()
    pilot_cfg = McmcConfig(ngen=2000, samplefreq=500, nchains=2, seed=1,
                           filebase="pilot.nex")
    t0 = time.perf_counter()
    run_single(pilot_cfg, aln, model, 1, tmp_path / "pilot")
    per_gen = (time.perf_counter() - t0) / 2000
    ngen = max(2000, int(2.6 / per_gen))
    cfg = McmcConfig(ngen=ngen, samplefreq=max(1, ngen // 20), nchains=2,
                     seed=5, filebase="speed.nex")

    walls = {}
    per_run_min = None
    for workers in (1, 4):
        out_dir = tmp_path / f"w{workers}"
        specs = [
            ("mcmc_run", {"cfg": cfg, "data": aln, "model": model,
                          "run": r, "out_dir": str(out_dir)})
            for r in range(1, 5)
        ]
        with WorkerPool(n_workers=workers) as pool:
            _, wall = run_to_completion(pool, specs)
            walls[workers] = wall
            if workers == 1:
                per_run_min = min(
                    t.finished_at - t.started_at for t in pool.tasks()
                )
    ratio = walls[4] / walls[1]
    check(
        "speedup: 4 runs on 4 workers <= 0.5x one-worker wall time",
        per_run_min >= 2.0 and ratio <= 0.5,
        f"per-run {per_run_min:.2f} s, T1 {walls[1]:.2f} s, "
        f"T4 {walls[4]:.2f} s, ratio {ratio:.3f}",
    )


def test_format_suite():
    rng = np.random.default_rng(44)
    ok = True
    detail = []
    # round-trips over random aligned sets (nexus + fasta)
    for _ in range(50):
        n = int(rng.integers(1, 7))
        length = int(rng.integers(1, 25))
        records = [
            seqio.SequenceRecord(
                f"t{i}", "".join(rng.choice(list("ACGTN-"), length))
            )
            for i in range(n)
        ]
        a = seqio.Alignment.from_records(records)
        if seqio.parse_nexus(seqio.write_nexus(a)) != a:
            ok, _ = False, detail.append("nexus round-trip")
        if seqio.parse_fasta(seqio.write_fasta(a)) != a:
            ok, _ = False, detail.append("fasta round-trip")
    # cross-format equivalence
    fasta = ">a\nACGT\n>b\nAC-T\n"
    phylip = "2 4\na ACGT\nb AC-T\n"
    if seqio.to_nexus(fasta) != seqio.to_nexus(phylip):
        ok = False
        detail.append("cross-format")
    # to_nexus idempotent
    once = seqio.to_nexus(fasta)
    if seqio.to_nexus(once) != once:
        ok = False
        detail.append("idempotence")
    # header mismatch detected
    try:
        seqio.parse_phylip("3 4\nt1 ACGT\nt2 ACGA")
        ok = False
        detail.append("header mismatch not raised")
    except seqio.HeaderMismatch:
        pass
    # fuzz: arbitrary text never escapes as a non-package exception
    alphabet = list("> #NEXUSbegindata;\n\tmatrix01 ACGT-\x00\xe9(),:")
    for _ in range(300):
        text = "".join(rng.choice(alphabet, rng.integers(0, 80)))
        try:
            seqio.parse(text)
        except PhyloflowError:
            pass
        except Exception as exc:  # pragma: no cover
            ok = False
            detail.append(f"fuzz leak: {type(exc).__name__}")
            break
    check("format suite: round-trips, cross-format, errors, fuzz, idempotence",
          ok, "; ".join(detail) or "all subchecks passed")


def test_alignment_oracle():
    rng = np.random.default_rng(321)
    params_pool = [
        ScoringParams(),
        ScoringParams(match=1, mismatch=-1, gap_open=-2, gap_extend=-1),
        ScoringParams(match=3, mismatch=-2, gap_open=-5, gap_extend=-1),
    ]
    pairs = 0
    exact = True
    for _ in range(70):
        for params in params_pool:
            a = "".join(rng.choice(list("ACGT"), rng.integers(1, 7)))
            b = "".join(rng.choice(list("ACGT"), rng.integers(1, 7)))
            (_, _), score = pairwise_align(
                seqio.SequenceRecord("a", a), seqio.SequenceRecord("b", b),
                params,
            )
            if score != best_alignment_score(a, b, params):
                exact = False
            pairs += 1
    degap_ok = True
    idempotent_ok = True
    for _ in range(25):
        n = int(rng.integers(2, 6))
        rows = [
            seqio.SequenceRecord(
                f"t{i}", "".join(rng.choice(list("ACGT"), rng.integers(1, 12)))
            )
            for i in range(n)
        ]
        aligned = realign(seqio.Alignment.from_records(rows))
        for raw, out in zip(rows, aligned.records):
            if out.residues.replace("-", "") != raw.residues:
                degap_ok = False
        if realign(aligned) != aligned:
            idempotent_ok = False
    check(
        "alignment oracle: >=200 exact pairwise scores, degap recovery, "
        "realign idempotence",
        pairs >= 200 and exact and degap_ok and idempotent_ok,
        f"{pairs} pairs checked",
    )


def test_workflow_property_suite(tmp_path):
    # 1) >= 10k randomized operation sequences against the transition table
    gen = random.Random(777)
    ops = sorted(TRANSITIONS)
    sequences = 0
    table_ok = True
    for _ in range(10_000):
        state = JobState.Draft
        for _ in range(gen.randint(1, 12)):
            op = ops[gen.randrange(len(ops))]
            allowed, target = TRANSITIONS[op]
            if state in allowed:
                state = advance_state(state, op)
                if not isinstance(state, JobState):
                    table_ok = False
            else:
                try:
                    advance_state(state, op)
                    table_ok = False
                except InvalidTransition:
                    pass
        sequences += 1

    # 2) proxy expiry blocks submit; admin renewal unblocks; restart survives
    class Clock:
        now = 1_700_000_000.0

        def __call__(self):
            return self.now

    clock = Clock()
    fasta = ">a\nACGTACGTACGG\n>b\nACGTACGAACGG\n>c\nTCGTACGAACGC\n>d\nTCGAACGAACGC\n"
    with WorkerPool(n_workers=1) as pool:
        engine = WorkflowEngine(tmp_path, pool=pool, clock=clock)
        job = engine.create_job("pat", "gate check")
        engine.attach_sequences(job.id, fasta, filename="gate.nex")
        engine.accept_alignment(job.id)
        engine.configure(job.id, "lset nst=1", 200, 100, 1, "gate.nex",
                         nchains=1)
        engine.init_proxy("pat", 100, kind="admin")
        clock.now += 200  # expire it
        expiry_blocked = False
        try:
            engine.submit(job.id)
        except ExpiredProxy:
            expiry_blocked = True
        renewal_unblocks = False
        engine.renew_proxy("pat")
        engine.submit(job.id)
        renewal_unblocks = True
        deadline = time.time() + 60
        while engine.job(job.id).state not in (
            JobState.Complete, JobState.Failed
        ):
            assert time.time() < deadline
            time.sleep(0.05)
        finished_state = engine.job(job.id).state

    reborn = WorkflowEngine(tmp_path, pool=None, clock=clock)
    recovered = reborn.job(job.id)
    persistence_ok = (
        recovered.state is finished_state
        and recovered.name == "gate check"
        and recovered.alignment is not None
    )
    check(
        "workflow suite: 10k op sequences, proxy gate, renewal, restart",
        sequences >= 10_000 and table_ok and expiry_blocked
        and renewal_unblocks and persistence_ok,
        f"{sequences} sequences, final state {finished_state.value}",
    )


def test_sample_count_contract(tmp_path):
    aln = small_alignment(17, ["a", "b", "c", "d"], 30)
    cfg = McmcConfig(ngen=10_000, samplefreq=100, nruns=1, nchains=1, seed=9,
                     filebase="count.nex")
    (result,) = run_mcmc(cfg, aln, SubstitutionModel(), tmp_path)
    _, rows = read_param_trace(Path(result.files["p"]).read_text())
    trees = read_tree_trace(Path(result.files["t"]).read_text())
    retained = burn_in(rows, 0.25)
    check(
        "sample-count: 10000/100 -> 101 rows per file; burn-in 0.25 keeps 75",
        len(rows) == 101 and len(trees) == 101 and len(retained) == 75,
        f".p rows {len(rows)}, .t rows {len(trees)}, retained {len(retained)}",
    )
