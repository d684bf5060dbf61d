"""Acceptance suite: one test per release criterion, one PASS line each.

Run with ``pytest tests/test_acceptance.py -v -s``. Every tolerance is
asserted exactly as stated; no criterion is weakened for speed. The two
long-running criteria (sampler fidelity, phenomenon reproduction) also
assert their wall-clock budgets.
"""

from __future__ import annotations

import itertools
import math
import time
from collections import Counter

import numpy as np
import pytest

from provshift.corpus import Corpus, Record, write_corpus
from provshift.metrics import auprc
from provshift.model import LRConfig, fit_lr, penalized_nll
from provshift.runner import (
    CyFilter,
    FeaturizerSpec,
    ModelSpec,
    SweepSpec,
    aggregate_report,
    run_sweep,
    write_rows,
)
from provshift.sampler import (
    CELLS,
    CellPlan,
    InfeasibleRatesError,
    ShiftSetting,
    check_feasibility,
    derive_rates,
    draw_split,
    plan_cells,
    solve_test_rates,
)
from provshift.synth import SynthConfig, generate_corpus

from test_metrics import brute_force_average_precision
from test_model import reference_optimum


def _report(name: str) -> None:
    print(f"\nACCEPTANCE PASS: {name}")


def test_constraint_solver_exactness():
    """1,000 random triples: mixture identity to 1e-12, ratio exact,
    rejection precisely when a rate leaves [0, 1]."""
    rng = np.random.Generator(np.random.Philox(101))
    n_feasible = 0
    n_infeasible = 0
    for _ in range(1000):
        cz = float(rng.uniform(0.01, 0.99))
        cy = float(rng.uniform(0.01, 0.99))
        alpha = float(np.exp(rng.uniform(np.log(1 / 16), np.log(16))))
        expected_p0 = cy / ((1.0 - cz) + cz * alpha)
        expected_p1 = alpha * expected_p0
        outside = not (0.0 <= expected_p0 <= 1.0 and 0.0 <= expected_p1 <= 1.0)
        if outside:
            n_infeasible += 1
            with pytest.raises(InfeasibleRatesError):
                solve_test_rates(cz, cy, alpha)
            continue
        n_feasible += 1
        p0, p1 = solve_test_rates(cz, cy, alpha)
        assert abs((1.0 - cz) * p0 + cz * p1 - cy) <= 1e-12
        assert p1 == alpha * p0
    assert n_feasible > 100 and n_infeasible > 100  # both branches exercised
    _report(
        f"constraint solver exactness ({n_feasible} feasible, "
        f"{n_infeasible} rejected)"
    )


@pytest.fixture(scope="module")
def ample_corpus():
    records = []
    i = 0
    for y in (0, 1):
        for z in (0, 1):
            for _ in range(3000):
                records.append(Record(id=f"r{i:06d}", y=y, z=z, text="x"))
                i += 1
    return Corpus(tuple(records), ("a", "b"))


def test_sampler_fidelity(ample_corpus):
    """Paper-template grid (step 0.05, 800/200): per-cell deviation < 1
    count for every feasible setting; disjoint splits; under 30 s."""
    started = time.monotonic()
    counts = ample_corpus.cell_counts()
    id_cell = {rec.id: (rec.y, rec.z) for rec in ample_corpus}
    steps = [round(0.05 * k, 2) for k in range(1, 20)]
    czs = [round(0.1 * k, 1) for k in range(1, 10)]
    alphas = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0]
    n_train, n_test = 800, 200

    feasible = []
    for p0, p1, cz, alpha in itertools.product(steps, steps, czs, alphas):
        try:
            setting = ShiftSetting(p0, p1, cz, alpha, n_train, n_test)
            rates = derive_rates(setting)
            pt0, pt1 = solve_test_rates(cz, rates.cy, alpha)
        except ValueError:
            continue
        plan = CellPlan(
            train=plan_cells(n_train, cz, p0, p1),
            test=plan_cells(n_test, cz, pt0, pt1),
        )
        if check_feasibility(plan, counts).ok:
            feasible.append((setting, (pt0, pt1), plan))
    assert len(feasible) > 10000

    for k, (setting, (pt0, pt1), plan) in enumerate(feasible):
        for n, cz, rate0, rate1, planned in (
            (n_train, setting.cz, setting.p_train_y1_z0, setting.p_train_y1_z1, plan.train),
            (n_test, setting.cz, pt0, pt1, plan.test),
        ):
            n_z1 = planned[(0, 1)] + planned[(1, 1)]
            n_z0 = n - n_z1
            assert abs(n_z1 - n * cz) < 1.0
            assert abs(planned[(1, 0)] - n_z0 * rate0) < 1.0
            assert abs(planned[(1, 1)] - n_z1 * rate1) < 1.0
        train, test = draw_split(ample_corpus, plan, (0, k))
        assert len(train) == n_train and len(test) == n_test
        assert len(set(train) | set(test)) == n_train + n_test  # disjoint
        if k % 50 == 0:  # exact per-cell verification on a lattice of settings
            got_train = Counter(id_cell[r] for r in train)
            got_test = Counter(id_cell[r] for r in test)
            for cell in CELLS:
                assert got_train[cell] == plan.train[cell]
                assert got_test[cell] == plan.test[cell]

    setting, _, plan = feasible[0]
    for seed in range(100):
        train, test = draw_split(ample_corpus, plan, seed)
        assert not set(train) & set(test)

    elapsed = time.monotonic() - started
    assert elapsed < 30.0, f"sampler fidelity took {elapsed:.1f}s"
    _report(f"sampler fidelity ({len(feasible)} feasible settings, {elapsed:.1f}s)")


def test_auprc_oracle_equivalence():
    """Exhaustive labelings of length <= 8 against the prefix-enumeration
    oracle at 1e-12, plus the hand example."""
    rng = np.random.Generator(np.random.Philox(55))
    checked = 0
    for n in range(1, 9):
        for bits in itertools.product((0, 1), repeat=n):
            if not any(bits):
                continue
            for _ in range(2):
                scores = rng.permutation(n) + rng.random(n) * 0.5
                assert len(set(scores.tolist())) == n
                got = auprc(scores, list(bits))
                want = brute_force_average_precision(scores.tolist(), list(bits))
                assert abs(got - want) <= 1e-12
                checked += 1
    hand = auprc([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])
    assert hand == 0.5 * 1.0 + 0.5 * (2.0 / 3.0)
    assert abs(hand - 5.0 / 6.0) <= 1e-12
    _report(f"auprc oracle equivalence ({checked} exhaustive cases + hand example)")


def test_solver_correctness():
    """100 random instances within 1e-6 of the independent reference
    optimizer; analytic gradients within 1e-5 of central differences."""
    rng = np.random.Generator(np.random.Philox(77))
    worst_gap = 0.0
    for trial in range(100):
        n = int(rng.integers(20, 201))
        d = int(rng.integers(1, 21))
        X = rng.normal(size=(n, d))
        w_true = rng.normal(size=d)
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-(X @ w_true)))).astype(np.int64)
        if y.sum() == 0:
            y[0] = 1
        if y.sum() == n:
            y[0] = 0
        z = rng.integers(0, 2, size=n) if trial % 2 == 0 else None
        fitted = fit_lr(X, y, z, LRConfig(C=1.0, v=10.0))
        mine = penalized_nll(fitted.beta0, fitted.beta1, fitted.beta2, X, y, z, C=1.0, v=10.0)
        gap = abs(mine - reference_optimum(X, y, z, C=1.0, v=10.0))
        worst_gap = max(worst_gap, gap)
        assert gap <= 1e-6

    from provshift.model import penalized_nll_grad

    eps = 1e-6
    for _ in range(25):
        n, d = int(rng.integers(10, 60)), int(rng.integers(1, 6))
        X = rng.normal(size=(n, d))
        y = rng.integers(0, 2, size=n)
        y[:2] = [0, 1]
        z = rng.integers(0, 2, size=n)
        b0 = float(rng.normal())
        b1 = rng.normal(size=d)
        b2 = rng.normal(size=2)
        g0, g1, g2 = penalized_nll_grad(b0, b1, b2, X, y, z, C=1.0, v=10.0)
        flat = np.concatenate([[g0], g1, g2])
        for j in range(flat.size):
            offset = np.zeros(flat.size)
            offset[j] = eps

            def value(sign: float) -> float:
                delta = sign * offset
                return penalized_nll(
                    b0 + delta[0], b1 + delta[1 : 1 + d], b2 + delta[1 + d :],
                    X, y, z, C=1.0, v=10.0,
                )

            numeric = (value(+1.0) - value(-1.0)) / (2 * eps)
            assert abs(numeric - flat[j]) / max(1.0, abs(flat[j])) <= 1e-5
    _report(f"solver correctness (worst objective gap {worst_gap:.2e})")


def test_backdoor_identity():
    """Provenance independent of everything: every (x, y) row duplicated
    under both z values, so regularization zeroes the provenance weights
    and backdoor prediction collapses onto the conditional."""
    rng = np.random.Generator(np.random.Philox(31))
    base_X = rng.normal(size=(60, 5))
    base_y = rng.integers(0, 2, size=60)
    base_y[:2] = [0, 1]
    X = np.vstack([base_X, base_X])
    y = np.concatenate([base_y, base_y])
    z = np.concatenate([np.zeros(60, dtype=int), np.ones(60, dtype=int)])
    fitted = fit_lr(X, y, z, LRConfig(C=1.0, v=10.0))
    assert fitted.pz.tolist() == [0.5, 0.5]
    X_test = rng.normal(size=(200, 5))
    backdoor = fitted.predict_backdoor(X_test)
    worst = 0.0
    for c in (0, 1):
        conditional = fitted.predict_conditional(X_test, c)
        worst = max(worst, float(np.max(np.abs(backdoor - conditional))))
    assert worst <= 1e-6
    _report(f"backdoor identity (max |backdoor - conditional| = {worst:.2e})")


@pytest.fixture(scope="module")
def phenomenon_corpus(tmp_path_factory):
    cfg = SynthConfig()  # base_rate (0.411, 0.198), nuisance (0.1, 0.7)
    corpus = generate_corpus(cfg)
    path = tmp_path_factory.mktemp("phenomenon") / "synth.jsonl"
    write_corpus(corpus, path)
    return cfg, corpus, path


def _phenomenon_spec(cfg, path, p0, p1, base_seed):
    return SweepSpec(
        corpus_path=str(path),
        source_names=cfg.source_names,
        featurizer=FeaturizerSpec(kind="unigram", min_df=1),
        p_train_y1_z0=(p0,),
        p_train_y1_z1=(p1,),
        cz=(0.5,),
        alpha_test=(0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0),
        n_train=800,
        n_test=400,
        model_configs=(
            ModelSpec(tag="unadjusted", adjusted=False, lr=LRConfig(C=1.0, v=10.0)),
            ModelSpec(tag="adjusted", adjusted=True, lr=LRConfig(C=1.0, v=10.0)),
        ),
        cy_filter=CyFilter(values=(0.2,), tolerance=1e-9),
        repeats=5,
        base_seed=base_seed,
    )


def test_phenomenon_reproduction(phenomenon_corpus):
    """Confounding by provenance appears and adjustment flattens it, in
    both shift directions, for at least 4 of 5 base seeds; under 5 min."""
    started = time.monotonic()
    cfg, corpus, path = phenomenon_corpus
    outcomes = {}
    for direction, (p0, p1), want_sign in (
        ("alpha_train=0.33", (0.3, 0.1), -1.0),
        ("alpha_train=3.0", (0.1, 0.3), +1.0),
    ):
        passes = 0
        details = []
        for base_seed in range(5):
            spec = _phenomenon_spec(cfg, path, p0, p1, base_seed)
            rows, planned, _ = run_sweep(spec, corpus=corpus)
            assert len(rows) == len(planned) * 5 * 2
            assert all(abs(p.cy - 0.2) <= 1e-9 for p in planned)
            report = aggregate_report(rows)
            slopes = {s.model: s.slope for s in report.slopes}
            unadj, adj = slopes["unadjusted"], slopes["adjusted"]
            ok = (unadj * want_sign > 0) and abs(adj) < abs(unadj)
            passes += ok
            details.append(f"seed {base_seed}: unadj {unadj:+.4f} adj {adj:+.4f}")
        outcomes[direction] = (passes, details)
        assert passes >= 4, f"{direction}: only {passes}/5 seeds\n" + "\n".join(details)
    elapsed = time.monotonic() - started
    assert elapsed < 300.0, f"phenomenon run took {elapsed:.0f}s"
    summary = "; ".join(f"{k}: {v[0]}/5" for k, v in outcomes.items())
    _report(f"phenomenon reproduction ({summary}, {elapsed:.0f}s)")


def test_determinism_serial_vs_parallel(tmp_path):
    """Identical spec and seed emit byte-identical sorted row files from
    serial and parallel execution."""
    cfg = SynthConfig(n_per_source=(600, 600), base_rate=(0.5, 0.3), seed=17)
    corpus = generate_corpus(cfg)
    path = tmp_path / "corpus.jsonl"
    write_corpus(corpus, path)
    spec = SweepSpec(
        corpus_path=str(path),
        source_names=cfg.source_names,
        featurizer=FeaturizerSpec(kind="unigram", min_df=1),
        p_train_y1_z0=(0.3,),
        p_train_y1_z1=(0.1, 0.3),
        cz=(0.5,),
        alpha_test=(0.5, 1.0, 2.0),
        n_train=200,
        n_test=100,
        model_configs=(
            ModelSpec(tag="unadjusted", adjusted=False, lr=LRConfig()),
            ModelSpec(tag="adjusted", adjusted=True, lr=LRConfig()),
        ),
        repeats=3,
        base_seed=5,
    )
    rows_serial, _, _ = run_sweep(spec, jobs=1)
    rows_parallel, _, _ = run_sweep(spec, jobs=2)
    serial_path = tmp_path / "serial.csv"
    parallel_path = tmp_path / "parallel.csv"
    write_rows(rows_serial, serial_path)
    write_rows(rows_parallel, parallel_path)
    assert serial_path.read_bytes() == parallel_path.read_bytes()
    # settings (2 p1 values x 3 alphas) x repeats x models
    assert len(rows_serial) == 6 * 3 * 2
    _report("determinism (serial vs parallel byte-identical)")
