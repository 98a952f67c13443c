"""Acceptance criteria, each at its stated tolerance and runtime budget.

Every test records one PASS/FAIL line, printed in the terminal summary.
"""

import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats as sps

from rctree.dataset import Dataset
from rctree.mechanism import Fixed, split_probabilities
from rctree.simulate import GenConfig, generate, parse_method, run_experiment
from rctree.tree import grow_cart, grow_rct
from rctree.validate import (
    closed_form_errors,
    compare_samplers,
    reconstruction_max_error,
    representation_max_error,
    random_fixtures,
    uniformity_pivots,
)

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.slow

RCT_LABELS = ("rct:0.1", "rct:0.06667", "rct:0.05")
METHODS = ("naive", "ds:0.3", "rct:1/10", "rct:1/15", "rct:1/20")


def record(number, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def fixtures():
    return random_fixtures(50)


@pytest.fixture(scope="module")
def experiment():
    gen = GenConfig(k=3.0, seed=2024, replications=200)
    start = time.perf_counter()
    table = run_experiment(gen, [parse_method(m, alpha=0.1) for m in METHODS])
    return gen, table, time.perf_counter() - start


def test_c01_gain_reconstruction(fixtures):
    start = time.perf_counter()
    err = reconstruction_max_error(fixtures)
    elapsed = time.perf_counter() - start
    ok = err <= 1e-10 and elapsed < 10
    assert record(1, "gain reconstruction", ok, f"max error {err:.2e} (<= 1e-10), {elapsed:.1f} s (< 10 s)")


def test_c02_linear_representation(fixtures):
    start = time.perf_counter()
    err = representation_max_error(fixtures)
    elapsed = time.perf_counter() - start
    ok = err <= 1e-10 and elapsed < 10
    assert record(2, "linear representation", ok, f"max error {err:.2e} (<= 1e-10), {elapsed:.1f} s (< 10 s)")


def test_c03_gumbel_equivalence():
    start = time.perf_counter()
    cmp = compare_samplers(gains=(0.5, 0.2, 0.0), temperature=3.0, draws=100_000)
    elapsed = time.perf_counter() - start
    ok = cmp.p_softmax > 0.01 and cmp.p_gumbel > 0.01 and cmp.p_two_sample > 0.001 and elapsed < 5
    detail = (
        f"GOF p = {cmp.p_softmax:.3f} / {cmp.p_gumbel:.3f} (> 0.01), "
        f"two-sample p = {cmp.p_two_sample:.3f} (> 0.001), {elapsed:.1f} s (< 5 s)"
    )
    assert record(3, "Gumbel-max equivalence", ok, detail)


def test_c04_temperature_limit():
    start = time.perf_counter()
    probs = split_probabilities([0.30, 0.29, 0.10], 1e4)
    tail = float(probs[1:].max())
    # one dataset whose best root split beats the runner-up by at least 0.01
    rng = np.random.default_rng(0)
    x0 = rng.permutation(60).astype(float)
    y = (x0 >= 30).astype(int)
    y[rng.choice(60, 4, replace=False)] ^= 1
    data = Dataset(np.column_stack([x0, rng.standard_normal(60)]), y)
    cart = grow_cart(data, 1, 10)
    top = np.sort(cart.root.gains)[::-1]
    gap = float(top[0] - top[1])
    assert gap >= 0.01
    matches = sum(grow_rct(data, 1, 10, Fixed(1e6), seed=seed).root.rule == cart.root.rule for seed in range(100))
    elapsed = time.perf_counter() - start
    ok = tail <= 1e-40 and matches == 100 and elapsed < 5
    detail = (
        f"non-argmax prob {tail:.2e} (<= 1e-40), root matches {matches}/100 "
        f"(argmax gap {gap:.3f} >= 0.01), {elapsed:.1f} s (< 5 s)"
    )
    assert record(4, "temperature limit", ok, detail)


def test_c05_closed_form():
    start = time.perf_counter()
    pivot_err, endpoint_err = closed_form_errors()
    elapsed = time.perf_counter() - start
    ok = pivot_err <= 1e-6 and endpoint_err <= 1e-4 and elapsed < 5
    detail = f"pivot error {pivot_err:.2e} (<= 1e-6), endpoint error {endpoint_err:.2e} (<= 1e-4), {elapsed:.1f} s"
    assert record(5, "pivot closed form", ok, detail)


def test_c06_uniformity_true_variance():
    start = time.perf_counter()
    pivots = uniformity_pivots(500, plug_in=False, k=3.0, depth=2, tau=0.1)
    elapsed = time.perf_counter() - start
    p = sps.kstest(pivots, "uniform").pvalue
    ok = p > 0.01 and elapsed < 300
    assert record(6, "pivot uniformity (true variance)", ok, f"KS p = {p:.3f} (> 0.01), {elapsed:.0f} s (< 300 s)")


def test_c07_coverage_pattern(experiment):
    _, table, elapsed = experiment
    cov = {label: table.mean(label, "coverage") for label in table.methods()}
    rct_ok = all(0.85 <= cov[label] <= 0.95 for label in RCT_LABELS)
    naive_ok = cov["naive"] < 0.85
    ds_ok = 0.85 <= cov["ds:0.3"] <= 0.97
    ok = rct_ok and naive_ok and ds_ok and elapsed < 900
    detail = (
        "RCT " + ", ".join(f"{cov[label]:.3f}" for label in RCT_LABELS) + f" in [0.85, 0.95] ({'ok' if rct_ok else 'no'}); "
        f"Naive {cov['naive']:.3f} < 0.85 ({'ok' if naive_ok else 'no'}); "
        f"DS {cov['ds:0.3']:.3f} in [0.85, 0.97] ({'ok' if ds_ok else 'no'}); {elapsed:.0f} s (< 900 s)"
    )
    assert record(7, "coverage pattern", ok, detail)


def test_c08_length_and_log_loss(experiment):
    _, table, _ = experiment
    length = {label: table.mean(label, "mean_ci_length") for label in table.methods()}
    loss = {label: table.mean(label, "test_log_loss") for label in table.methods()}
    shorter = length["rct:0.1"] < length["ds:0.3"]
    better = loss["rct:0.1"] <= loss["ds:0.3"]
    monotone = length["rct:0.1"] <= length["rct:0.06667"] <= length["rct:0.05"]
    ok = shorter and better and monotone
    detail = (
        f"length RCT(0.1) {length['rct:0.1']:.3f} < DS {length['ds:0.3']:.3f}; "
        f"log-loss RCT(0.1) {loss['rct:0.1']:.3f} <= DS {loss['ds:0.3']:.3f}; "
        "length across tau " + " <= ".join(f"{length[label]:.3f}" for label in RCT_LABELS)
    )
    assert record(8, "length and log-loss ordering", ok, detail)


def test_c09_uniformity_plug_in():
    pivots = uniformity_pivots(500, plug_in=True, k=3.0, depth=2, tau=0.1)
    p = sps.kstest(pivots, "uniform").pvalue
    assert record(9, "pivot uniformity (plug-in variance)", p > 0.01, f"KS p = {p:.3f} (> 0.01)")


def test_c10_quadrature_stability(experiment):
    gen, table, _ = experiment
    methods = [parse_method(m, alpha=0.1) for m in METHODS if m.startswith("rct")]
    fine = run_experiment(gen, [replace(m, quad_points=4097) for m in methods])
    worst, compared = 0.0, 0
    for label in RCT_LABELS:
        for a, b in zip(table.for_method(label), fine.for_method(label)):
            assert len(a.intervals) == len(b.intervals)
            for x, y in zip(a.intervals, b.intervals):
                worst = max(worst, abs(x.Pi_lower - y.Pi_lower), abs(x.Pi_upper - y.Pi_upper))
                compared += 1
    ok = worst <= 1e-6
    detail = f"max endpoint change {worst:.2e} (<= 1e-6) over {compared} intervals, 2049 -> 4097 points"
    assert record(10, "quadrature stability", ok, detail)
