"""Built-in oracle suite.

Each oracle recomputes a quantity two independent ways and reports the
largest discrepancy (or a test p-value) against a fixed tolerance. The same
fixtures and studies back the acceptance tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from . import impurity
from .dataset import Dataset, SplitRule
from .inference import PivotSpec, invert_pivot, pivot
from .keystats import build_leaf_keystats, linear_representation_oracle
from .mechanism import Adaptive, Fixed, TemperaturePolicy, sample_index, sample_split_gumbel, split_probabilities
from .simulate import GenConfig, generate, success_probability
from .tree import TreeFit, grow_rct, leaf_paths

RECONSTRUCTION_TOL = 1e-10
REPRESENTATION_TOL = 1e-10
CLOSED_FORM_TOL = 1e-6
INVERSION_TOL = 1e-4
GOF_LEVEL = 0.01
TWO_SAMPLE_LEVEL = 0.001
KS_LEVEL = 0.01


@dataclass(frozen=True)
class OracleResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{status}  {self.name}: {self.value:.3e} vs {self.tolerance:.1e}{extra}"


@dataclass(frozen=True, eq=False)
class Fixture:
    data: Dataset
    fit: TreeFit


def random_fixtures(count: int = 50, seed: int = 2024) -> list[Fixture]:
    """Random logistic datasets with ``n`` in [50, 400], ``p`` in {2, 5}, RCT fits of depth <= 3."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(50, 401))
        p = int(rng.choice([2, 5]))
        X = rng.standard_normal((n, p))
        if rng.random() < 0.3:
            X = np.round(X, 1)  # ties in feature values
        beta = rng.normal(0.0, 1.0, p + 1)
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-(beta[0] + X @ beta[1:])))).astype(np.int8)
        data = Dataset(X, y)
        policy: TemperaturePolicy = Adaptive(float(rng.uniform(0.05, 0.5))) if rng.random() < 0.7 else Fixed(
            float(rng.uniform(0.0, 50.0))
        )
        depth = int(rng.integers(1, 4))
        fit = grow_rct(data, depth, int(rng.integers(2, 21)), policy, seed=int(rng.integers(2**31)))
        out.append(Fixture(data, fit))
    return out


def reconstruction_max_error(fixtures: list[Fixture]) -> float:
    """Largest gap between gains rebuilt from key statistics and gains computed from the data."""
    worst = 0.0
    for fx in fixtures:
        for path in leaf_paths(fx.fit):
            stats = build_leaf_keystats(path, fx.data)
            for h, (node, order) in enumerate(zip(path.nodes, path.orders)):
                rebuilt = stats.node_gains(h, stats.t1)
                for slot, k in enumerate(order):
                    rule = SplitRule(int(node.features[k]), float(node.thresholds[k]))
                    direct = impurity.information_gain(node.region, rule, fx.data)
                    worst = max(worst, abs(rebuilt[slot] - direct))
    return worst


def representation_max_error(fixtures: list[Fixture]) -> float:
    """Largest gap between the key statistics and their explicit linear representation."""
    worst = 0.0
    for fx in fixtures:
        for path in leaf_paths(fx.fit):
            stats = build_leaf_keystats(path, fx.data)
            oracle = linear_representation_oracle(path, fx.data)
            worst = max(worst, float(np.max(np.abs(stats.stacked() - oracle))))
    return worst


@dataclass(frozen=True)
class SamplerComparison:
    p_softmax: float
    p_gumbel: float
    p_two_sample: float


def compare_samplers(
    gains=(0.5, 0.2, 0.0), temperature: float = 3.0, draws: int = 100_000, seed: int = 11
) -> SamplerComparison:
    """Goodness of fit of the inverse-CDF and Gumbel-max samplers against the softmax law."""
    probs = split_probabilities(gains, temperature)
    k = len(gains)
    rng_a, rng_b = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    ca = np.bincount([sample_index(probs, rng_a) for _ in range(draws)], minlength=k)
    cb = np.bincount([sample_split_gumbel(gains, temperature, rng_b) for _ in range(draws)], minlength=k)
    return SamplerComparison(
        p_softmax=float(sps.chisquare(ca, draws * probs).pvalue),
        p_gumbel=float(sps.chisquare(cb, draws * probs).pvalue),
        p_two_sample=float(sps.chi2_contingency(np.vstack([ca, cb]))[1]),
    )


def closed_form_errors(seed: int = 3) -> tuple[float, float]:
    """Pivot and inversion error where the correction factor is constant.

    Uses a single-leaf tree (no ancestors) and a depth-2 tree grown at zero
    temperature. Returns ``(max pivot error, max endpoint error on the Pi scale)``.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((300, 2))
    theta = success_probability(X, (0.1, 1.0, -1.0))
    data = Dataset(X, (rng.random(300) < theta).astype(np.int8))
    fits = [
        grow_rct(data, 0, 10, Adaptive(0.1), seed=1),
        grow_rct(data, 2, 10, Fixed(0.0), seed=1),
    ]
    z = sps.norm.ppf(0.95)
    pivot_err = endpoint_err = 0.0
    for fit in fits:
        for path in leaf_paths(fit):
            st = build_leaf_keystats(path, data)
            spec = PivotSpec(st, fit.config.policy, alpha=0.1)
            s = st.sigma1
            for Pi in st.t1 + s * np.linspace(-5.0, 5.0, 21):
                pivot_err = max(pivot_err, abs(pivot(spec, Pi) - sps.norm.cdf((st.t1 - Pi) / s)))
            ci = invert_pivot(spec)
            endpoint_err = max(endpoint_err, abs(ci.Pi_lower - (st.t1 - z * s)), abs(ci.Pi_upper - (st.t1 + z * s)))
    return pivot_err, endpoint_err


def uniformity_pivots(
    replications: int = 500,
    plug_in: bool = False,
    k: float = 3.0,
    depth: int = 2,
    tau: float = 0.1,
    min_samples: int = 10,
    seed: int = 6,
    num_points: int = 2049,
) -> np.ndarray:
    """Pivots of the first leaf of each fit, evaluated at the true leaf mean.

    With ``plug_in`` the clamped sample variance replaces the true variance.
    """
    gen = GenConfig(k=k, seed=seed, replications=replications)
    policy = Adaptive(tau)
    out = np.empty(replications)
    for r in range(replications):
        ss = np.random.SeedSequence(seed, spawn_key=(r,))
        data_seq, tree_seq = ss.spawn(2)
        data, _, truth = generate(gen, np.random.default_rng(data_seq))
        fit = grow_rct(data, depth, min_samples, policy, seed=int(tree_seq.generate_state(1)[0]))
        path = leaf_paths(fit)[0]
        st = build_leaf_keystats(path, data)
        idx = path.leaf.region.indices
        sigma = None if plug_in else math.sqrt(truth.variance(idx))
        spec = PivotSpec(st, policy, num_points=num_points, sigma=sigma)
        out[r] = pivot(spec, math.sqrt(st.n1) * truth.mean(idx))
    return out


def run_oracles(quick: bool = False) -> list[OracleResult]:
    fixtures = random_fixtures(20 if quick else 50)
    results = []
    e1 = reconstruction_max_error(fixtures)
    results.append(OracleResult("gain-reconstruction", e1 <= RECONSTRUCTION_TOL, e1, RECONSTRUCTION_TOL, "max |rebuilt - direct gain|"))
    e5 = representation_max_error(fixtures)
    results.append(OracleResult("linear-representation", e5 <= REPRESENTATION_TOL, e5, REPRESENTATION_TOL, "max component gap"))
    cmp = compare_samplers(draws=20_000 if quick else 100_000)
    worst = min(cmp.p_softmax, cmp.p_gumbel)
    results.append(OracleResult("gumbel-softmax-fit", worst > GOF_LEVEL, worst, GOF_LEVEL, "min chi-square p-value"))
    results.append(
        OracleResult(
            "gumbel-softmax-two-sample", cmp.p_two_sample > TWO_SAMPLE_LEVEL, cmp.p_two_sample, TWO_SAMPLE_LEVEL,
            "p-value",
        )
    )
    pe, ie = closed_form_errors()
    results.append(OracleResult("pivot-closed-form", pe <= CLOSED_FORM_TOL, pe, CLOSED_FORM_TOL, "max |pivot - Phi|"))
    results.append(OracleResult("inversion-closed-form", ie <= INVERSION_TOL, ie, INVERSION_TOL, "max endpoint gap"))
    if not quick:
        pv = sps.kstest(uniformity_pivots(200), "uniform").pvalue
        results.append(OracleResult("pivot-uniformity", pv > KS_LEVEL, pv, KS_LEVEL, "KS p-value, 200 fits"))
    return results
