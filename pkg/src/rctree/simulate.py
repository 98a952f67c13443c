"""Monte-Carlo comparison of Naive, Data-Splitting and randomized-tree inference.

Each replication draws logistic-Bernoulli data, holds out a shared test set,
and runs every method on the remaining observations. Streams derive from
``(seed, replication)`` and the method label, so tables do not depend on the
worker count or on which other methods run alongside.
"""

from __future__ import annotations

import csv
import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .dataset import Dataset
from .inference import infer_all_leaves
from .mechanism import Adaptive
from .tree import TreeFit, grow_cart, grow_rct, predict_proba, route

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-6


@dataclass(frozen=True)
class GenConfig:
    n_total: int = 500
    n_test: int = 100
    k: float = 3.0
    p: int = 2
    seed: int = 0
    replications: int = 200

    def __post_init__(self) -> None:
        if not 0 < self.n_test < self.n_total:
            raise ValueError("need 0 < n_test < n_total")
        if self.p < 2:
            raise ValueError("the generator uses two signal predictors")
        if self.k <= 0:
            raise ValueError("signal parameter k must be positive")

    @property
    def n_trainval(self) -> int:
        return self.n_total - self.n_test

    @property
    def beta(self) -> tuple[float, float, float]:
        return (0.1 / self.k, 1.0 / self.k, -1.0 / self.k)


def success_probability(X: np.ndarray, beta: Sequence[float]) -> np.ndarray:
    eta = beta[0] + beta[1] * X[:, 0] + beta[2] * X[:, 1]
    return 1.0 / (1.0 + np.exp(-eta))


@dataclass(frozen=True, eq=False)
class LeafTruth:
    """Subgroup targets: mean success probability over a set of observations."""

    theta: np.ndarray

    def mean(self, indices) -> float:
        return float(self.theta[np.asarray(indices)].mean())

    def variance(self, indices) -> float:
        """Variance of ``sqrt(n) * mean(Y)`` over ``indices``."""
        th = self.theta[np.asarray(indices)]
        return float(np.mean(th * (1.0 - th)))

    def __call__(self, region) -> float:
        return self.mean(region.indices)


def generate(config: GenConfig, rng: np.random.Generator) -> tuple[Dataset, Dataset, LeafTruth]:
    X = rng.standard_normal((config.n_total, config.p))
    theta = success_probability(X, config.beta)
    y = (rng.random(config.n_total) < theta).astype(np.int8)
    t = config.n_test
    test = Dataset(X[:t], y[:t])
    trainval = Dataset(X[t:], y[t:])
    return trainval, test, LeafTruth(theta[t:])


@dataclass(frozen=True)
class MethodConfig:
    kind: str
    fraction: float | None = None
    tau: float | None = None
    depth: int = 3
    min_samples: int = 10
    alpha: float = 0.1
    quad_points: int = 2049

    def __post_init__(self) -> None:
        if self.kind not in ("naive", "ds", "rct"):
            raise ValueError(f"unknown method {self.kind!r}")
        if self.kind == "ds" and not (self.fraction is not None and 0 < self.fraction < 1):
            raise ValueError("data splitting needs an inference fraction in (0, 1)")
        if self.kind == "rct" and not (self.tau is not None and self.tau > 0):
            raise ValueError("randomized trees need tau > 0")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")

    @property
    def label(self) -> str:
        if self.kind == "ds":
            return f"ds:{self.fraction:g}"
        if self.kind == "rct":
            return f"rct:{self.tau:.4g}"
        return "naive"


def parse_method(text: str, **kwargs) -> MethodConfig:
    """``naive``, ``ds:<fraction>`` or ``rct:<tau>``; ``tau`` may be a fraction like ``1/15``."""
    kind, _, arg = text.strip().lower().partition(":")
    if kind == "naive":
        if arg:
            raise ValueError("naive takes no argument")
        return MethodConfig("naive", **kwargs)
    if not arg:
        raise ValueError(f"method {text!r} needs an argument")
    value = float(Fraction(arg))
    if kind == "ds":
        return MethodConfig("ds", fraction=value, **kwargs)
    if kind == "rct":
        return MethodConfig("rct", tau=value, **kwargs)
    raise ValueError(f"unknown method {text!r}")


@dataclass(frozen=True)
class LeafInterval:
    lower: float
    upper: float
    target: float
    n: int
    Pi_lower: float = math.nan
    Pi_upper: float = math.nan

    @property
    def covered(self) -> bool:
        return self.lower <= self.target <= self.upper


@dataclass(frozen=True)
class ReplicationMetrics:
    method: str
    replication: int
    coverage: float
    mean_ci_length: float
    test_log_loss: float
    n_leaves: int
    flags: tuple[str, ...] = ()
    intervals: tuple[LeafInterval, ...] = field(default=(), repr=False)


def log_loss(y: np.ndarray, prob: np.ndarray) -> float:
    p = np.clip(prob, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1.0 - p)))


def wald_interval(pi_hat: float, n: int, alpha: float) -> tuple[float, float]:
    half = norm.ppf(1 - alpha / 2) * math.sqrt(pi_hat * (1 - pi_hat) / n)
    return pi_hat - half, pi_hat + half


def _metrics(method, rep, intervals, fit: TreeFit, test: Dataset, flags) -> ReplicationMetrics:
    m = len(intervals)
    coverage = sum(iv.covered for iv in intervals) / m if m else math.nan
    length = float(np.mean([iv.upper - iv.lower for iv in intervals])) if m else math.nan
    loss = log_loss(test.outcomes, predict_proba(fit, test.features))
    return ReplicationMetrics(method.label, rep, coverage, length, loss, m, tuple(flags), tuple(intervals))


def run_method(
    method: MethodConfig,
    trainval: Dataset,
    test: Dataset,
    truth: LeafTruth,
    rng: np.random.Generator,
    replication: int = 0,
) -> ReplicationMetrics:
    flags: list[str] = []
    intervals: list[LeafInterval] = []

    if method.kind == "naive":
        fit = grow_cart(trainval, method.depth, method.min_samples)
        for leaf in fit.leaves:
            lo, hi = wald_interval(leaf.proportion, leaf.count, method.alpha)
            intervals.append(LeafInterval(lo, hi, truth(leaf.region), leaf.count))
        return _metrics(method, replication, intervals, fit, test, flags)

    if method.kind == "ds":
        n = trainval.n
        perm = rng.permutation(n)
        n_inf = int(round(method.fraction * n))
        held, train = np.sort(perm[:n_inf]), np.sort(perm[n_inf:])
        fit = grow_cart(trainval.subset(train), method.depth, method.min_samples)
        is_held = np.zeros(n, dtype=bool)
        is_held[held] = True
        members: dict[int, list[int]] = {}
        for i in range(n):
            members.setdefault(id(route(fit, trainval.features[i])), []).append(i)
        for j, leaf in enumerate(fit.leaves):
            region = np.array(members.get(id(leaf), []), dtype=np.intp)
            inf_rows = region[is_held[region]]
            if inf_rows.size == 0:
                flags.append(f"empty-leaf:{j}")
                continue
            pi_hat = float(trainval.outcomes[inf_rows].mean())
            lo, hi = wald_interval(pi_hat, inf_rows.size, method.alpha)
            # target: subgroup mean over the leaf's full trainval region
            intervals.append(LeafInterval(lo, hi, truth.mean(region), int(inf_rows.size)))
        return _metrics(method, replication, intervals, fit, test, flags)

    seed = int(rng.integers(2**62))
    fit = grow_rct(trainval, method.depth, method.min_samples, Adaptive(method.tau), seed=seed)
    for res in infer_all_leaves(fit, trainval, method.alpha, num_points=method.quad_points):
        if res.interval is None:
            flags.append(f"failed-leaf:{res.leaf_id}")
            continue
        ci = res.interval
        flags.extend(f"{flag}:{res.leaf_id}" for flag in ci.flags)
        intervals.append(LeafInterval(ci.lower, ci.upper, truth(res.region), res.n_leaf, ci.Pi_lower, ci.Pi_upper))
    return _metrics(method, replication, intervals, fit, test, flags)


def replication_streams(seed: int, replication: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replication, 0)))


def method_stream(seed: int, replication: int, label: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replication, 1, zlib.crc32(label.encode()))))


def run_replication(gen: GenConfig, methods: Sequence[MethodConfig], replication: int) -> list[ReplicationMetrics]:
    trainval, test, truth = generate(gen, replication_streams(gen.seed, replication))
    rows = []
    for method in methods:
        try:
            rows.append(
                run_method(method, trainval, test, truth, method_stream(gen.seed, replication, method.label), replication)
            )
        except Exception as exc:  # recorded, not fatal
            log.warning("replication %d, %s failed: %s", replication, method.label, exc)
            rows.append(
                ReplicationMetrics(method.label, replication, math.nan, math.nan, math.nan, 0, (f"error:{exc}",))
            )
    return rows


def _run_replication_star(args):
    return run_replication(*args)


@dataclass(frozen=True)
class ExperimentTable:
    rows: tuple[ReplicationMetrics, ...]

    def methods(self) -> list[str]:
        return list(dict.fromkeys(r.method for r in self.rows))

    def for_method(self, label: str) -> list[ReplicationMetrics]:
        return [r for r in self.rows if r.method == label]

    def column(self, label: str, metric: str) -> np.ndarray:
        return np.array([getattr(r, metric) for r in self.for_method(label)], dtype=float)

    def summary(self) -> list[dict]:
        out = []
        for label in self.methods():
            for metric in ("coverage", "mean_ci_length", "test_log_loss", "n_leaves"):
                values = self.column(label, metric)
                ok = values[np.isfinite(values)]
                q = np.quantile(ok, [0.0, 0.25, 0.5, 0.75, 1.0]) if ok.size else [math.nan] * 5
                out.append(
                    {
                        "method": label,
                        "metric": metric,
                        "n": int(ok.size),
                        "mean": float(ok.mean()) if ok.size else math.nan,
                        "std": float(ok.std(ddof=1)) if ok.size > 1 else math.nan,
                        "min": q[0],
                        "q25": q[1],
                        "median": q[2],
                        "q75": q[3],
                        "max": q[4],
                    }
                )
        return out

    def mean(self, label: str, metric: str) -> float:
        values = self.column(label, metric)
        return float(np.nanmean(values))


def run_experiment(gen: GenConfig, methods: Sequence[MethodConfig], workers: int = 1) -> ExperimentTable:
    if gen.replications < 1:
        raise ValueError("need at least one replication")
    jobs = [(gen, tuple(methods), r) for r in range(gen.replications)]
    if workers <= 1:
        chunks = map(_run_replication_star, jobs)
        rows = [row for chunk in chunks for row in chunk]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [row for chunk in pool.map(_run_replication_star, jobs) for row in chunk]
    return ExperimentTable(tuple(rows))


METRIC_COLUMNS = ["method", "replication", "coverage", "mean_ci_length", "test_log_loss", "n_leaves"]
SUMMARY_COLUMNS = ["method", "metric", "n", "mean", "std", "min", "q25", "median", "q75", "max"]


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_metrics_csv(table: ExperimentTable, path: str | Path) -> Path:
    """Write per-replication metrics and a ``<stem>_summary.csv`` alongside."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_COLUMNS)
        for r in table.rows:
            w.writerow([r.method, r.replication, _fmt(r.coverage), _fmt(r.mean_ci_length), _fmt(r.test_log_loss), r.n_leaves])
    summary_path = path.with_name(path.stem + "_summary.csv")
    with summary_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for row in table.summary():
            w.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])
    return summary_path
