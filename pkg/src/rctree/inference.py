"""Selective pivots and confidence intervals for leaf means.

The pivot integrates a normal density in the leaf statistic ``u`` against the
product of per-node correction factors (the mechanism's probability of the
observed split, viewed as a function of ``u`` with the nuisance statistics
held fixed).  The log of that product does not depend on the hypothesised
mean, so it is computed once per leaf on a lattice ``t1 + j*h`` and reused by
every pivot evaluation during interval inversion.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect
from scipy.special import logsumexp

from ._kernels import ADAPTIVE, FIXED, gini_node_log_lambda
from .dataset import Dataset, Region
from .impurity import GINI, Gini, ImpurityMeasure, measure_by_name
from .keystats import DOMAIN_TOL, LeafKeyStats, build_leaf_keystats
from .mechanism import Adaptive, Fixed, TemperaturePolicy
from .tree import TreeFit, leaf_paths

log = logging.getLogger(__name__)

HALF_WINDOW = 10.0  # integration half-width in units of sigma
BRACKET = 20.0
WIDE_BRACKET = 40.0
PIVOT_TOL = 1e-6
DENSE_SCAN_POINTS = 4097
_CHUNK_ELEMENTS = 1 << 18
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(3)


class PivotUnderflowError(ArithmeticError):
    pass


class InversionError(RuntimeError):
    pass


def _node_log_lambda(G: np.ndarray, policy: TemperaturePolicy) -> np.ndarray:
    """Log-probability of candidate 0 under the mechanism, row-wise over ``G``."""
    k = G.shape[-1]
    if isinstance(policy, Fixed):
        scores = policy.epsilon * G
    else:
        total = G.sum(axis=-1, keepdims=True)
        safe = np.where(total > 0.0, total, 1.0)
        # no positive gain at all: uniform over candidates
        scores = np.where(total > 0.0, policy.tau * k * G / safe, 0.0)
    return scores[..., 0] - logsumexp(scores, axis=-1)


def log_correction_terms(
    stats: LeafKeyStats,
    u,
    policy: TemperaturePolicy,
    measure: ImpurityMeasure = GINI,
) -> np.ndarray:
    """``log lambda_h(u, v_obs)`` for every node; shape ``u.shape + (d,)``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.zeros(u.shape + (stats.d,))
    compiled = isinstance(measure, Gini) and u.ndim == 1
    for h, block in enumerate(stats.blocks):
        if block.k == 1:
            continue
        if compiled:
            mode, param = (FIXED, policy.epsilon) if isinstance(policy, Fixed) else (ADAPTIVE, policy.tau)
            col = np.empty(u.size)
            gini_node_log_lambda(u, *stats.node_affine(h), mode, float(param), DOMAIN_TOL, col)
            out[:, h] = col
            continue
        step = max(1, _CHUNK_ELEMENTS // block.k)
        for start in range(0, u.size, step):
            sl = slice(start, start + step)
            out[sl, h] = _node_log_lambda(stats.node_gains(h, u[sl], measure), policy)
    return out


def log_correction(stats: LeafKeyStats, u, policy: TemperaturePolicy, measure: ImpurityMeasure = GINI) -> np.ndarray:
    return log_correction_terms(stats, u, policy, measure).sum(axis=-1)


def lambda_h(
    stats: LeafKeyStats,
    h: int,
    u: float,
    policy: TemperaturePolicy,
    measure: ImpurityMeasure = GINI,
) -> float:
    """Mechanism probability of node ``h``'s selected split at leaf statistic ``u``."""
    if not 0 <= h < stats.d:
        raise IndexError(f"node index {h} outside 0..{stats.d - 1}")
    if stats.blocks[h].k == 1:
        return 1.0
    G = stats.node_gains(h, np.atleast_1d(float(u)), measure)
    return float(np.exp(_node_log_lambda(G, policy))[0])


def _simpson(values: np.ndarray, h: float) -> float:
    # composite Simpson; len(values) must be odd
    return h / 3.0 * (values[0] + values[-1] + 4.0 * values[1:-1:2].sum() + 2.0 * values[2:-1:2].sum())


@dataclass(eq=False)
class _Lattice:
    """Cached log-correction on ``t1 + j*h`` for integer ``j`` in ``[lo, hi]``."""

    t1: float
    h: float
    lo: int = 0
    hi: int = -1
    values: np.ndarray = field(default_factory=lambda: np.empty(0))

    def get(self, j_lo: int, j_hi: int, compute) -> np.ndarray:
        if self.hi < self.lo:
            self.lo, self.hi = j_lo, j_hi
            self.values = compute(self.t1 + self.h * np.arange(j_lo, j_hi + 1))
        if j_lo < self.lo:
            new = compute(self.t1 + self.h * np.arange(j_lo, self.lo))
            self.values = np.concatenate((new, self.values))
            self.lo = j_lo
        if j_hi > self.hi:
            new = compute(self.t1 + self.h * np.arange(self.hi + 1, j_hi + 1))
            self.values = np.concatenate((self.values, new))
            self.hi = j_hi
        return self.values[j_lo - self.lo : j_hi - self.lo + 1]


def domain_jumps(stats: LeafKeyStats, lo: float, hi: float) -> np.ndarray:
    """Sorted values of ``u`` in ``(lo, hi)`` where some node proportion leaves the domain.

    Every proportion is affine in ``u``, and gains outside the domain count as
    zero, so the correction factor is smooth between consecutive jumps.
    """
    found = []
    for h, block in enumerate(stats.blocks):
        if block.k == 1:
            continue
        a0, a1, b0, b1, c0, c1, _ = stats.node_affine(h)
        for icept, slope in ((np.atleast_1d(a0), np.atleast_1d(a1)), (b0, b1), (c0, c1)):
            moving = slope != 0.0
            for edge in (-DOMAIN_TOL, 1.0 + DOMAIN_TOL):
                found.append((edge - icept[moving]) / slope[moving])
    jumps = np.concatenate(found) if found else np.empty(0)
    return np.unique(jumps[(jumps > lo) & (jumps < hi)])


@dataclass(eq=False)
class _Patches:
    """Exact Simpson rules for lattice panels ``[t1 + j*h, t1 + (j+2)*h]`` that contain jumps.

    Each affected panel is split at its jumps and every smooth piece gets a
    three-point Gauss-Legendre rule. The nodes are interior, so no value is
    taken on the wrong side of a jump, and the composite rule keeps its order
    of accuracy across discontinuities.
    """

    t1: float
    h: float
    jumps: np.ndarray
    lo: int = 0
    hi: int = 0
    starts: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    point_start: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    points: np.ndarray = field(default_factory=lambda: np.empty(0))
    weights: np.ndarray = field(default_factory=lambda: np.empty(0))
    log_corr: np.ndarray = field(default_factory=lambda: np.empty(0))

    def _build(self, j_lo: int, j_hi: int, compute) -> None:
        # panel starts are even offsets in [j_lo, j_hi)
        if j_hi <= j_lo:
            return
        r = (self.jumps - self.t1) / self.h
        inside = (r > j_lo) & (r < j_hi)
        r, jumps = r[inside], self.jumps[inside]
        start = 2 * np.floor(r / 2.0).astype(np.int64)
        interior = r > start  # jumps sitting on a lattice node need no patch
        start, jumps = start[interior], jumps[interior]
        if start.size == 0:
            return
        starts, pts, wts, owner = [], [], [], []
        for j0 in np.unique(start):
            knots = np.concatenate(([self.t1 + j0 * self.h], jumps[start == j0], [self.t1 + (j0 + 2) * self.h]))
            half = 0.5 * np.diff(knots)
            mid = 0.5 * (knots[:-1] + knots[1:])
            pts.append((mid[:, None] + half[:, None] * _GL_NODES).ravel())
            wts.append((half[:, None] * _GL_WEIGHTS).ravel())
            owner.append(np.full(half.size * _GL_NODES.size, j0))
            starts.append(j0)
        pts = np.concatenate(pts)
        wts = np.concatenate(wts)
        owner = np.concatenate(owner)
        self.starts = np.concatenate((self.starts, starts))
        self.point_start = np.concatenate((self.point_start, owner))
        self.points = np.concatenate((self.points, pts))
        self.weights = np.concatenate((self.weights, wts))
        self.log_corr = np.concatenate((self.log_corr, compute(pts)))

    def get(self, j_lo: int, j_hi: int, compute):
        """Patch arrays for panels starting in ``[j_lo, j_hi)``."""
        if self.hi <= self.lo:
            self._build(j_lo, j_hi, compute)
            self.lo, self.hi = j_lo, j_hi
        if j_lo < self.lo:
            self._build(j_lo, self.lo, compute)
            self.lo = j_lo
        if j_hi > self.hi:
            self._build(self.hi, j_hi, compute)
            self.hi = j_hi
        keep_panel = (self.starts >= j_lo) & (self.starts < j_hi)
        keep_point = (self.point_start >= j_lo) & (self.point_start < j_hi)
        return (
            self.starts[keep_panel],
            self.point_start[keep_point],
            self.points[keep_point],
            self.weights[keep_point],
            self.log_corr[keep_point],
        )


@dataclass(eq=False)
class PivotSpec:
    """Everything needed to evaluate and invert the pivot for one leaf.

    ``lower``/``upper``/``num_points`` fix the lattice spacing; the
    integration range grows past them in whole lattice steps whenever the
    hypothesised mean moves further than ``HALF_WINDOW`` standard deviations.
    """

    stats: LeafKeyStats
    policy: TemperaturePolicy
    measure: ImpurityMeasure = GINI
    lower: float | None = None
    upper: float | None = None
    num_points: int = 2049
    alpha: float = 0.1
    sigma: float | None = None
    _lattice: _Lattice | None = field(default=None, init=False, repr=False)
    _patches: _Patches | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.sigma is None:
            self.sigma = self.stats.sigma1
        if not self.sigma > 0:
            raise ValueError("pivot needs a positive standard deviation")
        t1, s = self.stats.t1, self.sigma
        if self.lower is None:
            self.lower = t1 - HALF_WINDOW * s
        if self.upper is None:
            self.upper = t1 + HALF_WINDOW * s
        if self.lower > t1 - HALF_WINDOW * s * (1 - 1e-12) or self.upper < t1 + HALF_WINDOW * s * (1 - 1e-12):
            raise ValueError("quadrature bounds must cover t1 +/- 10 sigma")
        if self.num_points < 257 or self.num_points % 2 == 0:
            raise ValueError(f"num_points must be odd and >= 257, got {self.num_points}")
        if not 0.0 < self.alpha <= 0.5:
            raise ValueError(f"alpha must lie in (0, 0.5], got {self.alpha}")

    @property
    def step(self) -> float:
        return (self.upper - self.lower) / (self.num_points - 1)

    def log_correction_on(self, j_lo: int, j_hi: int) -> np.ndarray:
        if self._lattice is None:
            self._lattice = _Lattice(self.stats.t1, self.step)
        return self._lattice.get(
            j_lo, j_hi, lambda u: log_correction(self.stats, u, self.policy, self.measure)
        )

    def patches_on(self, j_lo: int, j_hi: int):
        if self._patches is None:
            reach = (WIDE_BRACKET + HALF_WINDOW + 2.0) * self.sigma
            t1 = self.stats.t1
            jumps = domain_jumps(self.stats, min(self.lower, t1 - reach), max(self.upper, t1 + reach))
            self._patches = _Patches(t1, self.step, jumps)
        return self._patches.get(
            j_lo, j_hi, lambda u: log_correction(self.stats, u, self.policy, self.measure)
        )


def _even_steps(distance: float, h: float) -> int:
    m = max(2, math.ceil(distance / h - 1e-9))
    return m + (m % 2)


def pivot(spec: PivotSpec, Pi1: float) -> float:
    """Conditional CDF of the leaf statistic at its observed value, given mean ``Pi1``.

    Decreasing in ``Pi1``; equals the normal CDF when no node depends on ``u``.
    """
    t1, s, h = spec.stats.t1, spec.sigma, spec.step
    lo = min(spec.lower, Pi1 - HALF_WINDOW * s)
    hi = max(spec.upper, Pi1 + HALF_WINDOW * s)
    m_lo, m_hi = _even_steps(t1 - lo, h), _even_steps(hi - t1, h)
    u = t1 + h * np.arange(-m_lo, m_hi + 1)
    log_f = -0.5 * ((u - Pi1) / s) ** 2 + spec.log_correction_on(-m_lo, m_hi)
    top = np.max(log_f)
    if not np.isfinite(top):
        raise PivotUnderflowError(f"integrand vanishes on [{u[0]:.6g}, {u[-1]:.6g}] at Pi={Pi1:.6g}")
    f = np.exp(log_f - top)
    below = _simpson(f[: m_lo + 1], h)
    above = _simpson(f[m_lo:], h)
    starts, owner, x, w, lc = spec.patches_on(-m_lo, m_hi)
    if starts.size:
        # swap the plain rule on panels with jumps for the piecewise one
        i = starts + m_lo
        plain = h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2])
        exact = w * np.exp(-0.5 * ((x - Pi1) / s) ** 2 + lc - top)
        below += exact[owner < 0].sum() - plain[starts < 0].sum()
        above += exact[owner >= 0].sum() - plain[starts >= 0].sum()
    total = below + above
    if total < 1e-300:
        raise PivotUnderflowError(f"normaliser {total:.3g} underflows at Pi={Pi1:.6g} (log max {top:.6g})")
    return float(min(max(below / total, 0.0), 1.0))


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    alpha: float
    scale: str = "pi"
    Pi_lower: float = math.nan
    Pi_upper: float = math.nan
    flags: tuple[str, ...] = ()

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def _monotone(points: dict[float, float]) -> bool:
    vals = [points[x] for x in sorted(points)]
    return all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def _dense_scan(spec: PivotSpec, width: float) -> tuple[float, float]:
    t1, s, a = spec.stats.t1, spec.sigma, spec.alpha
    grid = np.linspace(t1 - width * s, t1 + width * s, DENSE_SCAN_POINTS)
    vals = np.array([pivot(spec, x) for x in grid])
    keep = grid[(vals >= a / 2) & (vals <= 1 - a / 2)]
    if keep.size == 0:
        raise InversionError("no hypothesised mean has pivot inside the acceptance band")
    return float(keep.min()), float(keep.max())


def _bracket(f, target: float, t1: float, s: float, seen: dict[float, float]) -> tuple[float, float] | None:
    """Expand outward from ``t1`` until ``f - target`` changes sign."""

    def value(x: float) -> float:
        if x not in seen:
            seen[x] = f(x)
        return seen[x]

    offsets = [1.0, 2.0, 4.0, 8.0, 12.0, 16.0, BRACKET, WIDE_BRACKET]
    prev = t1
    if value(t1) >= target:
        # pivot decreases in the mean: the crossing lies to the right
        for off in offsets:
            x = t1 + off * s
            if value(x) <= target:
                return prev, x
            prev = x
    else:
        for off in offsets:
            x = t1 - off * s
            if value(x) >= target:
                return x, prev
            prev = x
    return None


def invert_pivot(spec: PivotSpec) -> ConfidenceInterval:
    """Equal-tailed interval ``{Pi : alpha/2 <= pivot(Pi) <= 1 - alpha/2}``."""
    t1, s, a = spec.stats.t1, spec.sigma, spec.alpha
    f = lambda x: pivot(spec, x)  # noqa: E731
    seen: dict[float, float] = {}
    flags: list[str] = []
    endpoints = []
    for target in (1 - a / 2, a / 2):
        br = _bracket(f, target, t1, s, seen)
        if br is None:
            raise InversionError(f"pivot does not cross {target} within +/-{WIDE_BRACKET} sigma")
        if max(abs(br[0] - t1), abs(br[1] - t1)) > BRACKET * s * (1 + 1e-12):
            flags.append("widened")
        root = bisect(lambda x: f(x) - target, br[0], br[1], xtol=1e-11 * max(1.0, s), maxiter=200)
        val = f(root)
        seen[root] = val
        if abs(val - target) > PIVOT_TOL:
            flags.append("tolerance")
        endpoints.append(root)

    if not _monotone(seen):
        flags.append("non-monotone")
        width = WIDE_BRACKET if "widened" in flags else BRACKET
        endpoints = list(_dense_scan(spec, width))
        log.info("pivot not monotone for leaf with t1=%.6g; used dense scan", t1)

    Pi_lo, Pi_hi = endpoints
    root_n = math.sqrt(spec.stats.n1)
    return ConfidenceInterval(
        lower=min(max(Pi_lo / root_n, 0.0), 1.0),
        upper=min(max(Pi_hi / root_n, 0.0), 1.0),
        alpha=a,
        Pi_lower=Pi_lo,
        Pi_upper=Pi_hi,
        flags=tuple(flags),
    )


@dataclass(frozen=True, eq=False)
class InferenceResult:
    leaf_id: int
    region: Region
    n_leaf: int
    pi_hat: float
    sigma_hat: float
    interval: ConfidenceInterval | None
    stats: LeafKeyStats | None = None
    flags: tuple[str, ...] = ()


def infer_all_leaves(
    fit: TreeFit,
    data: Dataset,
    alpha: float = 0.1,
    measure: ImpurityMeasure | None = None,
    num_points: int = 2049,
) -> list[InferenceResult]:
    """Selective interval for every leaf mean of a randomized tree."""
    policy = fit.config.policy
    if policy is None:
        raise ValueError("selective inference needs a tree grown by the exponential mechanism")
    if measure is None:
        measure = measure_by_name(fit.config.measure)
    results = []
    for path in leaf_paths(fit):
        leaf = path.leaf
        try:
            stats = build_leaf_keystats(path, data)
            ci = invert_pivot(PivotSpec(stats, policy, measure, num_points=num_points, alpha=alpha))
            results.append(
                InferenceResult(path.leaf_id, leaf.region, stats.n1, stats.pi_hat, stats.sigma1, ci, stats, ci.flags)
            )
        except (ArithmeticError, RuntimeError, ValueError) as exc:
            log.warning("leaf %d: inference failed: %s", path.leaf_id, exc)
            results.append(
                InferenceResult(
                    path.leaf_id, leaf.region, leaf.count, leaf.proportion, math.nan, None, None,
                    (f"error:{type(exc).__name__}",),
                )
            )
    return results


__all__ = [
    "Adaptive",
    "ConfidenceInterval",
    "Fixed",
    "InferenceResult",
    "PivotSpec",
    "PivotUnderflowError",
    "infer_all_leaves",
    "invert_pivot",
    "lambda_h",
    "log_correction",
    "pivot",
]
