"""Exponential-mechanism split sampling at fixed or gain-scaled temperature."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .dataset import SplitRule


@dataclass(frozen=True)
class Fixed:
    """Same temperature ``epsilon`` at every node."""

    epsilon: float

    def __post_init__(self) -> None:
        if not self.epsilon >= 0 or not np.isfinite(self.epsilon):
            raise ValueError(f"fixed temperature must be finite and >= 0, got {self.epsilon}")

    def to_dict(self) -> dict:
        return {"kind": "fixed", "epsilon": self.epsilon}


@dataclass(frozen=True)
class Adaptive:
    """Per-node temperature ``tau * k / sum(gains)``, i.e. ``tau`` over the mean gain."""

    tau: float

    def __post_init__(self) -> None:
        if not self.tau > 0 or not np.isfinite(self.tau):
            raise ValueError(f"adaptive tau must be finite and > 0, got {self.tau}")

    def to_dict(self) -> dict:
        return {"kind": "adaptive", "tau": self.tau}


TemperaturePolicy = Fixed | Adaptive


def policy_from_dict(d: dict) -> TemperaturePolicy:
    if d["kind"] == "fixed":
        return Fixed(float(d["epsilon"]))
    if d["kind"] == "adaptive":
        return Adaptive(float(d["tau"]))
    raise ValueError(f"unknown temperature policy {d['kind']!r}")


def resolve_temperature(policy: TemperaturePolicy, gains: Sequence[float]) -> float:
    gains = np.asarray(gains, dtype=float)
    if gains.size == 0:
        raise ValueError("cannot resolve a temperature without gains")
    if isinstance(policy, Fixed):
        return float(policy.epsilon)
    total = gains.sum()
    if total <= 0.0:
        # all-zero gains: uniform sampling
        return 0.0
    return float(policy.tau * gains.size / total)


def log_split_probabilities(gains: Sequence[float], temperature: float) -> np.ndarray:
    scores = temperature * np.asarray(gains, dtype=float)
    if scores.size == 0:
        raise ValueError("split probabilities need at least one candidate")
    if not np.all(np.isfinite(scores)):
        raise ValueError("gains and temperature must give finite scores")
    return scores - logsumexp(scores)


def split_probabilities(gains: Sequence[float], temperature: float) -> np.ndarray:
    """Softmax of ``temperature * gains`` computed in log-space."""
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature}")
    return np.exp(log_split_probabilities(gains, temperature))


@dataclass(frozen=True, eq=False)
class SplitDistribution:
    candidates: tuple[SplitRule, ...]
    gains: np.ndarray
    temperature: float
    probabilities: np.ndarray

    @classmethod
    def from_gains(cls, candidates: Sequence[SplitRule], gains, temperature: float) -> "SplitDistribution":
        gains = np.asarray(gains, dtype=float)
        if len(candidates) != gains.size:
            raise ValueError("candidates and gains differ in length")
        return cls(tuple(candidates), gains, float(temperature), split_probabilities(gains, temperature))

    def __post_init__(self) -> None:
        probs = np.asarray(self.probabilities, dtype=float)
        if probs.size != len(self.candidates) or probs.size == 0:
            raise ValueError("probabilities must match the non-empty candidate list")
        if abs(probs.sum() - 1.0) > 1e-12 or np.any(probs < 0):
            raise ValueError("probabilities must be non-negative and sum to 1")


def sample_index(probabilities: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw in candidate order."""
    cdf = np.cumsum(probabilities)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(cdf) - 1))


def sample_split(dist: SplitDistribution, rng: np.random.Generator) -> SplitRule:
    return dist.candidates[sample_index(dist.probabilities, rng)]


_TINY = np.nextafter(0.0, 1.0)
_BELOW_ONE = np.nextafter(1.0, 0.0)


def standard_gumbel(rng: np.random.Generator, size) -> np.ndarray:
    u = np.clip(rng.random(size), _TINY, _BELOW_ONE)
    return -np.log(-np.log(u))


def sample_split_gumbel(gains: Sequence[float], temperature: float, rng: np.random.Generator) -> int:
    """Index maximising ``temperature * gain + Gumbel noise``."""
    scores = temperature * np.asarray(gains, dtype=float)
    if scores.size == 0:
        raise ValueError("need at least one candidate")
    return int(np.argmax(scores + standard_gumbel(rng, scores.size)))
