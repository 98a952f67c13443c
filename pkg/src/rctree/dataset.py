"""Tabular data, regions of the predictor space, and binary split rules."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class DatasetError(ValueError):
    """Raised when input data or a split request is invalid."""


LEFT = "left"
RIGHT = "right"


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n`` observations of ``p`` numeric predictors with a binary outcome."""

    features: np.ndarray
    outcomes: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        X = np.array(self.features, dtype=float)
        y = np.asarray(self.outcomes)
        if X.ndim != 2:
            raise DatasetError(f"features must be a 2-d matrix, got shape {X.shape}")
        n, p = X.shape
        if n < 1:
            raise DatasetError("no observations")
        if p < 1:
            raise DatasetError("no predictors")
        if y.shape != (n,):
            raise DatasetError(f"expected {n} outcomes, got shape {y.shape}")
        bad = ~np.isin(y, (0, 1))
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DatasetError(f"row {row + 1}: outcome {y[row]!r} is not 0 or 1")
        finite = np.isfinite(X)
        if not finite.all():
            row, col = np.argwhere(~finite)[0]
            raise DatasetError(f"row {row + 1}, column {col}: feature value {X[row, col]} is not finite")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(p))
        if len(names) != p:
            raise DatasetError(f"expected {p} feature names, got {len(names)}")
        X.setflags(write=False)
        y = y.astype(np.int8)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "outcomes", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.features[idx], self.outcomes[idx], self.feature_names)

    def full_region(self) -> "Region":
        return Region(np.arange(self.n))


@dataclass(frozen=True)
class SplitRule:
    """Binary split ``x[feature_index] <= threshold`` (left) versus ``>`` (right)."""

    feature_index: int
    threshold: float

    def goes_left(self, x: np.ndarray) -> np.ndarray | bool:
        return x[..., self.feature_index] <= self.threshold


@dataclass(frozen=True, eq=False)
class Region:
    """Sorted observation indices plus the rule path that selects them.

    ``path`` holds ``(feature_index, threshold, side)`` triples, applied from
    the root downwards.
    """

    indices: np.ndarray
    path: tuple[tuple[int, float, str], ...] = field(default=())

    def __post_init__(self) -> None:
        idx = np.unique(np.asarray(self.indices, dtype=np.intp))
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "path", tuple(self.path))

    def __len__(self) -> int:
        return len(self.indices)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Region):
            return NotImplemented
        return self.path == other.path and np.array_equal(self.indices, other.indices)

    @classmethod
    def from_path(cls, data: Dataset, path: Sequence[tuple[int, float, str]]) -> "Region":
        """Re-evaluate ``path`` against the raw features."""
        return cls(path_mask(data.features, path).nonzero()[0], tuple(path))


def path_mask(X: np.ndarray, path: Sequence[tuple[int, float, str]]) -> np.ndarray:
    mask = np.ones(X.shape[0], dtype=bool)
    for feature, threshold, side in path:
        left = X[:, feature] <= threshold
        mask &= left if side == LEFT else ~left
    return mask


def load_csv(path: str | Path, outcome_column: str | int) -> Dataset:
    """Read a header-first CSV with numeric features and a 0/1 outcome column."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DatasetError("no observations")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DatasetError("no observations")

    if outcome_column in header:
        col = header.index(outcome_column)
    elif isinstance(outcome_column, int) or str(outcome_column).lstrip("-").isdigit():
        col = int(outcome_column)
        if not -len(header) <= col < len(header):
            raise DatasetError(f"outcome column index {col} out of range for {len(header)} columns")
        col %= len(header)
    else:
        raise DatasetError(f"outcome column {outcome_column!r} not found in header {header}")

    names = [h for j, h in enumerate(header) if j != col]
    if not names:
        raise DatasetError("no predictor columns besides the outcome")
    X = np.empty((len(body), len(names)))
    y = np.empty(len(body), dtype=np.int8)
    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise DatasetError(f"row {i}: expected {len(header)} cells, found {len(row)}")
        cell = row[col].strip()
        if cell not in ("0", "1"):
            raise DatasetError(f"row {i}, column {header[col]!r}: outcome {cell!r} is not 0 or 1")
        y[i - 1] = int(cell)
        values = [c for j, c in enumerate(row) if j != col]
        for j, (name, c) in enumerate(zip(names, values)):
            try:
                v = float(c)
            except ValueError:
                raise DatasetError(f"row {i}, column {name!r}: cannot parse {c.strip()!r} as a number") from None
            if not np.isfinite(v):
                raise DatasetError(f"row {i}, column {name!r}: feature value {c.strip()!r} is not finite")
            X[i - 1, j] = v
    return Dataset(X, y, tuple(names))


def split_region(parent: Region, rule: SplitRule, data: Dataset) -> tuple[Region, Region]:
    """Partition ``parent`` into ``x <= threshold`` (left) and the complement."""
    goes_left = data.features[parent.indices, rule.feature_index] <= rule.threshold
    left_idx = parent.indices[goes_left]
    right_idx = parent.indices[~goes_left]
    if len(left_idx) == 0 or len(right_idx) == 0:
        raise DatasetError(
            f"impermissible split: feature {rule.feature_index} at {rule.threshold} leaves an empty child"
        )
    step = (rule.feature_index, float(rule.threshold))
    return (
        Region(left_idx, parent.path + (step + (LEFT,),)),
        Region(right_idx, parent.path + (step + (RIGHT,),)),
    )


def candidate_arrays(parent: Region, data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Feature indices and thresholds of every permissible split of ``parent``.

    Thresholds are midpoints between consecutive distinct values, ordered by
    feature then threshold.
    """
    features, thresholds = [], []
    block = data.features[parent.indices]
    for j in range(data.p):
        values = np.unique(block[:, j])
        if len(values) < 2:
            continue
        lo, hi = values[:-1], values[1:]
        mid = (lo + hi) / 2.0
        # adjacent floats can round the midpoint up onto the upper value
        mid = np.where(mid < hi, mid, lo)
        features.append(np.full(len(mid), j, dtype=np.intp))
        thresholds.append(mid)
    if not features:
        return np.empty(0, dtype=np.intp), np.empty(0)
    return np.concatenate(features), np.concatenate(thresholds)


def enumerate_candidate_splits(parent: Region, data: Dataset) -> list[SplitRule]:
    if len(parent) < 2:
        raise DatasetError("a region needs at least 2 observations to be split")
    features, thresholds = candidate_arrays(parent, data)
    return [SplitRule(int(f), float(t)) for f, t in zip(features, thresholds)]


def left_masks(data: Dataset, indices: np.ndarray, features: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Boolean matrix (observations x candidates): True where the row goes left."""
    return data.features[np.ix_(indices, features)] <= thresholds
