"""Impurity measures and the information gain of a binary split."""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np

from .dataset import Dataset, DatasetError, Region, SplitRule, left_masks


class ImpurityMeasure(ABC):
    """Information measure evaluated on a region's sample proportion."""

    name: str

    @abstractmethod
    def value(self, proportion):
        """Impurity at ``proportion``; must accept scalars and arrays."""

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class Gini(ImpurityMeasure):
    name = "gini"

    def value(self, proportion):
        return 2.0 * proportion * (1.0 - proportion)


GINI = Gini()

_MEASURES = {"gini": GINI}


def measure_by_name(name: str) -> ImpurityMeasure:
    try:
        return _MEASURES[name]
    except KeyError:
        raise ValueError(f"unknown impurity measure {name!r}") from None


def region_proportion(region: Region, data: Dataset) -> float:
    if len(region) == 0:
        raise DatasetError("proportion of an empty region is undefined")
    return int(data.outcomes[region.indices].sum()) / len(region)


def weighted_gain(measure: ImpurityMeasure, n_parent, pos_parent, n_left, pos_left):
    """Information gain from integer counts; broadcasts over candidate arrays."""
    n_parent = np.asarray(n_parent, dtype=float)
    n_left = np.asarray(n_left, dtype=float)
    n_right = n_parent - n_left
    pos_right = np.asarray(pos_parent, dtype=float) - pos_left
    return (
        measure.value(pos_parent / n_parent)
        - (n_left / n_parent) * measure.value(pos_left / n_left)
        - (n_right / n_parent) * measure.value(pos_right / n_right)
    )


def information_gain(parent: Region, rule: SplitRule, data: Dataset, measure: ImpurityMeasure = GINI) -> float:
    idx = parent.indices
    goes_left = data.features[idx, rule.feature_index] <= rule.threshold
    n_left = int(goes_left.sum())
    if n_left == 0 or n_left == len(idx):
        raise DatasetError(
            f"impermissible split: feature {rule.feature_index} at {rule.threshold} leaves an empty child"
        )
    y = data.outcomes[idx]
    return float(weighted_gain(measure, len(idx), int(y.sum()), n_left, int(y[goes_left].sum())))


def candidate_gains(
    parent: Region,
    features: np.ndarray,
    thresholds: np.ndarray,
    data: Dataset,
    measure: ImpurityMeasure = GINI,
) -> np.ndarray:
    """Vectorised gains for candidate splits given as parallel arrays."""
    idx = parent.indices
    goes_left = left_masks(data, idx, features, thresholds)
    n_left = goes_left.sum(axis=0)
    if np.any(n_left == 0) or np.any(n_left == len(idx)):
        raise DatasetError("impermissible split among candidates")
    y = data.outcomes[idx].astype(float)
    return weighted_gain(measure, len(idx), y.sum(), n_left, y @ goes_left)


def gain_profile(
    parent: Region,
    candidates: Sequence[SplitRule],
    data: Dataset,
    measure: ImpurityMeasure = GINI,
) -> np.ndarray:
    if len(candidates) == 0:
        raise ValueError("gain profile needs at least one candidate split")
    features = np.array([c.feature_index for c in candidates], dtype=np.intp)
    thresholds = np.array([c.threshold for c in candidates], dtype=float)
    return candidate_gains(parent, features, thresholds, data, measure)
