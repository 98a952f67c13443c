"""Randomized classification trees with selective inference for leaf means."""

from .dataset import Dataset, DatasetError, Region, SplitRule, load_csv
from .impurity import GINI, Gini, ImpurityMeasure, information_gain
from .inference import ConfidenceInterval, InferenceResult, PivotSpec, infer_all_leaves, invert_pivot, pivot
from .keystats import LeafKeyStats, build_leaf_keystats
from .mechanism import Adaptive, Fixed, sample_split, sample_split_gumbel, split_probabilities
from .tree import TreeFit, grow_cart, grow_rct, leaf_paths, predict, predict_proba
from .treeio import load_tree, save_tree

__version__ = "0.1.0"

__all__ = [
    "Adaptive",
    "ConfidenceInterval",
    "Dataset",
    "DatasetError",
    "Fixed",
    "GINI",
    "Gini",
    "ImpurityMeasure",
    "InferenceResult",
    "LeafKeyStats",
    "PivotSpec",
    "Region",
    "SplitRule",
    "TreeFit",
    "build_leaf_keystats",
    "grow_cart",
    "grow_rct",
    "infer_all_leaves",
    "information_gain",
    "invert_pivot",
    "leaf_paths",
    "load_csv",
    "load_tree",
    "pivot",
    "predict",
    "predict_proba",
    "sample_split",
    "sample_split_gumbel",
    "save_tree",
    "split_probabilities",
]
