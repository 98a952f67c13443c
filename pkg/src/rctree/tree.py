"""Randomized classification trees grown by the exponential mechanism, plus greedy CART."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .dataset import LEFT, RIGHT, Dataset, Region, SplitRule, candidate_arrays, split_region
from .impurity import GINI, ImpurityMeasure, candidate_gains
from .mechanism import TemperaturePolicy, sample_index, split_probabilities, resolve_temperature


@dataclass(frozen=True, eq=False)
class LeafNode:
    region: Region
    depth: int
    count: int
    positives: int

    @property
    def proportion(self) -> float:
        return self.positives / self.count

    @property
    def prediction(self) -> int:
        return int(self.proportion >= 0.5)


@dataclass(frozen=True, eq=False)
class InternalNode:
    """A split node with its full candidate bookkeeping.

    ``temperature`` is ``None`` for greedy (CART) nodes, whose
    ``probabilities`` are then one-hot on the argmax.
    """

    region: Region
    depth: int
    features: np.ndarray
    thresholds: np.ndarray
    gains: np.ndarray
    temperature: float | None
    probabilities: np.ndarray
    sampled_index: int
    left: "TreeNode"
    right: "TreeNode"

    @property
    def candidates(self) -> list[SplitRule]:
        return [SplitRule(int(f), float(t)) for f, t in zip(self.features, self.thresholds)]

    @property
    def rule(self) -> SplitRule:
        k = self.sampled_index
        return SplitRule(int(self.features[k]), float(self.thresholds[k]))


TreeNode = InternalNode | LeafNode


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int
    min_samples: int
    policy: TemperaturePolicy | None
    seed: int | None
    measure: str = "gini"

    @property
    def method(self) -> str:
        return "cart" if self.policy is None else "rct"


@dataclass(frozen=True, eq=False)
class TreeFit:
    root: TreeNode
    config: TreeConfig
    leaves: tuple[LeafNode, ...] = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "leaves", tuple(_iter_leaves(self.root)))

    def internal_nodes(self) -> Iterator[InternalNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, InternalNode):
                yield node
                stack.extend((node.right, node.left))


def _iter_leaves(node: TreeNode) -> Iterator[LeafNode]:
    if isinstance(node, LeafNode):
        yield node
    else:
        yield from _iter_leaves(node.left)
        yield from _iter_leaves(node.right)


def node_rng(seed: int, key: tuple[int, ...]) -> np.random.Generator:
    """Stream for the node reached by ``key`` (0 = left, 1 = right) from the root."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _make_leaf(region: Region, depth: int, data: Dataset) -> LeafNode:
    return LeafNode(region, depth, len(region), int(data.outcomes[region.indices].sum()))


def _grow(
    data: Dataset,
    region: Region,
    depth: int,
    key: tuple[int, ...],
    config: TreeConfig,
    measure: ImpurityMeasure,
) -> TreeNode:
    # max_depth bounds the number of splits on any root-to-leaf path
    if depth >= config.max_depth or len(region) <= config.min_samples:
        return _make_leaf(region, depth, data)
    features, thresholds = candidate_arrays(region, data)
    if features.size == 0:
        return _make_leaf(region, depth, data)
    gains = candidate_gains(region, features, thresholds, data, measure)
    if config.policy is None:
        temperature = None
        chosen = int(np.argmax(gains))
        probs = np.zeros(gains.size)
        probs[chosen] = 1.0
    else:
        temperature = resolve_temperature(config.policy, gains)
        probs = split_probabilities(gains, temperature)
        chosen = sample_index(probs, node_rng(config.seed, key))
    rule = SplitRule(int(features[chosen]), float(thresholds[chosen]))
    left, right = split_region(region, rule, data)
    for arr in (features, thresholds, gains, probs):
        arr.setflags(write=False)
    return InternalNode(
        region=region,
        depth=depth,
        features=features,
        thresholds=thresholds,
        gains=gains,
        temperature=temperature,
        probabilities=probs,
        sampled_index=chosen,
        left=_grow(data, left, depth + 1, key + (0,), config, measure),
        right=_grow(data, right, depth + 1, key + (1,), config, measure),
    )


def _check_sizes(max_depth: int, min_samples: int) -> None:
    if max_depth < 0:
        raise ValueError(f"max_depth must be >= 0, got {max_depth}")
    if min_samples < 1:
        raise ValueError(f"min_samples must be >= 1, got {min_samples}")


def grow_rct(
    data: Dataset,
    max_depth: int,
    min_samples: int,
    policy: TemperaturePolicy,
    measure: ImpurityMeasure = GINI,
    seed: int = 0,
) -> TreeFit:
    """Grow a tree whose splits are sampled from the exponential mechanism."""
    _check_sizes(max_depth, min_samples)
    config = TreeConfig(max_depth, min_samples, policy, int(seed), measure.name)
    return TreeFit(_grow(data, data.full_region(), 0, (), config, measure), config)


def grow_cart(data: Dataset, max_depth: int, min_samples: int, measure: ImpurityMeasure = GINI) -> TreeFit:
    """Greedy tree: argmax-gain split at every node, lowest candidate index on ties."""
    _check_sizes(max_depth, min_samples)
    config = TreeConfig(max_depth, min_samples, None, None, measure.name)
    return TreeFit(_grow(data, data.full_region(), 0, (), config, measure), config)


@dataclass(frozen=True, eq=False)
class LeafPath:
    """Ancestral path of one leaf.

    ``orders[h]`` permutes node ``h``'s stored candidates so that the
    selected split comes first and the rest keep enumeration order.
    ``child_sides[h]`` says which child of node ``h`` the path enters.
    """

    leaf: LeafNode
    leaf_id: int
    nodes: tuple[InternalNode, ...]
    child_sides: tuple[str, ...]
    orders: tuple[np.ndarray, ...]

    @property
    def depth(self) -> int:
        return len(self.nodes)

    @property
    def selected(self) -> tuple[SplitRule, ...]:
        return tuple(node.rule for node in self.nodes)

    @property
    def candidate_sets(self) -> tuple[list[SplitRule], ...]:
        return tuple(
            [SplitRule(int(node.features[k]), float(node.thresholds[k])) for k in order]
            for node, order in zip(self.nodes, self.orders)
        )

    @property
    def k(self) -> tuple[int, ...]:
        return tuple(len(order) for order in self.orders)


def _rotation(size: int, first: int) -> np.ndarray:
    rest = np.delete(np.arange(size), first)
    return np.concatenate(([first], rest)).astype(np.intp)


def leaf_paths(fit: TreeFit) -> list[LeafPath]:
    paths: list[LeafPath] = []

    def walk(node: TreeNode, nodes: tuple, sides: tuple) -> None:
        if isinstance(node, LeafNode):
            orders = tuple(_rotation(n.features.size, n.sampled_index) for n in nodes)
            paths.append(LeafPath(node, len(paths), nodes, sides, orders))
            return
        walk(node.left, nodes + (node,), sides + (LEFT,))
        walk(node.right, nodes + (node,), sides + (RIGHT,))

    walk(fit.root, (), ())
    return paths


def route(fit: TreeFit, x: np.ndarray) -> LeafNode:
    node = fit.root
    while isinstance(node, InternalNode):
        k = node.sampled_index
        node = node.left if x[node.features[k]] <= node.thresholds[k] else node.right
    return node


def predict(fit: TreeFit, x) -> tuple[int, float]:
    """Majority-vote class and leaf proportion for one feature vector."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("feature vector must be finite")
    leaf = route(fit, x)
    return leaf.prediction, leaf.proportion


def predict_proba(fit: TreeFit, X: np.ndarray) -> np.ndarray:
    """Leaf proportions for every row of ``X``."""
    X = np.asarray(X, dtype=float)
    out = np.empty(X.shape[0])
    _fill(fit.root, X, np.arange(X.shape[0]), out)
    return out


def _fill(node: TreeNode, X: np.ndarray, rows: np.ndarray, out: np.ndarray) -> None:
    if isinstance(node, LeafNode):
        out[rows] = node.proportion
        return
    k = node.sampled_index
    goes_left = X[rows, node.features[k]] <= node.thresholds[k]
    _fill(node.left, X, rows[goes_left], out)
    _fill(node.right, X, rows[~goes_left], out)
