"""Key statistics of a leaf and the gain functions they determine.

For a leaf ``l1`` reached through internal regions ``p_1 .. p_d`` the stacked
vector is ``(t1, v)`` with ``t1 = sqrt(n1) * pihat1`` and, per node ``h``, a
block ``(v^h, v^{h,2}, ..., v^{h,k_h})`` of orthogonalized proportions of the
parent and of the left child of every non-selected candidate.  Every gain on
the path is a function of this vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LEFT, Dataset, DatasetError, Region, left_masks, path_mask
from .impurity import GINI, ImpurityMeasure
from .tree import LeafPath

# affine arguments this close outside [0, 1] count as inside (rounding slack)
DOMAIN_TOL = 1e-12


def orthogonalized_proportion(region: Region, leaf: Region, data: Dataset) -> float:
    """``sqrt(n_R) * pihat_R`` with its projection on the leaf statistic removed."""
    if len(region) == 0 or len(leaf) == 0:
        raise DatasetError("orthogonalized proportion needs non-empty regions")
    y = data.outcomes
    n_r, n_1 = len(region), len(leaf)
    pi_r = y[region.indices].sum() / n_r
    pi_1 = y[leaf.indices].sum() / n_1
    overlap = np.intersect1d(region.indices, leaf.indices, assume_unique=True).size
    return float(np.sqrt(n_r) * pi_r - overlap / np.sqrt(n_1 * n_r) * np.sqrt(n_1) * pi_1)


def eta_components(n1, n_parent, nl_parent, n_child, nl_child) -> np.ndarray:
    """The eight scaling coefficients; broadcasts over child-count arrays.

    ``nl_*`` are the overlaps of each region with the leaf.
    """
    n1 = float(n1)
    n_parent = float(n_parent)
    n_child = np.asarray(n_child, dtype=float)
    nl_child = np.asarray(nl_child, dtype=float)
    n_other = n_parent - n_child
    r1 = np.sqrt(n1)
    ones = np.ones_like(n_child)
    return np.stack(
        [
            ones * r1 / n_parent,
            ones / np.sqrt(n_parent),
            nl_child / (n_child * r1),
            1.0 / np.sqrt(n_child),
            (nl_parent - nl_child) / (n_other * r1),
            np.sqrt(n_parent) / n_other,
            -np.sqrt(n_child) / n_other,
            n_child / n_parent,
        ],
        axis=-1,
    )


@dataclass(frozen=True)
class EtaVector:
    values: tuple[float, ...]
    n1: int
    n_parent: int
    n_child: int
    nl_parent: int
    nl_child: int

    def __getitem__(self, j: int) -> float:
        return self.values[j]

    def as_array(self) -> np.ndarray:
        return np.array(self.values)


def build_eta(parent_counts: tuple[int, int], child_counts: tuple[int, int], n1: int) -> EtaVector:
    """``parent_counts = (n_P, nl_P)``, ``child_counts = (n_child, nl_child)``."""
    n_p, nl_p = (int(c) for c in parent_counts)
    n_c, nl_c = (int(c) for c in child_counts)
    if not 0 < n_c < n_p:
        raise DatasetError(f"child size {n_c} must lie strictly between 0 and parent size {n_p}")
    if n1 < 1:
        raise DatasetError("leaf must be non-empty")
    if not (0 <= nl_c <= min(n_c, n1) and 0 <= nl_p <= min(n_p, n1) and nl_c <= nl_p):
        raise DatasetError("inconsistent leaf-overlap counts")
    values = eta_components(n1, n_p, nl_p, n_c, nl_c)
    return EtaVector(tuple(float(x) for x in values), n1, n_p, n_c, nl_p, nl_c)


def _in_domain(a):
    return (a >= -DOMAIN_TOL) & (a <= 1.0 + DOMAIN_TOL)


def g_eta_array(eta: np.ndarray, x, y, z, measure: ImpurityMeasure = GINI) -> np.ndarray:
    """Vectorised gain map; ``eta`` has the eight coefficients on its last axis.

    Returns 0 wherever any of the three proportions leaves [0, 1].
    """
    eta = np.asarray(eta, dtype=float)
    e = [eta[..., j] for j in range(8)]
    parent = e[0] * x + e[1] * y
    child = e[2] * x + e[3] * z
    other = e[4] * x + e[5] * y + e[6] * z
    inside = _in_domain(parent) & _in_domain(child) & _in_domain(other)
    clip = lambda a: np.clip(a, 0.0, 1.0)  # noqa: E731
    value = (
        measure.value(clip(parent))
        - e[7] * measure.value(clip(child))
        - (1.0 - e[7]) * measure.value(clip(other))
    )
    return np.where(inside, value, 0.0)


def g_eta(eta: EtaVector | np.ndarray, x: float, y: float, z: float, measure: ImpurityMeasure = GINI) -> float:
    vals = eta.as_array() if isinstance(eta, EtaVector) else eta
    return float(g_eta_array(vals, x, y, z, measure))


@dataclass(frozen=True, eq=False)
class NodeBlock:
    """Per-node bookkeeping in rotated candidate order (selected split first).

    ``child_stat[0]`` is the orthogonalized proportion of the on-path child;
    ``child_stat[k]`` for ``k >= 1`` that of candidate ``k``'s left child.
    """

    parent_stat: float
    child_stat: np.ndarray
    eta: np.ndarray
    n_parent: int
    nl_parent: int
    n_child: np.ndarray
    nl_child: np.ndarray
    temperature: float | None
    recorded_probabilities: np.ndarray

    @property
    def k(self) -> int:
        return self.eta.shape[0]


@dataclass(frozen=True, eq=False)
class LeafKeyStats:
    t1: float
    n1: int
    positives: int
    sigma1_sq: float
    blocks: tuple[NodeBlock, ...]

    @property
    def d(self) -> int:
        return len(self.blocks)

    @property
    def k(self) -> tuple[int, ...]:
        return tuple(b.k for b in self.blocks)

    @property
    def kbar(self) -> int:
        return 1 + sum(self.k)

    @property
    def pi_hat(self) -> float:
        return self.positives / self.n1

    @property
    def sigma1(self) -> float:
        return float(np.sqrt(self.sigma1_sq))

    @property
    def t_minus1(self) -> list[np.ndarray]:
        """Blocks ``(v^h, v^{h,2}, ..., v^{h,k_h})``."""
        return [np.concatenate(([b.parent_stat], b.child_stat[1:])) for b in self.blocks]

    @property
    def eta(self) -> list[np.ndarray]:
        return [b.eta for b in self.blocks]

    def stacked(self) -> np.ndarray:
        return np.concatenate([[self.t1], *self.t_minus1])

    def split_v(self, v: np.ndarray) -> list[np.ndarray]:
        v = np.asarray(v, dtype=float)
        if v.size != self.kbar - 1:
            raise ValueError(f"expected a vector of length {self.kbar - 1}, got {v.size}")
        return np.split(v, np.cumsum(self.k)[:-1]) if self.d else []

    def node_arguments(self, h: int, v: np.ndarray | None = None) -> tuple[float, np.ndarray]:
        """``(y, z)`` arguments of node ``h``'s gain maps at nuisance vector ``v``."""
        blocks = self.t_minus1 if v is None else self.split_v(v)
        y = blocks[h][0]
        # the leaf orthogonalized against itself is identically zero
        head = blocks[h + 1][0] if h + 1 < self.d else 0.0
        z = np.concatenate(([head], blocks[h][1:]))
        return float(y), z

    def node_affine(self, h: int, v: np.ndarray | None = None) -> tuple:
        """Intercepts and slopes in ``u`` of the three proportions at node ``h``.

        Returns ``(a0, a1, b0, b1, c0, c1, w)``: parent (scalars), selected or
        candidate child and its complement (arrays), child share ``w``.
        """
        y, z = self.node_arguments(h, v)
        e = self.blocks[h].eta
        return (
            float(e[0, 1] * y),
            float(e[0, 0]),
            e[:, 3] * z,
            e[:, 2].copy(),
            e[:, 5] * y + e[:, 6] * z,
            e[:, 4].copy(),
            e[:, 7].copy(),
        )

    def node_gains(self, h: int, u, measure: ImpurityMeasure = GINI, v: np.ndarray | None = None) -> np.ndarray:
        """All ``k_h`` gain functions of node ``h``; shape ``u.shape + (k_h,)``."""
        y, z = self.node_arguments(h, v)
        u = np.asarray(u, dtype=float)[..., None]
        return g_eta_array(self.blocks[h].eta, u, y, z, measure)


def gain_functions(
    stats: LeafKeyStats,
    h: int,
    k: int,
    u: float,
    v: np.ndarray | None = None,
    measure: ImpurityMeasure = GINI,
) -> float:
    """Gain of candidate ``k`` (0 = selected split) at node ``h`` as a function of ``(u, v)``."""
    if not 0 <= h < stats.d:
        raise IndexError(f"node index {h} outside 0..{stats.d - 1}")
    if not 0 <= k < stats.blocks[h].k:
        raise IndexError(f"candidate index {k} outside 0..{stats.blocks[h].k - 1}")
    y, z = stats.node_arguments(h, v)
    return g_eta(stats.blocks[h].eta[k], u, y, z[k], measure)


def build_leaf_keystats(path: LeafPath, data: Dataset) -> LeafKeyStats:
    y = data.outcomes.astype(float)
    leaf_idx = path.leaf.region.indices
    n1 = leaf_idx.size
    if n1 == 0:
        raise DatasetError("leaf has no observations")
    positives = int(y[leaf_idx].sum())
    pi1 = positives / n1
    in_leaf = np.zeros(data.n)
    in_leaf[leaf_idx] = 1.0

    blocks = []
    for node, side, order in zip(path.nodes, path.child_sides, path.orders):
        idx = node.region.indices
        n_p = idx.size
        y_p, l_p = y[idx], in_leaf[idx]
        pos_p, nl_p = y_p.sum(), l_p.sum()
        feats, thr = node.features[order], node.thresholds[order]
        goes_left = left_masks(data, idx, feats, thr)
        n_c = goes_left.sum(axis=0).astype(float)
        pos_c = y_p @ goes_left
        nl_c = l_p @ goes_left
        if side != LEFT:
            n_c[0], pos_c[0], nl_c[0] = n_p - n_c[0], pos_p - pos_c[0], nl_p - nl_c[0]
        blocks.append(
            NodeBlock(
                parent_stat=float((pos_p - nl_p * pi1) / np.sqrt(n_p)),
                child_stat=(pos_c - nl_c * pi1) / np.sqrt(n_c),
                eta=eta_components(n1, n_p, nl_p, n_c, nl_c),
                n_parent=int(n_p),
                nl_parent=int(nl_p),
                n_child=n_c.astype(np.int64),
                nl_child=nl_c.astype(np.int64),
                temperature=node.temperature,
                recorded_probabilities=node.probabilities[order],
            )
        )

    # clamp keeps the plug-in variance positive for pure leaves
    clamped = min(max(pi1, 1.0 / (2 * n1)), 1.0 - 1.0 / (2 * n1))
    return LeafKeyStats(
        t1=float(np.sqrt(n1) * pi1),
        n1=int(n1),
        positives=positives,
        sigma1_sq=float(clamped * (1.0 - clamped)),
        blocks=tuple(blocks),
    )


def linear_representation_oracle(path: LeafPath, data: Dataset) -> np.ndarray:
    """Stacked key statistics as ``n^{-1/2} * sum_i a_i y_i`` with explicit weights.

    Regions are re-derived from the raw rules, not taken from the fit. Test
    oracle only.
    """
    X, y = data.features, data.outcomes.astype(float)
    n = data.n
    leaf_path = path.leaf.region.path
    in_leaf = path_mask(X, leaf_path).astype(float)
    n1 = in_leaf.sum()
    columns = [np.sqrt(n / n1) * in_leaf]
    for h, (node, order) in enumerate(zip(path.nodes, path.orders)):
        in_parent = path_mask(X, leaf_path[:h]).astype(float)
        columns.append(np.sqrt(n / in_parent.sum()) * (in_parent - in_leaf))
        for k in order[1:]:
            in_child = in_parent * (X[:, node.features[k]] <= node.thresholds[k])
            n_child = in_child.sum()
            overlap = (in_child * in_leaf).sum()
            columns.append(np.sqrt(n / n_child) * (in_child - overlap / n1 * in_leaf))
    weights = np.column_stack(columns)
    return weights.T @ y / np.sqrt(n)
