"""JSON export and import of fitted trees.

The document stores every node's candidate bookkeeping and the SHA-256 of the
training CSV. Loading rebuilds the leaf regions from the stored rules against
the data, so inference on a loaded tree matches inference on the original.
Floats go through ``json``'s shortest round-trip repr, which is bit-faithful.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .dataset import Dataset, Region, SplitRule, split_region
from .mechanism import policy_from_dict
from .tree import InternalNode, LeafNode, TreeConfig, TreeFit, TreeNode

FORMAT_VERSION = 1


class TreeFormatError(ValueError):
    pass


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _node_to_dict(node: TreeNode, names: tuple[str, ...]) -> dict:
    if isinstance(node, LeafNode):
        return {
            "kind": "leaf",
            "depth": node.depth,
            "count": node.count,
            "positives": node.positives,
            "proportion": node.proportion,
        }
    rule = node.rule
    return {
        "kind": "internal",
        "depth": node.depth,
        "feature": rule.feature_index,
        "feature_name": names[rule.feature_index],
        "threshold": rule.threshold,
        "candidate_features": [int(f) for f in node.features],
        "candidate_thresholds": [float(t) for t in node.thresholds],
        "gains": [float(g) for g in node.gains],
        "temperature": node.temperature,
        "probabilities": [float(q) for q in node.probabilities],
        "sampled_index": node.sampled_index,
        "left": _node_to_dict(node.left, names),
        "right": _node_to_dict(node.right, names),
    }


def tree_to_dict(fit: TreeFit, data: Dataset, data_sha256: str | None = None) -> dict:
    cfg = fit.config
    return {
        "format_version": FORMAT_VERSION,
        "data_sha256": data_sha256,
        "n": data.n,
        "feature_names": list(data.feature_names),
        "config": {
            "max_depth": cfg.max_depth,
            "min_samples": cfg.min_samples,
            "policy": None if cfg.policy is None else cfg.policy.to_dict(),
            "seed": cfg.seed,
            "measure": cfg.measure,
        },
        "root": _node_to_dict(fit.root, data.feature_names),
    }


def save_tree(fit: TreeFit, data: Dataset, path: str | Path, data_sha256: str | None = None) -> None:
    doc = tree_to_dict(fit, data, data_sha256)
    Path(path).write_text(json.dumps(doc, separators=(",", ":"), allow_nan=False) + "\n", encoding="utf-8")


def _array(values, dtype) -> np.ndarray:
    out = np.asarray(values, dtype=dtype)
    out.setflags(write=False)
    return out


def _node_from_dict(d: dict, region: Region, data: Dataset) -> TreeNode:
    kind = d.get("kind")
    if kind == "leaf":
        leaf = LeafNode(region, int(d["depth"]), len(region), int(data.outcomes[region.indices].sum()))
        if leaf.count != d["count"] or leaf.positives != d["positives"]:
            raise TreeFormatError(
                f"leaf at depth {leaf.depth}: stored counts ({d['count']}, {d['positives']}) "
                f"do not match the data ({leaf.count}, {leaf.positives})"
            )
        return leaf
    if kind != "internal":
        raise TreeFormatError(f"unknown node kind {kind!r}")
    features = _array(d["candidate_features"], np.intp)
    thresholds = _array(d["candidate_thresholds"], float)
    k = int(d["sampled_index"])
    if not 0 <= k < features.size:
        raise TreeFormatError(f"sampled index {k} outside {features.size} candidates")
    rule = SplitRule(int(features[k]), float(thresholds[k]))
    if rule.feature_index != d["feature"] or rule.threshold != d["threshold"]:
        raise TreeFormatError("selected split does not match the candidate at sampled_index")
    left, right = split_region(region, rule, data)
    temperature = d["temperature"]
    return InternalNode(
        region=region,
        depth=int(d["depth"]),
        features=features,
        thresholds=thresholds,
        gains=_array(d["gains"], float),
        temperature=None if temperature is None else float(temperature),
        probabilities=_array(d["probabilities"], float),
        sampled_index=k,
        left=_node_from_dict(d["left"], left, data),
        right=_node_from_dict(d["right"], right, data),
    )


def tree_from_dict(doc: dict, data: Dataset, data_sha256: str | None = None) -> TreeFit:
    """Rebuild a fit against ``data``; checks the checksum when both sides have one."""
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise TreeFormatError(f"unsupported tree format version {version!r}")
    stored = doc.get("data_sha256")
    if data_sha256 is not None and stored is not None and stored != data_sha256:
        raise TreeFormatError(
            "data checksum mismatch: the tree must be used with the exact CSV it was fitted on "
            f"(tree expects {stored[:12]}..., got {data_sha256[:12]}...)"
        )
    if doc.get("n") != data.n:
        raise TreeFormatError(f"tree was fitted on {doc.get('n')} rows, data has {data.n}")
    cfg = doc["config"]
    policy = None if cfg["policy"] is None else policy_from_dict(cfg["policy"])
    config = TreeConfig(int(cfg["max_depth"]), int(cfg["min_samples"]), policy, cfg["seed"], cfg["measure"])
    try:
        root = _node_from_dict(doc["root"], data.full_region(), data)
    except (KeyError, TypeError) as exc:
        raise TreeFormatError(f"malformed tree document: {exc!r}") from exc
    return TreeFit(root, config)


def load_tree(path: str | Path, data: Dataset, data_sha256: str | None = None) -> TreeFit:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise TreeFormatError(f"cannot read tree {path}: {exc}") from exc
    return tree_from_dict(doc, data, data_sha256)
