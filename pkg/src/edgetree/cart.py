"""Binary CART training with Gini impurity, plus minimal cost-complexity pruning.

Split semantics shared with the C emitters: a record goes LEFT when
feature <= threshold. Thresholds are midpoints between consecutive distinct
sorted feature values, so they never coincide with a training value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .flowdata import LabeledDataset

TREE_FORMAT_VERSION = "edgetree-v1"


class TrainError(ValueError):
    """Raised when a dataset cannot be fit under the given configuration."""


class TreeFileError(ValueError):
    """Raised for malformed or wrong-version tree files."""


@dataclass(frozen=True)
class TrainConfig:
    """CART hyperparameters. Criterion is Gini, splitter is best-split,
    all features are considered at every node; those are fixed by design."""

    max_depth: int
    ccp_alpha: float = 0.0001
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    seed: int = 0  # reserved: the algorithm itself is deterministic

    def __post_init__(self):
        if self.max_depth < 1:
            raise TrainError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.ccp_alpha < 0:
            raise TrainError(f"ccp_alpha must be >= 0, got {self.ccp_alpha}")


@dataclass
class Leaf:
    class_counts: tuple[int, int]

    @property
    def predicted(self) -> int:
        c0, c1 = self.class_counts
        return 1 if c1 > c0 else 0  # tie -> benign


@dataclass
class Internal:
    feature_index: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Internal]


@dataclass
class DecisionTree:
    root: TreeNode
    n_features: int

    @property
    def depth(self) -> int:
        return _depth(self.root)

    @property
    def node_count(self) -> int:
        return _count_nodes(self.root)

    @property
    def leaf_count(self) -> int:
        return _count_leaves(self.root)

    @property
    def features_used(self) -> frozenset[int]:
        used: set[int] = set()
        _collect_features(self.root, used)
        return frozenset(used)


def _depth(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(_depth(node.left), _depth(node.right))


def _count_nodes(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 1
    return 1 + _count_nodes(node.left) + _count_nodes(node.right)


def _count_leaves(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 1
    return _count_leaves(node.left) + _count_leaves(node.right)


def _collect_features(node: TreeNode, used: set[int]) -> None:
    if isinstance(node, Internal):
        used.add(node.feature_index)
        _collect_features(node.left, used)
        _collect_features(node.right, used)


def gini(class_counts: tuple[int, int]) -> float:
    """Gini impurity 1 - sum(p_k^2) of a binary count pair."""
    c0, c1 = class_counts
    n = c0 + c1
    if n <= 0:
        raise TrainError("gini of an empty node is undefined")
    p0 = c0 / n
    p1 = c1 / n
    return 1.0 - (p0 * p0 + p1 * p1)


@dataclass(frozen=True)
class Split:
    feature_index: int
    threshold: float
    impurity_decrease: float


def best_split(dataset: LabeledDataset, rows: np.ndarray) -> Optional[Split]:
    """Best (feature, midpoint-threshold) split of the given rows by weighted
    Gini decrease; None when no candidate improves impurity.

    Ties break to the lowest feature index, then the lowest threshold.
    """
    rows = np.asarray(rows, dtype=np.intp)
    y = dataset.labels[rows]
    n = len(rows)
    c1 = int(y.sum())
    c0 = n - c1
    if c0 == 0 or c1 == 0:
        return None
    parent = gini((c0, c1))
    best: Optional[Split] = None
    best_gain = 0.0
    for j in range(dataset.schema.feature_count):
        col = dataset.features[rows, j]
        order = np.argsort(col, kind="stable")
        sv = col[order]
        sy = y[order]
        boundary = np.flatnonzero(sv[:-1] < sv[1:])
        if len(boundary) == 0:
            continue
        thresholds = (sv[boundary] + sv[boundary + 1]) / 2.0
        # a midpoint that rounds up to the next value would misplace rows
        valid = thresholds < sv[boundary + 1]
        boundary, thresholds = boundary[valid], thresholds[valid]
        if len(boundary) == 0:
            continue
        cum1 = np.cumsum(sy)
        n_left = (boundary + 1).astype(np.float64)
        n_right = n - n_left
        l1 = cum1[boundary].astype(np.float64)
        l0 = n_left - l1
        r1 = c1 - l1
        r0 = n_right - r1
        pl0, pl1 = l0 / n_left, l1 / n_left
        pr0, pr1 = r0 / n_right, r1 / n_right
        g_left = 1.0 - (pl0 * pl0 + pl1 * pl1)
        g_right = 1.0 - (pr0 * pr0 + pr1 * pr1)
        gain = parent - (n_left / n) * g_left - (n_right / n) * g_right
        i = int(np.argmax(gain))
        if gain[i] > best_gain:
            best_gain = float(gain[i])
            best = Split(j, float(thresholds[i]), best_gain)
    return best


def fit(train: LabeledDataset, config: TrainConfig, allow_single_class: bool = False) -> DecisionTree:
    """Grow a CART tree by recursive best-split, then apply cost-complexity pruning.

    Deterministic for fixed inputs. A single-class dataset is rejected unless
    allow_single_class is set, in which case the result is one leaf.
    """
    c0, c1 = train.class_counts()
    if (c0 == 0 or c1 == 0) and not allow_single_class:
        raise TrainError("training data contains a single class")

    def build(rows: np.ndarray, depth: int) -> TreeNode:
        y = train.labels[rows]
        n1 = int(y.sum())
        counts = (len(rows) - n1, n1)
        if (
            min(counts) == 0
            or depth >= config.max_depth
            or len(rows) < config.min_samples_split
        ):
            return Leaf(counts)
        split = best_split(train, rows)
        if split is None:
            return Leaf(counts)
        go_left = train.features[rows, split.feature_index] <= split.threshold
        return Internal(
            split.feature_index,
            split.threshold,
            build(rows[go_left], depth + 1),
            build(rows[~go_left], depth + 1),
        )

    tree = DecisionTree(build(np.arange(len(train)), 0), train.schema.feature_count)
    return ccp_prune(tree, config.ccp_alpha)


def _subtree_counts(node: TreeNode) -> tuple[int, int]:
    if isinstance(node, Leaf):
        return node.class_counts
    l0, l1 = _subtree_counts(node.left)
    r0, r1 = _subtree_counts(node.right)
    return (l0 + r0, l1 + r1)


def _subtree_misclassified(node: TreeNode) -> int:
    """Training samples misclassified by the subtree's leaves."""
    if isinstance(node, Leaf):
        return min(node.class_counts)
    return _subtree_misclassified(node.left) + _subtree_misclassified(node.right)


def _copy(node: TreeNode) -> TreeNode:
    if isinstance(node, Leaf):
        return Leaf(node.class_counts)
    return Internal(node.feature_index, node.threshold, _copy(node.left), _copy(node.right))


def ccp_prune(tree: DecisionTree, alpha: float) -> DecisionTree:
    """Minimal cost-complexity pruning: repeatedly collapse the weakest link.

    The effective alpha of an internal node t is
    (R(t) - R(T_t)) / (|leaves(T_t)| - 1) with R the training-weighted
    misclassification rate. Links are compared with exact integer arithmetic;
    ties break on preorder position. alpha = 0 is an identity by contract.
    """
    if alpha < 0:
        raise TrainError("alpha must be >= 0")
    if alpha == 0.0:
        return tree
    root = _copy(tree.root)
    total = sum(_subtree_counts(root))

    def weakest(node: TreeNode) -> Optional[tuple[int, int, Internal]]:
        """Min (mis_gain, leaves-1) link in preorder; fractions compared exactly."""
        if isinstance(node, Leaf):
            return None
        mis_as_leaf = min(_subtree_counts(node))
        num = mis_as_leaf - _subtree_misclassified(node)
        den = _count_leaves(node) - 1
        best = (num, den, node)
        for child in (node.left, node.right):
            cand = weakest(child)
            if cand is not None and cand[0] * best[1] < best[0] * cand[1]:
                best = cand
        return best

    while isinstance(root, Internal):
        num, den, node = weakest(root)
        if num > alpha * total * den:
            break
        collapsed = Leaf(_subtree_counts(node))
        if node is root:
            root = collapsed
        else:
            _replace(root, node, collapsed)
    return DecisionTree(root, tree.n_features)


def _replace(node: Internal, target: Internal, replacement: Leaf) -> bool:
    for side in ("left", "right"):
        child = getattr(node, side)
        if child is target:
            setattr(node, side, replacement)
            return True
        if isinstance(child, Internal) and _replace(child, target, replacement):
            return True
    return False


def predict(tree: DecisionTree, record) -> int:
    """Classify one record: descend left on feature <= threshold."""
    record = np.asarray(record, dtype=np.float64)
    if record.shape != (tree.n_features,):
        raise TrainError(
            f"record has {record.shape} values, tree expects {tree.n_features}"
        )
    node = tree.root
    while isinstance(node, Internal):
        node = node.left if record[node.feature_index] <= node.threshold else node.right
    return node.predicted


def predict_many(tree: DecisionTree, features: np.ndarray) -> np.ndarray:
    return np.array([predict(tree, row) for row in np.atleast_2d(features)], dtype=np.int64)


def tree_stats(tree: DecisionTree) -> tuple[int, int, int, frozenset[int]]:
    """(depth, node_count, leaf_count, features_used) from a full traversal."""
    return tree.depth, tree.node_count, tree.leaf_count, tree.features_used


def save_tree(tree: DecisionTree, path: str | Path) -> Path:
    """Versioned plain-text dump, one node per line in preorder."""
    lines = [f"{TREE_FORMAT_VERSION} n_features={tree.n_features}"]

    def emit(node: TreeNode) -> None:
        if isinstance(node, Leaf):
            lines.append(f"L {node.class_counts[0]} {node.class_counts[1]}")
        else:
            lines.append(f"I {node.feature_index} {node.threshold!r}")
            emit(node.left)
            emit(node.right)

    emit(tree.root)
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_tree(path: str | Path) -> DecisionTree:
    """Parse a save_tree file; any truncation or trailing garbage is an error."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise TreeFileError(f"{path}: empty tree file")
    header = lines[0].split()
    if len(header) != 2 or header[0] != TREE_FORMAT_VERSION or not header[1].startswith("n_features="):
        raise TreeFileError(f"{path}: bad header {lines[0]!r}")
    n_features = int(header[1].split("=", 1)[1])
    pos = 1

    def parse() -> TreeNode:
        nonlocal pos
        if pos >= len(lines):
            raise TreeFileError(f"{path}: truncated tree file")
        parts = lines[pos].split()
        pos += 1
        if parts[0] == "L" and len(parts) == 3:
            return Leaf((int(parts[1]), int(parts[2])))
        if parts[0] == "I" and len(parts) == 3:
            feature = int(parts[1])
            if not 0 <= feature < n_features:
                raise TreeFileError(f"{path}: feature index {feature} out of range")
            return Internal(feature, float(parts[2]), parse(), parse())
        raise TreeFileError(f"{path}: bad node line {lines[pos - 1]!r}")

    root = parse()
    if pos != len(lines):
        raise TreeFileError(f"{path}: trailing data after tree")
    return DecisionTree(root, n_features)
