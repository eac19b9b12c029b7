import shutil

import numpy as np
import pytest

from edgetree.cart import DecisionTree, Internal, Leaf
from edgetree.flowdata import FlowSchema, LabeledDataset

requires_cc = pytest.mark.skipif(
    shutil.which("cc") is None or shutil.which("size") is None,
    reason="needs a host C toolchain",
)


def make_dataset(features, labels, names=None):
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features.reshape(-1, 1)
    if names is None:
        names = tuple(f"f{i}" for i in range(features.shape[1]))
    return LabeledDataset(FlowSchema(tuple(names)), features, np.asarray(labels))


def random_dataset(rng, n_rows, n_features, integer_grid=True):
    """Small random labeled dataset; an integer value grid forces plenty of ties."""
    if integer_grid:
        features = rng.integers(0, 8, size=(n_rows, n_features)).astype(np.float64)
    else:
        features = rng.normal(size=(n_rows, n_features))
    labels = rng.integers(0, 2, size=n_rows)
    if labels.min() == labels.max():  # both classes must be present
        labels[0] = 1 - labels[0]
    return make_dataset(features, labels)


def random_tree(rng, depth, n_features):
    """Random tree whose depth is exactly `depth`."""

    def leaf():
        c0, c1 = int(rng.integers(0, 10)), int(rng.integers(0, 10))
        if c0 == 0 and c1 == 0:
            c1 = 1
        return Leaf((c0, c1))

    def build(remaining, must_reach):
        if remaining == 0 or (not must_reach and rng.random() < 0.3):
            return leaf()
        feature = int(rng.integers(0, n_features))
        threshold = float(rng.uniform(-100.0, 100.0))
        deep_side = int(rng.integers(0, 2))
        children = [
            build(remaining - 1, must_reach and side == deep_side) for side in (0, 1)
        ]
        return Internal(feature, threshold, children[0], children[1])

    return DecisionTree(build(depth, True), n_features)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
