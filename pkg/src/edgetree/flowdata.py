"""Loading, balancing, splitting and (optional) preprocessing of labeled flow datasets.

Flow records are plain numeric vectors; labels are binary (0 = benign, 1 = attack).
All operations are pure functions of (input, seed) and never mutate their inputs.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    """Raised for malformed or unusable dataset input."""


@dataclass(frozen=True)
class FlowSchema:
    """Ordered feature names plus the name of the label column they came with."""

    feature_names: tuple[str, ...]
    label_column: str = "Label"

    def __post_init__(self):
        if not self.feature_names:
            raise DatasetError("schema needs at least one feature")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise DatasetError("duplicate feature names in schema")
        if self.label_column in self.feature_names:
            raise DatasetError(f"label column {self.label_column!r} also listed as a feature")

    @property
    def feature_count(self) -> int:
        return len(self.feature_names)


@dataclass(frozen=True)
class LabeledDataset:
    """Immutable feature matrix + binary label vector.

    features has shape (n_records, n_features), float64, all finite.
    labels has shape (n_records,), values in {0, 1}.
    """

    schema: FlowSchema
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labs = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[1] != self.schema.feature_count:
            raise DatasetError(
                f"feature matrix shape {feats.shape} does not match "
                f"schema arity {self.schema.feature_count}"
            )
        if labs.shape != (feats.shape[0],):
            raise DatasetError("record/label count mismatch")
        if feats.shape[0] == 0:
            raise DatasetError("empty dataset")
        if not np.isfinite(feats).all():
            bad = np.argwhere(~np.isfinite(feats))[0]
            raise DatasetError(f"non-finite feature value at row {bad[0]}, column {bad[1]}")
        if not np.isin(labs, (0, 1)).all():
            raise DatasetError("labels must be 0 or 1")
        feats.setflags(write=False)
        labs.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    def __len__(self) -> int:
        return self.features.shape[0]

    def class_counts(self) -> tuple[int, int]:
        n1 = int(self.labels.sum())
        return len(self) - n1, n1

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.intp)
        return LabeledDataset(self.schema, self.features[idx], self.labels[idx])


@dataclass(frozen=True)
class SplitPlan:
    """Fold index pairs for repeated stratified k-fold evaluation."""

    folds: tuple[tuple[np.ndarray, np.ndarray], ...]
    k: int
    repeats: int
    seed: int

    def __post_init__(self):
        if len(self.folds) != self.k * self.repeats:
            raise DatasetError("fold count must equal k * repeats")


@dataclass(frozen=True)
class PreprocessParams:
    """Fitted transform: per-column z-score stats and ordinal value tables.

    Fit on training data only; apply to held-out data with apply_preprocess.
    """

    scaled_columns: tuple[int, ...] = ()
    means: tuple[float, ...] = ()
    stds: tuple[float, ...] = ()
    ordinal_columns: tuple[int, ...] = ()
    ordinal_values: tuple[tuple[float, ...], ...] = field(default=())


def _parse_label(raw: str, label_map: dict[str, int] | None, row: int, column: str) -> int:
    text = raw.strip()
    if label_map is not None and text in label_map:
        return label_map[text]
    if text in ("0", "1"):
        return int(text)
    raise DatasetError(
        f"row {row}: label {text!r} in column {column!r} is not 0/1 and has no "
        "mapping; pass an explicit label map (e.g. benign=0,attack=1)"
    )


def load_csv(
    path: str | Path,
    label_column: str = "Label",
    label_map: dict[str, int] | None = None,
) -> LabeledDataset:
    """Load a one-header-row numeric CSV into a LabeledDataset.

    Every non-label column is parsed as a float feature. Labels must be literal
    0/1 unless label_map supplies an explicit string-to-bit mapping.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DatasetError(f"{path}: label column {label_column!r} not in header {header}")
        label_idx = header.index(label_column)
        feature_names = tuple(h for i, h in enumerate(header) if i != label_idx)
        schema = FlowSchema(feature_names, label_column)

        rows: list[list[float]] = []
        labels: list[int] = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise DatasetError(
                    f"{path}: row {lineno} has {len(cells)} fields, expected {len(header)}"
                )
            labels.append(_parse_label(cells[label_idx], label_map, lineno, label_column))
            feats = []
            for col, cell in enumerate(cells):
                if col == label_idx:
                    continue
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise DatasetError(
                        f"{path}: row {lineno}, column {header[col]!r}: "
                        f"non-numeric value {cell!r}"
                    ) from None
            rows.append(feats)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    return LabeledDataset(schema, np.array(rows, dtype=np.float64), np.array(labels))


def save_csv(dataset: LabeledDataset, path: str | Path) -> Path:
    """Write a dataset back out in the same CSV shape load_csv reads."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(dataset.schema.feature_names) + [dataset.schema.label_column])
        for feats, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in feats] + [int(label)])
    return path


def undersample_balance(dataset: LabeledDataset, seed: int) -> LabeledDataset:
    """Randomly drop majority-class records until both classes match the minority count."""
    n0, n1 = dataset.class_counts()
    if n0 == 0 or n1 == 0:
        raise DatasetError("undersampling needs both classes present")
    target = min(n0, n1)
    rng = np.random.default_rng(seed)
    keep = []
    for cls in (0, 1):
        members = np.flatnonzero(dataset.labels == cls)
        keep.append(rng.choice(members, size=target, replace=False))
    idx = np.sort(np.concatenate(keep))
    return dataset.subset(idx)


def _stratified_fold_assignment(labels: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Assign each index a fold id 0..k-1, balanced per class."""
    assignment = np.empty(len(labels), dtype=np.intp)
    for cls in (0, 1):
        members = np.flatnonzero(labels == cls)
        if len(members) < k:
            raise DatasetError(f"class {cls} has {len(members)} members, fewer than k={k}")
        shuffled = rng.permutation(members)
        assignment[shuffled] = np.arange(len(shuffled)) % k
    return assignment


def stratified_kfold(dataset: LabeledDataset, k: int, repeats: int, seed: int) -> SplitPlan:
    """Repeated stratified k-fold plan: each repeat's test folds partition the dataset."""
    if k < 2:
        raise DatasetError("k must be at least 2")
    if repeats < 1:
        raise DatasetError("repeats must be at least 1")
    rng = np.random.default_rng(seed)
    all_idx = np.arange(len(dataset))
    folds = []
    for _ in range(repeats):
        assignment = _stratified_fold_assignment(dataset.labels, k, rng)
        for fold_id in range(k):
            test = all_idx[assignment == fold_id]
            train = all_idx[assignment != fold_id]
            folds.append((train, test))
    return SplitPlan(tuple(folds), k, repeats, seed)


def holdout_split(
    dataset: LabeledDataset, test_fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Single stratified train/test split; returns (train, test)."""
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError(f"test fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    members = {cls: np.flatnonzero(dataset.labels == cls) for cls in (0, 1)}
    n_test = {cls: int(round(len(m) * test_fraction)) for cls, m in members.items()}
    # keep both sides non-empty even on degenerate tiny inputs
    largest = max((0, 1), key=lambda cls: len(members[cls]))
    if sum(n_test.values()) == 0:
        n_test[largest] = 1
    if sum(n_test.values()) == len(dataset):
        n_test[largest] -= 1
    test_idx = np.sort(
        np.concatenate(
            [rng.choice(members[cls], size=n_test[cls], replace=False) for cls in (0, 1)]
        )
    )
    mask = np.zeros(len(dataset), dtype=bool)
    mask[test_idx] = True
    if mask.all() or not mask.any():
        raise DatasetError("holdout split left one side empty")
    return dataset.subset(np.flatnonzero(~mask)), dataset.subset(test_idx)


def preprocess(
    dataset: LabeledDataset,
    scale_numeric: bool = True,
    encode_categorical: list[str] | None = None,
) -> tuple[LabeledDataset, PreprocessParams]:
    """Fit a z-score / ordinal-encoding transform on this dataset and apply it.

    Listed categorical columns are ordinal-encoded by sorted unique value; the
    remaining columns are standardized when scale_numeric is set. Returns the
    transformed dataset plus the fitted parameters for reuse on held-out data.
    """
    names = dataset.schema.feature_names
    categorical = encode_categorical or []
    for name in categorical:
        if name not in names:
            raise DatasetError(f"categorical column {name!r} not in schema")
    ordinal_cols = tuple(names.index(name) for name in categorical)
    ordinal_values = tuple(
        tuple(np.unique(dataset.features[:, col]).tolist()) for col in ordinal_cols
    )
    if scale_numeric:
        scaled_cols = tuple(i for i in range(len(names)) if i not in ordinal_cols)
        means = tuple(float(dataset.features[:, c].mean()) for c in scaled_cols)
        stds = []
        for c in scaled_cols:
            std = float(dataset.features[:, c].std())
            if std == 0.0:
                warnings.warn(f"column {names[c]!r} has zero variance; scaling emits 0")
            stds.append(std)
        stds = tuple(stds)
    else:
        scaled_cols, means, stds = (), (), ()
    params = PreprocessParams(scaled_cols, means, stds, ordinal_cols, ordinal_values)
    return apply_preprocess(dataset, params), params


def apply_preprocess(dataset: LabeledDataset, params: PreprocessParams) -> LabeledDataset:
    """Apply a previously fitted transform; unseen categorical values get the next rank."""
    feats = dataset.features.copy()
    for col, mean, std in zip(params.scaled_columns, params.means, params.stds):
        if std == 0.0:
            feats[:, col] = 0.0
        else:
            feats[:, col] = (feats[:, col] - mean) / std
    for col, values in zip(params.ordinal_columns, params.ordinal_values):
        table = np.asarray(values)
        ranks = np.searchsorted(table, feats[:, col])
        feats[:, col] = ranks.astype(np.float64)
    return LabeledDataset(dataset.schema, feats, dataset.labels)
