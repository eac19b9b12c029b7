"""Scoring (balanced accuracy, F1) and the evaluation drivers: repeated
stratified CV and the max-depth holdout sweep. Attack (label 1) is the
positive class throughout."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from statistics import mean, pstdev

import numpy as np

from . import cart
from .flowdata import LabeledDataset, holdout_split, stratified_kfold, undersample_balance


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(y_true: np.ndarray, y_pred: np.ndarray) -> ConfusionMatrix:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise MetricsError("prediction/label length mismatch")
    return ConfusionMatrix(
        tp=int(((y_true == 1) & (y_pred == 1)).sum()),
        fp=int(((y_true == 0) & (y_pred == 1)).sum()),
        tn=int(((y_true == 0) & (y_pred == 0)).sum()),
        fn=int(((y_true == 1) & (y_pred == 0)).sum()),
    )


def balanced_accuracy(cm: ConfusionMatrix) -> float:
    """(TPR + TNR) / 2; requires both classes present in the ground truth."""
    if cm.tp + cm.fn == 0 or cm.tn + cm.fp == 0:
        raise MetricsError("balanced accuracy needs both classes in the ground truth")
    tpr = cm.tp / (cm.tp + cm.fn)
    tnr = cm.tn / (cm.tn + cm.fp)
    return (tpr + tnr) / 2.0


def f1(cm: ConfusionMatrix) -> float:
    """Harmonic mean of precision and recall; 0 by convention when tp = 0."""
    if cm.tp + cm.fp + cm.fn == 0:
        raise MetricsError("f1 undefined: no positives predicted or present")
    if cm.tp == 0:
        warnings.warn("f1 is 0: no true positives")
        return 0.0
    precision = cm.tp / (cm.tp + cm.fp)
    recall = cm.tp / (cm.tp + cm.fn)
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class MetricsReport:
    """Per-split (balanced_accuracy, f1) pairs plus their aggregates."""

    per_split: tuple[tuple[float, float], ...]
    k: int
    repeats: int
    seed: int
    config: cart.TrainConfig

    @property
    def mean_balanced_accuracy(self) -> float:
        return mean(s[0] for s in self.per_split)

    @property
    def std_balanced_accuracy(self) -> float:
        return pstdev(s[0] for s in self.per_split)

    @property
    def mean_f1(self) -> float:
        return mean(s[1] for s in self.per_split)

    @property
    def std_f1(self) -> float:
        return pstdev(s[1] for s in self.per_split)

    def to_csv_rows(self) -> list[str]:
        rows = ["split,bacc,f1"]
        rows += [f"{i},{b!r},{f!r}" for i, (b, f) in enumerate(self.per_split)]
        return rows


def evaluate_fold(
    dataset: LabeledDataset,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    config: cart.TrainConfig,
    seed: int,
) -> tuple[float, float]:
    """Balance the train part, fit, score the untouched test part."""
    train = undersample_balance(dataset.subset(train_idx), seed)
    tree = cart.fit(train, config)
    test = dataset.subset(test_idx)
    cm = confusion(test.labels, cart.predict_many(tree, test.features))
    return balanced_accuracy(cm), f1(cm)


def cross_validate(
    dataset: LabeledDataset,
    config: cart.TrainConfig,
    k: int = 5,
    repeats: int = 5,
    seed: int = 0,
    jobs: int = 1,
) -> MetricsReport:
    """Repeated stratified CV. Training folds are balanced by undersampling;
    test folds are scored as-is, never resampled."""
    plan = stratified_kfold(dataset, k, repeats, seed)
    args = [
        (dataset, train_idx, test_idx, config, seed + i)
        for i, (train_idx, test_idx) in enumerate(plan.folds)
    ]
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_split = list(pool.map(lambda a: evaluate_fold(*a), args))
    else:
        per_split = [evaluate_fold(*a) for a in args]
    return MetricsReport(tuple(per_split), k, repeats, seed, config)


@dataclass(frozen=True)
class SweepRow:
    depth: int
    balanced_accuracy: float
    passed: bool


def depth_sweep(
    dataset: LabeledDataset,
    depths: list[int],
    holdout_fraction: float = 0.3,
    threshold: float = 0.985,
    seed: int = 0,
    runs: int = 3,
    ccp_alpha: float = 0.0001,
) -> list[SweepRow]:
    """Holdout accuracy per candidate max depth, averaged over `runs` reseeded
    splits; pass = mean balanced accuracy >= threshold."""
    if not depths:
        raise MetricsError("depth list is empty")
    if any(d < 1 for d in depths):
        raise MetricsError("depths must be >= 1")
    rows = []
    for depth in depths:
        config = cart.TrainConfig(max_depth=depth, ccp_alpha=ccp_alpha)
        scores = []
        for run in range(runs):
            run_seed = seed + run
            train, test = holdout_split(dataset, holdout_fraction, run_seed)
            tree = cart.fit(undersample_balance(train, run_seed), config)
            cm = confusion(test.labels, cart.predict_many(tree, test.features))
            scores.append(balanced_accuracy(cm))
        bacc = mean(scores)
        rows.append(SweepRow(depth, bacc, bacc >= threshold))
    return rows
