"""Repeated stratified train/test sampling and classification metrics.

Folds are independent random splits that preserve class proportions in the
test set (shuffle-split, not a partition), so any number of repetitions can
be drawn from a small dataset. Every random draw is keyed on (seed, fold)
through a counter-style generator, making reports bit-reproducible at any
level of parallelism.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .errors import DegenerateInputError, InputError, NumericalError, StratificationError

DEFAULT_FOLDS = 1000
# sized so the mean test set matches the reported averaged-matrix total
DEFAULT_TEST_FRACTION = 82.0 / 87.0
DEFAULT_THRESHOLD = 0.5


def _fold_rng(seed: int, fold: int) -> np.random.Generator:
    return np.random.default_rng([seed, fold])


def _allocate(counts: Sequence[int], n_test: int) -> list[int]:
    """Proportional test-set allocation per class, largest remainder first.

    Floors of the proportional quotas, then the leftover units go to the
    largest fractional remainders (ties to the bigger class, then class
    order). A class asked for more members than it has cannot be
    stratified.
    """
    n = sum(counts)
    quotas = [n_test * c / n for c in counts]
    alloc = [int(q) for q in quotas]
    order = sorted(
        range(len(counts)),
        key=lambda i: (-(quotas[i] - int(quotas[i])), -counts[i], i),
    )
    leftover = n_test - sum(alloc)
    for i in order[:leftover]:
        alloc[i] += 1
    for count, take in zip(counts, alloc):
        if take > count:
            raise StratificationError(
                f"a class has {count} members but the test set requires {take}"
            )
    return alloc


def stratified_shuffle_split(
    y: Sequence[int],
    folds: int,
    test_fraction: float,
    seed: int,
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (train_indices, test_indices) for each fold.

    Each fold independently samples a test set whose class counts follow
    the dataset proportions to within integer rounding. Deterministic for
    a fixed seed.
    """
    y = np.asarray(y, dtype=int)
    if not 0.0 < test_fraction < 1.0:
        raise InputError("test_fraction must lie in (0, 1)")
    if folds < 1:
        raise InputError("folds must be >= 1")
    classes = np.unique(y)
    if classes.size < 2:
        raise StratificationError("both classes must be present")
    n = y.size
    n_test = int(round(test_fraction * n))
    if n_test < 1 or n_test >= n:
        raise StratificationError(
            f"test fraction {test_fraction} leaves no usable split for {n} rows"
        )
    class_indices = [np.flatnonzero(y == c) for c in classes]
    alloc = _allocate([idx.size for idx in class_indices], n_test)

    for fold in range(folds):
        rng = _fold_rng(seed, fold)
        test_parts = []
        train_parts = []
        for idx, take in zip(class_indices, alloc):
            perm = idx[rng.permutation(idx.size)]
            test_parts.append(perm[:take])
            train_parts.append(perm[take:])
        test = np.sort(np.concatenate(test_parts))
        train = np.sort(np.concatenate(train_parts))
        yield train, test


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability a random positive outscores a random negative.

    Rank formulation with midranks, so ties count half. Undefined for a
    single-class label set.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateInputError("AUC needs both classes in the labels")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=float)
    sorted_scores = scores[order]
    i = 0
    rank_position = 1
    while i < scores.size:
        j = i
        while j < scores.size and sorted_scores[j] == sorted_scores[i]:
            j += 1
        midrank = (rank_position + rank_position + (j - i) - 1) / 2.0
        ranks[order[i:j]] = midrank
        rank_position += j - i
        i = j
    pos_rank_sum = float(ranks[labels == 1].sum())
    u = pos_rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Real-valued confusion counts (fold means); positive class = failure."""

    tn: float
    fp: float
    fn: float
    tp: float

    @property
    def total(self) -> float:
        return self.tn + self.fp + self.fn + self.tp

    def metrics(self) -> dict[str, float]:
        total = self.total
        accuracy = (self.tn + self.tp) / total if total else 0.0
        precision = self.tp / (self.tp + self.fp) if (self.tp + self.fp) else 0.0
        recall = self.tp / (self.tp + self.fn) if (self.tp + self.fn) else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if (precision + recall)
            else 0.0
        )
        return {
            "accuracy": accuracy,
            "precision": precision,
            "recall": recall,
            "f1": f1,
        }


@dataclass(frozen=True)
class EvalReport:
    folds_requested: int
    folds_used: int
    folds_skipped: int
    skip_reasons: dict[str, int]
    matrix: ConfusionMatrix
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc_mean: Optional[float]
    auc_std: Optional[float]
    auc_pooled: Optional[float]
    accuracy_per_fold_std: float
    mean_test_size: float
    threshold: float
    test_fraction: float
    seed: int
    extras: dict[str, float] = field(default_factory=dict)


FitScore = Callable[[np.ndarray, np.ndarray], np.ndarray]


def evaluate(
    fit_score: FitScore,
    y: Sequence[int],
    folds: int = DEFAULT_FOLDS,
    test_fraction: float = DEFAULT_TEST_FRACTION,
    threshold: float = DEFAULT_THRESHOLD,
    seed: int = 0,
) -> EvalReport:
    """Run the repeated-split evaluation for one model family.

    fit_score(train_idx, test_idx) fits on the training rows and returns
    failure scores for the test rows; this module never sees the features,
    so per-fold preprocessing (discretization, standardization) stays
    inside the family and cannot leak across the split. Folds whose test
    set is single-class, or whose fit fails numerically, are skipped and
    counted.
    """
    y = np.asarray(y, dtype=int)
    if not 0.0 < threshold < 1.0:
        raise InputError("threshold must lie in (0, 1)")

    cells = np.zeros(4)  # tn, fp, fn, tp
    used = 0
    skip_reasons = {"single_class_test": 0, "fit_failure": 0}
    aucs = []
    fold_accuracies = []
    pooled_scores: list[np.ndarray] = []
    pooled_labels: list[np.ndarray] = []
    test_sizes = []

    for train, test in stratified_shuffle_split(y, folds, test_fraction, seed):
        y_test = y[test]
        if y_test.min() == y_test.max():
            skip_reasons["single_class_test"] += 1
            continue
        try:
            scores = np.asarray(fit_score(train, test), dtype=float)
        except NumericalError:
            skip_reasons["fit_failure"] += 1
            continue
        predicted = scores >= threshold
        tn = float(np.sum((~predicted) & (y_test == 0)))
        fp = float(np.sum(predicted & (y_test == 0)))
        fn = float(np.sum((~predicted) & (y_test == 1)))
        tp = float(np.sum(predicted & (y_test == 1)))
        cells += (tn, fp, fn, tp)
        fold_accuracies.append((tn + tp) / y_test.size)
        aucs.append(roc_auc(scores, y_test))
        pooled_scores.append(scores)
        pooled_labels.append(y_test)
        test_sizes.append(y_test.size)
        used += 1

    if used == 0:
        raise NumericalError("every fold was skipped; nothing to report")

    matrix = ConfusionMatrix(*(cells / used))
    metrics = matrix.metrics()
    pooled = roc_auc(np.concatenate(pooled_scores), np.concatenate(pooled_labels))
    return EvalReport(
        folds_requested=folds,
        folds_used=used,
        folds_skipped=folds - used,
        skip_reasons=skip_reasons,
        matrix=matrix,
        accuracy=metrics["accuracy"],
        precision=metrics["precision"],
        recall=metrics["recall"],
        f1=metrics["f1"],
        auc_mean=float(np.mean(aucs)),
        auc_std=float(np.std(aucs)),
        auc_pooled=float(pooled),
        accuracy_per_fold_std=float(np.std(fold_accuracies)),
        mean_test_size=float(np.mean(test_sizes)),
        threshold=threshold,
        test_fraction=test_fraction,
        seed=seed,
    )


def report_to_dict(report: EvalReport) -> dict:
    return {
        "folds_requested": report.folds_requested,
        "folds_used": report.folds_used,
        "folds_skipped": report.folds_skipped,
        "skip_reasons": dict(report.skip_reasons),
        "matrix": {
            "tn": report.matrix.tn,
            "fp": report.matrix.fp,
            "fn": report.matrix.fn,
            "tp": report.matrix.tp,
        },
        "accuracy": report.accuracy,
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "auc_mean": report.auc_mean,
        "auc_std": report.auc_std,
        "auc_pooled": report.auc_pooled,
        "accuracy_per_fold_std": report.accuracy_per_fold_std,
        "mean_test_size": report.mean_test_size,
        "threshold": report.threshold,
        "test_fraction": report.test_fraction,
        "seed": report.seed,
        "extras": dict(report.extras),
    }


def report_to_json(report: EvalReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True)


def render_matrix(report: EvalReport) -> str:
    """Plain-text confusion matrix in the conventional table layout."""
    m = report.matrix
    lines = [
        f"{'':>18} {'Predicted Negative':>20} {'Predicted Positive':>20}",
        f"{'Actual Negative':>18} {m.tn:>20.2f} {m.fp:>20.2f}",
        f"{'Actual Positive':>18} {m.fn:>20.2f} {m.tp:>20.2f}",
        "",
        f"accuracy={report.accuracy:.3f} precision={report.precision:.3f} "
        f"recall={report.recall:.3f} f1={report.f1:.3f} "
        f"auc_mean={report.auc_mean:.3f} (folds used: {report.folds_used})",
    ]
    return "\n".join(lines)
