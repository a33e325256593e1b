"""Glue between extracted feature rows and the model families.

Builds the numeric modeling table from feature vectors, runs the per-fold
preprocessing each family needs (class-informed discretization for the
discrete classifiers, standardization inside the logistic fitter), and
exposes uniform fit/score closures for the evaluation engine plus
full-data training for the serving path.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import bayes, discretize, logistic
from .errors import ConfigError, InputError
from .evaluate import FitScore
from .sessions import FeatureVector

#: Candidate predictors available in a live control room, plus the task
#: complexity and support-configuration variables.
BEHAVIOURAL_FEATURES = (
    "acknowledgements",
    "group",
    "mimics_opened",
    "num_alarms",
    "reaction_time_s",
    "response_time_s",
    "scenario",
)
SUBJECTIVE_FEATURES = (
    "familiarity",
    "sart_index",
    "spam_index",
    "tlx_index",
    "training",
)
FEATURE_SETS = {
    "behavioural": BEHAVIOURAL_FEATURES,
    "behavioural+subjective": BEHAVIOURAL_FEATURES + SUBJECTIVE_FEATURES,
}

CATEGORICAL_LABELS: Mapping[str, tuple[str, ...]] = {
    "group": ("G1", "G2", "G3", "G4"),
    "scenario": ("S1", "S2", "S3"),
}

MODEL_FAMILIES = ("nb", "tan", "lr", "lr-stepwise")


@dataclass(frozen=True)
class ModelTable:
    """Numeric modeling matrix with row provenance.

    Group and scenario enter as ordinal codes 1..4 / 1..3 by default
    (single-coefficient treatment); dummy encoding expands them into
    reference-coded indicator columns, which only the logistic families
    accept. Rows missing any selected feature are dropped and listed so
    callers can report them.
    """

    feature_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    groups: tuple[str, ...]
    scenarios: tuple[str, ...]
    participant_ids: tuple[str, ...]
    dropped: tuple[str, ...]
    encoding: str = "ordinal"

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.feature_names.index(name)]


def _row_value(fv: FeatureVector, name: str) -> Optional[float]:
    if name == "group":
        return float(fv.group.code)
    if name == "scenario":
        return float(fv.scenario.code)
    if "=" in name:  # dummy indicator, e.g. "group=G3"
        base, level = name.split("=", 1)
        current = fv.group.value if base == "group" else fv.scenario.value
        return 1.0 if current == level else 0.0
    value = getattr(fv, name)
    if value is None:
        return None
    return float(value)


def _dummy_names(base: str) -> list[str]:
    # reference coding: first level is the baseline
    return [f"{base}={level}" for level in CATEGORICAL_LABELS[base][1:]]


def build_table(
    vectors: Sequence[FeatureVector],
    feature_set: str = "behavioural",
    encoding: str = "ordinal",
) -> ModelTable:
    if feature_set not in FEATURE_SETS:
        raise ConfigError(
            f"unknown feature set {feature_set!r}; choose from {sorted(FEATURE_SETS)}"
        )
    if encoding not in ("ordinal", "dummy"):
        raise ConfigError(f"unknown encoding {encoding!r}")
    selected = list(FEATURE_SETS[feature_set])
    if encoding == "dummy":
        selected = [n for n in selected if n not in CATEGORICAL_LABELS]
        for base in CATEGORICAL_LABELS:
            if base in FEATURE_SETS[feature_set]:
                selected.extend(_dummy_names(base))
    names = tuple(sorted(selected))
    rows, ys, groups, scenarios, pids, dropped = [], [], [], [], [], []
    for fv in vectors:
        values = {}
        missing = None
        for name in names:
            v = _row_value(fv, name)
            if v is None:
                missing = name
                break
            values[name] = v
        if missing is not None:
            dropped.append(f"{fv.participant_id}/{fv.scenario.value}: missing {missing}")
            continue
        rows.append([values[n] for n in names])
        ys.append(int(fv.error))
        groups.append(fv.group.value)
        scenarios.append(fv.scenario.value)
        pids.append(fv.participant_id)
    if not rows:
        raise InputError("no usable rows: every session is missing a selected feature")
    return ModelTable(
        feature_names=names,
        X=np.asarray(rows, dtype=float),
        y=np.asarray(ys, dtype=int),
        groups=tuple(groups),
        scenarios=tuple(scenarios),
        participant_ids=tuple(pids),
        dropped=tuple(dropped),
        encoding=encoding,
    )


# ---------------------------------------------------------------------------
# discrete-model encoding


def _continuous_features(names: Sequence[str]) -> list[str]:
    return [n for n in names if n not in CATEGORICAL_LABELS]


def encode_training(
    table: ModelTable, idx: np.ndarray
) -> tuple[bayes.DiscreteDataset, discretize.DiscretizationMap]:
    """Fit the discretizer on the given rows and build the discrete dataset.

    Continuous features without an informative cut are dropped from the
    dataset; categorical features pass through as their fixed state codes.
    """
    if table.encoding != "ordinal":
        raise ConfigError("discrete families need the ordinal table encoding")
    y = table.y[idx]
    dmap = discretize.fit_map(
        {n: table.column(n)[idx] for n in _continuous_features(table.feature_names)},
        y,
    )
    columns: dict[str, np.ndarray] = dict(
        discretize.apply_map(
            dmap,
            {n: table.column(n)[idx] for n in _continuous_features(table.feature_names)},
        )
    )
    cards = {n: dmap.n_states(n) for n in columns}
    labels: dict[str, tuple[str, ...]] = {
        n: tuple(dmap.interval_label(n, i) for i in range(dmap.n_states(n)))
        for n in columns
    }
    for n, state_labels in CATEGORICAL_LABELS.items():
        if n in table.feature_names:
            columns[n] = table.column(n)[idx].astype(int) - 1
            cards[n] = len(state_labels)
            labels[n] = state_labels
    dataset = bayes.make_dataset(columns, y, cardinalities=cards, state_labels=labels)
    return dataset, dmap


def encode_evidence_rows(
    table: ModelTable,
    idx: np.ndarray,
    dmap: discretize.DiscretizationMap,
    model_features: Sequence[str],
) -> list[dict[str, int]]:
    """Full-evidence assignments for the given rows, in model state space."""
    rows = []
    for i in idx:
        evidence = {}
        for name in model_features:
            raw = float(table.X[i, table.feature_names.index(name)])
            if name in CATEGORICAL_LABELS:
                evidence[name] = int(raw) - 1
            else:
                evidence[name] = dmap.encode(name, raw)
        rows.append(evidence)
    return rows


def bn_fit_score(table: ModelTable, family: str, alpha: float = 1.0,
                 root: Optional[str] = None) -> FitScore:
    """Per-fold fit/score closure for the discrete families."""

    def fit_score(train: np.ndarray, test: np.ndarray) -> np.ndarray:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # degenerate-prior warnings per fold
            dataset, dmap = encode_training(table, train)
            if family == "nb":
                model = bayes.fit_nb(dataset, alpha=alpha)
            else:
                tan_root = root if root in dataset.feature_names else None
                model = bayes.fit_tan(dataset, alpha=alpha, root=tan_root)
        rows = encode_evidence_rows(table, test, dmap, dataset.feature_names)
        return np.array([bayes.p_error(model, row) for row in rows])

    return fit_score


def lr_fit_score(table: ModelTable, family: str, criterion: str = "aic") -> FitScore:
    """Per-fold fit/score closure for the logistic families."""

    def fit_score(train: np.ndarray, test: np.ndarray) -> np.ndarray:
        if family == "lr-stepwise":
            result = logistic.stepwise(
                table.X[train], table.y[train], table.feature_names, criterion
            )
            model = result.model
        else:
            model = logistic.fit(table.X[train], table.y[train], table.feature_names)
        cols = [table.feature_names.index(n) for n in model.feature_names]
        return logistic.predict_proba_rows(model, table.X[test][:, cols])

    return fit_score


def fit_score_for(table: ModelTable, family: str, alpha: float = 1.0,
                  criterion: str = "aic", root: Optional[str] = None) -> FitScore:
    if family in ("nb", "tan"):
        return bn_fit_score(table, family, alpha=alpha, root=root)
    if family in ("lr", "lr-stepwise"):
        return lr_fit_score(table, family, criterion=criterion)
    raise ConfigError(f"unknown model family {family!r}; choose from {MODEL_FAMILIES}")


# ---------------------------------------------------------------------------
# full-data training (serving path)


def train_bn(table: ModelTable, family: str, alpha: float = 1.0,
             root: Optional[str] = None) -> bayes.BnModel:
    dataset, dmap = encode_training(table, np.arange(table.n_rows))
    cuts = {n: dmap.cuts[n] for n in dataset.feature_names if n in dmap.cuts}
    if family == "nb":
        return bayes.fit_nb(dataset, alpha=alpha, cuts=cuts)
    tan_root = root if root in dataset.feature_names else None
    return bayes.fit_tan(dataset, alpha=alpha, root=tan_root, cuts=cuts)


def train_lr(table: ModelTable, family: str, criterion: str = "aic") -> logistic.LrModel:
    if family == "lr-stepwise":
        return logistic.stepwise(table.X, table.y, table.feature_names, criterion).model
    return logistic.fit(table.X, table.y, table.feature_names)


def train_family(table: ModelTable, family: str, alpha: float = 1.0,
                 criterion: str = "aic", root: Optional[str] = None):
    if family in ("nb", "tan"):
        return train_bn(table, family, alpha=alpha, root=root)
    if family in ("lr", "lr-stepwise"):
        return train_lr(table, family, criterion=criterion)
    raise ConfigError(f"unknown model family {family!r}; choose from {MODEL_FAMILIES}")


# ---------------------------------------------------------------------------
# report pieces


def mi_report(table: ModelTable) -> dict:
    """Mutual-information ranking on the full-data discretization."""
    dataset, dmap = encode_training(table, np.arange(table.n_rows))
    report = bayes.mutual_information(dataset)
    uninformative = sorted(
        n for n in _continuous_features(table.feature_names) if not dmap.cuts[n]
    )
    return {
        "h_error": report.h_error,
        "mi": dict(report.mi),
        "ranking": [name for name, _ in report.ranking()],
        "dropped_no_informative_cut": uninformative,
    }


def bn_cell_success(model: bayes.BnModel) -> dict[str, dict[str, float]]:
    """P(success | scenario, group) marginals from a fitted discrete model."""
    present = set(model.feature_names())
    if not {"scenario", "group"} <= present:
        raise ConfigError("cell table needs scenario and group in the model")
    table: dict[str, dict[str, float]] = {}
    for s_idx, s in enumerate(CATEGORICAL_LABELS["scenario"]):
        table[s] = {}
        for g_idx, g in enumerate(CATEGORICAL_LABELS["group"]):
            post = bayes.posterior(model, {"scenario": s_idx, "group": g_idx})
            table[s][g] = float(post[0])
    return table


def lr_cell_success(
    model: logistic.LrModel, table: ModelTable
) -> dict[str, dict[str, Optional[float]]]:
    """Mean per-row success probability by scenario x group cell."""
    cols = [table.feature_names.index(n) for n in model.feature_names]
    probs = logistic.predict_proba_rows(model, table.X[:, cols])
    return logistic.aggregate_success_by_cell(probs, table.groups, table.scenarios)
