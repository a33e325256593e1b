"""Normality-gated pairwise group comparisons.

For continuous variables the test is picked by a fixed decision rule:
normality of both samples (Shapiro-Wilk), then equality of variances
(Levene, mean-centered) choose between the pooled t, Welch t and the
rank-sum test. Categorical variables go straight to a chi-squared test on
the category contingency table. One battery run covers every requested
variable in every scenario for a pair of groups.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import DegenerateInputError, InputError
from .sessions import FeatureVector, Performance

DEFAULT_ALPHA = 0.05


class StatTest(str, Enum):
    STUDENT_T = "Student t"
    WELCH_T = "Welch t"
    WILCOXON_RANK_SUM = "Wilcoxon Rank-Sum"
    CHI_SQUARED = "Chi-Squared"


# ---------------------------------------------------------------------------
# individual tests


def shapiro_wilk(sample: Sequence[float]) -> tuple[float, float]:
    x = np.asarray(sample, dtype=float)
    if x.size < 3:
        raise InputError("Shapiro-Wilk needs at least 3 observations")
    if np.ptp(x) == 0.0:
        raise DegenerateInputError("Shapiro-Wilk undefined for constant sample")
    stat, p = stats.shapiro(x)
    return float(stat), float(p)


def levene(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.ptp(a) == 0.0 and np.ptp(b) == 0.0:
        raise DegenerateInputError("Levene undefined when both samples are constant")
    stat, p = stats.levene(a, b, center="mean")
    return float(stat), float(p)


def _check_t_inputs(a: np.ndarray, b: np.ndarray) -> None:
    if a.size < 2 or b.size < 2:
        raise InputError("t tests need at least 2 observations per sample")
    if np.ptp(a) == 0.0 and np.ptp(b) == 0.0 and a.mean() == b.mean():
        raise DegenerateInputError("t statistic undefined for identical constants")


def student_t(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_t_inputs(a, b)
    stat, p = stats.ttest_ind(a, b, equal_var=True)
    return float(stat), float(p)


def welch_t(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_t_inputs(a, b)
    stat, p = stats.ttest_ind(a, b, equal_var=False)
    return float(stat), float(p)


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sided rank-sum test.

    Exact null enumeration when both samples are small (<= 20) and tie
    free; otherwise the normal approximation with tie correction.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise InputError("rank-sum test needs non-empty samples")
    combined = np.concatenate([a, b])
    if np.ptp(combined) == 0.0:
        raise DegenerateInputError("rank-sum undefined when every value is tied")
    has_ties = np.unique(combined).size < combined.size
    exact = max(a.size, b.size) <= 20 and not has_ties
    res = stats.mannwhitneyu(
        a, b, alternative="two-sided", method="exact" if exact else "asymptotic"
    )
    return float(res.statistic), float(res.pvalue)


def chi_squared(
    a: Sequence, b: Sequence, correction: bool = False
) -> tuple[float, float]:
    """Chi-squared test on the 2 x k contingency table of category counts.

    A single shared category means the variable cannot distinguish the
    groups: statistic 0, p = 1.
    """
    if len(a) == 0 or len(b) == 0:
        raise InputError("chi-squared needs non-empty samples")
    categories = sorted(set(a) | set(b))
    if len(categories) == 1:
        return 0.0, 1.0
    table = np.array(
        [
            [sum(1 for v in sample if v == c) for c in categories]
            for sample in (a, b)
        ],
        dtype=float,
    )
    stat, p, _, _ = stats.chi2_contingency(table, correction=correction)
    return float(stat), float(p)


# ---------------------------------------------------------------------------
# test choice


def select_test(
    sw_p_a: float, sw_p_b: float, levene_p: float, alpha: float = DEFAULT_ALPHA
) -> StatTest:
    """Pure decision rule from the gate p-values."""
    if sw_p_a > alpha and sw_p_b > alpha:
        return StatTest.STUDENT_T if levene_p > alpha else StatTest.WELCH_T
    return StatTest.WILCOXON_RANK_SUM


def choose_test(
    a: Sequence[float],
    b: Sequence[float],
    kind: str = "continuous",
    alpha: float = DEFAULT_ALPHA,
) -> tuple[StatTest, Optional[float], Optional[float], Optional[float]]:
    """Pick the comparison test for two samples.

    Returns (test, shapiro_p_a, shapiro_p_b, levene_p); gate p-values are
    None when they were not computed. Samples too small for the normality
    gate fall back to the rank-sum test with a warning; constant samples
    count as non-normal.
    """
    if kind == "categorical":
        return StatTest.CHI_SQUARED, None, None, None
    if kind != "continuous":
        raise InputError(f"unknown variable kind {kind!r}")
    if len(a) < 3 or len(b) < 3:
        warnings.warn(
            "sample too small for the normality gate; using rank-sum",
            stacklevel=2,
        )
        return StatTest.WILCOXON_RANK_SUM, None, None, None

    def sw_p(x) -> float:
        try:
            return shapiro_wilk(x)[1]
        except DegenerateInputError:
            return 0.0

    p_a = sw_p(a)
    p_b = sw_p(b)
    try:
        levene_p = levene(a, b)[1]
    except DegenerateInputError:
        levene_p = 0.0
    return select_test(p_a, p_b, levene_p, alpha), p_a, p_b, levene_p


# ---------------------------------------------------------------------------
# battery

CATEGORICAL_VARIABLES = ("consequence", "overall_performance", "error")
DEFAULT_VARIABLES = (
    "accuracy_mse",
    "acknowledgements",
    "alarms_silenced",
    "consequence",
    "mimics_opened",
    "num_alarms",
    "overall_performance",
    "reaction_time_s",
    "recovery_time_s",
    "response_time_s",
    "procedures_opened",
    "error",
)


@dataclass(frozen=True)
class ComparisonResult:
    variable: str
    scenario: str
    test_used: Optional[StatTest]
    shapiro_p_a: Optional[float]
    shapiro_p_b: Optional[float]
    levene_p: Optional[float]
    statistic: Optional[float]
    p_value: Optional[float]
    significant: Optional[bool]
    computable: bool
    note: str = ""


def _variable_values(rows: Sequence[FeatureVector], variable: str) -> list:
    values = []
    for fv in rows:
        v = getattr(fv, variable)
        if v is None:
            continue
        if isinstance(v, Performance):
            v = v.value
        elif isinstance(v, bool):
            v = int(v)
        values.append(v)
    return values


def run_battery(
    rows_a: Sequence[FeatureVector],
    rows_b: Sequence[FeatureVector],
    variables: Sequence[str] = DEFAULT_VARIABLES,
    alpha: float = DEFAULT_ALPHA,
) -> list[ComparisonResult]:
    """Compare two groups on every variable, per scenario.

    Combinations where neither group recorded the variable are omitted
    (they do not exist for the pair); combinations observable on only one
    side are reported as not computable.
    """
    results = []
    scenarios = sorted(
        {fv.scenario for fv in rows_a} | {fv.scenario for fv in rows_b},
        key=lambda s: s.value,
    )
    for variable in variables:
        kind = "categorical" if variable in CATEGORICAL_VARIABLES else "continuous"
        for scenario in scenarios:
            a = _variable_values([fv for fv in rows_a if fv.scenario is scenario], variable)
            b = _variable_values([fv for fv in rows_b if fv.scenario is scenario], variable)
            if not a and not b:
                continue
            if not a or not b:
                results.append(
                    ComparisonResult(
                        variable, scenario.value, None, None, None, None,
                        None, None, None, computable=False,
                        note="variable recorded for one group only",
                    )
                )
                continue
            try:
                result = _compare(a, b, kind, alpha, variable, scenario)
            except DegenerateInputError as exc:
                result = ComparisonResult(
                    variable, scenario.value, None, None, None, None,
                    None, None, None, computable=False, note=str(exc),
                )
            results.append(result)
    return results


def _compare(a, b, kind, alpha, variable, scenario) -> ComparisonResult:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        test, sw_a, sw_b, lev = choose_test(a, b, kind, alpha)
    if test is StatTest.CHI_SQUARED:
        stat, p = chi_squared(a, b)
    elif test is StatTest.STUDENT_T:
        stat, p = student_t(a, b)
    elif test is StatTest.WELCH_T:
        stat, p = welch_t(a, b)
    else:
        stat, p = wilcoxon_rank_sum(a, b)
    return ComparisonResult(
        variable=variable,
        scenario=scenario.value,
        test_used=test,
        shapiro_p_a=sw_a,
        shapiro_p_b=sw_b,
        levene_p=lev,
        statistic=stat,
        p_value=p,
        significant=p < alpha,
        computable=True,
    )


# ---------------------------------------------------------------------------
# rendering


def battery_to_json(results: Sequence[ComparisonResult]) -> str:
    payload = [
        {
            "variable": r.variable,
            "scenario": r.scenario,
            "test_used": r.test_used.value if r.test_used else None,
            "shapiro_p_a": r.shapiro_p_a,
            "shapiro_p_b": r.shapiro_p_b,
            "levene_p": r.levene_p,
            "statistic": r.statistic,
            "p_value": r.p_value,
            "significant": r.significant,
            "computable": r.computable,
            "note": r.note,
        }
        for r in results
    ]
    return json.dumps(payload, indent=2, sort_keys=True)


def render_battery(results: Sequence[ComparisonResult]) -> str:
    """Delimited table mirroring the published comparison layout."""

    def fmt(x, digits=3):
        return "" if x is None else f"{x:.{digits}f}"

    lines = ["variable\tscenario\ttest\tshapiro_a\tshapiro_b\tlevene\tp_value\tsignificant"]
    for r in results:
        if not r.computable:
            lines.append(f"{r.variable}\t{r.scenario}\tn/a\t\t\t\t\t{r.note}")
            continue
        mark = "*" if r.significant else ""
        lines.append(
            f"{r.variable}\t{r.scenario}\t{r.test_used.value}\t"
            f"{fmt(r.shapiro_p_a)}\t{fmt(r.shapiro_p_b)}\t{fmt(r.levene_p)}\t"
            f"{fmt(r.p_value)}{mark}\t{'yes' if r.significant else 'no'}"
        )
    return "\n".join(lines)
