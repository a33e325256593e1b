"""Maximum-likelihood logistic regression with inference statistics.

Fitting is Newton-type reweighted least squares on internally standardized
features, with a coefficient cap that converts divergence under (quasi-)
separable data into an explicit error instead of garbage estimates.
Stepwise selection wraps the fitter with forward adds and backward drops
scored by an information criterion.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.stats import norm

from .errors import (
    CollinearityError,
    ContractError,
    InputError,
    NumericalError,
    SeparationError,
)

COEF_CAP = 50.0
GRAD_TOL = 1e-8
MAX_ITER = 200


@dataclass(frozen=True)
class LrModel:
    """Fitted model: selected features, scaling, coefficients and inference.

    coef[0] is the intercept; coef[1:] align with feature_names. Standard
    errors come from the inverse observed information at the optimum.
    """

    feature_names: tuple[str, ...]
    means: np.ndarray
    stds: np.ndarray
    coef: np.ndarray
    std_err: np.ndarray
    z_values: np.ndarray
    p_values: np.ndarray
    log_likelihood: float
    aic: float
    bic: float
    n_obs: int
    iterations: int
    grad_norm: float
    standardized: bool

    def coefficient(self, name: str) -> float:
        return float(self.coef[1 + self.feature_names.index(name)])


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _log_likelihood(y: np.ndarray, eta: np.ndarray) -> float:
    # numerically stable Bernoulli log likelihood: sum y*eta - log(1+e^eta)
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def _dependent_columns(Z: np.ndarray, names: Sequence[str]) -> list[str]:
    """Names of feature columns inside the span of the remaining design."""
    involved = []
    for j in range(1, Z.shape[1]):
        others = np.delete(Z, j, axis=1)
        coeffs, residuals, *_ = np.linalg.lstsq(others, Z[:, j], rcond=None)
        fitted = others @ coeffs
        if np.allclose(fitted, Z[:, j], atol=1e-8):
            involved.append(names[j - 1])
    return involved


def fit(
    X: np.ndarray,
    y: np.ndarray,
    feature_names: Sequence[str],
    standardize: bool = True,
    coef_cap: float = COEF_CAP,
) -> LrModel:
    """Fit by reweighted least squares.

    Raises SeparationError when the coefficient cap is exceeded (the data
    are separable and the MLE does not exist) and CollinearityError when
    the design is rank deficient, naming the dependent features.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise InputError("X must be 2-dimensional")
    n, k = X.shape
    if len(feature_names) != k:
        raise InputError("feature_names do not match X columns")
    if n != y.size:
        raise InputError("X and y row counts differ")
    if not np.isin(y, (0.0, 1.0)).all():
        raise InputError("y must be binary 0/1")
    if y.min() == y.max():
        raise InputError("both outcome classes are required to fit")

    names = tuple(feature_names)
    if standardize and k:
        means = X.mean(axis=0)
        stds = X.std(axis=0)
        degenerate = [names[j] for j in range(k) if stds[j] == 0.0]
        if degenerate:
            raise CollinearityError(degenerate)
        Xs = (X - means) / stds
    else:
        means = np.zeros(k)
        stds = np.ones(k)
        Xs = X

    Z = np.column_stack([np.ones(n), Xs]) if k else np.ones((n, 1))
    if np.linalg.matrix_rank(Z) < Z.shape[1]:
        raise CollinearityError(_dependent_columns(Z, names) or list(names))

    beta = np.zeros(Z.shape[1])
    ll = _log_likelihood(y, Z @ beta)
    iterations = 0
    grad_norm = math.inf
    for iterations in range(1, MAX_ITER + 1):
        eta = Z @ beta
        p = _sigmoid(eta)
        grad = Z.T @ (y - p)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < GRAD_TOL:
            break
        w = p * (1.0 - p)
        H = Z.T @ (Z * w[:, None])
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            raise SeparationError(
                "observed information became singular; classes are separable"
            )
        # step-halving keeps the deviance non-increasing
        scale = 1.0
        for _ in range(40):
            candidate = beta + scale * step
            ll_new = _log_likelihood(y, Z @ candidate)
            if ll_new >= ll - 1e-12:
                break
            scale *= 0.5
        beta = beta + scale * step
        ll = _log_likelihood(y, Z @ beta)
        if np.max(np.abs(beta)) > coef_cap:
            raise SeparationError(
                f"coefficient magnitude exceeded {coef_cap}; "
                "classes are (quasi-)separable"
            )
    else:
        raise NumericalError(
            f"reweighted least squares did not converge in {MAX_ITER} iterations"
        )

    p = _sigmoid(Z @ beta)
    w = p * (1.0 - p)
    H = Z.T @ (Z * w[:, None])
    try:
        cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        raise SeparationError("observed information singular at the optimum")
    std_err = np.sqrt(np.diag(cov))
    z = np.divide(beta, std_err, out=np.zeros_like(beta), where=std_err > 0)
    p_values = 2.0 * norm.sf(np.abs(z))
    n_params = Z.shape[1]
    return LrModel(
        feature_names=names,
        means=means,
        stds=stds,
        coef=beta,
        std_err=std_err,
        z_values=z,
        p_values=p_values,
        log_likelihood=ll,
        aic=2.0 * n_params - 2.0 * ll,
        bic=n_params * math.log(n) - 2.0 * ll,
        n_obs=n,
        iterations=iterations,
        grad_norm=grad_norm,
        standardized=standardize,
    )


def predict_proba(model: LrModel, row: Mapping[str, float]) -> float:
    """Failure probability for one observation.

    Every selected feature must be supplied; this estimator never
    marginalizes over missing inputs.
    """
    missing = [n for n in model.feature_names if n not in row]
    if missing:
        raise ContractError(f"missing selected features: {', '.join(missing)}")
    x = np.array([float(row[n]) for n in model.feature_names])
    xs = (x - model.means) / model.stds
    eta = model.coef[0] + float(xs @ model.coef[1:]) if model.feature_names else model.coef[0]
    return float(_sigmoid(np.array([eta]))[0])


def predict_proba_rows(model: LrModel, X: np.ndarray) -> np.ndarray:
    """Vectorized failure probabilities for rows aligned with feature_names."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != len(model.feature_names):
        raise ContractError("row width does not match selected features")
    Xs = (X - model.means) / model.stds
    return _sigmoid(model.coef[0] + Xs @ model.coef[1:])


@dataclass(frozen=True)
class StepwiseResult:
    model: LrModel
    criterion: str
    trace: tuple[str, ...]  # human-readable add/drop log


def _criterion_value(model: LrModel, criterion: str) -> float:
    if criterion == "aic":
        return model.aic
    if criterion == "bic":
        return model.bic
    raise InputError(f"unknown criterion {criterion!r}")


def stepwise(
    X: np.ndarray,
    y: np.ndarray,
    candidate_names: Sequence[str],
    criterion: str = "aic",
    standardize: bool = True,
) -> StepwiseResult:
    """Forward selection with backward pruning under an information criterion.

    Starts from the intercept-only model; each round adds the candidate
    that improves the criterion most, then drops any selected predictor
    whose removal improves it. Candidates are scanned in name order so the
    outcome is deterministic; candidates whose fit fails (separation,
    collinearity) are simply not eligible for that move. Stops when no
    move improves the criterion strictly.
    """
    X = np.asarray(X, dtype=float)
    if len(candidate_names) != X.shape[1]:
        raise InputError("candidate_names do not match X columns")
    if len(candidate_names) < 2:
        raise InputError("stepwise selection needs at least two candidates")
    index = {name: j for j, name in enumerate(candidate_names)}

    def fit_subset(names: Sequence[str]) -> LrModel:
        cols = [index[n] for n in names]
        return fit(X[:, cols], y, names, standardize=standardize)

    selected: list[str] = []
    current = fit_subset(selected)
    current_score = _criterion_value(current, criterion)
    trace: list[str] = [f"start intercept-only {criterion}={current_score:.4f}"]

    while True:
        moved = False
        remaining = sorted(set(candidate_names) - set(selected))
        best: Optional[tuple[float, str, LrModel]] = None
        for name in remaining:
            try:
                model = fit_subset(sorted(selected + [name]))
            except (SeparationError, CollinearityError, NumericalError):
                continue
            score = _criterion_value(model, criterion)
            if best is None or score < best[0]:
                best = (score, name, model)
        if best is not None and best[0] < current_score:
            current_score, added, current = best
            selected = sorted(selected + [added])
            trace.append(f"add {added} {criterion}={current_score:.4f}")
            moved = True

        while len(selected) > 1:
            best_drop: Optional[tuple[float, str, LrModel]] = None
            for name in sorted(selected):
                try:
                    model = fit_subset(sorted(set(selected) - {name}))
                except (SeparationError, CollinearityError, NumericalError):
                    continue
                score = _criterion_value(model, criterion)
                if best_drop is None or score < best_drop[0]:
                    best_drop = (score, name, model)
            if best_drop is not None and best_drop[0] < current_score:
                current_score, dropped, current = best_drop
                selected = sorted(set(selected) - {dropped})
                trace.append(f"drop {dropped} {criterion}={current_score:.4f}")
                moved = True
            else:
                break

        if not moved:
            break

    return StepwiseResult(model=current, criterion=criterion, trace=tuple(trace))


def aggregate_success_by_cell(
    probs: np.ndarray, groups: Sequence[str], scenarios: Sequence[str]
) -> dict[str, dict[str, Optional[float]]]:
    """Mean success probability (1 - p_failure) per scenario x group cell.

    Cells with no rows are reported as absent (None), never as zero.
    """
    if not (len(probs) == len(groups) == len(scenarios)):
        raise InputError("probs, groups and scenarios must align")
    table: dict[str, dict[str, Optional[float]]] = {}
    for s in sorted(set(scenarios)):
        table[s] = {}
        for g in sorted(set(groups)):
            cell = [
                1.0 - p
                for p, gg, ss in zip(probs, groups, scenarios)
                if gg == g and ss == s
            ]
            table[s][g] = float(np.mean(cell)) if cell else None
    return table


# ---------------------------------------------------------------------------
# serialization

FORMAT = "opresponse-lr"
FORMAT_VERSION = 1


def model_to_json(model: LrModel) -> str:
    payload = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "features": list(model.feature_names),
        "standardized": model.standardized,
        "means": model.means.tolist(),
        "stds": model.stds.tolist(),
        "coef": model.coef.tolist(),
        "std_err": model.std_err.tolist(),
        "z_values": model.z_values.tolist(),
        "p_values": model.p_values.tolist(),
        "log_likelihood": model.log_likelihood,
        "aic": model.aic,
        "bic": model.bic,
        "n_obs": model.n_obs,
        "iterations": model.iterations,
        "grad_norm": model.grad_norm,
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def model_from_json(text: str) -> LrModel:
    payload = json.loads(text)
    if payload.get("format") != FORMAT:
        raise InputError(f"not a {FORMAT} document")
    if payload.get("version") != FORMAT_VERSION:
        raise InputError(f"unsupported model version {payload.get('version')}")
    return LrModel(
        feature_names=tuple(payload["features"]),
        means=np.asarray(payload["means"], dtype=float),
        stds=np.asarray(payload["stds"], dtype=float),
        coef=np.asarray(payload["coef"], dtype=float),
        std_err=np.asarray(payload["std_err"], dtype=float),
        z_values=np.asarray(payload["z_values"], dtype=float),
        p_values=np.asarray(payload["p_values"], dtype=float),
        log_likelihood=float(payload["log_likelihood"]),
        aic=float(payload["aic"]),
        bic=float(payload["bic"]),
        n_obs=int(payload["n_obs"]),
        iterations=int(payload["iterations"]),
        grad_norm=float(payload["grad_norm"]),
        standardized=bool(payload["standardized"]),
    )
