"""Prediction, soft membership of new points, and per-component summaries
of a fitted :class:`~dogr.model.Model`."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from dogr.model import Dataset, Model, _as_rows, e_step
from dogr.numerics import WlsSolution, log_sum_exp_rows

PREDICTION_MODES = ("global_weights", "posterior_weights")
_MODE_ALIASES = {"global": "global_weights", "posterior": "posterior_weights"}
SIGNIFICANCE_LEVEL = 0.05


def _normalize_mode(mode: str) -> str:
    mode = _MODE_ALIASES.get(mode, mode)
    if mode not in PREDICTION_MODES:
        raise ValueError(f"unknown prediction mode {mode!r}; expected one of {PREDICTION_MODES}")
    return mode


def _log_marginal_weighted(m: Model, X) -> np.ndarray:
    out = np.empty((X.shape[0], m.n_components))
    for k, c in enumerate(m.components):
        out[:, k] = np.log(c.weight) + c.marginal_log_density(X)
    return out


def posterior_weights(m: Model, X) -> np.ndarray:
    """Component probabilities of each row of ``X`` with the outcome unseen.

    Row ``i`` is proportional to ``omega_k * N(x_i; mu_k, Sigma_k)``.
    """
    X = _as_rows(X, m.p)
    logp = _log_marginal_weighted(m, X)
    return np.exp(logp - log_sum_exp_rows(logp)[:, None])


def predict_rows(m: Model, X, mode: str = "posterior_weights") -> np.ndarray:
    """Vectorized :func:`predict` over the rows of ``X``."""
    mode = _normalize_mode(mode)
    X = _as_rows(X, m.p)
    yhat = np.column_stack([c.regression_values(X) for c in m.components])
    if mode == "global_weights":
        w = np.broadcast_to(m.weights, yhat.shape)
    else:
        w = posterior_weights(m, X)
    return np.sum(w * yhat, axis=1)


def predict(m: Model, x, mode: str = "posterior_weights") -> float:
    """Predicted outcome for a single feature vector.

    ``global_weights`` averages the component regression lines with the
    mixture weights; ``posterior_weights`` (default) averages them with the
    membership probabilities of ``x`` under the feature marginals, which
    adapts the mix to where ``x`` falls.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != m.p:
        raise ValueError(f"model expects {m.p} features, got {x.size}")
    return float(predict_rows(m, x[None, :], mode)[0])


def membership(m: Model, x, y: float | None = None) -> np.ndarray:
    """Normalized responsibilities of one point.

    With ``y`` the joint component density is used (same as the E-step);
    without it only the feature marginal.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != m.p:
        raise ValueError(f"model expects {m.p} features, got {x.size}")
    if y is None:
        return posterior_weights(m, x[None, :])[0]
    d = Dataset(x[None, :], [y], m.feature_names, m.outcome_name)
    return e_step(m, d)[0]


# ---------------------------------------------------------------------------
# coefficient comparison


@dataclass(frozen=True)
class ComponentCoefficient:
    component: int
    beta: float
    se: float
    z_score: float
    p_value: float
    reversal_flag: bool
    z_undefined: bool = False


@dataclass(frozen=True)
class CoefficientReport:
    feature: str
    pooled_beta: float
    pooled_se: float
    per_component: tuple[ComponentCoefficient, ...] = field(default=())


def coefficient_z_test(beta_a: float, se_a: float, beta_b: float, se_b: float):
    """Two-sided z-test for equality of two independent coefficients.

    Returns ``(z, p_value, undefined)``; when both standard errors are zero
    the statistic is undefined and ``(nan, 1.0, True)`` is returned.
    """
    denom = math.sqrt(se_a**2 + se_b**2)
    if not denom > 0 or not math.isfinite(denom):
        if denom == math.inf:
            return 0.0, 1.0, False
        return math.nan, 1.0, True
    z = (beta_a - beta_b) / denom
    p = float(min(1.0, 2.0 * norm.sf(abs(z))))
    return z, p, False


def coefficient_report(m: Model, pooled: WlsSolution) -> list[CoefficientReport]:
    """Compare each component's slopes with a pooled regression.

    A reversal is flagged when a component slope has the opposite sign to
    the pooled slope and differs from it at the 0.05 level.
    """
    if pooled.coefficients.size != m.p + 1:
        raise ValueError(
            f"pooled fit has {pooled.coefficients.size - 1} features, model has {m.p}"
        )
    reports = []
    for j, name in enumerate(m.feature_names, start=1):
        b0, s0 = float(pooled.coefficients[j]), float(pooled.standard_errors[j])
        rows = []
        for k, c in enumerate(m.components):
            b, s = float(c.coefficients[j]), float(c.coefficient_standard_errors[j])
            z, p, undefined = coefficient_z_test(b, s, b0, s0)
            reversal = (not undefined) and np.sign(b) != np.sign(b0) and p <= SIGNIFICANCE_LEVEL
            rows.append(ComponentCoefficient(k, b, s, z, p, bool(reversal), undefined))
        reports.append(CoefficientReport(name, b0, s0, tuple(rows)))
    return reports


def coefficient_rows(reports: list[CoefficientReport]) -> list[dict]:
    """Flatten reports into CSV-ready rows (feature, component, beta, se, z, p, reversal).

    The pooled fit appears as component ``"pooled"`` with empty test columns.
    """
    rows = []
    for r in reports:
        rows.append(
            {"feature": r.feature, "component": "pooled", "beta": r.pooled_beta,
             "se": r.pooled_se, "z": None, "p": None, "reversal": None}
        )
        for c in r.per_component:
            rows.append(
                {"feature": r.feature, "component": c.component, "beta": c.beta,
                 "se": c.se, "z": c.z_score, "p": c.p_value, "reversal": c.reversal_flag}
            )
    return rows


# ---------------------------------------------------------------------------
# radar chart data


def radar_export(m: Model) -> dict:
    """Per-component feature means scaled by the per-feature maximum.

    Each feature's coordinates are divided by their largest value across
    components, so the largest becomes exactly 1. A feature whose maximum
    is not positive is scaled by its largest absolute value instead and is
    listed under ``"warnings"``.

    ``outcome_mean`` is the component's expected outcome, i.e. its
    regression line evaluated at the component mean.
    """
    means = np.array([c.mean for c in m.components])
    scale = means.max(axis=0)
    warned = []
    for j, name in enumerate(m.feature_names):
        if not scale[j] > 0:
            absmax = np.abs(means[:, j]).max()
            scale[j] = absmax if absmax > 0 else 1.0
            warned.append(name)
    if warned:
        warnings.warn(
            f"non-positive maximum mean for {warned}; scaled by max absolute value",
            RuntimeWarning,
            stacklevel=2,
        )
    normalized = means / scale
    comps = []
    for k, c in enumerate(m.components):
        comps.append(
            {
                "index": k,
                "weight": c.weight,
                "outcome_mean": float(c.coefficients[0] + c.mean @ c.coefficients[1:]),
                "normalized_mu": {n: float(normalized[k, j]) for j, n in enumerate(m.feature_names)},
            }
        )
    out = {"components": comps}
    if warned:
        out["warnings"] = [f"abs_max_normalization:{n}" for n in warned]
    return out


def component_outcome_summary(m: Model, d: Dataset) -> list[dict]:
    """Membership-weighted outcome mean per component with its standard error.

    The standard error is ``sqrt(sum g (y - ybar)^2 / sum g) / sqrt(n_eff)``
    with Kish effective size ``n_eff = (sum g)^2 / sum g^2``.
    """
    gamma = e_step(m, d)
    y = d.outcome
    out = []
    for k in range(m.n_components):
        g = gamma[:, k]
        mass = g.sum()
        mean = float(g @ y / mass)
        var = float(g @ (y - mean) ** 2 / mass)
        n_eff = mass**2 / float(g @ g)
        out.append(
            {"component": k, "outcome_mean": mean,
             "outcome_weighted_se": math.sqrt(var / n_eff), "effective_n": n_eff}
        )
    return out
