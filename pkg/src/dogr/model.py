"""Mixture of Gaussian-feature components, each carrying its own weighted
linear regression, fitted by expectation-maximization.

Component ``k`` models the joint density of a row ``(x, y)`` as

    N(x; mu_k, Sigma_k) * N(y; b_k0 + b_k . x, s2_k)

and the mixture weights ``omega_k`` sum to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.cluster.vq import kmeans2

from dogr.exceptions import (
    DataError,
    DegenerateComponentError,
    DogrError,
    FactorizationError,
    InsufficientDataError,
    SingularDesignError,
)
from dogr.numerics import (
    cholesky_lower,
    log_sum_exp_rows,
    mvn_log_density_rows,
    normal_log_density,
    symmetrize,
    wls_fit,
)

INIT_STRATEGIES = ("random_responsibilities", "kmeans_on_xy")
_RIDGE_ESCALATIONS = 3
_RESEED_FRACTION = 0.05


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Feature matrix, outcome vector and their column names.

    Arrays are copied and frozen on construction.
    """

    features: np.ndarray
    outcome: np.ndarray
    feature_names: tuple[str, ...]
    outcome_name: str = "y"

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.array(self.outcome, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"features must be a non-empty N x p matrix, got shape {X.shape}")
        if y.size != X.shape[0]:
            raise DataError(f"{X.shape[0]} feature rows but {y.size} outcome values")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains NaN or infinite values")
        names = tuple(str(n) for n in self.feature_names)
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} feature names for {X.shape[1]} columns")
        if len(set(names)) != len(names):
            raise DataError(f"feature names are not unique: {list(names)}")
        object.__setattr__(self, "features", _readonly(X))
        object.__setattr__(self, "outcome", _readonly(y))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "outcome_name", str(self.outcome_name))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.features[rows], self.outcome[rows], self.feature_names, self.outcome_name)

    def select(self, names: Sequence[str]) -> "Dataset":
        cols = [self.feature_names.index(n) for n in names]
        return Dataset(self.features[:, cols], self.outcome, tuple(names), self.outcome_name)


@dataclass(frozen=True)
class FitConfig:
    """Settings for :func:`fit`.

    ``covariance_ridge`` is relative: the ridge added to each component
    covariance is ``covariance_ridge * trace(Sigma) / p`` times the identity.
    """

    n_components: int = 2
    max_iterations: int = 500
    rel_tolerance: float = 1e-6
    seed: int = 0
    init_strategy: str = "random_responsibilities"
    covariance_ridge: float = 1e-6
    residual_variance_floor: float = 1e-8
    min_component_weight: float = 1e-6
    n_restarts: int = 1

    def __post_init__(self):
        if int(self.n_components) < 1:
            raise ValueError("n_components must be >= 1")
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.rel_tolerance > 0:
            raise ValueError("rel_tolerance must be positive")
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValueError(f"init_strategy must be one of {INIT_STRATEGIES}")
        if not self.covariance_ridge >= 0:
            raise ValueError("covariance_ridge must be nonnegative")
        if not self.residual_variance_floor > 0:
            raise ValueError("residual_variance_floor must be positive")
        if not self.min_component_weight >= 0:
            raise ValueError("min_component_weight must be nonnegative")
        if int(self.n_restarts) < 1:
            raise ValueError("n_restarts must be >= 1")
        if not -(2**63) <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def replace(self, **changes) -> "FitConfig":
        from dataclasses import replace

        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "n_components": int(self.n_components),
            "max_iterations": int(self.max_iterations),
            "rel_tolerance": float(self.rel_tolerance),
            "seed": int(self.seed),
            "init_strategy": self.init_strategy,
            "covariance_ridge": float(self.covariance_ridge),
            "residual_variance_floor": float(self.residual_variance_floor),
            "min_component_weight": float(self.min_component_weight),
            "n_restarts": int(self.n_restarts),
        }


@dataclass(frozen=True)
class Component:
    """One latent subgroup.

    ``coefficients`` is intercept-first; ``residual_variance`` is the
    variance (not the standard deviation) of the regression residuals.
    """

    weight: float
    mean: np.ndarray
    covariance: np.ndarray
    coefficients: np.ndarray
    residual_variance: float
    coefficient_standard_errors: np.ndarray = None

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).ravel()
        cov = symmetrize(np.atleast_2d(np.array(self.covariance, dtype=float)))
        beta = np.array(self.coefficients, dtype=float).ravel()
        p = mean.size
        if cov.shape != (p, p) or beta.size != p + 1:
            raise DataError(
                f"inconsistent component shapes: mean {mean.shape}, "
                f"covariance {cov.shape}, coefficients {beta.shape}"
            )
        if not self.residual_variance > 0:
            raise DataError("residual_variance must be positive")
        se = self.coefficient_standard_errors
        se = np.full(p + 1, np.nan) if se is None else np.array(se, dtype=float).ravel()
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "mean", _readonly(mean))
        object.__setattr__(self, "covariance", _readonly(cov))
        object.__setattr__(self, "coefficients", _readonly(beta))
        object.__setattr__(self, "residual_variance", float(self.residual_variance))
        object.__setattr__(self, "coefficient_standard_errors", _readonly(se))

    @property
    def p(self) -> int:
        return self.mean.size

    @cached_property
    def cholesky(self) -> np.ndarray:
        return cholesky_lower(self.covariance, "component covariance")

    def regression_values(self, X) -> np.ndarray:
        X = _as_rows(X, self.p)
        return self.coefficients[0] + X @ self.coefficients[1:]

    def marginal_log_density(self, X) -> np.ndarray:
        """log N(x; mu, Sigma) for each row of ``X``."""
        return mvn_log_density_rows(_as_rows(X, self.p), self.mean, chol=self.cholesky)

    def joint_log_density(self, X, y) -> np.ndarray:
        X = _as_rows(X, self.p)
        return self.marginal_log_density(X) + normal_log_density(
            y, self.regression_values(X), self.residual_variance
        )


def _as_rows(X, p: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :] if X.size == p else X[:, None]
    if X.shape[1] != p:
        raise ValueError(f"expected {p} features, got {X.shape[1]}")
    return X


@dataclass(frozen=True)
class Model:
    """A fitted (or hand-built) mixture model plus fit metadata."""

    components: tuple[Component, ...]
    feature_names: tuple[str, ...]
    outcome_name: str = "y"
    fit_trace: tuple[float, ...] = ()
    converged: bool = False
    iterations: int = 0
    config: FitConfig | None = None
    diagnostics: tuple[str, ...] = field(default=())

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise DataError("a model needs at least one component")
        p = comps[0].p
        if any(c.p != p for c in comps):
            raise DataError("components disagree on the feature dimension")
        names = tuple(self.feature_names)
        if len(names) != p:
            raise DataError(f"{len(names)} feature names for dimension {p}")
        w = np.array([c.weight for c in comps])
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise DataError(f"component weights must be positive and sum to 1, got {w}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "fit_trace", tuple(float(v) for v in self.fit_trace))
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def p(self) -> int:
        return self.components[0].p

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @property
    def log_likelihood_value(self) -> float:
        return self.fit_trace[-1] if self.fit_trace else float("nan")

    def predict(self, X, mode: str = "posterior_weights") -> np.ndarray:
        from dogr.inference import predict_rows

        return predict_rows(self, X, mode)


# ---------------------------------------------------------------------------
# densities


def component_regression_value(c: Component, x) -> float:
    """Intercept plus slopes dotted with a single feature vector."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != c.p:
        raise ValueError(f"expected {c.p} features, got {x.size}")
    return float(c.coefficients[0] + x @ c.coefficients[1:])


def joint_log_density(c: Component, x, y: float) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != c.p:
        raise ValueError(f"expected {c.p} features, got {x.size}")
    return float(c.joint_log_density(x[None, :], np.array([y]))[0])


def _log_weighted_densities(components: Sequence[Component], X, y) -> np.ndarray:
    out = np.empty((X.shape[0], len(components)))
    for k, c in enumerate(components):
        try:
            out[:, k] = np.log(c.weight) + c.joint_log_density(X, y)
        except FactorizationError as exc:
            raise FactorizationError(f"component {k}: {exc}", context=f"component {k}") from exc
    return out


def _check_dims(m: Model, d: Dataset):
    if d.p != m.p:
        raise ValueError(f"model expects {m.p} features, dataset has {d.p}")


def log_likelihood(m: Model, d: Dataset) -> float:
    """Sum over rows of the log mixture density."""
    _check_dims(m, d)
    logp = _log_weighted_densities(m.components, d.features, d.outcome)
    return float(np.sum(log_sum_exp_rows(logp)))


def _e_step(components, X, y):
    logp = _log_weighted_densities(components, X, y)
    norm = log_sum_exp_rows(logp)
    gamma = np.exp(logp - norm[:, None])
    return gamma, float(np.sum(norm))


def e_step(m: Model, d: Dataset) -> np.ndarray:
    """Responsibilities ``gamma[i, k]``, an N x K matrix with unit row sums."""
    _check_dims(m, d)
    return _e_step(m.components, d.features, d.outcome)[0]


# ---------------------------------------------------------------------------
# M-step


class _ReseedLedger:
    """Tracks which components have already been re-seeded in one fit."""

    def __init__(self):
        self.reseeded: set[int] = set()
        self.events: list[str] = []


def _relative_ridge(S: np.ndarray, ridge: float) -> float:
    p = S.shape[0]
    scale = np.trace(S) / p
    return ridge * (scale if scale > 0 else 1.0)


def _estimate_component(X, y, w, cfg: FitConfig, k: int, iteration):
    nk = float(np.sum(w))
    mu = (w @ X) / nk
    diff = X - mu
    S = symmetrize((w[:, None] * diff).T @ diff / nk)
    p = X.shape[1]
    ridge = _relative_ridge(S, cfg.covariance_ridge)
    for attempt in range(_RIDGE_ESCALATIONS + 1):
        cov = S + ridge * np.eye(p)
        try:
            cholesky_lower(cov)
            break
        except FactorizationError:
            if attempt == _RIDGE_ESCALATIONS:
                raise DegenerateComponentError(
                    f"component {k}: covariance not positive definite after "
                    f"{_RIDGE_ESCALATIONS} ridge escalations (ridge={ridge:.3g})",
                    iteration=iteration,
                )
            ridge = 10.0 * ridge if ridge > 0 else 1e-12 * max(np.trace(S) / p, 1.0)
    sol = wls_fit(X, y, w)
    s2 = max(sol.weighted_rss / nk, cfg.residual_variance_floor)
    return mu, cov, sol, s2, nk


def _reseed(gamma: np.ndarray, k: int, ledger: _ReseedLedger, iteration, reason: str):
    if k in ledger.reseeded:
        raise DegenerateComponentError(
            f"component {k} degenerated a second time ({reason})",
            iteration=iteration,
            diagnostics=ledger.events + [f"iteration {iteration}: component {k}: {reason}"],
        )
    ledger.reseeded.add(k)
    n, K = gamma.shape
    count = max(int(math.ceil(_RESEED_FRACTION * n)), 1)
    rows = np.argsort(gamma.max(axis=1), kind="stable")[:count]
    gamma[rows] = 1.0 / K
    ledger.events.append(
        f"iteration {iteration}: component {k} re-seeded over {count} rows ({reason})"
    )


def _m_step(X, y, gamma, cfg: FitConfig, ledger: _ReseedLedger, iteration=None):
    n, K = gamma.shape
    gamma = np.array(gamma, dtype=float)
    threshold = cfg.min_component_weight * n
    # at most one pass per component can re-seed, so this terminates
    for _ in range(K + 1):
        mass = gamma.sum(axis=0)
        dying = [k for k in range(K) if not mass[k] > threshold]
        if not dying:
            break
        for k in dying:
            _reseed(gamma, k, ledger, iteration, f"mass {mass[k]:.3g} below {threshold:.3g}")

    while True:
        try:
            estimates = [
                _estimate_component(X, y, gamma[:, k], cfg, k, iteration) for k in range(K)
            ]
            break
        except SingularDesignError as exc:
            bad = _first_singular(X, y, gamma)
            if bad is None:
                raise DegenerateComponentError(str(exc), iteration=iteration) from exc
            _reseed(gamma, bad, ledger, iteration, "rank-deficient weighted design")

    total = sum(e[4] for e in estimates)
    return [
        Component(
            weight=nk / total,
            mean=mu,
            covariance=cov,
            coefficients=sol.coefficients,
            residual_variance=s2,
            coefficient_standard_errors=sol.standard_errors,
        )
        for mu, cov, sol, s2, nk in estimates
    ]


def _first_singular(X, y, gamma):
    for k in range(gamma.shape[1]):
        try:
            wls_fit(X, y, gamma[:, k])
        except SingularDesignError:
            return k
    return None


def m_step(d: Dataset, gamma, cfg: FitConfig) -> list[Component]:
    """Re-estimate every component from responsibilities ``gamma`` (N x K).

    Weights, means and covariances follow the weighted-moment formulas
    (covariance with denominator ``sum(gamma[:, k])``, plus ridge); the
    regression of each component is a WLS fit with weights ``gamma[:, k]``
    and its residual variance is the weighted mean squared residual.
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 2 or gamma.shape[0] != d.n:
        raise ValueError(f"gamma must be N x K with N={d.n}, got shape {gamma.shape}")
    return _m_step(d.features, d.outcome, gamma, cfg, _ReseedLedger())


# ---------------------------------------------------------------------------
# EM loop


def _seed_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) % 2**64)


def initial_responsibilities(X, y, K: int, strategy: str, rng: np.random.Generator) -> np.ndarray:
    """Starting N x K responsibilities for EM."""
    n = X.shape[0]
    if K == 1:
        return np.ones((n, 1))
    if strategy == "random_responsibilities":
        return rng.dirichlet(np.ones(K), size=n)
    if strategy == "kmeans_on_xy":
        Z = np.column_stack([X, y])
        sd = Z.std(axis=0)
        Z = (Z - Z.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
        _, labels = kmeans2(Z, K, iter=50, minit="++", seed=rng, missing="warn")
        gamma = np.full((n, K), 0.1 / (K - 1))
        gamma[np.arange(n), labels] = 0.9
        return gamma
    raise ValueError(f"unknown init strategy {strategy!r}")


def _fit_once(d: Dataset, cfg: FitConfig, seed: int) -> Model:
    X, y = d.features, d.outcome
    K = cfg.n_components
    rng = _seed_rng(seed)
    gamma = initial_responsibilities(X, y, K, cfg.init_strategy, rng)
    ledger = _ReseedLedger()
    components = _m_step(X, y, gamma, cfg, ledger, iteration=0)

    trace: list[float] = []
    converged = False
    for it in range(1, cfg.max_iterations + 1):
        gamma, ll = _e_step(components, X, y)
        if not np.isfinite(ll):
            raise DegenerateComponentError(
                f"log-likelihood became {ll} at iteration {it}",
                iteration=it,
                diagnostics=ledger.events,
            )
        trace.append(ll)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= cfg.rel_tolerance * abs(trace[-2]):
            converged = True
            break
        if it == cfg.max_iterations:
            break
        components = _m_step(X, y, gamma, cfg, ledger, iteration=it)

    return Model(
        components=tuple(components),
        feature_names=d.feature_names,
        outcome_name=d.outcome_name,
        fit_trace=tuple(trace),
        converged=converged,
        iterations=len(trace),
        config=cfg,
        diagnostics=tuple([f"seed {seed}"] + ledger.events),
    )


def check_fit_size(n: int, p: int, K: int):
    if not n > K * (p + 2):
        raise InsufficientDataError(
            f"need N > K*(p+2) = {K * (p + 2)} observations for K={K}, p={p}; got N={n}"
        )


def fit(d: Dataset, cfg: FitConfig) -> Model:
    """Fit the mixture by EM.

    With ``cfg.n_restarts > 1`` the seeds ``cfg.seed, cfg.seed + 1, ...``
    are tried in turn and the run with the highest final log-likelihood is
    returned. Restarts that fail are skipped; if all fail the last error is
    raised.
    """
    check_fit_size(d.n, d.p, cfg.n_components)
    best = None
    failure = None
    for r in range(cfg.n_restarts):
        try:
            m = _fit_once(d, cfg, int(cfg.seed) + r)
        except DogrError as exc:
            failure = exc
            continue
        if best is None or m.log_likelihood_value > best.log_likelihood_value:
            best = m
    if best is None:
        raise failure
    return best


def joint_block_parameters(c: Component, x):
    """Mean and covariance of the equivalent (p+1)-dimensional normal.

    The joint density of one component at ``(x, y)`` equals the normal
    density with mean ``[mu, yhat(x)]`` and block-diagonal covariance
    ``diag(Sigma, s2)``.
    """
    p = c.p
    mean = np.append(c.mean, component_regression_value(c, x))
    cov = np.zeros((p + 1, p + 1))
    cov[:p, :p] = c.covariance
    cov[p, p] = c.residual_variance
    return mean, cov

