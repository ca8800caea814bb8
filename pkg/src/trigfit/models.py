"""Fitters for trigonometric regression.

Three response models share the same basis:

* ``ols``: least squares on ``y``,
* ``lognormal``: least squares on ``log(y)``,
* ``gamma-glm-log``: gamma GLM with a log link, fitted by IRLS.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .design import DesignSpec, design_matrix, gram_matrix, order_from_ncoef
from .numerics import NotPositiveDefinite, spd_inverse, spd_solve

__all__ = [
    "ModelKind",
    "FitError",
    "RankDeficientDesign",
    "InsufficientSamples",
    "NonPositiveResponse",
    "NotConverged",
    "GlmFamily",
    "GAMMA_LOG",
    "IrlsControl",
    "FitResult",
    "fit_ols",
    "fit_lognormal",
    "fit_glm",
    "fit",
    "covariance_ols",
    "covariance_glm",
    "gamma_score",
    "predict",
    "MODEL_KINDS",
]

MODEL_KINDS = ("ols", "lognormal", "gamma-glm-log")
ModelKind = str


class FitError(Exception):
    """Base class for fitting failures."""

    code = "FIT"


class RankDeficientDesign(FitError, NotPositiveDefinite):
    code = "RANK_DEFICIENT"


class InsufficientSamples(FitError):
    code = "INSUFFICIENT_SAMPLES"


class NonPositiveResponse(FitError, ValueError):
    code = "NON_POSITIVE_RESPONSE"

    def __init__(self, indices):
        self.indices = [int(i) for i in indices]
        shown = ", ".join(map(str, self.indices[:10]))
        more = "" if len(self.indices) <= 10 else f", ... ({len(self.indices)} total)"
        super().__init__(f"response must be strictly positive; offending indices: {shown}{more}")


class NotConverged(FitError):
    code = "NOT_CONVERGED"

    def __init__(self, message: str, beta: np.ndarray, trace: list[float]):
        super().__init__(message)
        self.beta = beta
        self.trace = trace


@dataclass(frozen=True)
class GlmFamily:
    """Variance function and link of a GLM.

    ``link`` maps the mean to the linear predictor, ``inverse_link`` back, and
    ``mu_eta`` is ``d mu / d eta`` as a function of ``eta``.
    """

    name: str
    variance: Callable[[np.ndarray], np.ndarray]
    link: Callable[[np.ndarray], np.ndarray]
    inverse_link: Callable[[np.ndarray], np.ndarray]
    mu_eta: Callable[[np.ndarray], np.ndarray]
    unit_deviance: Callable[[np.ndarray, np.ndarray], np.ndarray]
    requires_positive: bool = True
    # d/d eta of mu_eta / variance; enables observed-information weights
    score_weight_deta: Callable[[np.ndarray], np.ndarray] | None = None


def _gamma_unit_deviance(y: np.ndarray, mu: np.ndarray) -> np.ndarray:
    return 2.0 * ((y - mu) / mu - np.log(y / mu))


GAMMA_LOG = GlmFamily(
    name="gamma-glm-log",
    variance=lambda mu: mu * mu,
    link=np.log,
    inverse_link=np.exp,
    mu_eta=np.exp,
    unit_deviance=_gamma_unit_deviance,
    score_weight_deta=lambda eta: -np.exp(-eta),
)


@dataclass(frozen=True)
class IrlsControl:
    """IRLS settings.

    Iteration stops when the relative deviance change falls below ``tol`` and
    the largest coefficient step is below ``step_tol * (1 + max|beta|)``.
    ``weights="observed"`` uses observed-information working weights (Newton
    steps) when the family supports it; ``"expected"`` is Fisher scoring.
    """

    max_iter: int = 50
    tol: float = 1e-10
    step_tol: float = 1e-10
    max_halvings: int = 30
    weights: str = "observed"


@dataclass
class FitResult:
    """Output of any of the fitters.

    ``fitted_values`` are on the response scale except for ``lognormal`` fits,
    where they are on the log scale (``fitted_scale == "log"``).
    ``sigma2_hat`` is set for ``ols``/``lognormal``, ``dispersion_hat`` for the
    GLM; either is ``None`` (with ``covariance``) when the fit is saturated.
    """

    model_kind: ModelKind
    beta_hat: np.ndarray
    covariance: np.ndarray | None
    fitted_values: np.ndarray
    residuals: np.ndarray
    sigma2_hat: float | None = None
    dispersion_hat: float | None = None
    converged: bool = True
    iterations: int = 1
    deviance: float | None = None
    fitted_scale: str = "response"
    trace: list[float] = field(default_factory=list)

    @property
    def order(self) -> int:
        return order_from_ncoef(self.beta_hat.size)

    @property
    def n(self) -> int:
        return int(self.residuals.size)

    @property
    def std_errors(self) -> np.ndarray | None:
        if self.covariance is None:
            return None
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def to_dict(self) -> dict:
        def _arr(a):
            return None if a is None else np.asarray(a, dtype=float).tolist()

        return {
            "model": self.model_kind,
            "order": self.order,
            "n": self.n,
            "beta_hat": _arr(self.beta_hat),
            "std_errors": _arr(self.std_errors),
            "covariance": _arr(self.covariance),
            "sigma2_hat": self.sigma2_hat,
            "dispersion_hat": self.dispersion_hat,
            "deviance": self.deviance,
            "converged": self.converged,
            "iterations": self.iterations,
            "fitted_scale": self.fitted_scale,
            "fitted_values": _arr(self.fitted_values),
            "residuals": _arr(self.residuals),
        }


def _check_inputs(B, y) -> tuple[np.ndarray, np.ndarray]:
    B = np.asarray(B, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if B.ndim != 2:
        raise ValueError("basis matrix must be two-dimensional")
    if B.shape[0] != y.size:
        raise ValueError(f"basis has {B.shape[0]} rows but response has {y.size} values")
    order_from_ncoef(B.shape[1])
    if not np.all(np.isfinite(y)):
        raise ValueError("response contains non-finite values")
    return B, y


def _check_positive(y: np.ndarray) -> None:
    bad = np.flatnonzero(~(y > 0))
    if bad.size:
        raise NonPositiveResponse(bad)


def _solve(G: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return spd_solve(G, rhs)
    except NotPositiveDefinite as exc:
        raise RankDeficientDesign(f"design is rank deficient: {exc}", exc.pivot_index) from exc


def _inverse(G: np.ndarray) -> np.ndarray:
    try:
        return spd_inverse(G)
    except NotPositiveDefinite as exc:
        raise RankDeficientDesign(f"design is rank deficient: {exc}", exc.pivot_index) from exc


def _residual_df(n: int, p: int) -> int:
    return n - p


def covariance_ols(B, residuals, order: int | None = None) -> np.ndarray:
    """``sigma2_hat * (B^T B)^{-1}`` with ``sigma2_hat = RSS / (n - 2K - 1)``.

    Raises
    ------
    InsufficientSamples
        If ``n <= 2K + 1`` so the residual variance is undefined.
    """
    B = np.asarray(B, dtype=float)
    r = np.asarray(residuals, dtype=float).reshape(-1)
    p = B.shape[1] if order is None else 2 * order + 1
    if p != B.shape[1]:
        raise ValueError(f"order {order} does not match basis with {B.shape[1]} columns")
    df = _residual_df(r.size, p)
    if df <= 0:
        raise InsufficientSamples(f"n={r.size} leaves no residual degrees of freedom for {p} coefficients")
    sigma2 = float(r @ r) / df
    return sigma2 * _inverse(gram_matrix(B))


def covariance_glm(B, weights, dispersion: float = 1.0) -> np.ndarray:
    """``dispersion * (sum_i w_i f_i f_i^T)^{-1}``."""
    w = np.asarray(weights, dtype=float)
    if not np.all(w > 0):
        raise ValueError("GLM weights must be strictly positive")
    return float(dispersion) * _inverse(gram_matrix(B, w))


def fit_ols(B, y) -> FitResult:
    """Least squares through the normal equations."""
    B, y = _check_inputs(B, y)
    beta = _solve(gram_matrix(B), B.T @ y)
    fitted = B @ beta
    resid = y - fitted
    df = _residual_df(y.size, B.shape[1])
    sigma2 = cov = None
    if df > 0:
        sigma2 = float(resid @ resid) / df
        cov = sigma2 * _inverse(gram_matrix(B))
    return FitResult("ols", beta, cov, fitted, resid, sigma2_hat=sigma2)


def fit_lognormal(B, y) -> FitResult:
    """Least squares on ``log(y)``; fitted values stay on the log scale."""
    B, y = _check_inputs(B, y)
    _check_positive(y)
    res = fit_ols(B, np.log(y))
    res.model_kind = "lognormal"
    res.fitted_scale = "log"
    return res


def gamma_score(B, y, beta) -> np.ndarray:
    """Score ``sum_i f_i (y_i - mu_i) / mu_i`` of the gamma log-link GLM."""
    mu = np.exp(np.asarray(B) @ beta)
    return np.asarray(B).T @ ((np.asarray(y) - mu) / mu)


def fit_glm(
    B,
    y,
    family: GlmFamily = GAMMA_LOG,
    control: IrlsControl | None = None,
    start: np.ndarray | None = None,
) -> FitResult:
    """Fit a GLM by iteratively reweighted least squares.

    Starts from least squares on ``link(y)`` unless ``start`` is given. With
    observed-information weights the iteration is Newton's method on the
    deviance; both weightings share the fixed point
    ``sum_i f_i w_i (y_i - mu_i) / mu_eta_i = 0``. A step that raises the
    deviance beyond rounding level is halved.

    Raises
    ------
    NotConverged
        If the stopping rule of ``control`` is not met within ``max_iter``
        iterations; carries the last iterate and the deviance trace.
    """
    B, y = _check_inputs(B, y)
    if family.requires_positive:
        _check_positive(y)
    control = control or IrlsControl()
    if control.weights not in ("observed", "expected"):
        raise ValueError(f"unknown IRLS weighting {control.weights!r}")
    use_observed = control.weights == "observed" and family.score_weight_deta is not None
    n, p = B.shape

    def deviance(beta):
        mu = family.inverse_link(B @ beta)
        return float(np.sum(family.unit_deviance(y, mu)))

    if start is None:
        beta = _solve(gram_matrix(B), B.T @ family.link(y))
    else:
        beta = np.array(start, dtype=float)
    dev = deviance(beta)
    trace = [dev]
    converged = False
    it = 0
    while it < control.max_iter:
        it += 1
        eta = B @ beta
        mu = family.inverse_link(eta)
        d = family.mu_eta(eta)
        v = family.variance(mu)
        w = d * d / v
        u = (y - mu) * d / v
        if use_observed:
            w_obs = w - (y - mu) * family.score_weight_deta(eta)
            if np.all(w_obs > 0):
                w = w_obs
        step = _solve(gram_matrix(B, w), B.T @ u)
        new = beta + step
        new_dev = deviance(new)
        slack = 1e-12 * (abs(dev) + 1.0)
        halvings = 0
        while not (new_dev <= dev + slack) and halvings < control.max_halvings:
            step = 0.5 * step
            new = beta + step
            new_dev = deviance(new)
            halvings += 1
        size = float(np.max(np.abs(step)))
        rel = abs(new_dev - dev) / (abs(new_dev) + 0.1)
        beta, dev = new, new_dev
        trace.append(dev)
        if rel < control.tol and size <= control.step_tol * (1.0 + float(np.max(np.abs(beta)))):
            converged = True
            break
    if not converged:
        raise NotConverged(f"IRLS did not converge in {control.max_iter} iterations", beta, trace)

    eta = B @ beta
    mu = family.inverse_link(eta)
    d = family.mu_eta(eta)
    w = d * d / family.variance(mu)
    df = _residual_df(n, p)
    phi = cov = None
    if df > 0:
        phi = float(np.sum((y - mu) ** 2 / family.variance(mu))) / df
        cov = covariance_glm(B, w, phi) if phi > 0 else np.zeros((p, p))
    return FitResult(
        family.name,
        beta,
        cov,
        mu,
        y - mu,
        dispersion_hat=phi,
        converged=True,
        iterations=it,
        deviance=dev,
        trace=trace,
    )


def fit(B, y, model: ModelKind) -> FitResult:
    """Dispatch on the model name."""
    if model == "ols":
        return fit_ols(B, y)
    if model == "lognormal":
        return fit_lognormal(B, y)
    if model in ("gamma-glm-log", "gamma-glm"):
        return fit_glm(B, y)
    raise ValueError(f"unknown model {model!r}; expected one of {MODEL_KINDS}")


def predict(fit_result: FitResult, spec: DesignSpec, at=None) -> np.ndarray:
    """Evaluate a fit at new times (``spec.times`` by default).

    ``ols`` and ``lognormal`` return ``f(x)^T beta`` (log scale for the
    latter); the GLM returns ``exp(f(x)^T beta)``.
    """
    if spec.order != fit_result.order:
        raise ValueError(f"design order {spec.order} does not match fitted order {fit_result.order}")
    times = spec.times if at is None else np.atleast_1d(np.asarray(at, dtype=float))
    eta = design_matrix(DesignSpec(times, spec.omega, spec.order)) @ fit_result.beta_hat
    if fit_result.model_kind == "gamma-glm-log":
        return np.exp(eta)
    return eta

