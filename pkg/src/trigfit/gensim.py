"""Generalized gamma responses around a trigonometric mean curve.

The data-generating process has density

    rho * y**(kappa-1) * exp(-(y/lam)**rho) / (lam**kappa * Gamma(kappa/rho))

with the scale ``lam(x)`` chosen so that ``E[Y | x] = exp(f(x)^T beta_star)``.
Draws use ``Y = lam * G**(1/rho)`` with ``G ~ Gamma(kappa/rho, 1)``.

Random streams are numpy ``Philox`` (4x64, 10 rounds) generators keyed by the
pair ``(seed, stream_id)``; uniforms come from ``Generator.random`` and
normals from ``Generator.standard_normal``. Replicate ``r`` of a Monte Carlo
run uses stream id ``r``, so replicates can run in any order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .design import DesignSpec, _basis, equispaced_times, nyquist_check
from .specfun import GGShape, ln_gamma

__all__ = [
    "RngStream",
    "GGSpec",
    "NyquistViolation",
    "gg_lambda",
    "gg_log_lambda",
    "gg_density",
    "sample_gamma",
    "sample_gg",
    "simulate_dataset",
]

_MASK64 = (1 << 64) - 1


class NyquistViolation(ValueError):
    code = "NYQUIST_VIOLATION"


class RngStream:
    """Reproducible random stream identified by ``(seed, stream_id)``.

    Both values are reduced to unsigned 64-bit integers and used as the
    Philox key. The stream is stateful: every draw advances it, so a stream
    should not be shared between concurrent consumers.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def uniform(self, size=None):
        return self._gen.random(size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)


@dataclass(frozen=True)
class GGSpec:
    """True coefficients, order, angular frequency and shape of the process."""

    beta_star: np.ndarray
    order_star: int
    omega: float
    shape: GGShape

    def __post_init__(self) -> None:
        beta = np.array(self.beta_star, dtype=float).reshape(-1)
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta_star must be finite")
        if beta.size != 2 * self.order_star + 1 or self.order_star < 1:
            raise ValueError(
                f"beta_star has {beta.size} entries; order_star={self.order_star} needs {2 * self.order_star + 1}"
            )
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ValueError("omega must be a finite positive number")
        if not isinstance(self.shape, GGShape):
            raise TypeError("shape must be a GGShape")
        beta.setflags(write=False)
        object.__setattr__(self, "beta_star", beta)
        object.__setattr__(self, "order_star", int(self.order_star))
        object.__setattr__(self, "omega", float(self.omega))

    @classmethod
    def from_beta(cls, beta_star, omega: float, kappa: float, rho: float) -> "GGSpec":
        beta = np.asarray(beta_star, dtype=float).reshape(-1)
        if beta.size < 3 or beta.size % 2 == 0:
            raise ValueError(f"beta_star length must be odd and >= 3, got {beta.size}")
        return cls(beta, (beta.size - 1) // 2, omega, GGShape(kappa, rho))

    def log_mean(self, x) -> np.ndarray:
        """``f(x)^T beta_star``, the log of ``E[Y | x]``."""
        return _basis(np.atleast_1d(np.asarray(x, dtype=float)), self.omega, self.order_star) @ self.beta_star

    def to_dict(self) -> dict:
        return {
            "beta_star": self.beta_star.tolist(),
            "order_star": self.order_star,
            "omega": self.omega,
            "kappa": self.shape.kappa,
            "rho": self.shape.rho,
        }


def _log_scale_offset(shape: GGShape) -> float:
    return ln_gamma(shape.kappa / shape.rho) - ln_gamma((shape.kappa + 1.0) / shape.rho)


def gg_log_lambda(x, spec: GGSpec) -> np.ndarray:
    return spec.log_mean(x) + _log_scale_offset(spec.shape)


def gg_lambda(x, spec: GGSpec):
    """Scale ``lam(x)`` giving ``E[Y | x] = exp(f(x)^T beta_star)``.

    Returns a float for scalar ``x`` and an array otherwise.
    """
    lam = np.exp(gg_log_lambda(x, spec))
    return float(lam[0]) if np.ndim(x) == 0 else lam


def gg_density(y, lam, shape: GGShape):
    """Generalized gamma density at ``y > 0``."""
    y_arr = np.asarray(y, dtype=float)
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(y_arr <= 0) or not np.all(np.isfinite(y_arr)):
        raise ValueError("generalized gamma density is defined for finite y > 0")
    if np.any(lam_arr <= 0):
        raise ValueError("lambda must be positive")
    k, r = shape.kappa, shape.rho
    log_pdf = (
        math.log(r)
        + (k - 1.0) * np.log(y_arr)
        - (y_arr / lam_arr) ** r
        - k * np.log(lam_arr)
        - ln_gamma(k / r)
    )
    out = np.exp(log_pdf)
    return float(out) if out.ndim == 0 else out


def _gamma_ge1(stream: RngStream, a: float, m: int) -> np.ndarray:
    # Marsaglia & Tsang (2000) squeeze/rejection for shape a >= 1.
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(m)
    todo = np.arange(m)
    while todo.size:
        k = todo.size
        x = stream.normal(k)
        u = stream.uniform(k)
        v = 1.0 + c * x
        ok = v > 0
        v = np.where(ok, v * v * v, 1.0)
        x2 = x * x
        accept = ok & (
            (u < 1.0 - 0.0331 * x2 * x2)
            | (np.log(np.where(u > 0, u, 1.0)) < 0.5 * x2 + d * (1.0 - v + np.log(v)))
        )
        out[todo[accept]] = d * v[accept]
        todo = todo[~accept]
    return out


def sample_gamma(stream: RngStream, shape: float, size=None):
    """Gamma(shape, scale 1) draws by the Marsaglia-Tsang method.

    For ``shape < 1`` a Gamma(shape + 1) draw is scaled by ``U**(1/shape)``.
    Returns a float when ``size`` is None.
    """
    a = float(shape)
    if not (math.isfinite(a) and a > 0):
        raise ValueError(f"gamma shape must be a finite positive number, got {shape!r}")
    m = 1 if size is None else int(np.prod(size))
    if a >= 1.0:
        g = _gamma_ge1(stream, a, m)
    else:
        g = _gamma_ge1(stream, a + 1.0, m)
        g *= stream.uniform(m) ** (1.0 / a)
    return float(g[0]) if size is None else g.reshape(size)


def _gg_draws(stream: RngStream, lam: np.ndarray, shape: GGShape) -> np.ndarray:
    g = sample_gamma(stream, shape.gamma_shape, size=lam.shape)
    return lam * g ** (1.0 / shape.rho)


def sample_gg(stream: RngStream, x, spec: GGSpec, size=None):
    """Generalized gamma draw(s) at time ``x``.

    ``size`` draws share the same ``x``; with ``size=None`` a float is returned.
    """
    lam = float(gg_lambda(float(x), spec))
    m = 1 if size is None else size
    draws = _gg_draws(stream, np.full(m, lam), spec.shape)
    return float(draws[0]) if size is None else draws


def simulate_dataset(stream: RngStream, spec: GGSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    """One equispaced dataset of ``n`` independent responses over one period.

    Raises
    ------
    NyquistViolation
        If ``n <= 2 * order_star``.
    """
    check = nyquist_check(n, spec.order_star)
    if not check:
        raise NyquistViolation(check.message)
    times = equispaced_times(n, spec.omega)
    lam = np.exp(gg_log_lambda(times, spec))
    return times, _gg_draws(stream, lam, spec.shape)


def design_for(spec: GGSpec, n: int, order: int) -> DesignSpec:
    return DesignSpec.equispaced(n, spec.omega, order)
