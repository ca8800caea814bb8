"""Log-gamma, digamma and the generalized gamma log-moment constants.

Both special functions are evaluated by shifting the argument upward with
the functional recurrence and then summing the Stirling / de Moivre
asymptotic series, so the module has no dependency beyond ``math``.
"""
from __future__ import annotations

import math
import numbers
from dataclasses import dataclass

__all__ = [
    "GGShape",
    "ln_gamma",
    "digamma",
    "c_zero",
    "expected_log_gg",
    "gg_mean",
]

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

# Bernoulli numbers B_2 .. B_18.
_BERNOULLI = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
)
# B_2k / (2k (2k - 1)) for the log-gamma series.
_LGAMMA_COEF = tuple(b / ((2 * k) * (2 * k - 1)) for k, b in enumerate(_BERNOULLI, start=1))
# B_2k / (2k) for the digamma series.
_DIGAMMA_COEF = tuple(b / (2 * k) for k, b in enumerate(_BERNOULLI, start=1))

_LGAMMA_SHIFT = 16.0
_DIGAMMA_SHIFT = 10.0


def _check_arg(u: float, name: str) -> float:
    u = float(u)
    if not math.isfinite(u) or u <= 0.0:
        raise ValueError(f"{name} requires a finite positive argument, got {u!r}")
    return u


def ln_gamma(u: float) -> float:
    """Natural logarithm of the gamma function for ``u > 0``.

    Parameters
    ----------
    u : float
        Positive, finite argument.

    Returns
    -------
    float
        ``log(Gamma(u))``.

    Raises
    ------
    ValueError
        If ``u`` is non-positive or not finite.
    """
    x = _check_arg(u, "ln_gamma")
    if x == 1.0 or x == 2.0:
        return 0.0
    shift = 0.0
    if x < _LGAMMA_SHIFT:
        # log Gamma(x) = log Gamma(x + m) - log(x (x+1) ... (x+m-1))
        prod = 1.0
        while x < _LGAMMA_SHIFT:
            prod *= x
            x += 1.0
        shift = math.log(prod)
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    for c in reversed(_LGAMMA_COEF):
        series = series * inv2 + c
    series *= inv
    return (x - 0.5) * math.log(x) - x + _HALF_LOG_2PI + series - shift


def _two_prod(a: float, b: float) -> tuple[float, float]:
    # Dekker product: a * b == p + e exactly.
    p = a * b
    t = 134217729.0 * a
    ah = t - (t - a)
    al = a - ah
    t = 134217729.0 * b
    bh = t - (t - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def _recip(x: float) -> tuple[float, float]:
    # 1/x as an unevaluated sum q + r.
    q = 1.0 / x
    p, e = _two_prod(q, x)
    return q, ((1.0 - p) - e) / x


def digamma(u: float) -> float:
    """Digamma function, the derivative of :func:`ln_gamma`, for ``u > 0``."""
    x = _check_arg(u, "digamma")
    terms = []
    while x < _DIGAMMA_SHIFT:
        q, r = _recip(x)
        terms += (-q, -r)
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    for c in reversed(_DIGAMMA_COEF):
        series = series * inv2 + c
    series *= inv2
    terms += (math.log(x), -0.5 / x, -series)
    # fsum keeps the 1/u term of tiny arguments from absorbing the rest.
    return math.fsum(terms)


@dataclass(frozen=True)
class GGShape:
    """Shape pair of the generalized gamma distribution.

    ``kappa`` is the power on ``y`` in the density kernel ``y**(kappa-1)`` and
    ``rho`` the exponent in ``exp(-(y/lambda)**rho)``.
    """

    kappa: float
    rho: float

    def __post_init__(self) -> None:
        for name in ("kappa", "rho"):
            value = getattr(self, name)
            if not (isinstance(value, numbers.Real) and not isinstance(value, bool) and math.isfinite(value) and value > 0):
                raise ValueError(f"GGShape.{name} must be a finite positive number, got {value!r}")

    @property
    def gamma_shape(self) -> float:
        """Shape ``kappa / rho`` of the gamma variate behind the distribution."""
        return self.kappa / self.rho


def c_zero(shape: GGShape) -> float:
    """Intercept shift picked up by least squares on ``log(y)``.

    With ``E[y|x] = exp(f(x)^T beta)`` and a generalized gamma response,
    ``E[log y | x] = f(x)^T beta + c_zero(shape)``.
    """
    a = shape.kappa / shape.rho
    return digamma(a) / shape.rho - ln_gamma((shape.kappa + 1.0) / shape.rho) + ln_gamma(a)


def expected_log_gg(lam: float, shape: GGShape) -> float:
    """``E[log Y]`` for a generalized gamma variate with scale ``lam``."""
    lam = float(lam)
    if not math.isfinite(lam) or lam <= 0.0:
        raise ValueError(f"lambda must be a finite positive number, got {lam!r}")
    return math.log(lam) + digamma(shape.kappa / shape.rho) / shape.rho


def gg_mean(lam: float, shape: GGShape) -> float:
    """Mean ``lam * Gamma((kappa+1)/rho) / Gamma(kappa/rho)``."""
    log_ratio = ln_gamma((shape.kappa + 1.0) / shape.rho) - ln_gamma(shape.kappa / shape.rho)
    return float(lam) * math.exp(log_ratio)
