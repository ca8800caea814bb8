"""Sampling schedules, the trigonometric basis and amplitude/phase conversion.

Coefficient layout follows ``[b0, s1, c1, s2, c2, ...]``: the intercept, then
for each harmonic ``k`` the sine coefficient followed by the cosine one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "DesignSpec",
    "AmpPhase",
    "NyquistCheck",
    "equispaced_times",
    "basis_row",
    "design_matrix",
    "gram_matrix",
    "nyquist_check",
    "beta_to_amp_phase",
    "amp_phase_to_beta",
    "n_coef",
    "order_from_ncoef",
]


def n_coef(order: int) -> int:
    return 2 * order + 1


def order_from_ncoef(p: int) -> int:
    if p < 1 or p % 2 == 0:
        raise ValueError(f"coefficient vector length must be odd and positive, got {p}")
    return (p - 1) // 2


def _check_omega(omega: float) -> float:
    omega = float(omega)
    if not math.isfinite(omega) or omega <= 0:
        raise ValueError(f"omega must be a finite positive number, got {omega!r}")
    return omega


def _check_order(order: int) -> int:
    if isinstance(order, bool) or int(order) != order or order < 1:
        raise ValueError(f"order must be a positive integer, got {order!r}")
    return int(order)


@dataclass(frozen=True)
class DesignSpec:
    """Sample times, angular frequency and model order.

    Attributes
    ----------
    times : numpy.ndarray
        Sample times, in the units of ``2*pi/omega``. Stored as given.
    omega : float
        Angular frequency; the period is ``2*pi/omega``.
    order : int
        Number of harmonics ``K``; the basis has ``2K+1`` columns.
    """

    times: np.ndarray
    omega: float
    order: int

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=float).reshape(-1)
        if times.size == 0:
            raise ValueError("DesignSpec needs at least one sample time")
        if not np.all(np.isfinite(times)):
            raise ValueError("sample times must be finite")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "omega", _check_omega(self.omega))
        object.__setattr__(self, "order", _check_order(self.order))

    @classmethod
    def equispaced(cls, n: int, omega: float, order: int) -> "DesignSpec":
        return cls(equispaced_times(n, omega), omega, order)

    @property
    def n(self) -> int:
        return int(self.times.size)

    @property
    def p(self) -> int:
        return n_coef(self.order)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    def with_order(self, order: int) -> "DesignSpec":
        return DesignSpec(self.times, self.omega, order)

    def matrix(self) -> np.ndarray:
        return design_matrix(self)


def equispaced_times(n: int, omega: float) -> np.ndarray:
    """Times ``2*pi*(i-1)/(omega*n)`` for ``i = 1..n``: one period, endpoint excluded."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    omega = _check_omega(omega)
    n = int(n)
    return 2.0 * np.pi * np.arange(n, dtype=float) / (omega * n)


def _basis(times: np.ndarray, omega: float, order: int) -> np.ndarray:
    phase = omega * np.asarray(times, dtype=float)
    out = np.empty((phase.size, n_coef(order)))
    out[:, 0] = 1.0
    for k in range(1, order + 1):
        out[:, 2 * k - 1] = np.sin(k * phase)
        out[:, 2 * k] = np.cos(k * phase)
    return out


def basis_row(x: float, omega: float, order: int) -> np.ndarray:
    """``[1, sin(wx), cos(wx), ..., sin(Kwx), cos(Kwx)]``."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"time must be finite, got {x!r}")
    return _basis(np.array([x]), _check_omega(omega), _check_order(order))[0]


def design_matrix(spec: DesignSpec) -> np.ndarray:
    """The ``n x (2K+1)`` matrix whose rows are :func:`basis_row` at each time."""
    return _basis(spec.times, spec.omega, spec.order)


def gram_matrix(B: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """``sum_i w_i f(x_i) f(x_i)^T`` (unit weights by default).

    Under an equispaced design with ``n > 2K`` the unweighted result is
    ``diag(n, n/2, ..., n/2)`` up to rounding.
    """
    B = np.asarray(B, dtype=float)
    if weights is None:
        G = B.T @ B
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (B.shape[0],):
            raise ValueError(f"weights must have shape ({B.shape[0]},), got {w.shape}")
        G = B.T @ (w[:, None] * B)
    return 0.5 * (G + G.T)


@dataclass(frozen=True)
class NyquistCheck:
    ok: bool
    message: str

    def __bool__(self) -> bool:
        return self.ok


def nyquist_check(n: int, order: int) -> NyquistCheck:
    """Identifiability check ``n > 2K``."""
    if n > 2 * order:
        return NyquistCheck(True, f"n={n} > 2K={2 * order}")
    return NyquistCheck(
        False,
        f"n={n} samples cannot resolve K={order} harmonics (need n > {2 * order}); "
        "higher harmonics alias onto lower ones",
    )


@dataclass(frozen=True)
class AmpPhase:
    """Midline plus per-harmonic amplitude and phase shift.

    The harmonic ``k`` contributes ``amplitude[k-1] * cos(k*w*x + phase[k-1])``.
    A harmonic with zero amplitude has an undefined phase; it is reported as 0
    and listed in ``undefined_phase``.
    """

    midline: float
    amplitudes: tuple[float, ...]
    phases: tuple[float, ...]
    undefined_phase: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if len(self.amplitudes) != len(self.phases):
            raise ValueError("amplitudes and phases must have equal length")
        if any(a < 0 for a in self.amplitudes):
            raise ValueError("amplitudes must be non-negative")

    @property
    def order(self) -> int:
        return len(self.amplitudes)

    def evaluate(self, x, omega: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, float(self.midline))
        for k, (amp, ph) in enumerate(zip(self.amplitudes, self.phases), start=1):
            out += amp * np.cos(k * omega * x + ph)
        return out

    def to_dict(self) -> dict:
        return {
            "midline": float(self.midline),
            "harmonics": [
                {"k": k, "amplitude": float(a), "phase": float(p), "phase_defined": k not in self.undefined_phase}
                for k, (a, p) in enumerate(zip(self.amplitudes, self.phases), start=1)
            ],
        }


def beta_to_amp_phase(beta: Sequence[float]) -> AmpPhase:
    """Convert ``[b0, s1, c1, ...]`` to midline, amplitudes and phases.

    ``amplitude_k = hypot(s_k, c_k)`` and ``phase_k = atan2(-s_k, c_k)``,
    which lies in ``(-pi, pi]``.
    """
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.size < 3 or beta.size % 2 == 0:
        raise ValueError(f"coefficient vector length must be odd and >= 3, got {beta.size}")
    amps, phases, undefined = [], [], []
    for k in range(1, (beta.size - 1) // 2 + 1):
        s, c = beta[2 * k - 1], beta[2 * k]
        amp = math.hypot(s, c)
        if amp == 0.0:
            undefined.append(k)
            phase = 0.0
        else:
            # -0.0 would put the phase at -pi instead of pi
            phase = math.atan2(-s + 0.0, c)
        amps.append(amp)
        phases.append(phase)
    return AmpPhase(float(beta[0]), tuple(amps), tuple(phases), tuple(undefined))


def amp_phase_to_beta(ap: AmpPhase) -> np.ndarray:
    """Inverse of :func:`beta_to_amp_phase`."""
    beta = np.empty(n_coef(ap.order))
    beta[0] = ap.midline
    for k, (amp, ph) in enumerate(zip(ap.amplitudes, ap.phases), start=1):
        beta[2 * k - 1] = -amp * math.sin(ph)
        beta[2 * k] = amp * math.cos(ph)
    return beta
