"""Monte Carlo bias studies and cross-order comparisons.

``run_mc_bias`` repeatedly simulates generalized gamma datasets, fits each
requested model at a (possibly too small) order and compares the average
estimates against their expected values:

* ``lognormal``: ``beta_star`` for the harmonics and ``beta_star[0] + c_zero``
  for the intercept, at any fitted order;
* ``gamma-glm-log``: ``beta_star``, which only holds when the fitted order is
  at least the true order;
* ``ols``: the exact expectation ``(B^T B)^{-1} B^T exp(f*(x)^T beta_star)``,
  since least squares is linear in the response.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .design import DesignSpec, nyquist_check
from .gensim import GGSpec, RngStream, simulate_dataset
from .models import FitError, MODEL_KINDS, NotConverged, fit, fit_ols
from .specfun import GGShape, c_zero

__all__ = [
    "SCHEMA_VERSION",
    "SchemaError",
    "MCConfig",
    "CoefStat",
    "MethodSummary",
    "MCReport",
    "run_mc_bias",
    "predicted_means",
    "Series",
    "Exclusion",
    "missing_data_policy",
    "ComparisonTable",
    "compare_orders",
    "canonical_model",
    "coef_names",
]

SCHEMA_VERSION = 1
MAX_EXCLUSION_FRACTION = 0.01


class SchemaError(ValueError):
    code = "SCHEMA"


class TooManyExclusions(RuntimeError):
    code = "TOO_MANY_EXCLUSIONS"


def canonical_model(name: str) -> str:
    name = name.strip()
    if name == "gamma-glm":
        return "gamma-glm-log"
    if name not in MODEL_KINDS:
        raise ValueError(f"unknown model {name!r}; expected one of {', '.join(MODEL_KINDS)}")
    return name


def coef_names(order: int) -> list[str]:
    names = ["b0"]
    for k in range(1, order + 1):
        names += [f"sin{k}", f"cos{k}"]
    return names


@dataclass(frozen=True)
class MCConfig:
    """Settings of one Monte Carlo bias study."""

    gg: GGSpec
    n: int
    replicates: int
    fit_order: int
    methods: tuple[str, ...] = ("lognormal", "gamma-glm-log")
    master_seed: int = 0
    pass_se: float = 4.0
    bias_se: float = 5.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "methods", tuple(canonical_model(m) for m in self.methods))
        if not self.methods:
            raise ValueError("at least one method is required")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("methods must not repeat")
        if self.replicates < 100:
            raise ValueError(f"replicates must be >= 100, got {self.replicates}")
        if self.fit_order < 1:
            raise ValueError("fit_order must be >= 1")
        for order in (self.fit_order, self.gg.order_star):
            check = nyquist_check(self.n, order)
            if not check:
                raise ValueError(check.message)
        if not self.bias_se >= self.pass_se > 0:
            raise ValueError("need 0 < pass_se <= bias_se")

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "gg": self.gg.to_dict(),
            "n": self.n,
            "replicates": self.replicates,
            "fit_order": self.fit_order,
            "methods": list(self.methods),
            "master_seed": self.master_seed,
            "pass_se": self.pass_se,
            "bias_se": self.bias_se,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MCConfig":
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
        gg = doc["gg"]
        if "omega" in gg and "period" in gg:
            raise SchemaError("give either gg.omega or gg.period, not both")
        omega = gg["omega"] if "omega" in gg else 2.0 * math.pi / float(gg["period"])
        beta = np.asarray(gg["beta_star"], dtype=float)
        spec = GGSpec(beta, (beta.size - 1) // 2, omega, GGShape(float(gg["kappa"]), float(gg["rho"])))
        if "order_star" in gg and int(gg["order_star"]) != spec.order_star:
            raise SchemaError("gg.order_star does not match the length of gg.beta_star")
        return cls(
            gg=spec,
            n=int(doc["n"]),
            replicates=int(doc["replicates"]),
            fit_order=int(doc["fit_order"]),
            methods=tuple(doc.get("methods", ("lognormal", "gamma-glm-log"))),
            master_seed=int(doc.get("master_seed", 0)),
            pass_se=float(doc.get("pass_se", 4.0)),
            bias_se=float(doc.get("bias_se", 5.0)),
        )

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _pad(beta: np.ndarray, p: int) -> np.ndarray:
    out = np.zeros(p)
    m = min(p, beta.size)
    out[:m] = beta[:m]
    return out


def predicted_means(config: MCConfig) -> dict[str, np.ndarray]:
    """Expected coefficient means for each method at ``config.fit_order``.

    Coefficients of ``beta_star`` beyond the fitted order are dropped and
    fitted harmonics beyond the true order are expected to be zero.
    """
    spec = config.gg
    p = 2 * config.fit_order + 1
    out = {}
    for method in config.methods:
        if method == "lognormal":
            pred = _pad(spec.beta_star, p)
            pred[0] += c_zero(spec.shape)
        elif method == "gamma-glm-log":
            pred = _pad(spec.beta_star, p)
        else:
            design = DesignSpec.equispaced(config.n, spec.omega, config.fit_order)
            pred = fit_ols(design.matrix(), np.exp(spec.log_mean(design.times))).beta_hat
        out[method] = pred
    return out


def _run_block(config: MCConfig, start: int, stop: int):
    design = DesignSpec.equispaced(config.n, config.gg.omega, config.fit_order)
    B = design.matrix()
    p = B.shape[1]
    est = {m: np.full((stop - start, p), np.nan) for m in config.methods}
    failures = []
    for r in range(start, stop):
        _, y = simulate_dataset(RngStream(config.master_seed, r), config.gg, config.n)
        for m in config.methods:
            try:
                est[m][r - start] = fit(B, y, m).beta_hat
            except (NotConverged, FitError) as exc:
                failures.append({"replicate": r, "method": m, "error": type(exc).__name__, "message": str(exc)})
    return est, failures


@dataclass
class CoefStat:
    index: int
    name: str
    mean: float
    se: float
    predicted: float
    z: float
    status: str  # "pass", "bias", or "inconclusive"

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "name": self.name,
            "mean": self.mean,
            "se": self.se,
            "predicted": self.predicted,
            "z": self.z,
            "status": self.status,
        }


@dataclass
class MethodSummary:
    method: str
    replicates_used: int
    coefficients: list[CoefStat]
    expectation: str
    excluded: int = 0

    @property
    def all_pass(self) -> bool:
        return all(c.status == "pass" for c in self.coefficients)

    @property
    def harmonic_bias_detected(self) -> bool:
        return any(c.status == "bias" for c in self.coefficients[1:])

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "replicates_used": self.replicates_used,
            "excluded": self.excluded,
            "expectation": self.expectation,
            "all_pass": self.all_pass,
            "harmonic_bias_detected": self.harmonic_bias_detected,
            "coefficients": [c.to_dict() for c in self.coefficients],
        }


@dataclass
class MCReport:
    """Aggregated Monte Carlo results plus the checks they support."""

    config: MCConfig
    methods: list[MethodSummary]
    exclusions: list[dict]
    assertions: list[dict]
    estimates: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def method(self, name: str) -> MethodSummary:
        name = canonical_model(name)
        for m in self.methods:
            if m.method == name:
                return m
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "command": "mc-bias",
            "config": self.config.to_dict(),
            "results": {
                "config_sha256": self.config.digest(),
                "c_zero": c_zero(self.config.gg.shape),
                "methods": [m.to_dict() for m in self.methods],
                "assertions": self.assertions,
                "passed": self.passed,
            },
            "exclusions": self.exclusions,
        }

    def csv_rows(self) -> list[list]:
        rows = [["method", "index", "name", "mean", "se", "predicted", "z", "status"]]
        for m in self.methods:
            for c in m.coefficients:
                rows.append([m.method, c.index, c.name, repr(c.mean), repr(c.se), repr(c.predicted), repr(c.z), c.status])
        return rows


def _expectation(method: str, config: MCConfig) -> str:
    if method == "lognormal":
        return "unbiased harmonics; intercept shifted by c_zero"
    if method == "gamma-glm-log":
        if config.fit_order >= config.gg.order_star:
            return "unbiased (correctly specified)"
        return "biased harmonics expected (underspecified)"
    return "exact linear expectation of least squares"


def _summarize(method: str, est: np.ndarray, pred: np.ndarray, config: MCConfig) -> MethodSummary:
    ok = ~np.isnan(est).any(axis=1)
    used = est[ok]
    r = used.shape[0]
    mean = used.mean(axis=0)
    se = used.std(axis=0, ddof=1) / math.sqrt(r)
    names = coef_names(config.fit_order)
    stats = []
    for j in range(pred.size):
        diff = float(mean[j] - pred[j])
        z = diff / float(se[j]) if se[j] > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff))
        if abs(z) <= config.pass_se:
            status = "pass"
        elif abs(z) > config.bias_se:
            status = "bias"
        else:
            status = "inconclusive"
        stats.append(CoefStat(j, names[j], float(mean[j]), float(se[j]), float(pred[j]), float(z), status))
    return MethodSummary(method, r, stats, _expectation(method, config), excluded=int((~ok).sum()))


def _assertions(config: MCConfig, summaries: list[MethodSummary]) -> list[dict]:
    out = []
    under = config.fit_order < config.gg.order_star
    for s in summaries:
        if s.method == "gamma-glm-log" and under:
            out.append({
                "name": "gamma-glm-log harmonic bias detected under underspecification",
                "passed": s.harmonic_bias_detected,
            })
        else:
            out.append({"name": f"{s.method} means match prediction within {config.pass_se:g} SE", "passed": s.all_pass})
    return out


def run_mc_bias(config: MCConfig, workers: int = 1, keep_estimates: bool = False) -> MCReport:
    """Run the bias study described by ``config``.

    Replicate ``r`` draws its data from ``RngStream(master_seed, r)`` and
    results are aggregated by replicate index, so ``workers`` changes the
    wall time but never the report.

    Raises
    ------
    TooManyExclusions
        If more than 1% of the replicates of any method fail to fit.
    """
    R = config.replicates
    if workers <= 1:
        est, failures = _run_block(config, 0, R)
    else:
        bounds = np.linspace(0, R, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, [config] * workers, bounds[:-1], bounds[1:]))
        est = {m: np.vstack([part[0][m] for part in parts]) for m in config.methods}
        failures = [f for part in parts for f in part[1]]
    failures.sort(key=lambda f: (f["replicate"], config.methods.index(f["method"])))
    for m in config.methods:
        n_bad = sum(1 for f in failures if f["method"] == m)
        if n_bad > MAX_EXCLUSION_FRACTION * R:
            raise TooManyExclusions(f"{n_bad} of {R} {m} replicates failed to fit")
    preds = predicted_means(config)
    summaries = [_summarize(m, est[m], preds[m], config) for m in config.methods]
    return MCReport(config, summaries, failures, _assertions(config, summaries), est if keep_estimates else {})


# -- cross-order comparison ------------------------------------------------


@dataclass(frozen=True)
class Series:
    """One subject's time series; missing responses are NaN."""

    id: str
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.times.shape != self.values.shape:
            raise ValueError(f"series {self.id!r}: times and values differ in length")


@dataclass(frozen=True)
class Exclusion:
    series: str
    reason: str

    def to_dict(self) -> dict:
        return {"series": self.series, "reason": self.reason}


def missing_data_policy(series: Iterable[Series]) -> tuple[list[Series], list[Exclusion]]:
    """Listwise deletion: any series with a missing response is dropped whole."""
    kept, dropped = [], []
    for s in series:
        missing = np.flatnonzero(np.isnan(s.values))
        if missing.size:
            at = ", ".join(f"{t:g}" for t in s.times[missing])
            dropped.append(Exclusion(s.id, f"{missing.size} missing value(s) at time(s) {at}"))
        else:
            kept.append(s)
    return kept, dropped


@dataclass
class ComparisonTable:
    """Coefficients per (series, method, order) with agreement flags."""

    omega: float
    orders: list[int]
    methods: list[str]
    tolerance: float
    coefficients: dict[str, dict[str, dict[int, np.ndarray]]]
    flags: dict[str, dict[str, bool | None]]
    max_differences: dict[str, dict[str, float | None]]
    exclusions: list[Exclusion]
    errors: list[dict]

    @property
    def series_ids(self) -> list[str]:
        return list(self.coefficients)

    @property
    def partial_failure(self) -> bool:
        return bool(self.errors)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "command": "compare-orders",
            "config": {
                "omega": self.omega,
                "period": 2.0 * math.pi / self.omega,
                "orders": self.orders,
                "methods": self.methods,
                "tolerance": self.tolerance,
            },
            "results": {
                "series": [
                    {
                        "id": sid,
                        "fits": [
                            {"method": m, "order": k, "beta_hat": self.coefficients[sid][m][k].tolist()}
                            for m in self.methods
                            for k in self.orders
                            if k in self.coefficients[sid].get(m, {})
                        ],
                        "flags": self.flags[sid],
                        "max_differences": self.max_differences[sid],
                    }
                    for sid in self.series_ids
                ],
                "errors": self.errors,
            },
            "exclusions": [e.to_dict() for e in self.exclusions],
        }

    def csv_rows(self) -> list[list]:
        rows = [["series", "method", "order", "index", "name", "estimate"]]
        for sid in self.series_ids:
            for m in self.methods:
                for k in self.orders:
                    beta = self.coefficients[sid].get(m, {}).get(k)
                    if beta is None:
                        continue
                    for j, name in enumerate(coef_names(k)):
                        rows.append([sid, m, k, j, name, repr(float(beta[j]))])
        return rows

    def format(self, digits: int = 3) -> str:
        """Plain-text layout: one block per order, one column per (series, method)."""
        labels = {"lognormal": "LT", "gamma-glm-log": "GLM", "ols": "OLS"}
        cols = [(sid, m) for sid in self.series_ids for m in self.methods]
        width = max(8, digits + 5)
        lines = []
        for k in self.orders:
            lines.append(f"Order K={k}")
            lines.append("".ljust(8) + "".join(sid[:width - 1].rjust(width) for sid, _ in cols))
            lines.append("model".ljust(8) + "".join(labels.get(m, m).rjust(width) for _, m in cols))
            for j in range(2 * k + 1):
                cells = []
                for sid, m in cols:
                    beta = self.coefficients[sid].get(m, {}).get(k)
                    cells.append(("-" if beta is None else f"{beta[j]:.{digits}f}").rjust(width))
                lines.append(f"b{j}".ljust(8) + "".join(cells))
            lines.append("")
        return "\n".join(lines).rstrip() + "\n"


def _shared_harmonic_diff(a: np.ndarray, b: np.ndarray) -> float:
    m = min(a.size, b.size)
    return float(np.max(np.abs(a[1:m] - b[1:m])))


def _cross_order_diff(fits: dict[int, np.ndarray]) -> float | None:
    ks = sorted(fits)
    if len(ks) < 2:
        return None
    return max(_shared_harmonic_diff(fits[a], fits[b]) for i, a in enumerate(ks) for b in ks[i + 1:])


def compare_orders(
    series: Sequence[Series],
    omega: float,
    orders: Sequence[int],
    methods: Sequence[str] = ("lognormal", "gamma-glm-log"),
    tolerance: float = 1e-6,
) -> ComparisonTable:
    """Fit every series at every order with every method and flag agreement.

    Flags per series (``None`` when not applicable):

    ``lognormal_order_invariant``
        shared harmonic coefficients agree across orders within ``tolerance``;
    ``glm_order_dependent``
        the gamma GLM's shared harmonics differ by more than ``tolerance``;
    ``methods_agree_at_max_order``
        log-normal and GLM harmonics agree at the largest order.

    Series with missing values are dropped first (see
    :func:`missing_data_policy`); series whose fits fail are recorded in
    ``errors`` and left out of the table.
    """
    orders = sorted({int(k) for k in orders})
    if not orders or orders[0] < 1:
        raise ValueError("orders must be positive integers")
    methods = [canonical_model(m) for m in methods]
    kept, exclusions = missing_data_policy(series)
    coefs, flags, diffs, errors = {}, {}, {}, []
    for s in kept:
        try:
            check = nyquist_check(s.times.size, orders[-1])
            if not check:
                raise ValueError(check.message)
            per_method = {}
            for m in methods:
                per_method[m] = {
                    k: fit(DesignSpec(s.times, omega, k).matrix(), s.values, m).beta_hat for k in orders
                }
        except (FitError, ValueError) as exc:
            errors.append({"series": s.id, "error": type(exc).__name__, "message": str(exc)})
            continue
        coefs[s.id] = per_method
        d_lt = _cross_order_diff(per_method["lognormal"]) if "lognormal" in per_method else None
        d_glm = _cross_order_diff(per_method["gamma-glm-log"]) if "gamma-glm-log" in per_method else None
        d_methods = None
        if "lognormal" in per_method and "gamma-glm-log" in per_method:
            d_methods = _shared_harmonic_diff(per_method["lognormal"][orders[-1]], per_method["gamma-glm-log"][orders[-1]])
        diffs[s.id] = {
            "lognormal_across_orders": d_lt,
            "glm_across_orders": d_glm,
            "methods_at_max_order": d_methods,
        }
        flags[s.id] = {
            "lognormal_order_invariant": None if d_lt is None else d_lt <= tolerance,
            "glm_order_dependent": None if d_glm is None else d_glm > tolerance,
            "methods_agree_at_max_order": None if d_methods is None else d_methods <= tolerance,
        }
    return ComparisonTable(float(omega), orders, methods, float(tolerance), coefs, flags, diffs, exclusions, errors)
