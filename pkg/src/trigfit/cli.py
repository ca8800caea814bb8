"""Command-line interface: ``trigfit fit | simulate | mc-bias | compare-orders``.

Exit status: 0 success, 1 usage or input error, 2 partial per-series
failure, 3 a ``--assert`` check failed. Errors go to stderr as one line,
``CODE: message``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .data import IngestError, ingest_csv, write_csv
from .design import DesignSpec, beta_to_amp_phase, nyquist_check
from .experiments import (
    SCHEMA_VERSION,
    MCConfig,
    SchemaError,
    Series,
    canonical_model,
    coef_names,
    compare_orders,
    missing_data_policy,
    run_mc_bias,
)
from .gensim import GGSpec, RngStream, simulate_dataset
from .models import FitError, fit

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL, EXIT_ASSERT = 0, 1, 2, 3
SEED_ENV = "TRIGFIT_SEED"

DEFAULT_MC = {
    "schema_version": SCHEMA_VERSION,
    "gg": {"beta_star": [1.0, 0.5, 0.5, 0.8, 0.3], "kappa": 2.0, "rho": 1.0, "period": 24.0},
    "n": 12,
    "replicates": 5000,
    "fit_order": 1,
    "methods": ["lognormal", "gamma-glm-log"],
    "master_seed": 0,
}


class UsageError(Exception):
    code = "USAGE"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _diag(code: str, message: str) -> None:
    print(f"{code}: {' '.join(str(message).split())}", file=sys.stderr)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"not a comma-separated list of numbers: {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"not a comma-separated list of integers: {text!r}") from None


def _omega(args) -> float:
    if args.omega is not None:
        value = args.omega
    else:
        if not (args.period > 0 and math.isfinite(args.period)):
            raise UsageError("--period must be positive")
        value = 2.0 * math.pi / args.period
    if not (value > 0 and math.isfinite(value)):
        raise UsageError("--omega must be positive")
    return value


def _seed(args, fallback: int = 0) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return fallback


def _dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _dump_csv(rows: list[list]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out and out != "-":
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _add_frequency(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--period", type=float, help="oscillation period in time units (omega = 2*pi/period)")
    g.add_argument("--omega", type=float, help="angular frequency in radians per time unit")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trigfit", description="Trigonometric regression fitting and bias studies.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit every series of a CSV file")
    p.add_argument("--input", required=True)
    _add_frequency(p)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--model", required=True, choices=["ols", "lognormal", "gamma-glm", "gamma-glm-log"])
    p.add_argument("--output", choices=["json", "csv"], default="json")
    p.add_argument("--amp-phase", action="store_true", help="also report amplitudes and phases")
    p.add_argument("--out", help="write the report here instead of stdout")

    p = sub.add_parser("simulate", help="simulate generalized gamma datasets")
    p.add_argument("--beta-star", required=True, type=_float_list)
    p.add_argument("--kappa", required=True, type=float)
    p.add_argument("--rho", required=True, type=float)
    p.add_argument("--n", required=True, type=int)
    _add_frequency(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--out")

    p = sub.add_parser("mc-bias", help="Monte Carlo bias study")
    p.add_argument("--config", help="JSON config document")
    p.add_argument("--beta-star", type=_float_list)
    p.add_argument("--kappa", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--n", type=int)
    _add_frequency(p, required=False)
    p.add_argument("--reps", type=int)
    p.add_argument("--fit-order", type=int)
    p.add_argument("--models")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", choices=["json", "csv"], default="json")
    p.add_argument("--assert", dest="check", action="store_true", help="exit 3 if any check fails")
    p.add_argument("--out")

    p = sub.add_parser("compare-orders", help="fit each series at several orders")
    p.add_argument("--input", required=True)
    _add_frequency(p)
    p.add_argument("--orders", type=_int_list, default=[2, 5])
    p.add_argument("--models", default="lognormal,gamma-glm")
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--output", choices=["json", "csv", "table"], default="json")
    p.add_argument("--assert", dest="check", action="store_true",
                   help="exit 3 unless every log-normal fit is order invariant")
    p.add_argument("--out")
    return parser


def _load_series(path: str) -> list[Series]:
    return ingest_csv(path).to_series()


def cmd_fit(args) -> int:
    omega = _omega(args)
    model = canonical_model(args.model)
    if args.order < 1:
        raise UsageError("--order must be >= 1")
    kept, exclusions = missing_data_policy(_load_series(args.input))
    results, errors = [], []
    for s in kept:
        try:
            check = nyquist_check(s.times.size, args.order)
            if not check:
                raise _SeriesError("NYQUIST_VIOLATION", check.message)
            res = fit(DesignSpec(s.times, omega, args.order).matrix(), s.values, model)
        except _SeriesError as exc:
            errors.append({"series": s.id, "code": exc.code, "message": str(exc)})
            continue
        except FitError as exc:
            errors.append({"series": s.id, "code": exc.code, "message": str(exc)})
            continue
        entry = {"series": s.id, "fit": res.to_dict()}
        if args.amp_phase:
            entry["amp_phase"] = beta_to_amp_phase(res.beta_hat).to_dict()
        results.append(entry)
    for e in errors:
        _diag(e["code"], f"series {e['series']}: {e['message']}")

    if args.output == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "command": "fit",
            "config": {"input": args.input, "omega": omega, "period": 2.0 * math.pi / omega,
                       "order": args.order, "model": model},
            "results": {"series": results, "errors": errors},
            "exclusions": [e.to_dict() for e in exclusions],
        }
        text = _dump_json(doc)
    else:
        rows = [["series", "model", "order", "quantity", "index", "name", "estimate", "std_error"]]
        for entry in results:
            f = entry["fit"]
            se = f["std_errors"] or [None] * len(f["beta_hat"])
            for j, name in enumerate(coef_names(f["order"])):
                rows.append([entry["series"], model, f["order"], "coef", j, name, repr(f["beta_hat"][j]),
                             "" if se[j] is None else repr(se[j])])
            if "amp_phase" in entry:
                ap = entry["amp_phase"]
                rows.append([entry["series"], model, f["order"], "midline", 0, "midline", repr(ap["midline"]), ""])
                for h in ap["harmonics"]:
                    rows.append([entry["series"], model, f["order"], "amplitude", h["k"], f"amp{h['k']}",
                                 repr(h["amplitude"]), ""])
                    rows.append([entry["series"], model, f["order"], "phase", h["k"], f"phase{h['k']}",
                                 repr(h["phase"]), ""])
        text = _dump_csv(rows)
    if results or not errors:
        _emit(text, args.out)
    if errors:
        return EXIT_PARTIAL if results else EXIT_ERROR
    return EXIT_OK


class _SeriesError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def cmd_simulate(args) -> int:
    omega = _omega(args)
    try:
        spec = GGSpec.from_beta(args.beta_star, omega, args.kappa, args.rho)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    if args.reps < 1:
        raise UsageError("--reps must be >= 1")
    seed = _seed(args)
    width = len(str(args.reps))
    series = []
    for r in range(args.reps):
        times, y = simulate_dataset(RngStream(seed, r), spec, args.n)
        series.append(Series(f"sim{r:0{width}d}", times, y))
    _emit(write_csv(series), args.out)
    return EXIT_OK


def _mc_config(args) -> MCConfig:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        doc = json.loads(json.dumps(DEFAULT_MC))
    gg = doc.setdefault("gg", {})
    if args.beta_star is not None:
        gg["beta_star"] = args.beta_star
        gg.pop("order_star", None)
    if args.kappa is not None:
        gg["kappa"] = args.kappa
    if args.rho is not None:
        gg["rho"] = args.rho
    if args.period is not None or args.omega is not None:
        gg.pop("period", None)
        gg.pop("omega", None)
        gg["omega"] = _omega(args)
    for key, attr in (("n", "n"), ("replicates", "reps"), ("fit_order", "fit_order")):
        if getattr(args, attr) is not None:
            doc[key] = getattr(args, attr)
    if args.models:
        doc["methods"] = [m for m in args.models.split(",") if m.strip()]
    doc["master_seed"] = _seed(args, fallback=int(doc.get("master_seed", 0)))
    return MCConfig.from_dict(doc)


def cmd_mc_bias(args) -> int:
    try:
        config = _mc_config(args)
    except SchemaError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid Monte Carlo configuration: {exc}") from None
    report = run_mc_bias(config, workers=max(1, args.workers))
    text = _dump_json(report.to_dict()) if args.output == "json" else _dump_csv(report.csv_rows())
    _emit(text, args.out)
    if args.check and not report.passed:
        for a in report.assertions:
            if not a["passed"]:
                _diag("ASSERTION_FAILED", a["name"])
        return EXIT_ASSERT
    return EXIT_OK


def cmd_compare_orders(args) -> int:
    omega = _omega(args)
    methods = [m for m in args.models.split(",") if m.strip()]
    table = compare_orders(_load_series(args.input), omega, args.orders, methods, args.tolerance)
    for e in table.errors:
        _diag("SERIES_FAILED", f"series {e['series']}: {e['error']}: {e['message']}")
    if args.output == "json":
        text = _dump_json(table.to_dict())
    elif args.output == "csv":
        text = _dump_csv(table.csv_rows())
    else:
        text = table.format()
    _emit(text, args.out)
    if args.check:
        bad = [sid for sid, f in table.flags.items() if f["lognormal_order_invariant"] is False]
        if bad or "lognormal" not in table.methods:
            _diag("ASSERTION_FAILED", "log-normal coefficients not order invariant for series " + ", ".join(bad)
                  if bad else "--assert needs the lognormal model")
            return EXIT_ASSERT
    if table.partial_failure:
        return EXIT_PARTIAL if table.series_ids else EXIT_ERROR
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "mc-bias": cmd_mc_bias,
    "compare-orders": cmd_compare_orders,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        _diag("USAGE", exc)
    except IngestError as exc:
        _diag(exc.code, exc)
    except SchemaError as exc:
        _diag(exc.code, exc)
    except (FitError, ValueError) as exc:
        _diag(getattr(exc, "code", "INVALID_INPUT"), exc)
    except OSError as exc:
        _diag("IO", exc)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
