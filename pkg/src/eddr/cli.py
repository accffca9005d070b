"""Command-line front end.

Subcommands
-----------
estimate        print the eight spectral/signal estimates for two training CSVs
calibrate       compute a cut-off from two training CSVs
classify        score and label query points
simulate        Monte Carlo study over an (N, p) grid, CSV + JSON sidecar
verify-moments  self-check of the closed-form Wishart moments

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
infeasibility (including failed verification).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .calibration import (
    DEFAULT_M2_ANCHOR,
    M2_ANCHORS,
    CutoffRequest,
    CutoffVariant,
    calibrate,
)
from .core import LabeledSample, classify, discriminant_score, pooled_summary
from .dataio import RunManifest, format_table_value, read_matrix_csv, write_text_atomic
from .error_model import DEFAULT_LOGIT_VARIANCE, LOGIT_VARIANCE_CONVENTIONS
from .estimators import estimate_all
from .exceptions import (
    CalibrationInfeasibleError,
    DataFormatError,
    DimensionError,
    EddrError,
    NotPositiveDefiniteError,
    SimulationError,
)
from .simulate import (
    SimConfig,
    attained_confidence_level,
    attained_error_rate,
    make_population,
    run_simulation,
)
from .verify import mc_moment_suite, scalar_reduction_suite

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_training(args) -> tuple:
    x1 = read_matrix_csv(args.train1, skip_header=args.skip_header or None)
    x2 = read_matrix_csv(args.train2, skip_header=args.skip_header or None)
    if x1.size == 0 or x2.size == 0:
        raise DataFormatError("training files must contain at least two rows each")
    s1 = LabeledSample(observations=x1, group=1)
    s2 = LabeledSample(observations=x2, group=2)
    return pooled_summary(s1, s2)


def _request_from_args(args) -> CutoffRequest:
    if args.method == "m1":
        if args.alpha is None:
            raise UsageError("--alpha is required for method m1")
        return CutoffRequest.m1(args.alpha)
    if args.eu is None or args.beta is None:
        raise UsageError(f"--eu and --beta are required for method {args.method}")
    if args.method == "m2-normal":
        return CutoffRequest.m2_normal(args.eu, args.beta)
    return CutoffRequest.m2_logit(args.eu, args.beta)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------

def cmd_estimate(args) -> int:
    summary = _load_training(args)
    traces, deltas = estimate_all(summary)
    n1, n2, p = summary.n1, summary.n2, summary.p
    values = {
        "a1": traces.a1,
        "a2": traces.a2,
        "a3": traces.a3,
        "a4": traces.a4,
        "delta0": deltas.d0,
        "delta1": deltas.d1,
        "delta2": deltas.d2,
        "delta3": deltas.d3,
        "u0": -deltas.d0 / 2.0,
        "v0": deltas.d1 + (n1 + n2) * p * traces.a2 / (n1 * n2),
        "n1": n1,
        "n2": n2,
        "p": p,
        "n": summary.n,
    }
    if args.format == "csv":
        keys = list(values)
        print(",".join(keys))
        print(",".join(repr(values[k]) if isinstance(values[k], float) else str(values[k]) for k in keys))
    else:
        print(json.dumps(values, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------

def cmd_calibrate(args) -> int:
    summary = _load_training(args)
    request = _request_from_args(args)
    traces, deltas = estimate_all(summary)
    outcome = calibrate(
        traces,
        deltas,
        dims=_dims_of(summary),
        request=request,
        logit_variance=args.logit_variance,
        anchor=args.anchor,
    )
    res = outcome.result
    if res.fell_back:
        print("note: normal-scale percentile left (0,1); used the logit variant", file=sys.stderr)
    payload = {
        "c": res.c,
        "variant_used": res.variant_used.value,
        "gamma": res.gamma,
        "fell_back": res.fell_back,
        "e0": request.alpha if request.variant == CutoffVariant.M1 else outcome.law.e0,
        "tau2": None if outcome.law is None else outcome.law.tau2,
        "a1": outcome.a1,
        "u0": outcome.limit.u0,
        "v0": outcome.limit.v0,
    }
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def _dims_of(summary):
    from .error_model import Dims

    return Dims(n1=summary.n1, n2=summary.n2, p=summary.p)


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------

def cmd_classify(args) -> int:
    summary = _load_training(args)
    query = read_matrix_csv(args.query, skip_header=args.skip_header or None)
    if args.cutoff is not None:
        c = args.cutoff
    elif args.method is None:
        raise UsageError("classify needs either --cutoff or --method with its parameters")
    else:
        request = _request_from_args(args)
        traces, deltas = estimate_all(summary)
        c = calibrate(
            traces,
            deltas,
            dims=_dims_of(summary),
            request=request,
            logit_variance=args.logit_variance,
            anchor=args.anchor,
        ).result.c
    lines = []
    if query.size:
        if query.shape[1] != summary.p:
            raise DimensionError(
                f"query has {query.shape[1]} columns, training has {summary.p}"
            )
        for row in query:
            score = discriminant_score(row, summary)
            label = classify(row, summary, c)
            lines.append(f"{label},{score!r}")
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        write_text_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _parse_config_file(path: str) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for i, raw in enumerate(fh):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataFormatError(f"{path}: line {i + 1}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


_SIM_KEYS = {
    "n_grid": str, "p_grid": str, "n1": int, "n2": int, "rho": float,
    "bandwidth": int, "reps": int, "seed": int, "method": str, "alpha": float,
    "eu": float, "beta": float, "workers": int, "logit_variance": str,
    "anchor": str, "out": str,
}


def _resolve_sim_settings(args) -> dict:
    settings = {}
    if args.config:
        raw = _parse_config_file(args.config)
        for key, value in raw.items():
            if key not in _SIM_KEYS:
                raise DataFormatError(f"{args.config}: unknown key {key!r}")
            settings[key] = _SIM_KEYS[key](value)
    for key in _SIM_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            settings[key] = flag
    return settings


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in str(text).split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated integer list, got {text!r}") from None


def cmd_simulate(args) -> int:
    settings = _resolve_sim_settings(args)
    settings.setdefault("reps", 20000)  # desk-scale default
    for required in ("seed", "method"):
        if required not in settings:
            raise UsageError(f"simulate needs --{required.replace('_', '-')}")
    if settings["reps"] < 1:
        raise UsageError("--reps must be positive")
    method = settings["method"]

    class _Shim:
        pass

    shim = _Shim()
    shim.method = method
    shim.alpha = settings.get("alpha")
    shim.eu = settings.get("eu")
    shim.beta = settings.get("beta")
    request = _request_from_args(shim)

    if "n1" in settings or "n2" in settings:
        if not ("n1" in settings and "n2" in settings):
            raise UsageError("give both n1 and n2, or use --n-grid")
        cells_n = [(settings["n1"], settings["n2"])]
    else:
        if "n_grid" not in settings:
            raise UsageError("simulate needs --n-grid (total sizes) or n1/n2")
        cells_n = []
        for n_total in _int_list(settings["n_grid"]):
            if n_total % 2 or n_total < 4:
                raise UsageError(f"total N must be even and >= 4, got {n_total}")
            cells_n.append((n_total // 2, n_total // 2))
    if "p_grid" not in settings:
        raise UsageError("simulate needs --p-grid")
    p_values = _int_list(settings["p_grid"])

    rho = settings.get("rho", 0.0)
    bandwidth = settings.get("bandwidth", 50)
    workers = settings.get("workers", int(os.environ.get("EDDR_WORKERS", "1")))
    out_prefix = settings.get("out", "simulation")

    manifest = RunManifest(
        command="simulate",
        config={**{k: settings.get(k) for k in sorted(settings)}, "resolved_workers": workers},
        seed=settings["seed"],
    )
    manifest.mark_started()

    cells = []
    for n1, n2 in cells_n:
        for p in p_values:
            cfg = SimConfig(
                p=p, n1=n1, n2=n2, rho=rho, bandwidth=bandwidth,
                reps=settings["reps"], seed=settings["seed"], request=request,
                workers=workers,
                logit_variance=settings.get("logit_variance", DEFAULT_LOGIT_VARIANCE),
                anchor=settings.get("anchor", DEFAULT_M2_ANCHOR),
            )
            result = run_simulation(cfg)
            ae = attained_error_rate(result.records)
            cell = {
                "n_total": n1 + n2, "n1": n1, "n2": n2, "p": p,
                "ae": ae.value, "ae_se": ae.se,
                "excluded": result.n_excluded,
                "fell_back": result.n_fell_back,
            }
            if request.variant != CutoffVariant.M1:
                acl = attained_confidence_level(result.records, request.eu)
                cell["acl"] = acl.value
                cell["acl_se"] = acl.se
            cells.append(cell)

    value_key = "ae" if request.variant == CutoffVariant.M1 else "acl"
    csv_lines = ["N," + ",".join(f"p={p}" for p in p_values)]
    for n1, n2 in cells_n:
        row = [str(n1 + n2)]
        for p in p_values:
            cell = next(c for c in cells if c["n1"] == n1 and c["n2"] == n2 and c["p"] == p)
            row.append(format_table_value(cell[value_key]))
        csv_lines.append(",".join(row))
    csv_text = "\n".join(csv_lines) + "\n"

    csv_path = f"{out_prefix}.csv"
    sidecar_path = f"{out_prefix}.json"
    manifest_path = f"{out_prefix}.manifest.json"
    write_text_atomic(csv_path, csv_text)
    write_text_atomic(sidecar_path, json.dumps({"value": value_key, "cells": cells}, indent=2) + "\n")
    manifest.outputs = [csv_path, sidecar_path]
    manifest.mark_finished()
    manifest.write(manifest_path)
    sys.stdout.write(csv_text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify-moments
# ---------------------------------------------------------------------------

def cmd_verify_moments(args) -> int:
    if args.suite == "exact":
        rows = scalar_reduction_suite(n_max=args.n_max)
    else:
        if args.p < 1 or args.n < args.p:
            raise UsageError("mc suite needs --p >= 1 and --n >= p")
        if args.draws < 1:
            raise UsageError("--draws must be positive")
        rows = mc_moment_suite(p=args.p, n=args.n, draws=args.draws, seed=args.seed)
    width = max(len(r.name) for r in rows)
    all_ok = True
    for r in rows:
        all_ok &= r.passed
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}")
    if not all_ok:
        raise CalibrationInfeasibleError("moment verification failed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------

def _add_io_flags(sub):
    sub.add_argument("--skip-header", action="store_true",
                     help="treat the first row of every CSV as a header")


def _add_method_flags(sub, required=False):
    sub.add_argument("--method", choices=["m1", "m2-normal", "m2-logit"], required=required)
    sub.add_argument("--alpha", type=float, help="target expected error (m1)")
    sub.add_argument("--eu", type=float, help="upper bound on the conditional error (m2)")
    sub.add_argument("--beta", type=float, help="1 - confidence level (m2)")
    sub.add_argument("--logit-variance", choices=list(LOGIT_VARIANCE_CONVENTIONS),
                     default=DEFAULT_LOGIT_VARIANCE)
    sub.add_argument("--anchor", choices=list(M2_ANCHORS), default=DEFAULT_M2_ANCHOR)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eddr", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"eddr {__version__}")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    est = subs.add_parser("estimate", help="spectral and signal-strength estimates")
    est.add_argument("train1")
    est.add_argument("train2")
    est.add_argument("--format", choices=["json", "csv"], default="json")
    _add_io_flags(est)
    est.set_defaults(func=cmd_estimate)

    cal = subs.add_parser("calibrate", help="compute a cut-off")
    cal.add_argument("train1")
    cal.add_argument("train2")
    _add_method_flags(cal, required=True)
    _add_io_flags(cal)
    cal.set_defaults(func=cmd_calibrate)

    cls = subs.add_parser("classify", help="label query points")
    cls.add_argument("train1")
    cls.add_argument("train2")
    cls.add_argument("query")
    cls.add_argument("--cutoff", type=float, help="half-scale cut-off; bypasses calibration")
    cls.add_argument("--out", help="write CSV here instead of stdout")
    _add_method_flags(cls)
    _add_io_flags(cls)
    cls.set_defaults(func=cmd_classify)

    sim = subs.add_parser("simulate", help="Monte Carlo study over an (N, p) grid")
    sim.add_argument("--config", help="flat key = value settings file; flags override")
    sim.add_argument("--n-grid", dest="n_grid", help="comma list of total sample sizes (split evenly)")
    sim.add_argument("--p-grid", dest="p_grid", help="comma list of dimensions")
    sim.add_argument("--n1", type=int)
    sim.add_argument("--n2", type=int)
    sim.add_argument("--rho", type=float)
    sim.add_argument("--bandwidth", type=int)
    sim.add_argument("--reps", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--workers", type=int,
                     help="process count (default: EDDR_WORKERS env var or 1)")
    sim.add_argument("--out", help="output path prefix (default 'simulation')")
    _add_method_flags(sim)
    sim.set_defaults(func=cmd_simulate)

    ver = subs.add_parser("verify-moments", help="check the Wishart moment formulas")
    ver.add_argument("--suite", choices=["exact", "mc"], default="exact")
    ver.add_argument("--n-max", dest="n_max", type=int, default=20,
                     help="exact suite: check degrees of freedom 1..n_max")
    ver.add_argument("--p", type=int, default=3)
    ver.add_argument("--n", type=int, default=10)
    ver.add_argument("--draws", type=int, default=1_000_000)
    ver.add_argument("--seed", type=int, default=20240901)
    ver.set_defaults(func=cmd_verify_moments)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"eddr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, DimensionError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"eddr: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CalibrationInfeasibleError, NotPositiveDefiniteError, SimulationError) as exc:
        print(f"eddr: infeasible: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except EddrError as exc:
        print(f"eddr: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"eddr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
