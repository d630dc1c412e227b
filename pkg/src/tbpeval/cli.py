"""Command-line entry point: ``tbp-eval {simulate,oracle,evaluate,sweep}``.

Exit codes: 0 ok, 2 usage or validation error, 3 I/O error, 4 estimation
failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bias as bias_mod
from .core import Pop1Spec, SpecValidationError
from .estimate import (
    DEFAULT_CLIP,
    EstimationError,
    covariates_discrete,
    estimate_propensity,
    ipw_tau,
    known_propensity,
    outcome_regression_tau,
)
from .io import (
    MalformedInputError,
    load_population_config,
    read_sample_csv,
    write_curve_csv,
    write_json,
    write_sample_csv,
    write_sweep_csv,
)
from .metrics import (
    UndefinedMetricError,
    calibration_curve,
    cb_plug_in,
    rcc,
)
from .populations import (
    DegenerateCellError,
    Pop2Spec,
    make_pop1_tbp,
    reference_pop1_spec,
    pop1_joint_table,
    pop1_tbp_predict,
    pop2_metrics,
    simulate,
)

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_ESTIMATION = 0, 2, 3, 4
DEFAULT_BINS = 10


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        self.code = code
        super().__init__(message)


def _metric_block(report) -> dict:
    return {k: report.to_dict()[k] for k in ("tau_star", "maxlike", "cb", "gini_b")} | {
        "flags": list(report.flags)
    }


def _resolve_pop(pop: str, spec_path: str | None, beta1: float | None = None):
    if pop == "pop2":
        return Pop2Spec() if spec_path is None else load_population_config(spec_path)
    if pop == "pop1":
        spec = reference_pop1_spec() if spec_path is None else load_population_config(spec_path)
    else:
        spec = load_population_config(pop)
    if beta1 is not None:
        if not isinstance(spec, Pop1Spec):
            raise CliError("--beta1 only applies to the binary population")
        spec = spec.replace(beta1=beta1)
    return spec


def _write_curves(out_dir: str | None, curves: dict) -> dict:
    files = {}
    if out_dir is None:
        return {f"{name}_csv": None for name in curves}
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    for name, curve in curves.items():
        if curve is None:
            files[f"{name}_csv"] = None
            continue
        path = d / f"{name}.csv"
        write_curve_csv(curve, path)
        files[f"{name}_csv"] = str(path)
    return files


# --------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    if args.n < 1:
        raise CliError("n must be >= 1")
    pop = _resolve_pop(args.pop, args.spec, args.beta1)
    tbp = None
    if args.tbp is not None:
        if not isinstance(pop, Pop1Spec):
            raise CliError("--tbp applies to the binary population only")
        tbp = make_pop1_tbp(args.tbp, pop1_joint_table(pop))
    sample = simulate(pop, args.n, args.seed, retain_counterfactuals=args.counterfactuals, tbp=tbp)
    extra = ("tau",) if args.emit_tau else ()
    try:
        write_sample_csv(sample, args.out, counterfactuals=args.counterfactuals, extra=extra)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from exc
    kind = "pop2" if isinstance(pop, Pop2Spec) else "pop1"
    print(f"simulated n={args.n} seed={args.seed} population={kind} "
          f"treated={int(sample.a.sum())} mean_y={sample.y.mean():.6f}", file=sys.stderr)
    return EXIT_OK


def cmd_oracle(args) -> int:
    if args.pop == "pop2":
        ev = bias_mod.pop2_evaluation(points=args.points)
        tbp_name = "h"
        extra = {"tau_s_ranking": _metric_block(pop2_metrics(True, "tau_s"))}
    elif args.pop == "pop1":
        spec = _resolve_pop("pop1", args.spec, args.beta1)
        table = pop1_joint_table(spec)
        tbp = make_pop1_tbp(args.tbp, table)
        ev = bias_mod.naive_metrics(table, tbp)
        tbp_name = args.tbp
        bt = bias_mod.pop1_bias(table)
        extra = {
            "bias": {f"{x[0]}{x[1]}": v for x, v in bt.bias.items()},
            "tbp_levels": {f"{x[0]}{x[1]}": pop1_tbp_predict(tbp, *x) for x in bt.bias},
        }
    else:
        raise CliError(f"unknown population {args.pop!r}")
    report = {
        "population": args.pop,
        "tbp": tbp_name,
        "n": None,
        "method": "exact",
        "adjusted": _metric_block(ev.adjusted),
        "naive": _metric_block(ev.naive),
        "deviation": ev.deviation.to_dict(),
        **extra,
    }
    report["files"] = _write_curves(args.out_dir, {
        "calibration": ev.calibration, "rcc": ev.rcc,
        "calibration_naive": ev.calibration_naive, "rcc_naive": ev.rcc_naive,
    })
    _emit(report, args.out)
    return EXIT_OK


def _predictions(args, sample) -> np.ndarray:
    if args.tbp_col is not None:
        if args.tbp_col == "h" and sample.h is not None:
            return sample.h
        if args.tbp_col not in sample.extra:
            raise CliError(f"missing column {args.tbp_col!r}")
        return sample.extra[args.tbp_col]
    if args.tbp is not None:
        spec = _resolve_pop("pop1", args.spec)
        if sample.x.shape[1] < 2:
            raise CliError("missing column 'x2'")
        tbp = make_pop1_tbp(args.tbp, pop1_joint_table(spec))
        return pop1_tbp_predict(tbp, sample.x[:, 0], sample.x[:, 1])
    if sample.h is not None:
        return sample.h
    raise CliError("missing column 'h' (give --tbp-col or --tbp)")


def _tau_estimates(args, sample, use_z: bool):
    if args.method == "provided":
        if args.tau_col not in sample.extra:
            raise CliError(f"missing column {args.tau_col!r}")
        return outcome_regression_tau(sample, "provided_tau", tau=sample.extra[args.tau_col])
    if args.method == "or":
        return outcome_regression_tau(sample, use_z=use_z)
    # ipw
    if args.propensity_col is not None:
        cols = {f"z{j + 1}": sample.z[:, j] for j in range(sample.z.shape[1])}
        cols |= {f"x{j + 1}": sample.x[:, j] for j in range(sample.x.shape[1])} | sample.extra
        if args.propensity_col not in cols:
            raise CliError(f"missing column {args.propensity_col!r}")
        prop = known_propensity(cols[args.propensity_col], args.clip)
    else:
        prop = estimate_propensity(sample, args.clip, use_z=use_z)
    aggregate = "cells" if covariates_discrete(sample, use_z) else "records"
    return ipw_tau(sample, prop, args.clip, aggregate=aggregate, use_z=use_z)


def _calibration(tau_hat, h, bins: int | None):
    if bins is not None:
        return calibration_curve(tau_hat, h, "equal_frequency", bins)
    if np.unique(h).size <= DEFAULT_BINS:
        return calibration_curve(tau_hat, h, "by_level")
    return calibration_curve(tau_hat, h, "equal_frequency", DEFAULT_BINS)


def cmd_evaluate(args) -> int:
    try:
        sample = read_sample_csv(args.data)
    except OSError as exc:
        raise CliError(f"cannot read {args.data}: {exc}", EXIT_IO) from exc
    h = _predictions(args, sample)
    est = _tau_estimates(args, sample, use_z=True)
    adjusted = cb_plug_in(est.tau_hat, h)

    naive = naive_cal = naive_rcc = None
    cb_dev = None
    # naive contrast ignores z; only defined for the saturated/discrete routes
    if args.method != "provided" and args.propensity_col is None and covariates_discrete(sample, use_z=False):
        naive_est = _tau_estimates(args, sample, use_z=False)
        naive = cb_plug_in(naive_est.tau_hat, h)
        cb_dev = naive.cb - adjusted.cb
        naive_cal = _calibration(naive_est.tau_hat, h, args.bins)
        naive_rcc = rcc(naive_est.tau_hat, h) if naive.tau_star > 0 else None

    curves = {
        "calibration": _calibration(est.tau_hat, h, args.bins),
        "rcc": rcc(est.tau_hat, h) if adjusted.tau_star > 0 else None,
        "calibration_naive": naive_cal,
        "rcc_naive": naive_rcc,
    }
    report = {
        "population": None,
        "tbp": args.tbp or args.tbp_col or "h",
        "n": len(sample),
        "method": args.method,
        "adjusted": _metric_block(adjusted),
        "naive": _metric_block(naive) if naive is not None else None,
        "deviation": {"cb_deviation": cb_dev},
        "diagnostics": est.diagnostics(),
        "files": _write_curves(args.out_dir, curves),
    }
    _emit(report, args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = _resolve_pop("pop1", args.spec)
    if not isinstance(spec, Pop1Spec):
        raise CliError("sweep needs a binary-population spec")
    beta1, diff = bias_mod.default_sweep_grid(spec, args.beta1_steps, args.alpha13_steps)
    if args.beta1 is not None:
        beta1 = np.array(args.beta1, dtype=float)
    if args.a13_minus_a03 is not None:
        diff = np.array(args.a13_minus_a03, dtype=float)
    table = bias_mod.sweep_bias(spec, beta1, diff)
    if len(table) == 0:
        raise CliError("every grid point gives an invalid population")
    try:
        write_sweep_csv(table, args.out)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from exc
    print(f"sweep rows={len(table)} skipped={len(table.skipped)}", file=sys.stderr)
    return EXIT_OK


def _emit(report: dict, out: str | None) -> None:
    try:
        text = write_json(report, out)
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc}", EXIT_IO) from exc
    if out is None:
        sys.stdout.write(text)


# --------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tbp-eval", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a sample CSV from a population")
    p.add_argument("--pop", required=True, help="pop1, pop2 or a population JSON file")
    p.add_argument("--spec", help="population JSON overriding the built-in parameters")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beta1", type=float)
    p.add_argument("--tbp", choices=("h1", "h2", "h3"), help="add an h column (binary population)")
    p.add_argument("--counterfactuals", action="store_true", help="keep y0,y1 columns")
    p.add_argument("--emit-tau", action="store_true", help="add the true conditional effect as 'tau'")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="exact metrics for a synthetic population")
    p.add_argument("--pop", required=True, choices=("pop1", "pop2"))
    p.add_argument("--spec")
    p.add_argument("--tbp", choices=("h1", "h2", "h3"), default="h1")
    p.add_argument("--beta1", type=float)
    p.add_argument("--points", type=_positive_int, default=199, help="closed-form curve resolution")
    p.add_argument("--out")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("evaluate", help="plug-in metrics from a sample CSV")
    p.add_argument("--data", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--tbp-col", help="column holding the predictions")
    g.add_argument("--tbp", choices=("h1", "h2", "h3"), help="binary-population predictor")
    p.add_argument("--spec", help="binary-population JSON for --tbp")
    p.add_argument("--method", choices=("or", "ipw", "provided"), default="or")
    p.add_argument("--tau-col", default="tau")
    p.add_argument("--propensity-col", help="column holding known propensities (ipw)")
    p.add_argument("--clip", type=float, default=DEFAULT_CLIP)
    p.add_argument("--bins", type=int)
    p.add_argument("--out")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="|bias(x)| over a (beta1, alpha13 - alpha03) grid")
    p.add_argument("--spec")
    p.add_argument("--beta1-steps", type=_positive_int, default=200)
    p.add_argument("--alpha13-steps", type=_positive_int, default=200)
    p.add_argument("--beta1", type=float, nargs="+", help="explicit beta1 values")
    p.add_argument("--a13-minus-a03", type=float, nargs="+", help="explicit alpha13 - alpha03 values")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except EstimationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except (SpecValidationError, MalformedInputError, DegenerateCellError,
            UndefinedMetricError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
