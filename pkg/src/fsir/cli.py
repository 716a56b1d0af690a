"""``fsir`` command line: fit, predict, cv and simulate.

Every option can also come from a JSON file given with ``--config``; keys
are the option names with dashes replaced by underscores, and options given
on the command line win. The thread count falls back to ``FSIR_THREADS``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import smoother
from .cv import default_cv_grid, resolve_threads, select_tuning
from .fpca import estimate_eigenbasis, project_scores
from .functional_data import load_csv, normalize_area
from .index import IndexModel, fit_single_index, objective, predict_with_flags
from .multi_index import MultiIndexModel, backfit, fit_recursive, loo_error
from .persistence import load_model, save_model
from .simulation import MODEL_IDS, FitMethod, SimScenario, monte_carlo
from .smoother import SmootherConfig, loo_fit

log = logging.getLogger("fsir")

METHODS = {"lc": "local_constant", "ll": "local_linear"}


class CliError(Exception):
    """Invalid options; the message names the offending flag."""


# ---------------------------------------------------------------- parsing


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_data_args(p):
    g = p.add_argument_group("input curves")
    g.add_argument("--data", help="CSV file of curves (one per row)")
    g.add_argument("--layout", choices=("combined", "split"), default="combined",
                   help="combined: response in the last column; split: responses in --responses")
    g.add_argument("--responses", help="response CSV for --layout split")
    g.add_argument("--grid-row", choices=("auto", "yes", "no"), default="auto",
                   help="whether the first row holds the time grid (default: detect)")
    g.add_argument("--exclude-rows", type=_int_list, default=(),
                   help="comma-separated 0-based data rows to skip")
    g.add_argument("--normalize-area", action="store_true",
                   help="divide each curve by its integral before fitting")


def _add_method_args(p):
    g = p.add_argument_group("estimator")
    g.add_argument("--method", choices=tuple(METHODS), default="lc",
                   help="local-constant (lc) or local-linear (ll) smoother")
    g.add_argument("--lambda", dest="lam", type=float, default=0.1,
                   help="minimum leave-one-out kernel mass to keep a point")
    g.add_argument("--mode", choices=("constrained", "rescale"), default="constrained")
    g.add_argument("--r-grid", type=_int_list, default=None, help="candidate basis sizes")
    g.add_argument("--h-grid", type=_float_list, default=None, help="candidate bandwidths")
    g.add_argument("--folds", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--threads", type=int, default=None,
                   help="worker threads for cross-validation (default: FSIR_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fsir", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file of option defaults")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a single- or multiple-index model")
    _add_data_args(p)
    _add_method_args(p)
    p.add_argument("--indices", type=int, default=1, help="number of index components")
    p.add_argument("--backfit", action="store_true", help="refine components by backfitting")
    p.add_argument("--tol", type=float, default=0.01, help="backfitting stop tolerance")
    p.add_argument("--max-iter", type=int, default=10, help="backfitting pass limit")
    p.add_argument("--out", help="model file to write (JSON)")
    p.add_argument("--report", help="report file (default: <out>.report.txt)")

    p = sub.add_parser("predict", help="predict responses for new curves")
    _add_data_args(p)
    p.add_argument("--model", help="model file written by fit")
    p.add_argument("--fallback", choices=("mean", "nearest"), default="mean",
                   help="value used when a curve's index is outside the link's support")
    p.add_argument("--out", help="predictions CSV to write")

    p = sub.add_parser("cv", help="cross-validate (r, h) for a single index")
    _add_data_args(p)
    _add_method_args(p)
    p.add_argument("--out", help="CV table CSV to write")

    p = sub.add_parser("simulate", help="Monte Carlo study on a simulated model")
    p.add_argument("--model", choices=MODEL_IDS, help="simulation model id")
    p.add_argument("--n", type=int, default=200, help="sample size")
    p.add_argument("--noise-ratio", type=float, default=0.1)
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--indices", type=int, default=1)
    p.add_argument("--backfit", action="store_true")
    p.add_argument("--k-max", type=int, default=None,
                   help="number of components fitted and evaluated (default: --indices)")
    p.add_argument("--method", choices=tuple(METHODS), default="lc")
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--mode", choices=("constrained", "rescale"), default="constrained")
    p.add_argument("--r-grid", type=_int_list, default=None)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--fixed-h", type=float, default=None, help="skip CV over h")
    p.add_argument("--fixed-r", type=int, default=None, help="skip CV over r")
    p.add_argument("--out", help="summary CSV to write")
    p.add_argument("--per-run", help="optional per-run CSV")
    return parser


def _apply_config(parser, argv):
    """Parse twice: config values become defaults, explicit flags override them."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"--config: cannot read {args.config}: {exc}")
    if not isinstance(cfg, dict):
        raise CliError("--config: file must hold a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    aliases = {"lambda": "lam"}
    defaults = {}
    for key, value in cfg.items():
        dest = aliases.get(key, key.replace("-", "_"))
        if dest not in known or dest == "help":
            raise CliError(f"--config: unknown option {key!r} for {args.command}")
        action = known[dest]
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        if action.type is not None and isinstance(value, str | int | float) and not isinstance(value, bool):
            try:
                value = action.type(value) if isinstance(value, str) else action.type(str(value))
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise CliError(f"--config: bad value for {key!r}: {exc}")
        defaults[dest] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) in (None, ""):
            raise CliError(f"--{name.replace('_', '-')} is required")


def _validate(args):
    c = args.command
    if c in ("fit", "cv", "predict"):
        _require(args, "data")
        if args.layout == "split" and not args.responses and c != "predict":
            raise CliError("--responses is required with --layout split")
    if c in ("fit", "cv"):
        if args.lam < 0:
            raise CliError("--lambda must be nonnegative")
        if args.folds < 2:
            raise CliError("--folds must be at least 2")
        if args.r_grid is not None and (not args.r_grid or min(args.r_grid) < 1):
            raise CliError("--r-grid needs positive integers")
        if args.h_grid is not None and (not args.h_grid or min(args.h_grid) <= 0):
            raise CliError("--h-grid needs positive bandwidths")
        if args.threads is not None and args.threads < 1:
            raise CliError("--threads must be at least 1")
    if c == "fit":
        _require(args, "out")
        if args.indices < 1:
            raise CliError("--indices must be at least 1")
        if args.backfit and args.indices < 2:
            raise CliError("--backfit needs --indices of at least 2")
        if args.max_iter < 0:
            raise CliError("--max-iter must be nonnegative")
    if c == "cv":
        _require(args, "out")
    if c == "predict":
        _require(args, "model", "out")
    if c == "simulate":
        _require(args, "model", "out")
        if args.n < 5:
            raise CliError("--n must be at least 5")
        if args.runs < 1:
            raise CliError("--runs must be at least 1")
        if args.noise_ratio < 0:
            raise CliError("--noise-ratio must be nonnegative")
        if args.indices < 1:
            raise CliError("--indices must be at least 1")
        if args.k_max is not None and args.k_max < 1:
            raise CliError("--k-max must be at least 1")
        if args.backfit and args.indices < 2 and (args.k_max or 1) < 2:
            raise CliError("--backfit needs --indices or --k-max of at least 2")
        if args.fixed_h is not None and args.fixed_h <= 0:
            raise CliError("--fixed-h must be positive")
        if args.fixed_r is not None and args.fixed_r < 1:
            raise CliError("--fixed-r must be at least 1")


# ---------------------------------------------------------------- helpers


def _load(args, need_responses=True):
    data = load_csv(
        args.data,
        layout=args.layout,
        responses_path=args.responses,
        grid_row={"auto": None, "yes": True, "no": False}[args.grid_row],
        exclude_rows=args.exclude_rows,
    )
    if need_responses:
        data.require_responses()
    if args.normalize_area:
        data = normalize_area(data)
    return data


def _cfg(args) -> SmootherConfig:
    return SmootherConfig(METHODS[args.method], 1.0, args.lam)


def _basis(args, data):
    r_top = max(args.r_grid) if args.r_grid else 6
    r_max = min(r_top, data.n - 1, len(data.grid))
    return estimate_eigenbasis(data, r_max)


def _grid_factory(args):
    def make(data, basis):
        g = default_cv_grid(data, basis, args.folds, args.seed, args.r_grid)
        if args.h_grid:
            g = replace(g, h_candidates=tuple(args.h_grid))
        return g
    return make


def _write_beta_csv(path, comps):
    grid = comps[0].basis.grid.points
    curves = [c.beta_curve.values for c in comps]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *(f"beta{k}" for k in range(1, len(comps) + 1))])
        for i, t in enumerate(grid):
            w.writerow([repr(float(t)), *(repr(float(c[i])) for c in curves)])


def _component_stats(comp: IndexModel, data):
    scores = project_scores(data, comp.basis, comp.r)
    obj = objective(comp.coefficients, scores, comp.targets, comp.smoother)
    dropped = loo_fit(comp.index_values, comp.targets, comp.smoother).n_dropped
    return obj, dropped


# ---------------------------------------------------------------- commands


def cmd_fit(args) -> int:
    data = _load(args)
    y = data.responses
    basis = _basis(args, data)
    cfg = _cfg(args)
    threads = resolve_threads(args.threads)
    out = Path(args.out)
    report_path = Path(args.report) if args.report else out.with_name(out.name + ".report.txt")
    stem = out.with_suffix("")
    cv_path = stem.with_name(stem.name + "_cv.csv")
    beta_path = stem.with_name(stem.name + "_beta.csv")
    lines = [f"curves: {data.n}", f"grid points: {len(data.grid)}",
             f"smoother: {cfg.kind}", f"threshold: {cfg.threshold!r}",
             f"mode: {args.mode}", f"backend: {smoother.BACKEND}"]
    make_grid = _grid_factory(args)

    if args.indices == 1:
        grid = make_grid(data, basis)
        sel = select_tuning(data, basis, grid, cfg, mode=args.mode, threads=threads)
        sel.to_csv(cv_path)
        model, _ = fit_single_index(data, basis, sel.h, sel.r, cfg, mode=args.mode)
        comps = [model]
        lines.append(f"cv table: {cv_path}")
    else:
        model = fit_recursive(data, basis, args.indices, make_grid, cfg, mode=args.mode,
                              threads=threads)
        _write_tuning_csv(cv_path, model.diagnostics["tuning"])
        lines.append(f"cv selections: {cv_path}")
        if args.backfit:
            model = backfit(data, basis, model, cfg, tol=args.tol, max_iter=args.max_iter,
                            mode=args.mode)
            lines.append(f"backfit iterations_used: {model.iterations_used}")
            lines.append(f"backfit converged: {model.converged}")
            lines.append(f"backfit final delta: {model.final_delta!r}")
        comps = model.components

    for k, comp in enumerate(comps, start=1):
        obj, dropped = _component_stats(comp, data)
        lines.append(f"component {k}: r={comp.r} h={comp.bandwidth!r} "
                     f"objective={obj!r} dropped={dropped}")
    lines.append(f"leave-one-curve-out error: {loo_error(model, y)!r}")
    _write_beta_csv(beta_path, comps)
    lines.append(f"beta curves: {beta_path}")
    save_model(model, out)
    lines.append(f"model: {out}")
    report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return 0


def _write_tuning_csv(path, tuning):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["component", "r", "h"])
        for k, (r, h) in enumerate(tuning, start=1):
            w.writerow([k, r, repr(float(h))])


def cmd_predict(args) -> int:
    model = load_model(args.model)
    data = _load(args, need_responses=False)
    if data.n == 0:
        raise ValueError("no curves to predict")
    comps = [model] if isinstance(model, IndexModel) else model.components
    total = np.zeros(data.n)
    flagged = np.zeros(data.n, dtype=bool)
    for comp in comps:
        vals, outside = predict_with_flags(comp, data, args.fallback)
        total += vals
        flagged |= outside
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["prediction", "fallback"])
        for v, f in zip(total, flagged):
            w.writerow([repr(float(v)), int(f)])
    print(f"wrote {data.n} predictions to {args.out} ({int(flagged.sum())} fallbacks)")
    return 0


def cmd_cv(args) -> int:
    data = _load(args)
    basis = _basis(args, data)
    grid = _grid_factory(args)(data, basis)
    sel = select_tuning(data, basis, grid, _cfg(args), mode=args.mode,
                        threads=resolve_threads(args.threads))
    sel.to_csv(args.out)
    print(f"selected r={sel.r} h={sel.h!r} score={sel.score!r}")
    return 0


def cmd_simulate(args) -> int:
    method = FitMethod(
        kind=METHODS[args.method],
        indices=args.indices,
        backfit=args.backfit,
        threshold=args.lam,
        mode=args.mode,
        folds=args.folds,
        r_candidates=args.r_grid,
        fixed_h=args.fixed_h,
        fixed_r=args.fixed_r,
    )
    scn = SimScenario(args.model, args.n, args.noise_ratio, seed=args.seed)
    summary = monte_carlo(scn, args.runs, method, args.k_max)
    if not summary.per_run:
        raise RuntimeError("every run failed: " + "; ".join(m for _, m in summary.failures))
    summary.to_csv(args.out)
    if args.per_run:
        summary.per_run_csv(args.per_run)
    row = summary.summary_row()
    print(", ".join(f"{k}={v:.5g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    return 0


COMMANDS = {"fit": cmd_fit, "predict": cmd_predict, "cv": cmd_cv, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        _validate(args)
    except CliError as exc:
        parser.print_usage(sys.stderr)
        print(f"fsir: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse errors and --help
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"fsir: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
