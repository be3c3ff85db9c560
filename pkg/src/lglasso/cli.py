"""Command-line interface: ``lglasso <subcommand> ...``.

Exit status is 0 on success, 2 when an input fails validation (the message
names the offending flag or field) and 3 when an iterative routine did not
converge; in that case the best iterate is still written, flagged with
``"converged": false``.
"""
from __future__ import annotations

import argparse
import functools
import json
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .analysis import consistency_conditions
from .exceptions import LatentGroupLassoError, NotConverged
from .groups import (
    WeightScheme,
    apply_weight_scheme,
    groups_from_chain_windows,
    groups_from_chain_windows_upto,
    groups_from_edges,
    groups_from_overlapping_chain,
    group_set_from_dict,
    restrict_group_size,
)
from .norm import DEFAULT_TOL, group_support, is_decomposition_unique, omega, omega_dual
from .solver import DEFAULT_KKT_TOL, fit, parse_grid, path, prox
from .synth import SynthSpec, abs_sum_event_probability, grid_from_spec, run_weight_experiment

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3


class InputError(Exception):
    """Validation failure attributed to one flag or config field."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


def _formatter(prog):
    return argparse.ArgumentDefaultsHelpFormatter(prog, width=88, max_help_position=32)


# -- loaders that name the flag they serve -------------------------------------


def _load(flag, loader, path):
    try:
        return loader(path)
    except FileNotFoundError:
        raise InputError(flag, f"no such file: {path}") from None
    except (ValueError, LatentGroupLassoError) as exc:
        raise InputError(flag, str(exc)) from None


def _load_groups(path):
    def read(p):
        data = fileio.read_json(p)
        return group_set_from_dict(data)

    return _load("--groups", read, path)


def _vector(flag, path, size=None):
    v = _load(flag, fileio.read_vector, path)
    if size is not None and v.size != size:
        raise InputError(flag, f"expected {size} values, found {v.size}")
    return v


def _matrix(flag, path, cols=None):
    X = _load(flag, fileio.read_matrix, path)
    if cols is not None and X.shape[1] != cols:
        raise InputError(flag, f"expected {cols} columns, found {X.shape[1]}")
    return X


def _emit(obj, out):
    text = fileio.dumps(obj)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


# -- subcommands ---------------------------------------------------------------


def cmd_norm(args):
    gs = _load_groups(args.groups)
    w = _vector("--w", args.w, gs.p)
    res = omega(w, gs, tol=args.tol, max_iter=args.max_iter, raise_on_failure=False)
    out = {
        "value": res.value,
        "gap": res.gap,
        "converged": res.converged,
        "iterations": res.iterations,
        "lambda": res.lam,
        "alpha": res.alpha,
        "dual_norm": omega_dual(res.alpha, gs),
        "decomposition": [
            {"group": list(gs.groups[g]), "v": res.decomposition[g, gs.index_arrays[g]]}
            for g in range(gs.m)
            if np.any(res.decomposition[g])
        ],
    }
    if res.converged:
        sup = group_support(res, gs, tol_v=args.tol_v, tol_alpha=args.tol_alpha, w=w)
        out["strong"] = [list(gs.groups[g]) for g in sorted(sup.strong)]
        out["weak"] = [list(gs.groups[g]) for g in sorted(sup.weak)]
        out["unique_decomposition"] = is_decomposition_unique(
            {int(i) + 1 for i in np.flatnonzero(w)}, sup.strong, gs
        )
    _emit(out, args.out)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_dual(args):
    gs = _load_groups(args.groups)
    a = _vector("--alpha", args.alpha, gs.p)
    _emit({"value": omega_dual(a, gs)}, args.out)
    return EXIT_OK


def _fit_opts(args):
    return dict(kkt_tol=args.kkt_tol, max_outer=args.max_outer, max_inner=args.max_inner,
                raise_on_failure=False)


def cmd_prox(args):
    gs = _load_groups(args.groups)
    y = _vector("--y", args.y, gs.p)
    if args.lam < 0:
        raise InputError("--lambda", "must be nonnegative")
    res = prox(y, gs, args.lam, **_fit_opts(args)) if args.lam > 0 else prox(y, gs, 0.0)
    _emit(res.to_dict(), args.out)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def _regression_inputs(args):
    gs = _load_groups(args.groups)
    X = _matrix("--x", args.x, gs.p)
    y = _vector("--y", args.y, X.shape[0])
    if args.loss != "squared" and not np.all(np.isin(y, (-1.0, 1.0))):
        raise InputError("--y", "logistic losses need labels in {-1, +1}")
    return gs, X, y


def cmd_solve(args):
    gs, X, y = _regression_inputs(args)
    if not args.lam > 0:
        raise InputError("--lambda", "must be positive")
    res = fit(X, y, args.loss, gs, args.lam, fit_intercept=args.fit_intercept, **_fit_opts(args))
    _emit(res.to_dict(), args.out)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


PATH_COLUMNS = ["lambda", "objective", "n_selected_groups", "n_selected_covariates", "kkt_residual",
                "converged", "support"]


def cmd_path(args):
    gs, X, y = _regression_inputs(args)
    try:
        g = parse_grid(args.grid)
    except ValueError as exc:
        raise InputError("--grid", str(exc)) from None
    try:
        if g["kind"] == "geometric":
            res = path(X, y, args.loss, gs, g["n_points"], g["ratio_min"], fit_intercept=args.fit_intercept,
                       **_fit_opts(args))
        else:
            res = path(X, y, args.loss, gs, grid=grid_from_spec(g), fit_intercept=args.fit_intercept,
                       **_fit_opts(args))
    except ValueError as exc:
        raise InputError("--grid", str(exc)) from None
    rows = []
    for f in res.fits:
        bitmap = "".join("1" if v != 0 else "0" for v in f.w)
        rows.append([f.lam, f.objective, len(f.selected_groups()), len(f.support()), f.kkt_residual,
                     f.converged, bitmap])
    fileio.write_rows(args.out, PATH_COLUMNS, rows)
    return EXIT_OK if all(f.converged for f in res.fits) else EXIT_NOT_CONVERGED


def read_path_csv(path):
    """Reader for the table written by ``lglasso path``."""
    header, rows = fileio.read_rows(path)
    if header != PATH_COLUMNS:
        raise ValueError(f"{path}: unexpected header {header}")
    out = []
    for r in rows:
        out.append({
            "lambda": float(r[0]),
            "objective": float(r[1]),
            "n_selected_groups": int(r[2]),
            "n_selected_covariates": int(r[3]),
            "kkt_residual": float(r[4]),
            "converged": bool(int(r[5])),
            "support": {k + 1 for k, c in enumerate(r[6]) if c == "1"},
        })
    return out


def cmd_groups(args):
    kind = args.kind
    need = {"windows": ["p", "k"], "windows_upto": ["p", "kmax"], "singletons": ["p"],
            "overlap_chain": ["group_size", "overlap", "n_groups"], "edges": ["p", "edges"]}[kind]
    for name in need:
        if getattr(args, name) is None:
            raise InputError("--" + name.replace("_", "-"), f"required for --kind {kind}")
    try:
        if kind == "windows":
            gs = groups_from_chain_windows(args.p, args.k)
        elif kind == "windows_upto":
            gs = groups_from_chain_windows_upto(args.p, args.kmax)
        elif kind == "singletons":
            gs = groups_from_chain_windows(args.p, 1)
        elif kind == "overlap_chain":
            gs = groups_from_overlapping_chain(args.group_size, args.overlap, args.n_groups)
        else:
            E = _matrix("--edges", args.edges, 2)
            if np.any(E != np.round(E)):
                raise InputError("--edges", "vertex labels must be integers")
            gs = groups_from_edges(args.p, E.astype(int).tolist())
        gs = restrict_group_size(gs, args.max_size)
    except LatentGroupLassoError as exc:
        raise InputError("--kind", str(exc)) from None
    try:
        scheme = WeightScheme.parse(args.weights)
    except ValueError as exc:
        raise InputError("--weights", str(exc)) from None
    gs = apply_weight_scheme(gs, scheme)
    _emit(gs.to_dict(), args.out)
    return EXIT_OK


def cmd_check_consistency(args):
    gs = _load_groups(args.groups)
    if (args.x is None) == (args.sigma is None):
        raise InputError("--x", "give exactly one of --x and --sigma")
    if args.x is not None:
        S = _matrix("--x", args.x, gs.p)
        is_design = True
    else:
        S = _matrix("--sigma", args.sigma, gs.p)
        is_design = False
        if S.shape[0] != gs.p:
            raise InputError("--sigma", f"expected a {gs.p} x {gs.p} matrix")
    w = _vector("--wstar", args.wstar, gs.p)
    try:
        rep = consistency_conditions(S, w, gs, strict_tol=args.strict_tol, is_design=is_design)
    except NotConverged:
        _emit({"converged": False}, args.out)
        return EXIT_NOT_CONVERGED
    except ValueError as exc:
        raise InputError("--sigma" if args.sigma else "--x", str(exc)) from None
    out = rep.to_dict()
    out["converged"] = True
    _emit(out, args.out)
    return EXIT_OK


EXPERIMENT_KEYS = {"spec", "grid", "n_replicates", "schemes", "cv", "solver"}
SPEC_KEYS = {"p", "layout", "support", "n", "noise", "seed", "n_test", "weights"}


def load_experiment_config(path, seed=None):
    """Parse an experiment config; unknown keys are errors naming their path."""
    data = _load("--config", fileio.read_json, path)
    if not isinstance(data, dict):
        raise InputError("--config", "must hold a JSON object")
    for k in data:
        if k not in EXPERIMENT_KEYS:
            raise InputError(f"config.{k}", "unknown key")
    for k in ("spec", "grid"):
        if k not in data:
            raise InputError(f"config.{k}", "missing")
    spec_d = data["spec"]
    if not isinstance(spec_d, dict):
        raise InputError("config.spec", "must be an object")
    for k in spec_d:
        if k not in SPEC_KEYS:
            raise InputError(f"config.spec.{k}", "unknown key")
    if seed is not None:
        spec_d = dict(spec_d, seed=seed)
    try:
        spec = SynthSpec(**spec_d)
    except (TypeError, ValueError, KeyError, LatentGroupLassoError) as exc:
        raise InputError("config.spec", str(exc)) from None
    try:
        grid = grid_from_spec(data["grid"])
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError("config.grid", str(exc)) from None
    n_rep = data.get("n_replicates", 1)
    if not isinstance(n_rep, int) or n_rep < 1:
        raise InputError("config.n_replicates", "must be a positive integer")
    schemes = data.get("schemes", [spec.weights])
    try:
        schemes = [WeightScheme.parse(s) for s in schemes]
    except (ValueError, AttributeError) as exc:
        raise InputError("config.schemes", str(exc)) from None
    cv = data.get("cv", 5)
    if not isinstance(cv, int) or cv == 1 or cv < 0:
        raise InputError("config.cv", "must be 0 or an integer >= 2")
    solver = data.get("solver", {})
    if not isinstance(solver, dict) or set(solver) - {"kkt_tol", "max_outer", "max_inner"}:
        raise InputError("config.solver", "allowed keys are kkt_tol, max_outer, max_inner")
    return spec, grid, n_rep, schemes, cv, solver


def cmd_experiment(args):
    spec, grid, n_rep, schemes, cv, solver = load_experiment_config(args.config, args.seed)
    if args.jobs < 1:
        raise InputError("--jobs", "must be at least 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        reports = run_weight_experiment(spec, schemes, grid, n_rep, cv=cv, jobs=args.jobs, **solver)
    except NotConverged as exc:
        fileio.write_json(out / "status.json", {"converged": False, "message": str(exc)})
        return EXIT_NOT_CONVERGED
    freq_rows = []
    for label, rep in reports.items():
        F = rep.selection_frequency()
        for i in range(spec.p):
            freq_rows.append([label, i + 1, *F[i]])
    fileio.write_rows(out / "frequencies.csv", ["scheme", "covariate", *[fileio.fmt(x) for x in grid]], freq_rows)
    summaries = [rep.summary() for rep in reports.values()]
    keys = list(summaries[0])
    for s in summaries[1:]:
        keys += [k for k in s if k not in keys]
    fileio.write_rows(out / "summary.csv", keys, [[s.get(k, "") for k in keys] for s in summaries])
    with open(out / "replicates.jsonl", "w") as fh:
        for label, rep in reports.items():
            for r in rep.replicates:
                d = r.to_dict()
                d["scheme"] = label
                fh.write(json.dumps(d, default=fileio._default) + "\n")
    fileio.write_json(out / "status.json", {"converged": True, "spec": spec.to_dict(), "grid": grid})
    return EXIT_OK


def cmd_abs_sum_event(args):
    if args.samples < 1:
        raise InputError("--samples", "must be at least 1")
    est = abs_sum_event_probability(args.samples, args.seed)
    print(fileio.fmt(est))
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lglasso",
        description="Latent group Lasso: norm evaluation, proximal operator, penalised regression "
        "and support-recovery experiments.",
        formatter_class=_formatter,
    )
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")
    add = functools.partial(sub.add_parser, formatter_class=_formatter)

    p = add("norm", help="evaluate the norm of a vector with a duality certificate")
    p.add_argument("--groups", required=True, help="group file (JSON)")
    p.add_argument("--w", required=True, help="vector (one-column CSV)")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="target duality gap")
    p.add_argument("--max-iter", type=int, default=10_000, help="maximal number of sweeps")
    p.add_argument("--tol-v", type=float, default=1e-6, help="strong-support threshold")
    p.add_argument("--tol-alpha", type=float, default=1e-4, help="weak-support threshold")
    p.add_argument("--out", default=None, help="output JSON (stdout if omitted)")
    p.set_defaults(func=cmd_norm)

    p = add("dual", help="evaluate the dual norm")
    p.add_argument("--groups", required=True, help="group file (JSON)")
    p.add_argument("--alpha", required=True, help="vector (one-column CSV)")
    p.add_argument("--out", default=None, help="output JSON (stdout if omitted)")
    p.set_defaults(func=cmd_dual)

    def solver_flags(p):
        p.add_argument("--kkt-tol", type=float, default=DEFAULT_KKT_TOL, help="relative KKT tolerance")
        p.add_argument("--max-outer", type=int, default=100, help="working-set expansions")
        p.add_argument("--max-inner", type=int, default=10_000, help="sweeps per working set")

    p = add("prox", help="proximal operator of lambda times the norm")
    p.add_argument("--groups", required=True, help="group file (JSON)")
    p.add_argument("--y", required=True, help="point to shrink (one-column CSV)")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="regularisation level")
    solver_flags(p)
    p.add_argument("--out", default=None, help="output JSON (stdout if omitted)")
    p.set_defaults(func=cmd_prox)

    def regression_flags(p):
        p.add_argument("--x", required=True, help="design matrix (CSV, header row)")
        p.add_argument("--y", required=True, help="targets (one-column CSV)")
        p.add_argument("--groups", required=True, help="group file (JSON)")
        p.add_argument("--loss", choices=["squared", "logistic", "balanced_logistic"], default="squared",
                       help="empirical risk")
        p.add_argument("--fit-intercept", action="store_true", help="estimate an unpenalised offset")
        solver_flags(p)

    p = add("solve", help="fit at one regularisation level")
    regression_flags(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="regularisation level")
    p.add_argument("--out", default=None, help="output JSON (stdout if omitted)")
    p.set_defaults(func=cmd_solve)

    p = add("path", help="fit a regularisation path with warm starts")
    regression_flags(p)
    p.add_argument("--grid", default="geometric:50:1e-3",
                   help="geometric:N:RATIO (from lambda_max) or absolute:N:LO:HI")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_path)

    p = add("groups", help="write a group file")
    p.add_argument("--kind", required=True,
                   choices=["windows", "windows_upto", "singletons", "overlap_chain", "edges"],
                   help="group layout")
    p.add_argument("--p", type=int, default=None, help="number of covariates")
    p.add_argument("--k", type=int, default=None, help="window length (windows)")
    p.add_argument("--kmax", type=int, default=None, help="largest window length (windows_upto)")
    p.add_argument("--group-size", type=int, default=None, help="group size (overlap_chain)")
    p.add_argument("--overlap", type=int, default=None, help="overlap between neighbours (overlap_chain)")
    p.add_argument("--n-groups", type=int, default=None, help="number of groups (overlap_chain)")
    p.add_argument("--edges", default=None, help="two-column CSV of graph edges (edges)")
    p.add_argument("--max-size", type=int, default=None, help="drop groups larger than this")
    p.add_argument("--weights", default="uniform", help="uniform, sqrt_size, quartic_root or c=<value>")
    p.add_argument("--out", default=None, help="output JSON (stdout if omitted)")
    p.set_defaults(func=cmd_groups)

    p = add("check-consistency", help="consistency margins at a target vector")
    p.add_argument("--x", default=None, help="design matrix (CSV); Sigma = X'X/n")
    p.add_argument("--sigma", default=None, help="covariance matrix (CSV) instead of --x")
    p.add_argument("--wstar", required=True, help="target vector (one-column CSV)")
    p.add_argument("--groups", required=True, help="group file (JSON)")
    p.add_argument("--strict-tol", type=float, default=1e-8, help="margin required by the strict condition")
    p.add_argument("--out", default=None, help="output JSON (stdout if omitted)")
    p.set_defaults(func=cmd_check_consistency)

    p = add("experiment", help="run a synthetic support-recovery experiment")
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_experiment)

    p = add("appendix-b", help="Monte Carlo estimate of P(|e1| + |e2| < |e3|)")
    p.add_argument("--samples", type=int, default=1_000_000, help="number of draws")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.set_defaults(func=cmd_abs_sum_event)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"lglasso {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
