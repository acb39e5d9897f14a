"""Command-line front end.

Subcommands::

    logconcave fit DATA.csv [-o FIT.json]
    logconcave fit-censored DATA.csv [-o FIT.json] [--loglik-trace TRACE.csv]
    logconcave eval FIT.json --grid a:b:n [--what density|cdf|logdensity]
    logconcave diagnose FIT.json DATA.csv [--tol 1e-6]
    logconcave simulate --dist gumbel|normal|exponential --n N --seed S

Exit codes: 0 success, 1 diagnostic check failed, 2 bad input or usage,
3 numerical failure (non-convergence, singular Newton system).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .active_set import ActiveSetConfig, FitResult, directional_derivatives, fit
from .censored_em import EmConfig, em_fit, observations
from .errors import (
    ConditioningError,
    DegenerateDataError,
    DomainError,
    InvariantViolation,
    NonConvergenceError,
)
from .inner_solver import NewtonConfig
from .objective import WeightedData, cdf_at, cdf_nodes, diagnostics, prepare

SCHEMA_VERSION = "1"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class DataError(Exception):
    """Unreadable or malformed input; maps to exit code 2."""


# ---------------------------------------------------------------------------
# CSV input
# ---------------------------------------------------------------------------


def _parse_float(text: str, lineno: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"line {lineno}: column {column!r}: not a number: {text!r}") from None


def _is_numeric(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_columns(path, required, optional=()):
    """Read numeric columns from a comma separated file.

    A first row containing a non-numeric cell is a header and columns are
    matched by name.  Without a header the columns are taken positionally in
    the order ``required + optional``.  Blank lines are skipped.

    Returns a dict mapping column name to a float array (absent optional
    columns are omitted).
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        rows = [(i, [c.strip() for c in row]) for i, row in enumerate(csv.reader(fh), start=1)]
    rows = [(i, r) for i, r in rows if any(r)]
    if not rows:
        raise DataError(f"{path}: no data")

    names = list(required) + list(optional)
    lineno, first = rows[0]
    if not all(_is_numeric(c) for c in first):
        header = [c.lower() for c in first]
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{path}: header lacks column(s) {', '.join(missing)}")
        cols = {c: header.index(c) for c in names if c in header}
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: no data rows")
    else:
        width = len(first)
        if width < len(required):
            raise DataError(f"line {lineno}: expected at least {len(required)} columns, got {width}")
        cols = {c: k for k, c in enumerate(names) if k < width}

    out = {c: np.empty(len(rows)) for c in cols}
    for r, (lineno, row) in enumerate(rows):
        for c, k in cols.items():
            if k >= len(row) or row[k] == "":
                raise DataError(f"line {lineno}: missing value for column {c!r}")
            out[c][r] = _parse_float(row[k], lineno, c)
    return out


def read_weighted(path) -> WeightedData:
    cols = read_columns(path, ["x"], ["weight"])
    x = cols["x"]
    if not np.all(np.isfinite(x)):
        raise DataError(f"{path}: x values must be finite")
    return prepare(x, cols.get("weight"))


def read_censored(path):
    cols = read_columns(path, ["left", "right"])
    return observations(cols["left"], cols["right"])


# ---------------------------------------------------------------------------
# artifact
# ---------------------------------------------------------------------------


def _pairs(x, y):
    # + 0.0 turns -0.0 into 0.0
    return [[float(a) + 0.0, float(b) + 0.0] for a, b in zip(x, y)]


def _step_dict(step, x):
    return {
        "kind": step.kind,
        "knots": [float(x[i]) for i in step.knots],
        "objective": step.objective,
        "psi": [float(v) for v in step.psi],
        "psi_cand": None if step.psi_cand is None else [float(v) for v in step.psi_cand],
        "t": step.t,
        "released": None if step.released is None else float(x[step.released]),
    }


def fit_artifact(res: FitResult, config: dict, with_trace: bool = False) -> dict:
    data = res.data
    x = data.x
    art = {
        "schema_version": SCHEMA_VERSION,
        "kind": "fit",
        "m": int(data.m),
        "support": [float(x[0]), float(x[-1])],
        "knots": _pairs(x[res.knots], res.psi[res.knots]),
        "full_psi": _pairs(x, res.psi),
        "weights": [float(v) for v in data.p],
        "objective": res.objective,
        "n_outer_iter": int(res.n_outer_iter),
        "diagnostics": res.diagnostics.to_dict(),
        "renormalized": bool(data.renormalized),
        "config": config,
    }
    if with_trace:
        art["trace"] = {
            "checkpoints": [{"knots": [float(x[i]) for i in k], "objective": obj} for k, obj in res.trace],
            "steps": [_step_dict(s, x) for s in res.steps],
        }
    return art


def write_artifact(art: dict, path) -> None:
    # repr floats round-trip exactly and are locale independent
    text = json.dumps(art, sort_keys=True, indent=2, allow_nan=False) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def load_artifact(path) -> dict:
    try:
        art = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a fit artifact ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(art, dict) or "schema_version" not in art:
        raise DataError(f"{path}: not a fit artifact (no schema_version)")
    if art["schema_version"] != SCHEMA_VERSION:
        raise DataError(f"{path}: unsupported schema_version {art['schema_version']!r} (expected {SCHEMA_VERSION!r})")
    try:
        xs = np.array([p[0] for p in art["full_psi"]], dtype=float)
        ps = np.array([p[1] for p in art["full_psi"]], dtype=float)
    except (KeyError, TypeError, IndexError, ValueError):
        raise DataError(f"{path}: malformed full_psi") from None
    if xs.size < 2 or np.any(np.diff(xs) <= 0) or not np.all(np.isfinite(ps)):
        raise DataError(f"{path}: full_psi must have >= 2 increasing points with finite values")
    art["_x"] = xs
    art["_psi"] = ps
    return art


# ---------------------------------------------------------------------------
# evaluation helpers
# ---------------------------------------------------------------------------


def parse_grid(spec: str) -> np.ndarray:
    """``"a:b:n"`` -> ``n + 1`` equally spaced points from ``a`` to ``b``."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise DataError(f"grid must look like a:b:n, got {spec!r}")
    try:
        a, b = float(parts[0]), float(parts[1])
        n = int(parts[2])
    except ValueError:
        raise DataError(f"grid must look like a:b:n, got {spec!r}") from None
    if not (math.isfinite(a) and math.isfinite(b)) or n < 1 or b < a:
        raise DataError(f"grid needs finite a <= b and n >= 1, got {spec!r}")
    return np.linspace(a, b, n + 1)


def evaluate(x, psi, r, what: str) -> np.ndarray:
    """Log-density, density or distribution function of ``exp(psi)`` at ``r``.

    Outside ``[x[0], x[-1]]`` the density is 0, the log-density ``-inf`` and
    the distribution function 0 or the total mass.
    """
    r = np.asarray(r, dtype=float)
    inside = (r >= x[0]) & (r <= x[-1])
    if what == "cdf":
        out = np.where(r < x[0], 0.0, cdf_nodes(x, psi)[-1])
        out[inside] = cdf_at(x, psi, r[inside])
        return out
    logd = np.full(r.shape, -np.inf)
    logd[inside] = np.interp(r[inside], x, psi)
    if what == "logdensity":
        return logd
    if what == "density":
        return np.exp(logd)
    raise DataError(f"unknown quantity {what!r}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _active_set_config(args, record_steps=False) -> ActiveSetConfig:
    newton = NewtonConfig(grad_tol=args.grad_tol, max_iter=args.max_iter)
    return ActiveSetConfig(
        variant=args.variant, eps=args.eps, newton=newton, max_outer=args.max_outer, record_steps=record_steps
    )


def _config_echo(args, cfg: ActiveSetConfig) -> dict:
    return {
        "variant": cfg.variant,
        "eps": cfg.eps,
        "grad_tol": cfg.newton.grad_tol,
        "max_iter": cfg.newton.max_iter,
        "max_outer": cfg.max_outer,
    }


def cmd_fit(args) -> int:
    data = read_weighted(args.input)
    if data.renormalized:
        print("warning: weights did not sum to 1 and were renormalized", file=sys.stderr)
    cfg = _active_set_config(args, record_steps=args.trace)
    res = fit(data, cfg)
    art = fit_artifact(res, _config_echo(args, cfg), with_trace=args.trace)
    write_artifact(art, args.output)
    print(
        f"m={data.m} knots={len(res.knots)} objective={res.objective!r} outer_iterations={res.n_outer_iter}",
        file=sys.stderr,
    )
    return EXIT_OK


def _default_trace_path(output):
    if output is None or str(output) == "-":
        return Path("loglik_trace.csv")
    out = Path(output)
    return out.with_name(out.stem + ".loglik.csv")


def cmd_fit_censored(args) -> int:
    obs = read_censored(args.input)
    cfg = _active_set_config(args)
    em_cfg = EmConfig(
        loglik_tol=args.loglik_tol,
        max_em_iter=args.max_em_iter,
        grid_refinement=args.grid_refinement,
        active_set=cfg,
    )
    res = em_fit(obs, em_cfg)
    grid = res.grid
    last = res.last_fit
    knots = np.isin(grid, last.data.x[last.knots])
    config = _config_echo(args, cfg)
    config.update(loglik_tol=em_cfg.loglik_tol, max_em_iter=em_cfg.max_em_iter, grid_refinement=em_cfg.grid_refinement)
    art = {
        "schema_version": SCHEMA_VERSION,
        "kind": "fit-censored",
        "m": int(grid.size),
        "support": [float(grid[0]), float(grid[-1])],
        "knots": _pairs(grid[knots], res.psi[knots]),
        "full_psi": _pairs(grid, res.psi),
        "objective": res.loglik_trace[-1],
        "n_outer_iter": int(last.n_outer_iter),
        "diagnostics": last.diagnostics.to_dict(),
        "em": {
            "n_iter": res.n_iter,
            "converged": res.converged,
            "loglik_trace": [float(v) for v in res.loglik_trace],
            "truncated_right": res.truncated_right,
            "notes": res.notes,
        },
        "config": config,
    }
    write_artifact(art, args.output)
    trace_path = Path(args.loglik_trace) if args.loglik_trace else _default_trace_path(args.output)
    with open(trace_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "loglik"])
        for i, v in enumerate(res.loglik_trace):
            w.writerow([i, repr(float(v))])
    for note in res.notes:
        print(f"note: {note}", file=sys.stderr)
    status = "converged" if res.converged else "stopped at max_em_iter"
    print(f"m={grid.size} em_iterations={res.n_iter} ({status}) loglik={res.loglik_trace[-1]!r}", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    art = load_artifact(args.fit)
    r = parse_grid(args.grid)
    vals = evaluate(art["_x"], art["_psi"], r, args.what)
    out = sys.stdout
    if args.header:
        out.write(f"x,{args.what}\n")
    for a, v in zip(r, vals):
        out.write(f"{float(a)!r},{float(v)!r}\n")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    art = load_artifact(args.fit)
    data = read_weighted(args.input)
    x, psi = art["_x"], art["_psi"]
    if data.m != x.size or not np.array_equal(data.x, x):
        raise DataError(f"data support points ({data.m}) do not match the fit ({x.size})")
    rep = diagnostics(psi, data)
    H = directional_derivatives(psi, data) if data.m > 2 else np.zeros(0)
    knot_x = {p[0] for p in art.get("knots", [])}
    is_knot = np.array([v in knot_x for v in x[1:-1]], dtype=bool)
    tol = args.tol

    rows = [("total_mass", rep.total_mass_residual, True), ("mean", rep.mean_residual, True)]
    strict = args.all_residuals
    rows += [(f"interval_{k + 1}", v, strict) for k, v in enumerate(rep.interval_residuals)]
    rows.append(("second_moment", rep.second_moment_residual, strict))
    failed = [name for name, v, checked in rows if checked and not abs(v) <= tol]

    print("quantity,value,checked")
    for name, v, checked in rows:
        print(f"{name},{float(v)!r},{int(checked)}")
    # optimality over concave log-densities: H_j <= 0 everywhere, = 0 at knots
    for j, h in enumerate(H, start=1):
        ok = abs(h) <= tol if is_knot[j - 1] else h <= tol
        if not ok:
            failed.append(f"H_{j + 1}")
        print(f"H_{j + 1},{float(h)!r},1")
    if failed:
        print(f"FAIL: {len(failed)} check(s) exceed tol={tol:g}: {', '.join(failed[:10])}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    print(f"OK: all checked residuals within tol={tol:g}", file=sys.stderr)
    return EXIT_OK


def simulate(dist: str, n: int, seed: int) -> np.ndarray:
    """``n`` draws from a standard distribution with ``numpy.random.default_rng(seed)``."""
    rng = np.random.default_rng(seed)
    if dist == "gumbel":
        return rng.gumbel(0.0, 1.0, n)
    if dist == "normal":
        return rng.normal(0.0, 1.0, n)
    if dist == "exponential":
        return rng.exponential(1.0, n)
    raise DataError(f"unknown distribution {dist!r}")


def cmd_simulate(args) -> int:
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    out = sys.stdout
    out.write("x\n")
    for v in simulate(args.dist, args.n, args.seed):
        out.write(f"{float(v)!r}\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class UsageError(Exception):
    pass


def _add_solver_flags(p):
    p.add_argument("--variant", type=int, choices=(1, 2, 3), default=3, help="active set start-up variant")
    p.add_argument("--eps", type=float, default=1e-7, help="active set tolerance")
    p.add_argument("--grad-tol", type=float, default=1e-10, help="Newton stopping tolerance (max |gradient|)")
    p.add_argument("--max-iter", type=int, default=200, help="Newton iterations per subproblem")
    p.add_argument("--max-outer", type=int, default=None, help="outer active set iterations (default 10 m)")
    p.add_argument("-o", "--output", default=None, help="artifact path (default: standard output)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logconcave", description="Maximum likelihood estimation of log-concave densities."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit weighted data (CSV column x, optional weight)")
    p.add_argument("input")
    _add_solver_flags(p)
    p.add_argument("--trace", action="store_true", help="store every active set step in the artifact")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("fit-censored", help="fit censored data (CSV columns left,right; right may be inf)")
    p.add_argument("input")
    _add_solver_flags(p)
    p.add_argument("--loglik-tol", type=float, default=1e-8, help="stop when the log-likelihood gains less")
    p.add_argument("--max-em-iter", type=int, default=500, help="EM iterations")
    p.add_argument("--grid-refinement", type=int, default=4, help="points inserted in each grid cell")
    p.add_argument("--loglik-trace", default=None, help="per-iteration log-likelihood CSV")
    p.set_defaults(func=cmd_fit_censored)

    p = sub.add_parser("eval", help="tabulate a fitted density")
    p.add_argument("fit")
    p.add_argument("--grid", required=True, help="a:b:n, giving n+1 points")
    p.add_argument("--what", choices=("density", "cdf", "logdensity"), default="density")
    p.add_argument("--header", action="store_true", help="print a header row")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diagnose", help="check a fit against its data")
    p.add_argument("fit")
    p.add_argument("input")
    p.add_argument("--tol", type=float, default=1e-6, help="tolerance for every checked quantity")
    p.add_argument(
        "--all-residuals",
        action="store_true",
        help="also require interval and second-moment residuals within tol "
        "(these vanish only when every point is a knot)",
    )
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("simulate", help="print a random sample as CSV")
    p.add_argument("--dist", choices=("gumbel", "normal", "exponential"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, DomainError, DegenerateDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonConvergenceError, ConditioningError, InvariantViolation) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
