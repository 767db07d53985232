"""Command-line entry point: ``pmquad <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from typing import Sequence

from . import __version__
from .chords import CHORD_CSV_COLUMNS, FRAGMENT_CSV_COLUMNS, build_chordset, separating_fragments, signature_oracle
from .errors import DomainError, NumericalError
from .fragmentation import KERNELS, RESIDUAL_CSV_COLUMNS, hypothesis_residual, solve_malthus
from .harness import (
    DEFAULT_T_GRID, UNIFORM, ExperimentConfig, collect, pmq_fit, write_manifest, write_results_csv, write_timings,
)
from .martingale import TRAJECTORY_CSV_COLUMNS, limit_estimate, trajectory_rows
from .mathcore import BETA, k0_constant, profile_h
from .quadtree import Quadtree, build_fixed, extend_poisson, slice_query, write_leaves_csv
from .stats import power_fit, summarize
from .streams import derive_stream
from .svg import emit_svg

DEFAULT_SEED = 20111


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _xs(text: str) -> list:
    out = []
    for v in text.split(","):
        v = v.strip()
        if not v:
            continue
        if v.upper() == UNIFORM:
            out.append(UNIFORM)
            continue
        try:
            out.append(float(v))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"expected numbers or U, got {v!r}") from exc
    return out


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def build_parser() -> Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=None, help=f"master seed (default {DEFAULT_SEED})")
    common.add_argument("--out", default="out", help="output directory (default ./out)")
    common.add_argument("--config", default=None, help="JSON file with ExperimentConfig fields")

    p = Parser(prog="pmquad", description="Partial match queries in random quadtrees.")
    p.add_argument("--version", action="version", version=f"pmquad {__version__}")
    sub = p.add_subparsers(dest="command", metavar="subcommand", parser_class=Parser)
    sub.required = True

    s = sub.add_parser("constants", parents=[common], help="print beta, K0 and the profile h")
    s.add_argument("--x-grid", type=_floats, default=None, help="abscissae for the h table")

    s = sub.add_parser("simulate", parents=[common], help="build a quadtree and dump its leaves")
    s.add_argument("--t", type=float, default=None, help="Poisson time (default 100)")
    s.add_argument("--n", type=int, default=None, help="fixed number of points instead of --t")
    s.add_argument("--t-grid", type=_floats, default=None,
                   help="also emit t^-beta N_t(x) profiles at these times (last one sets --t)")
    s.add_argument("--x-points", type=int, default=200, help="abscissae per profile (default 200)")

    s = sub.add_parser("pmq", parents=[common], help="Monte Carlo of E[N_t(x)] with a power fit")
    s.add_argument("--t-grid", type=_floats, default=None, help="times (default 20,50,100,500,3000)")
    s.add_argument("--x-grid", type=_xs, default=None, help="abscissae, U for uniform (default 0.5)")
    s.add_argument("--x", type=_xs, default=None, help="single abscissa (same as --x-grid)")
    s.add_argument("--trials", type=int, default=None)
    s.add_argument("--workers", type=int, default=None)

    s = sub.add_parser("martingale", parents=[common], help="trajectory of M_t(x) and t^-beta N_t(x)")
    s.add_argument("--x", type=float, default=0.5)
    s.add_argument("--t", type=float, default=3000.0, help="final time")

    s = sub.add_parser("verify-h", parents=[common], help="residual sweep of the fixed-point equation")
    s.add_argument("--kernel", choices=sorted(KERNELS), default="quad")
    s.add_argument("--method", choices=["mc", "quadrature"], default=None,
                   help="default quadrature for quad, mc for chord")
    s.add_argument("--x-grid", type=_floats, default=None, help="parameters (default 0.1..0.9)")
    s.add_argument("--b", type=float, default=None, help="exponent (default beta)")
    s.add_argument("--c", type=float, default=None, help="profile exponent (default beta/2 quad, beta chord)")
    s.add_argument("--tol", type=float, default=1e-10, help="quadrature tolerance")
    s.add_argument("--samples", type=int, default=10**6, help="MC samples per point")

    s = sub.add_parser("solve-beta", parents=[common], help="solve the fixed-point equation for the exponent")
    s.add_argument("--kernel", choices=sorted(KERNELS), default="quad")
    s.add_argument("--method", choices=["mc", "quadrature"], default=None)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--x", type=float, default=0.5, help="probe parameter")
    s.add_argument("--bracket", type=_floats, default=[0.1, 1.0])
    s.add_argument("--samples", type=int, default=200_000)

    s = sub.add_parser("chords", parents=[common], help="random chords, separating fragments, oracle check")
    s.add_argument("--attempts", type=int, default=50)
    s.add_argument("--x", type=float, default=None, help="first boundary point (default random)")
    s.add_argument("--y", type=float, default=None, help="second boundary point (default random)")
    s.add_argument("--grid", type=int, default=100_000)

    s = sub.add_parser("fit", parents=[common], help="power fit of two CSV columns")
    s.add_argument("csv")
    s.add_argument("--x-col", default="t")
    s.add_argument("--y-col", default="mean")
    s.add_argument("--where", action="append", default=[], metavar="COL=VALUE", help="row filter")

    s = sub.add_parser("plot", parents=[common], help="CSV to SVG polylines")
    s.add_argument("csv")
    s.add_argument("--x-col", default="t")
    s.add_argument("--y-col", default="mean")
    s.add_argument("--group-col", default=None)
    s.add_argument("--mode", choices=["linear", "loglog"], default="linear")
    s.add_argument("--name", default="plot.svg", help="file name inside --out")
    return p


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _g(v: float) -> str:
    return format(v, ".17g")


def _load_config(args) -> dict:
    if not args.config:
        return {}
    try:
        with open(args.config) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from exc


def _seed(args, cfg: dict) -> int:
    if args.seed is not None:
        return args.seed
    return int(cfg.get("master_seed", DEFAULT_SEED))


def cmd_constants(args, out):
    beta, k0 = BETA, k0_constant()
    xs = args.x_grid or [i / 10 for i in range(11)]
    print(f"beta = {beta!r}")
    print(f"K0 = {k0!r}")
    print(f"K0*h(0.5) = {k0 * profile_h(0.5)!r}")
    print("x,h_quad,h_chord")
    rows = []
    for x in xs:
        row = [_g(x), _g(profile_h(x, beta / 2)), _g(profile_h(x, beta))]
        rows.append(row)
        print(",".join(row))
    _write_csv(os.path.join(out, "constants.csv"), ("x", "h_quad", "h_chord"), rows)
    return {"beta": beta, "K0": k0}


def cmd_simulate(args, out, seed):
    rng = derive_stream(seed, 0)
    if args.n is not None:
        if args.t_grid:
            raise UsageError("--n and --t-grid are exclusive")
        q = build_fixed(args.n, rng)
        write_leaves_csv(q, os.path.join(out, "leaves.csv"))
        print(f"points = {q.n_points}, leaves = {len(q.leaves)}")
        return {"n": args.n}
    grid = args.t_grid or [args.t if args.t is not None else 100.0]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise UsageError("--t-grid must be increasing")
    xs = [(i + 0.5) / args.x_points for i in range(args.x_points)]
    q = Quadtree()
    rows, curves = [], {}
    for t in grid:
        extend_poisson(q, t, rng)
        if args.t_grid:
            pts = []
            for x in xs:
                n = slice_query(q, x).n
                scaled = n * t ** -BETA if t > 0 else math.nan
                rows.append([_g(t), _g(x), str(n), _g(scaled)])
                pts.append((x, scaled))
            curves[f"t={t:g}"] = pts
    write_leaves_csv(q, os.path.join(out, "leaves.csv"))
    if args.t_grid:
        _write_csv(os.path.join(out, "profile.csv"), ("t", "x", "N", "scaledN"), rows)
        emit_svg(curves, "linear", os.path.join(out, "profile.svg"),
                 title="t^-beta N_t(x)", xlabel="x", ylabel="t^-beta N_t(x)")
    print(f"t = {q.clock:g}, points = {q.n_points}, leaves = {len(q.leaves)}")
    return {"t_grid": grid}


def cmd_pmq(args, out, seed, cfgfile):
    d = {**ExperimentConfig().to_dict(), "t_grid": list(DEFAULT_T_GRID), **cfgfile, "kind": "pmq", "master_seed": seed}
    if args.t_grid:
        d["t_grid"] = args.t_grid
    if args.x_grid:
        d["x_list"] = args.x_grid
    if args.x:
        d["x_list"] = args.x
    if args.trials is not None:
        d["trials"] = args.trials
    if args.workers is not None:
        d["workers"] = args.workers
    try:
        cfg = ExperimentConfig.from_dict(d).validate()
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    cells, timings = collect(cfg)
    summaries = [summarize(c.experiment, c.t, c.x, c.values.tolist()) for c in cells]
    write_results_csv(summaries, os.path.join(out, "results.csv"))
    write_timings(os.path.join(out, "timings.json"), timings, {"workers": cfg.workers})
    fits, curves = {}, {}
    k0 = k0_constant()
    for x in cfg.x_list:
        pts = [(s.t, s.mean) for s in summaries if s.x == x and s.t > 0]
        curves[f"x={x}"] = pts
        if len(pts) >= 3:
            f = pmq_fit(summaries, x, cfg.fit_window)
            fits[str(x)] = {"exponent": f.exponent, "amplitude": f.amplitude, "r2": f.r2}
            line = f"x={x}: exponent={f.exponent:.6f} amplitude={f.amplitude:.6f} r2={f.r2:.6f}"
            if x != UNIFORM:
                last = max((s for s in summaries if s.x == x and s.t > 0), key=lambda s: s.t)
                line += f" scaled_mean(t={last.t:g})={last.mean * last.t ** -BETA:.6f} K0*h={k0 * profile_h(x):.6f}"
            print(line)
    if any(len(p) > 0 for p in curves.values()):
        emit_svg(curves, "loglog", os.path.join(out, "pmq.svg"),
                 title="E[N_t(x)]", xlabel="t", ylabel="mean N_t(x)")
    resolved = cfg.to_dict()
    del resolved["workers"]  # execution detail, recorded in timings.json
    return {"config": resolved, "fits": fits}


def cmd_martingale(args, out, seed):
    if not 0.0 <= args.x <= 1.0 or not args.t > 0:
        raise UsageError("need 0 <= x <= 1 and t > 0")
    value, series = limit_estimate(args.x, args.t, derive_stream(seed, 0))
    _write_csv(os.path.join(out, "trajectory.csv"), TRAJECTORY_CSV_COLUMNS, trajectory_rows(series))
    pos = [s for s in series if s.t > 0]
    emit_svg({"M_t(x)": [(s.t, s.value) for s in pos],
              "K0^-1 t^-beta N_t(x)": [(s.t, s.scaled_n / k0_constant()) for s in pos]},
             "linear", os.path.join(out, "trajectory.svg"), title=f"x = {args.x:g}", xlabel="t")
    print(f"M_{args.t:g}({args.x:g}) = {value!r}  N = {series[-1].n}  events = {len(series) - 1}")
    return {"x": args.x, "t": args.t, "value": value}


def cmd_verify_h(args, out, seed):
    k = KERNELS[args.kernel]
    method = args.method or ("quadrature" if args.kernel == "quad" else "mc")
    b = BETA if args.b is None else args.b
    c = args.c if args.c is not None else (b / 2 if args.kernel == "quad" else b)
    xs = args.x_grid or [i / 10 for i in range(1, 10)]
    rows = []
    for i, x in enumerate(xs):
        if method == "mc":
            res, se = hypothesis_residual(k, b, c, x, "mc", samples=args.samples, rng=derive_stream(seed, i))
        else:
            res, se = hypothesis_residual(k, b, c, x, "quadrature", tol=args.tol), 0.0
        rows.append([k.name, _g(b), _g(c), _g(x), method, _g(res), _g(se)])
        print(f"{k.name} x={x:g} residual={res:.3e} stderr={se:.3e}")
    _write_csv(os.path.join(out, "residuals.csv"), RESIDUAL_CSV_COLUMNS, rows)
    return {"kernel": k.name, "method": method, "b": b, "c": c}


def cmd_solve_beta(args, out, seed):
    k = KERNELS[args.kernel]
    method = args.method or ("quadrature" if args.kernel == "quad" else "mc")
    if len(args.bracket) != 2:
        raise UsageError("--bracket takes two numbers")
    if args.kernel == "quad":
        def c_of_b(b):
            return b / 2
    else:
        def c_of_b(b):
            return b
    root = solve_malthus(k, c_of_b, args.x, tuple(args.bracket), args.tol, method,
                         samples=args.samples, rng=derive_stream(seed, 0))
    print(f"beta({k.name}, {method}) = {root!r}")
    print(f"closed form = {BETA!r}  difference = {root - BETA:.3e}")
    return {"kernel": k.name, "method": method, "root": root}


def cmd_chords(args, out, seed):
    rng = derive_stream(seed, 0)
    s = build_chordset(args.attempts, rng)
    x = rng.random() if args.x is None else args.x % 1.0
    y = rng.random() if args.y is None else args.y % 1.0
    frags = separating_fragments(s, x, y)
    oracle = signature_oracle(s, x, y, args.grid)
    _write_csv(os.path.join(out, "chords.csv"), CHORD_CSV_COLUMNS,
               [[_g(c.a), _g(c.b), str(i)] for c, i in zip(s.chords, s.accepted_at)])
    _write_csv(os.path.join(out, "fragments.csv"), FRAGMENT_CSV_COLUMNS,
               [[str(i), _g(f.mass), _g(f.param)] for i, f in enumerate(frags)])
    dev = math.inf
    if len(oracle) == len(frags):
        dev = max(abs(f.mass - o[0]) for f, o in zip(frags, oracle))
    ok = dev <= 5.0 / args.grid
    print(f"chords kept = {len(s.chords)} of {s.attempts}; fragments = {len(frags)}; "
          f"max oracle deviation = {dev:.3e} ({'ok' if ok else 'MISMATCH'})")
    if not ok:
        raise NumericalError("separating fragments disagree with the brute-force oracle")
    return {"attempts": args.attempts, "x": x, "y": y, "kept": len(s.chords), "max_deviation": dev}


def _read_rows(path, where):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    for cond in where:
        if "=" not in cond:
            raise UsageError(f"bad filter {cond!r}")
        col, val = cond.split("=", 1)
        rows = [r for r in rows if r.get(col) == val]
    return rows


def _column(rows, col):
    try:
        return [float(r[col]) for r in rows]
    except KeyError as exc:
        raise UsageError(f"missing column {col!r}") from exc
    except ValueError as exc:
        raise UsageError(f"non-numeric value in column {col!r}") from exc


def cmd_fit(args, out):
    rows = _read_rows(args.csv, args.where)
    pts = list(zip(_column(rows, args.x_col), _column(rows, args.y_col)))
    f = power_fit(pts)
    print(f"exponent = {f.exponent!r}")
    print(f"amplitude = {f.amplitude!r}")
    print(f"r2 = {f.r2!r}")
    return {"csv": args.csv, "exponent": f.exponent, "log_amplitude": f.log_amplitude, "r2": f.r2}


def cmd_plot(args, out):
    rows = _read_rows(args.csv, [])
    groups: dict[str, list] = {}
    for r in rows:
        key = r.get(args.group_col, "") if args.group_col else args.y_col
        try:
            groups.setdefault(key, []).append((float(r[args.x_col]), float(r[args.y_col])))
        except KeyError as exc:
            raise UsageError(f"missing column {exc}") from exc
    path = os.path.join(out, args.name)
    emit_svg(groups, args.mode, path, xlabel=args.x_col, ylabel=args.y_col)
    print(path)
    return {"csv": args.csv, "mode": args.mode}


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfgfile = _load_config(args)
        seed = _seed(args, cfgfile)
        os.makedirs(args.out, exist_ok=True)
        cmd = args.command
        if cmd == "constants":
            info = cmd_constants(args, args.out)
        elif cmd == "simulate":
            info = cmd_simulate(args, args.out, seed)
        elif cmd == "pmq":
            info = cmd_pmq(args, args.out, seed, cfgfile)
        elif cmd == "martingale":
            info = cmd_martingale(args, args.out, seed)
        elif cmd == "verify-h":
            info = cmd_verify_h(args, args.out, seed)
        elif cmd == "solve-beta":
            info = cmd_solve_beta(args, args.out, seed)
        elif cmd == "chords":
            info = cmd_chords(args, args.out, seed)
        elif cmd == "fit":
            info = cmd_fit(args, args.out)
        else:
            info = cmd_plot(args, args.out)
        # output location and worker count do not affect results; keeping them
        # out makes manifests comparable across runs
        flags = {k: v for k, v in vars(args).items() if k not in ("command", "out", "workers")}
        write_manifest(os.path.join(args.out, "manifest.json"), cmd, flags, seed, {"result": info})
    except UsageError as exc:
        print(f"pmquad: error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, DomainError) as exc:
        print(f"pmquad: numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())
