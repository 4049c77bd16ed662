"""Command-line front end. Every command writes a CSV table.

Exit codes: 0 success, 1 self-test failure, 2 I/O, configuration or input error.
The default seed may be set with the ``COHERENT_LEARNING_SEED`` environment
variable; flags override values read from ``--config``.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import collective as col
from . import eand
from . import selftest
from . import twopoint as tp
from .errors import CoherentLearningError
from .localmodel import LocalModel

SEED_ENV = "COHERENT_LEARNING_SEED"


class ConfigError(Exception):
    pass


# --------------------------------------------------------------------------
# row producers (module-level so worker processes can pickle them)
# --------------------------------------------------------------------------

def _risk_row(a0):
    p = eand.risk_curve_point(a0)
    return [a0, p.r_opt, p.r_eand, p.ratio]


def _squeeze_row(a0):
    return [a0, eand.optimal_squeezing(a0)]


def _twopoint_row(a0, n_surrogate):
    c = tp.optimal_c()
    p, q = tp.p_plus_minus(c)
    return [a0, c, p, q, tp.two_point_local_excess_risk(a0, c),
            tp.two_point_local_excess_risk(a0, 1.0),
            tp.two_point_collective_excess_risk(a0, n_surrogate)]


def _collective_row(args):
    a0, mu, n = args
    pe = col.pe_opt_finite(LocalModel(a0, mu, n))
    asym = col.pe_opt_asymptotic(a0, mu, n)
    return [n, pe, asym, n * (pe - asym)]


def _eand_row(args):
    a0, mu, n, r, order = args
    s = eand.HeterodyneSettings(r)
    pe = eand.pe_eand_finite(LocalModel(a0, mu, n), s, outer_order=order, inner_order=order)
    asym = eand.pe_eand_asymptotic(a0, mu, n, s)
    return [n, pe, asym, n * (pe - asym)]


def _map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _grid(args):
    if args.steps < 1:
        raise ConfigError("--steps must be at least 1")
    if args.steps == 1:
        return [args.alpha0_min]
    return [float(x) for x in np.linspace(args.alpha0_min, args.alpha0_max, args.steps)]


def _ladder(args):
    if args.steps < 1:
        raise ConfigError("--steps must be at least 1")
    return [int(args.n * args.ladder_factor**k) for k in range(args.steps)]


def _resolve_r(args):
    if str(args.r).lower() in ("opt", "optimal"):
        return eand.optimal_squeezing(args.alpha0)
    return float(args.r)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_risk_curve(args):
    grid = _grid(args)
    if min(grid) <= 0:
        raise ConfigError("risk curves need alpha0 > 0")
    return ["alpha0", "r_opt_risk", "r_eand_risk", "ratio"], _map(_risk_row, grid, args.workers)


def cmd_squeezing(args):
    grid = _grid(args)
    if min(grid) <= 0:
        raise ConfigError("squeezing needs alpha0 > 0")
    return ["alpha0", "r_star"], _map(_squeeze_row, grid, args.workers)


def cmd_finite_n(args):
    items = [(args.alpha0, args.mu, n) for n in _ladder(args)]
    return (["n", "pe_finite", "pe_asymptotic", "n_times_residual"],
            _map(_collective_row, items, args.workers))


def cmd_eand_finite_n(args):
    r = _resolve_r(args)
    items = [(args.alpha0, args.mu, n, r, args.quad_order) for n in _ladder(args)]
    return (["n", "pe_finite", "pe_asymptotic", "n_times_residual"],
            _map(_eand_row, items, args.workers))


def cmd_montecarlo(args):
    r = _resolve_r(args)
    model = LocalModel(args.alpha0, args.mu, args.n)
    s = eand.HeterodyneSettings(r)
    est = eand.montecarlo_eand(model, s, args.trials, args.seed, receiver=args.receiver,
                               rao_blackwell=not args.raw, workers=args.workers)
    ref = eand.pe_eand_finite(model, s, outer_order=args.quad_order,
                              inner_order=args.quad_order, receiver=args.receiver)
    z = (est.mean - ref) / est.std_error if est.std_error > 0 else 0.0
    header = ["alpha0", "mu", "n", "r", "trials", "seed", "mc_mean", "mc_std_error",
              "pe_quadrature", "z_score"]
    return header, [[args.alpha0, args.mu, args.n, r, args.trials, args.seed, est.mean,
                     est.std_error, ref, z]]


def cmd_twopoint(args):
    grid = _grid(args)
    if min(grid) <= 0:
        raise ConfigError("two-point model needs alpha0 > 0")
    rows = [_twopoint_row(a0, args.n) for a0 in grid]
    header = ["alpha0", "c_star", "p_plus", "p_minus", "local_risk_cstar",
              "local_risk_c1", "collective_risk"]
    return header, rows


COMMANDS = {
    "risk-curve": (cmd_risk_curve, dict(alpha0_min=0.3, alpha0_max=3.0, steps=28)),
    "squeezing": (cmd_squeezing, dict(alpha0_min=0.1, alpha0_max=6.0, steps=60)),
    "finite-n": (cmd_finite_n, dict(n=1000, steps=3, ladder_factor=4, mu=1.0)),
    "eand-finite-n": (cmd_eand_finite_n, dict(n=1000, steps=3, ladder_factor=4, mu=1.0)),
    "montecarlo": (cmd_montecarlo, dict(n=400, mu=1.0, r="opt", trials=100_000)),
    "twopoint": (cmd_twopoint, dict(alpha0_min=0.5, alpha0_max=2.0, steps=4, n=10_000)),
    "selftest": (None, {}),
}


# --------------------------------------------------------------------------
# argument handling
# --------------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return "%.12g" % float(x)


def write_csv(header, rows, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    text = buf.getvalue()
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    with open(out, "w", newline="\n", encoding="ascii") as fh:
        fh.write(text)


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected key=value")
        key, val = (x.strip() for x in line.split("=", 1))
        values[key.replace("-", "_")] = val
    return values


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc


def build_parser(seed_default=0):
    parser = argparse.ArgumentParser(
        prog="coherent-learning",
        description="Discrimination of coherent states with uncertain amplitude.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, defaults) in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--alpha0-min", type=float, default=0.3)
        p.add_argument("--alpha0-max", type=float, default=3.0)
        p.add_argument("--steps", type=int, default=28)
        p.add_argument("--alpha0", type=float, default=1.0, help="single amplitude")
        p.add_argument("--mu", type=float, default=16.0)
        p.add_argument("--n", type=int, default=1000)
        p.add_argument("--ladder-factor", type=int, default=2)
        p.add_argument("--r", default="0", help="squeezing, or 'opt'")
        p.add_argument("--quad-order", type=int, default=30)
        p.add_argument("--trials", type=int, default=100_000)
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--receiver", choices=["posterior", "plugin"], default="posterior")
        p.add_argument("--raw", action="store_true", help="sample binary outcomes")
        p.add_argument("--out", default="-")
        p.add_argument("--workers", type=int, default=eand.default_workers())
        p.add_argument("--config", default=None)
        p.set_defaults(**defaults)
    return parser


def parse_args(argv):
    parser = build_parser(_default_seed())
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        known = set(vars(args))
        bad = sorted(set(cfg) - known - {"config"})
        if bad:
            raise ConfigError(f"unknown config keys: {', '.join(bad)}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    if args.workers < 1:
        raise ConfigError("--workers must be positive")
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.command == "selftest":
        return 0 if selftest.run() else 1
    fn = COMMANDS[args.command][0]
    try:
        header, rows = fn(args)
        write_csv(header, rows, args.out)
    except ConfigError as exc:
        print(f"{args.command}: config error: {exc}", file=sys.stderr)
        return 2
    except CoherentLearningError as exc:
        print(f"{args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"{args.command}: I/O error: {exc}", file=sys.stderr)
        return 2
    if any(not all(math.isfinite(float(x)) for x in row) for row in rows):
        print(f"{args.command}: non-finite values in output", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
