"""Command-line front end.

Exit codes: 0 the property holds (or the command succeeded), 1 the property
fails, 2 input or usage error, 3 numerical failure.  Every report starts with
a ``key=value`` block; free text follows after a blank line.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys as _sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import apps, config
from . import dissipativity as dis
from . import expr as ex
from . import matfun as mf
from . import ph as phm
from . import popov as pop
from . import transforms as tr
from .errors import (InputError, KernelInclusionViolated, LtvError, NotAKypSolution,
                     NumericalError)
from .ltv import LtvSystem, reachability_gramian, simulate, supply

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".9g")
    if isinstance(v, (complex, np.complexfloating)):
        z = complex(v)
        if z.imag == 0:
            return format(z.real, ".9g")
        return f"{z.real:.9g}{z.imag:+.9g}i"
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(fmt(x) for x in np.ravel(np.asarray(v, dtype=object)))
    if v is None:
        return "none"
    return str(v)


class Report:
    def __init__(self, command: str):
        self.items: list[tuple[str, str]] = [("command", command)]
        self.text: list[str] = []

    def kv(self, key: str, value) -> None:
        self.items.append((key, fmt(value)))

    def line(self, s: str) -> None:
        self.text.append(s)

    def render(self) -> str:
        out = [f"{k}={v}" for k, v in self.items]
        if self.text:
            out.append("")
            out.extend(self.text)
        return "\n".join(out) + "\n"


# -- context -----------------------------------------------------------------------------

@dataclass
class Context:
    sys: LtvSystem
    Q: mf.MatrixFunction | None
    ph: phm.PhRepresentation | None
    grid: np.ndarray
    settings: config.Settings
    source: str


def _matrix_arg(text: str, domain, what: str) -> mf.ExprMatrix:
    try:
        cells = config.split_matrix(text)
    except ValueError as exc:
        raise config.ConfigError(f"{what}: {exc}") from None
    rows = []
    for i, row in enumerate(cells):
        r = []
        for j, c in enumerate(row):
            try:
                r.append(ex.parse(c))
            except LtvError as exc:
                raise config.ConfigError(f"{what}: cannot parse {c!r}: {exc}",
                                         cell=f"{what}[{i}][{j}]") from None
        rows.append(r)
    return mf.ExprMatrix(rows, domain)


def _grid_from(args, settings, domain) -> np.ndarray | None:
    if getattr(args, "grid", None):
        try:
            return config.parse_grid(args.grid)
        except ValueError as exc:
            raise config.ConfigError(str(exc)) from None
    if settings.grid is not None:
        return settings.grid
    if math.isfinite(domain[0]) and math.isfinite(domain[1]):
        return np.linspace(domain[0], domain[1], 101)
    return None


def load_context(args) -> Context:
    cfg = None
    Q = ph = None
    if args.preset and args.system:
        raise config.ConfigError("use either --system or --preset, not both")
    if args.preset == "rocket":
        dom = _preset_domain(args, (0.0, 1.0))
        model = apps.rocket_system(apps.RocketParams(ex.parse(args.mass), dom))
        sys, Q, ph, source = model.sys, model.Q, model.ph, "preset:rocket"
    elif args.preset == "heating":
        dom = _preset_domain(args, (0.0, 10.0))
        model = apps.heating_system(apps.HeatingParams(
            ex.parse(args.qp), ex.parse(args.qd), args.vs, args.vh0, dom))
        sys, Q, ph, source = model.sys, model.Q, model.ph, "preset:heating"
    elif args.system:
        cfg = config.ConfigFile.read(args.system)
        sys = config.system_from_config(cfg)
        Q = config.storage_from_config(cfg, sys.domain)
        source = str(args.system)
    else:
        raise config.ConfigError("a system is required: --system FILE or --preset NAME")
    if getattr(args, "Q", None):
        Q = _matrix_arg(args.Q, sys.domain, "Q")
    settings = config.settings_from_config(cfg)
    for k in ("kyp_tol", "rtol"):
        v = getattr(args, k, None)
        if v is not None:
            if not v > 0:
                raise config.ConfigError(f"--{k.replace('_', '-')} must be positive")
            setattr(settings, k, v)
    grid = _grid_from(args, settings, sys.domain)
    if grid is None:
        raise config.ConfigError("no analysis grid: pass --grid start:stop:count")
    sys.check_interval(grid[0], grid[-1])
    return Context(sys, Q, ph, grid, settings, source)


def _preset_domain(args, default):
    if args.domain:
        return config.parse_domain(args.domain)
    if args.grid:
        g = config.parse_grid(args.grid)
        return (float(g[0]), float(g[-1]))
    return default


def _need_Q(ctx: Context) -> dis.StorageCandidate:
    if ctx.Q is None:
        raise config.ConfigError("a storage matrix is required: [storage] Q or --Q")
    return dis.StorageCandidate(ctx.Q)


def _input(args, ctx: Context, default: str | None = None):
    m = ctx.sys.m
    if getattr(args, "input", None):
        text = args.input.strip()
        if text.startswith("["):
            U = _matrix_arg(text, ctx.sys.domain, "input")
        else:
            parts = [p for p in text.split(";") if p.strip()]
            U = _matrix_arg("[" + ",".join(f'["{p.strip()}"]' for p in parts) + "]",
                            ctx.sys.domain, "input")
        if U.shape == (1, m) and m != 1:
            U = U.H
        if U.shape != (m, 1):
            raise config.ConfigError(f"input must have {m} entries, got shape {U.shape}")
        return U
    if default is None:
        return mf.zeros(m, 1, ctx.sys.domain)
    return mf.matrix([[default]] * m, ctx.sys.domain)


def _x0(args, n: int) -> np.ndarray:
    if getattr(args, "x0", None):
        x = config.parse_vector(args.x0)
        if x.size != n:
            raise config.ConfigError(f"x0 needs {n} entries, got {x.size}")
        return x
    return np.zeros(n, dtype=complex)


def _interval(args, ctx: Context) -> tuple[float, float]:
    if getattr(args, "interval", None):
        try:
            return config.parse_interval(args.interval)
        except ValueError as exc:
            raise config.ConfigError(str(exc)) from None
    return float(ctx.grid[0]), float(ctx.grid[-1])


def _outdir(args) -> Path | None:
    if not getattr(args, "out", None):
        return None
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _header(rep: Report, ctx: Context) -> None:
    rep.kv("source", ctx.source)
    rep.kv("n", ctx.sys.n)
    rep.kv("m", ctx.sys.m)
    rep.kv("grid_start", ctx.grid[0])
    rep.kv("grid_stop", ctx.grid[-1])
    rep.kv("grid_nodes", ctx.grid.size)


# -- commands -----------------------------------------------------------------------------

def cmd_check_kyp(args, ctx: Context, rep: Report) -> int:
    Q = _need_Q(ctx)
    r = dis.kyp_check(ctx.sys, Q, ctx.grid, ctx.settings.kyp_tol)
    rep.kv("holds", r.holds)
    rep.kv("tol", ctx.settings.kyp_tol)
    rep.kv("min_eig", float(r.kyp_min_eig.min()))
    rep.kv("worst_t", r.worst_node[0])
    rep.kv("worst_min_eig", r.worst_node[1])
    rep.kv("skipped_nodes", len(r.skipped))
    rep.line("t min_eig")
    for t, v in zip(r.grid, r.kyp_min_eig):
        rep.line(f"{fmt(t)} {fmt(v)}")
    out = _outdir(args)
    if out:
        r.to_csv(out / "kyp.csv")
    return EXIT_OK if r.holds else EXIT_FAIL


def cmd_check_integral_kyp(args, ctx: Context, rep: Report) -> int:
    Q = _need_Q(ctx)
    g = ctx.grid
    intervals = [(g[0], g[-1])] + list(zip(g[:-1], g[1:]))
    worst, worst_iv, ok = math.inf, None, True
    tol = ctx.settings.kyp_tol
    for a, b in intervals:
        r = dis.integral_kyp_check(ctx.sys, Q, a, b, args.gauss, tol)
        ok &= r.holds
        if r.min_eig < worst:
            worst, worst_iv = r.min_eig, (a, b)
    rep.kv("holds", ok)
    rep.kv("intervals", len(intervals))
    rep.kv("min_eig", worst)
    rep.kv("worst_interval", worst_iv)
    rep.line("checked the whole grid span and every interval between consecutive nodes")
    return EXIT_OK if ok else EXIT_FAIL


def _simulate(args, ctx: Context):
    u = _input(args, ctx)
    x0 = _x0(args, ctx.sys.n)
    return simulate(ctx.sys, ctx.grid[0], x0, u, ctx.grid, ctx.settings.rtol)


def cmd_simulate(args, ctx: Context, rep: Report) -> int:
    traj = _simulate(args, ctx)
    rep.kv("final_t", traj.grid[-1])
    rep.kv("final_x", traj.x[-1])
    rep.kv("final_y", traj.y[-1])
    rep.kv("supply", supply(traj, traj.grid[0], traj.grid[-1]))
    out = _outdir(args)
    if out:
        traj.to_csv(out / "trajectory.csv")
        rep.line(f"wrote {out / 'trajectory.csv'}")
    return EXIT_OK


def cmd_supply(args, ctx: Context, rep: Report) -> int:
    traj = _simulate(args, ctx)
    a, b = _interval(args, ctx)
    rep.kv("t_a", a)
    rep.kv("t_b", b)
    rep.kv("supply", supply(traj, a, b))
    out = _outdir(args)
    if out:
        traj.to_csv(out / "trajectory.csv")
    return EXIT_OK


def cmd_popov(args, ctx: Context, rep: Report) -> int:
    a, b = _interval(args, ctx)
    gram = pop.popov_gram(ctx.sys, a, b, args.nodes, ctx.settings.rtol)
    r = pop.nonnegative_supply_check(gram, args.tol)
    rep.kv("nn", r.nn)
    rep.kv("t_a", a)
    rep.kv("t_b", b)
    rep.kv("N", args.nodes)
    rep.kv("min_eig", r.min_eig)
    rep.kv("threshold", r.threshold)
    rep.kv("feedthrough_witness_t", None if r.witness is None else r.witness[0])
    rep.kv("feedthrough_witness_min_eig", None if r.witness is None else r.witness[1])
    if r.witness is not None:
        rep.line(f"D+D^H has eigenvalue {fmt(r.witness[1])} < 0 at t={fmt(r.witness[0])}: "
                 "a system with nonnegative supply needs D+D^H >= 0 everywhere")
    out = _outdir(args)
    if out:
        r.eigs_to_csv(out / "popov_eigs.csv")
        gram.dump(out / "popov_gram.txt")
    return EXIT_OK if r.nn else EXIT_FAIL


def cmd_canonical_ph(args, ctx: Context, rep: Report) -> int:
    Q = _need_Q(ctx)
    try:
        c = phm.canonical_ph(ctx.sys, Q, ctx.grid, tol=ctx.settings.kyp_tol)
    except (NotAKypSolution, KernelInclusionViolated) as exc:
        rep.kv("constructed", False)
        rep.kv("reason", type(exc).__name__)
        rep.line(str(exc))
        return EXIT_FAIL
    rep.kv("constructed", True)
    rep.kv("rank", c.r)
    res = c.ph.invariant_residuals(ctx.grid)
    for name, key in (("J skew-Hermitian", "res_J"), ("N skew-Hermitian", "res_N"),
                      ("Q PSD", "res_Q_psd"), ("W PSD", "res_W_psd"),
                      ("QK + K^H Q = Q'", "res_lyapunov")):
        rep.kv(key, res[name][1])
    back = phm.assemble_system(c.in_original_coordinates())
    err = max(float(np.abs(X(t) - Y(t)).max()) for t in ctx.grid
              for X, Y in zip(back.coefficients(), ctx.sys.coefficients()))
    rep.kv("reassembly_error", err)
    rep.line("coefficients are given in the coordinates x_tilde = U^H x")
    out = _outdir(args)
    if out:
        U = config.format_matrix(config.entries_or_samples(c.U, ctx.grid))
        config.write_ph(out / "ph.cfg", c.ph, ctx.grid, {"rank": c.r, "U": U})
    return EXIT_OK


def cmd_available_storage(args, ctx: Context, rep: Report) -> int:
    x = config.parse_vector(args.state)
    if x.size != ctx.sys.n:
        raise config.ConfigError(f"--state needs {ctx.sys.n} entries")
    h = args.horizon
    cont = dis.available_storage_continuation(ctx.sys, args.at, x, [h / 4, h / 2, h],
                                              ctx.settings.rtol)
    rep.kv("available_storage", cont.values[-1])
    rep.kv("t", args.at)
    rep.kv("horizon", h)
    rep.kv("q_change_last_doubling", cont.q_changes[-1])
    rep.line("horizon value q_change")
    for hh, v, c in zip(cont.horizons, cont.values, cont.q_changes):
        rep.line(f"{fmt(hh)} {fmt(v)} {fmt(c)}")
    return EXIT_OK


def cmd_power_balance(args, ctx: Context, rep: Report) -> int:
    ph = ctx.ph
    if ph is None:
        Q = _need_Q(ctx)
        ph = phm.canonical_ph(ctx.sys, Q, ctx.grid, tol=ctx.settings.kyp_tol
                              ).in_original_coordinates()
    u = _input(args, ctx, default="1")
    x0 = _x0(args, ctx.sys.n) if args.x0 else np.ones(ctx.sys.n, dtype=complex)
    sys = phm.assemble_system(ph)
    traj = simulate(sys, ctx.grid[0], x0, u, ctx.grid, ctx.settings.rtol)
    r = phm.power_balance_residual(ph, traj)
    ok = r.max_residual <= args.tol
    rep.kv("holds", ok)
    rep.kv("max_residual", r.max_residual)
    rep.kv("tol", args.tol)
    rep.kv("dissipation_integral", r.dissipation_integral)
    out = _outdir(args)
    if out:
        traj.to_csv(out / "trajectory.csv")
    return EXIT_OK if ok else EXIT_FAIL


def _transform_spec(args, ctx: Context):
    kind = args.kind
    if kind == "state":
        if not args.Z:
            raise config.ConfigError("--Z is required for a state transformation")
        return kind, {"Z": _matrix_arg(args.Z, ctx.sys.domain, "Z")}
    if kind == "io":
        if not args.V:
            raise config.ConfigError("--V is required for an input/output transformation")
        return kind, {"V": _matrix_arg(args.V, ctx.sys.domain, "V")}
    if not args.theta or not args.new_domain:
        raise config.ConfigError("--theta and --new-domain are required for a time map")
    return kind, {"theta": ex.parse(args.theta),
                  "new_domain": config.parse_interval(args.new_domain)}


def cmd_transform(args, ctx: Context, rep: Report) -> int:
    kind, p = _transform_spec(args, ctx)
    rep.kv("kind", kind)
    if kind == "state":
        smin = tr.check_invertible(p["Z"], ctx.grid)
        new = tr.state_transform(ctx.sys, p["Z"])
        rep.kv("min_singular_value", smin)
        grid = ctx.grid
    elif kind == "io":
        smin = tr.check_invertible(p["V"], ctx.grid)
        new = tr.io_transform(ctx.sys, p["V"])
        rep.kv("min_singular_value", smin)
        grid = ctx.grid
    else:
        lo, hi = p["new_domain"]
        grid = np.linspace(lo, hi, ctx.grid.size)
        new = tr.time_transform(ctx.sys, p["theta"], (lo, hi), grid)
        rate = ex.differentiate(p["theta"])
        rep.kv("min_rate", min(rate(t).real for t in grid))
    rep.kv("domain", new.domain)
    rep.line("transformation validity was checked on the grid nodes only")
    out = _outdir(args)
    if out:
        config.write_system(out / "system.cfg", new, grid)
        rep.line(f"wrote {out / 'system.cfg'}")
    else:
        for k, M in zip("ABCD", new.coefficients()):
            rep.line(f"{k} = {config.format_matrix(config.entries_or_samples(M, grid))}")
    return EXIT_OK


def cmd_verify_invariance(args, ctx: Context, rep: Report) -> int:
    Q = _need_Q(ctx)
    kind, p = _transform_spec(args, ctx)
    grid = ctx.grid
    if kind == "time":
        grid = np.linspace(*p.pop("new_domain"), ctx.grid.size)
    r = tr.verify_invariance(ctx.sys, Q, kind, grid, ph=ctx.ph,
                             kyp_tol=ctx.settings.kyp_tol, rtol=ctx.settings.rtol, **p)
    rep.kv("kind", kind)
    rep.kv("passed", r.passed)
    for c in r.checks:
        key = c.name.replace(" ", "_")
        rep.kv(f"{key}", c.passed)
        rep.kv(f"{key}_residual", c.residual)
        if c.detail:
            rep.line(f"{c.name}: {c.detail}")
    rep.line(r.note)
    return EXIT_OK if r.passed else EXIT_FAIL


def cmd_gramian(args, ctx: Context, rep: Report) -> int:
    a, b = _interval(args, ctx)
    r = reachability_gramian(ctx.sys, a, b, nodes=ctx.grid.size, tol=args.tol,
                             rtol=ctx.settings.rtol)
    rep.kv("reachable", r.reachable)
    rep.kv("min_eig", r.min_eig)
    rep.kv("tol", args.tol)
    rep.kv("t_a", a)
    rep.kv("t_b", b)
    rep.line("W =")
    for row in r.W:
        rep.line(" ".join(fmt(z) for z in row))
    return EXIT_OK if r.reachable else EXIT_FAIL


COMMANDS: dict[str, Callable] = {
    "check-kyp": cmd_check_kyp,
    "check-integral-kyp": cmd_check_integral_kyp,
    "simulate": cmd_simulate,
    "supply": cmd_supply,
    "popov": cmd_popov,
    "canonical-ph": cmd_canonical_ph,
    "available-storage": cmd_available_storage,
    "power-balance": cmd_power_balance,
    "transform": cmd_transform,
    "verify-invariance": cmd_verify_invariance,
    "gramian": cmd_gramian,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_argument_group("system")
    src.add_argument("--system", help="INI file with [system] (and optionally [storage], "
                                      "[grid], [tolerances])")
    src.add_argument("--preset", choices=("rocket", "heating"))
    src.add_argument("--mass", default="2-t", help="rocket mass m(t)")
    src.add_argument("--qp", default="1", help="heating production flow q_p(t)")
    src.add_argument("--qd", default="1", help="heating demand flow q_d(t)")
    src.add_argument("--vs", type=float, default=2.0, help="heating total volume")
    src.add_argument("--vh0", type=float, default=1.0, help="heating initial hot volume")
    src.add_argument("--domain", help="preset domain lo:hi")
    src.add_argument("--Q", help="storage matrix, e.g. '[[\"1\"]]'")
    src.add_argument("--grid", help="analysis grid start:stop:count")
    src.add_argument("--kyp-tol", type=float, dest="kyp_tol")
    src.add_argument("--rtol", type=float)
    src.add_argument("--out", help="directory for CSV/config artifacts")
    src.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ltvpass", description="Passivity analysis of "
                                "linear time-varying systems.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("check-kyp", parents=[common], help="nodewise KYP inequality")
    s = sub.add_parser("check-integral-kyp", parents=[common], help="integral KYP inequality")
    s.add_argument("--gauss", type=int, default=20, help="Gauss points per piece")
    for name, hlp in (("simulate", "trajectory from x0 under an input"),
                      ("supply", "supply integral along a trajectory")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--x0")
        s.add_argument("--input", help="u(t): 'e1; e2' or a bracketed column")
        if name == "supply":
            s.add_argument("--interval", help="a:b (grid nodes)")
    s = sub.add_parser("popov", parents=[common], help="nonnegative supply via the Popov Gram")
    s.add_argument("--interval")
    s.add_argument("--nodes", type=int, default=100)
    s.add_argument("--tol", type=float, default=1e-9)
    sub.add_parser("canonical-ph", parents=[common], help="pH representation from Q")
    s = sub.add_parser("available-storage", parents=[common],
                       help="available storage via the backward Riccati equation")
    s.add_argument("--at", type=float, required=True)
    s.add_argument("--state", required=True)
    s.add_argument("--horizon", type=float, required=True)
    s = sub.add_parser("power-balance", parents=[common], help="pH power balance residual")
    s.add_argument("--x0")
    s.add_argument("--input")
    s.add_argument("--tol", type=float, default=1e-6)
    for name, hlp in (("transform", "apply a state, io or time transformation"),
                      ("verify-invariance", "check passivity invariance under a transformation")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--kind", choices=("state", "io", "time"), required=True)
        s.add_argument("--Z")
        s.add_argument("--V")
        s.add_argument("--theta")
        s.add_argument("--new-domain", dest="new_domain", help="lo:hi")
    s = sub.add_parser("gramian", parents=[common], help="reachability Gramian")
    s.add_argument("--interval")
    s.add_argument("--tol", type=float, default=1e-10)
    return p


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or _sys.stdout
    stderr = stderr or _sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    rep = Report(args.command)
    try:
        ctx = load_context(args)
        _header(rep, ctx)
        code = COMMANDS[args.command](args, ctx, rep)
    except InputError as exc:
        stderr.write(f"status=input_error\nerror={type(exc).__name__}\nmessage={exc}\n")
        return EXIT_INPUT
    except NumericalError as exc:
        stderr.write(f"status=numerical_error\nerror={type(exc).__name__}\nmessage={exc}\n")
        return EXIT_NUMERIC
    except ValueError as exc:
        stderr.write(f"status=input_error\nerror=ValueError\nmessage={exc}\n")
        return EXIT_INPUT
    rep.items.insert(1, ("status", "holds" if code == EXIT_OK else "fails"))
    stdout.write(rep.render())
    return code


if __name__ == "__main__":  # pragma: no cover
    _sys.exit(main())
