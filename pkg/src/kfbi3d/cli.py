"""Command line driver.

    kfbi3d run --example 5.1 --n 64 [--threads T] [--dump-fields] [--out DIR]
    kfbi3d study --example 5.3 --grids 32,64,128 [--out DIR]
    kfbi3d custom --config FILE

Exit status is 0 on success, 2 when an iterative solver does not converge
and 3 for configuration errors.  Grids above N = 128 need ``--large``.

A custom problem is an INI file::

    [problem]
    kind = stokes            ; or navier
    N = 32
    mu = 1.0                 ; stokes viscosity
    E = 1000                 ; navier only
    nu = 0.1                 ; navier only

    [surface]
    kind = ellipsoid         ; sphere | ellipsoid | torus
    params = 1.0, 0.8, 0.6

    [data]
    ; either an exact solution, from which f and g follow and errors are reported
    u = x*y, y*z, z*x
    p = x + y
    ; or the forcing and the boundary values directly
    ; f = 0, 0, 0
    ; g = 1, 0, 0

    [solver]
    gmres_tol = 1e-9
    gmres_maxit = 200
    cg_tol = 1e-12
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys

import numpy as np

from .bie import KFBISolver, ProblemSpec
from .cases import CASE_IDS, ExampleCase, get_case, lame
from .errors import CGNoConvergence, ConfigError, GMRESNoConvergence, KFBIError
from .geometry import make_surface
from .harness import compute_norms, run_case, run_convergence, write_vtk

log = logging.getLogger("kfbi3d")

MAX_DESK_N = 128
EXIT_OK, EXIT_FAIL, EXIT_NOCONV, EXIT_CONFIG = 0, 1, 2, 3


def _grids(text):
    try:
        Ns = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--grids expects comma separated integers, got {text!r}") from None
    if not Ns:
        raise ConfigError("--grids is empty")
    return Ns


def _check_n(Ns, large):
    for N in Ns:
        if N < 8 or N % 2:
            raise ConfigError(f"N must be an even integer >= 8, got {N}")
        if N > MAX_DESK_N and not large:
            raise ConfigError(f"N = {N} exceeds {MAX_DESK_N}; pass --large to allow it")


def _out_dir(path):
    if path:
        os.makedirs(path, exist_ok=True)
    return path


def _solver_overrides(args):
    return {"workers": args.threads} if getattr(args, "threads", None) else {}


def cmd_run(args):
    _check_n([args.n], args.large)
    case = get_case(args.example)
    out = _out_dir(args.out)
    row, solver, fields = run_case(case, args.n, **_solver_overrides(args))
    summary = {"example": case.id, "N": args.n, "gmres_iterations": row.gmres_iterations,
               "control_points": row.control_points, "seconds": round(row.seconds, 3),
               "errors": {k: {"max": v[0], "l2": v[1]} for k, v in row.errors.items()}}
    print(f"example {case.id}  N={args.n}  GMRES steps={row.gmres_iterations}  ({row.seconds:.1f}s)")
    for k, (emax, el2) in row.errors.items():
        print(f"  {k:>3}  max {emax:.3e}   l2 {el2:.3e}")
    if out:
        with open(os.path.join(out, f"example_{case.id}_N{args.n}.json"), "w") as fh:
            json.dump(summary, fh, indent=2)
        if args.dump_fields:
            write_vtk(os.path.join(out, f"example_{case.id}_N{args.n}.vtk"), solver.grids, fields, solver.masks)
    return EXIT_OK


def cmd_study(args):
    Ns = _grids(args.grids)
    _check_n(Ns, args.large)
    case = get_case(args.example)
    table = run_convergence(case, Ns, out_dir=_out_dir(args.out), dump_fields=args.dump_fields,
                            **_solver_overrides(args))
    print(table.to_text(), end="")
    failed = [r.failure for r in table.rows if r.failed]
    if not failed:
        return EXIT_OK
    noconv = all(f.startswith(("GMRESNoConvergence", "CGNoConvergence")) for f in failed)
    return EXIT_NOCONV if noconv else EXIT_FAIL


def _floats(text, n=None, what="value"):
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse {what} {text!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"{what} needs {n} entries, got {len(vals)}")
    return vals


def _exprs(text, n, what):
    import sympy as sp

    from .cases import X

    try:
        val = sp.sympify(text, locals={s.name: s for s in X})
    except (sp.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigError(f"cannot parse {what}: {exc}") from None
    parts = list(val) if isinstance(val, (tuple, sp.Tuple)) else [val]
    if len(parts) != n:
        raise ConfigError(f"{what} needs {n} comma separated expressions, got {len(parts)}")
    return parts


def load_config(path):
    """Parse a custom problem file; returns ``(ProblemSpec, ExampleCase | None)``."""
    import sympy as sp

    from .cases import X

    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not cp.read(path):
        raise ConfigError(f"cannot read config file {path!r}")
    for sec in ("problem", "surface", "data"):
        if not cp.has_section(sec):
            raise ConfigError(f"config is missing the [{sec}] section")
    pr, sf, dt = cp["problem"], cp["surface"], cp["data"]
    kind = pr.get("kind", "stokes").strip().lower()
    try:
        N = pr.getint("N", 32)
    except ValueError:
        raise ConfigError("N must be an integer") from None
    try:
        surface = make_surface(sf.get("kind", "sphere").strip().lower(), _floats(sf.get("params", ""), what="surface params"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad surface: {exc}") from None
    mat = {}
    if kind == "navier":
        if "E" not in pr or "nu" not in pr:
            raise ConfigError("navier problems need E and nu")
        mat = dict(E=_floats(pr["E"], 1, "E")[0], nu=_floats(pr["nu"], 1, "nu")[0])
    elif "mu" in pr:
        mat = dict(mu_s=_floats(pr["mu"], 1, "mu")[0])
    solver_kw = {}
    if cp.has_section("solver"):
        sv = cp["solver"]
        for key, conv in (("gmres_tol", float), ("gmres_maxit", int), ("cg_tol", float), ("cg_maxit", int),
                          ("fit_neighbors", int)):
            if key in sv:
                try:
                    solver_kw[key] = conv(sv[key])
                except ValueError:
                    raise ConfigError(f"bad value for {key}: {sv[key]!r}") from None
    case = None
    if "u" in dt:
        u = _exprs(dt["u"], 3, "u")
        if kind == "navier":
            if mat["nu"] >= 0.5 or mat["E"] <= 0:
                raise ConfigError("need E > 0 and nu < 1/2")
            lam, mu = lame(mat["E"], mat["nu"])
            p = -(lam + mu) * sum(sp.diff(ui, v) for ui, v in zip(u, X))
            case = ExampleCase("custom", "navier", surface, tuple(u), p, float(mu), 1.0 / (lam + mu),
                               lam=float(lam), E=mat["E"], nu=mat["nu"])
        else:
            p = _exprs(dt.get("p", "0"), 1, "p")[0]
            case = ExampleCase("custom", "stokes", surface, tuple(u), p, mat.get("mu_s", 1.0), 0.0)
        f, g = case.f, case.g
    elif "g" in dt:
        f = _lambdify(_exprs(dt["f"], 3, "f")) if "f" in dt else None
        g = _lambdify(_exprs(dt["g"], 3, "g"))
    else:
        raise ConfigError("[data] needs either u (exact solution) or g (boundary values)")
    problem = ProblemSpec(kind, surface, N, f=f, g=g, **mat, **solver_kw)
    return problem, case


def _lambdify(exprs):
    import sympy as sp

    from .cases import X

    fns = [sp.lambdify(X, e, "numpy") for e in exprs]

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        return np.stack([np.broadcast_to(f(pts[..., 0], pts[..., 1], pts[..., 2]), pts.shape[:-1]) for f in fns], -1)

    return fn


def cmd_custom(args):
    problem, case = load_config(args.config)
    _check_n([problem.N], args.large)
    if args.threads:
        problem.workers = args.threads
    solver = KFBISolver(problem)
    fields, _, diag = solver.solve()
    print(f"custom {problem.kind} problem  N={problem.N}  control points={len(solver.cps)}  "
          f"GMRES steps={diag.gmres_iterations}  ({diag.solve_seconds:.1f}s)")
    if case is not None:
        for k, (emax, el2) in compute_norms(fields, case.u_component, case.p, solver.grids, solver.masks,
                                            case.kind).items():
            print(f"  {k:>3}  max {emax:.3e}   l2 {el2:.3e}")
    out = _out_dir(args.out)
    if out:
        write_vtk(os.path.join(out, f"custom_N{problem.N}.vtk"), solver.grids, fields, solver.masks)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="kfbi3d", description="Kernel-free boundary integral solver for 3D Stokes and Navier problems")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="log progress (-vv for debug output)")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--threads", type=int, default=None, help="FFT worker threads")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--large", action="store_true", help=f"allow N > {MAX_DESK_N}")

    r = sub.add_parser("run", help="solve one example on one grid")
    r.add_argument("--example", required=True, choices=CASE_IDS)
    r.add_argument("--n", type=int, required=True)
    r.add_argument("--dump-fields", action="store_true", help="write a VTK file of the fields")
    common(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("study", help="grid refinement study of one example")
    s.add_argument("--example", required=True, choices=CASE_IDS)
    s.add_argument("--grids", default="32,64,128")
    s.add_argument("--dump-fields", action="store_true")
    common(s)
    s.set_defaults(func=cmd_study)

    c = sub.add_parser("custom", help="solve a problem described by a config file")
    c.add_argument("--config", required=True)
    common(c)
    c.set_defaults(func=cmd_custom)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GMRESNoConvergence, CGNoConvergence) as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except KFBIError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
