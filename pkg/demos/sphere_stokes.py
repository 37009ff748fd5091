"""Stokes flow in the unit ball, from boundary data to volume fields.

Solves the first benchmark on one grid, shows how GMRES converges on the
boundary density and compares the fields with the exact solution.

    python demos/sphere_stokes.py [N] [--vtk out.vtk]
"""
import argparse

import numpy as np

from kfbi3d import KFBISolver, compute_norms, get_case
from kfbi3d.harness import problem_for, write_vtk

ap = argparse.ArgumentParser()
ap.add_argument("N", type=int, nargs="?", default=32)
ap.add_argument("--vtk", default=None)
args = ap.parse_args()

case = get_case("5.1")
solver = KFBISolver(problem_for(case, args.N))
print(f"N = {args.N}: {len(solver.cps)} control points, {len(solver.unknowns)} density unknowns")

fields, phi, diag = solver.solve()
print(f"GMRES: {diag.gmres_iterations} steps")
for k, r in enumerate(diag.gmres_residuals[::4]):
    print(f"  step {4 * k:3d}  relative residual {r:.2e}")

errors = compute_norms(fields, case.u_component, case.p, solver.grids, solver.masks, case.kind)
for name, (emax, el2) in errors.items():
    print(f"{name:>3}: max {emax:.3e}   l2 {el2:.3e}")

# the solution's own trace should reproduce the boundary data
trace = solver.boundary_trace(fields)
print(f"max |trace - g| on the surface: {np.abs(trace - case.g(solver.cps.location)).max():.2e}")

if args.vtk:
    write_vtk(args.vtk, solver.grids, fields, solver.masks)
    print(f"wrote {args.vtk}")
