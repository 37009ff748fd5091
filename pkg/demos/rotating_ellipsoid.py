"""A problem defined only by boundary data.

The wall of an ellipsoid rotates rigidly, g = w x X, with no body force.  The
exact Stokes solution is the same rigid rotation with constant pressure, and
for linear elasticity the same displacement with zero stress, so both
solvers can be checked without any forcing term.
"""
import numpy as np

from kfbi3d import KFBISolver, ProblemSpec
from kfbi3d.geometry import ellipsoid
from kfbi3d.grid import UFAMS

w = np.array([0.3, -1.0, 0.5])


def rotation(pts):
    return np.cross(w, pts)


def velocity_error(solver, fields):
    g, err, scale = solver.grids, 0.0, 0.0
    for i, fam in enumerate(UFAMS):
        sl = g.interior(fam)
        ins = solver.masks.inside[fam][sl]
        exact = rotation(g.points(fam, sl)[ins])[:, i]
        err = max(err, np.abs(fields[fam][sl][ins] - exact).max())
        scale = max(scale, np.abs(exact).max())
    return err / scale


surface = ellipsoid(1.0, 0.8, 0.6)
for kind, extra in (("stokes", {}), ("navier", dict(E=1000.0, nu=0.3))):
    print(kind)
    for N in (16, 32):
        solver = KFBISolver(ProblemSpec(kind, surface, N, g=rotation, **extra))
        fields, _, diag = solver.solve()
        p = fields.p[solver.masks.inside["p"]]
        print(f"  N = {N:3d}  GMRES {diag.gmres_iterations:2d}  velocity max error {velocity_error(solver, fields):.2e}"
              f"  pressure spread {np.ptp(p):.1e}")
