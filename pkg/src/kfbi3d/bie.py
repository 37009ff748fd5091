"""Boundary integral solver for the Dirichlet problem.

The solution is written as a volume potential plus a double-layer potential
with unknown density ``phi``.  Neither is evaluated by quadrature: each is the
solution of a simple interface problem on the box, computed by the corrected
MAC scheme and read off at the control points by one-sided interpolation.

* ``evaluate_volume_trace``: interface problem with ``[[u]] = 0`` and the
  forcing extended by zero; its trace is continuous.
* ``apply_bie_operator``: interface problem with ``[[u]] = phi`` and no forcing;
  the domain-side trace is ``(I/2 - M) phi``.
* ``solve_bie``: GMRES on ``(I/2 - M) phi = g - volume trace``.
* ``reconstruct_solution``: one interface solve with both data.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .boundary_interp import BoundaryInterpolator
from .cases import lame
from .corrections import CorrectionPlan
from .errors import ConfigError, GMRESNoConvergence
from .fast_solver import SaddleSolver, SaddleSystemSpec
from .geometry import find_intersections
from .grid import UFAMS, build_grids, mark_nodes
from .jumps import InterfaceParams, JumpData, JumpOperator, SurfaceFitter

log = logging.getLogger(__name__)


@dataclass
class ProblemSpec:
    """A Stokes or Navier Dirichlet problem on an implicit surface.

    ``f(pts)`` and ``g(pts)`` take ``(M, 3)`` points and return ``(M, 3)``.
    """

    kind: str
    surface: object
    N: int
    f: Callable | None = None
    g: Callable | None = None
    mu_s: float = 1.0
    E: float | None = None
    nu: float | None = None
    gmres_tol: float = 1e-9
    gmres_maxit: int = 200
    cg_tol: float = 1e-12
    cg_maxit: int = 2000
    box: tuple = (-1.2, 1.2)
    fit_neighbors: int = 20
    workers: int | None = None

    def __post_init__(self):
        if self.kind not in ("stokes", "navier"):
            raise ConfigError(f"problem kind must be 'stokes' or 'navier', got {self.kind!r}")
        if self.kind == "navier":
            if self.E is None or self.nu is None:
                raise ConfigError("navier problems need E and nu")
            if not (self.E > 0 and -1.0 < self.nu < 0.5):
                raise ConfigError(f"need E > 0 and nu < 1/2, got E={self.E}, nu={self.nu}")
            lam, mu = lame(self.E, self.nu)
            if lam <= 0 or mu <= 0:
                raise ConfigError("Lame constants must be positive")
        elif self.mu_s <= 0:
            raise ConfigError("viscosity must be positive")

    @property
    def lam(self):
        return lame(self.E, self.nu)[0] if self.kind == "navier" else None

    @property
    def mu(self):
        return lame(self.E, self.nu)[1] if self.kind == "navier" else self.mu_s

    @property
    def c(self):
        return 1.0 / (self.lam + self.mu) if self.kind == "navier" else 0.0

    def interface_params(self):
        if self.kind == "navier":
            return InterfaceParams.navier(self.lam, self.mu)
        return InterfaceParams.stokes(self.mu)


@dataclass
class Diagnostics:
    gmres_iterations: int = 0
    gmres_residuals: list = field(default_factory=list)
    cg_iterations: list = field(default_factory=list)
    setup_seconds: float = 0.0
    solve_seconds: float = 0.0
    n_control_points: int = 0
    timings: dict = field(default_factory=dict)


def gmres(apply, b, tol=1e-9, maxit=200, callback=None):
    """Full GMRES with modified Gram-Schmidt and a zero initial guess.

    Returns ``(x, residual_history)`` where the history holds relative
    residual norms ``|r_k| / |b|``; raises :class:`GMRESNoConvergence`.
    """
    b = np.asarray(b, dtype=float).ravel()
    n = b.size
    beta = np.linalg.norm(b)
    hist = [1.0]
    if beta == 0.0:
        return np.zeros(n), hist
    m = min(maxit, n)
    Q = np.zeros((m + 1, n))
    Hm = np.zeros((m + 1, m))
    cs = np.zeros(m)
    sn = np.zeros(m)
    e = np.zeros(m + 1)
    e[0] = beta
    Q[0] = b / beta
    k = 0
    for k in range(m):
        w = np.asarray(apply(Q[k]), dtype=float).ravel()
        for j in range(k + 1):
            Hm[j, k] = np.dot(Q[j], w)
            w -= Hm[j, k] * Q[j]
        Hm[k + 1, k] = np.linalg.norm(w)
        if Hm[k + 1, k] > 0:
            Q[k + 1] = w / Hm[k + 1, k]
        for j in range(k):
            t = cs[j] * Hm[j, k] + sn[j] * Hm[j + 1, k]
            Hm[j + 1, k] = -sn[j] * Hm[j, k] + cs[j] * Hm[j + 1, k]
            Hm[j, k] = t
        r = np.hypot(Hm[k, k], Hm[k + 1, k])
        cs[k], sn[k] = Hm[k, k] / r, Hm[k + 1, k] / r
        Hm[k, k] = r
        Hm[k + 1, k] = 0.0
        e[k + 1] = -sn[k] * e[k]
        e[k] = cs[k] * e[k]
        rel = abs(e[k + 1]) / beta
        hist.append(float(rel))
        if callback is not None:
            callback(k + 1, rel)
        if rel < tol or Hm[k, k] == 0.0:
            y = np.linalg.solve(np.triu(Hm[: k + 1, : k + 1]), e[: k + 1])
            return Q[: k + 1].T @ y, hist
    raise GMRESNoConvergence(f"GMRES did not reach {tol:g} in {m} iterations (last {hist[-1]:.3e})")


class KFBISolver:
    """All geometry-dependent data of one problem, built once and reused by every interface solve."""

    def __init__(self, problem: ProblemSpec):
        t0 = time.perf_counter()
        self.problem = problem
        self.grids = build_grids(problem.N, problem.box)
        self.cps = find_intersections(problem.surface, self.grids)
        self.masks = mark_nodes(self.grids, problem.surface, self.cps)
        self.params = problem.interface_params()
        self.fitter = SurfaceFitter(self.cps, k=problem.fit_neighbors)
        self.jumps = JumpOperator(self.cps, self.params, self.fitter, k=problem.fit_neighbors)
        self.unknowns = self.jumps.unknowns
        self.comp = self.jumps.comp
        self.plan = CorrectionPlan(self.grids, self.cps, mu=self.params.mu)
        self.saddle = SaddleSolver(
            self.grids,
            SaddleSystemSpec(mu=self.params.mu, c=self.params.c, cg_tol=problem.cg_tol, cg_maxit=problem.cg_maxit),
            workers=problem.workers,
        )
        self.interp = BoundaryInterpolator(self.grids, self.cps, self.masks)
        self.diagnostics = Diagnostics(n_control_points=len(self.cps))
        self.diagnostics.setup_seconds = time.perf_counter() - t0
        self._f_nodes = None
        self._f_cps = None
        log.info("setup N=%d control_points=%d seconds=%.2f", problem.N, len(self.cps), self.diagnostics.setup_seconds)

    # ---------------------------------------------------------------- data
    def forcing_nodes(self):
        """Zero-extended forcing on the velocity unknowns."""
        if self._f_nodes is None:
            g, f = self.grids, self.problem.f
            out = []
            for m, fam in enumerate(UFAMS):
                sl = g.interior(fam)
                if f is None:
                    out.append(np.zeros(g.interior_shape(fam)))
                    continue
                pts = g.points(fam, sl)
                ins = self.masks.inside[fam][sl]
                vals = np.zeros(g.interior_shape(fam))
                vals[ins] = np.asarray(f(pts[ins]))[:, m]
                out.append(vals)
            self._f_nodes = tuple(out)
        return self._f_nodes

    def forcing_jump(self):
        if self._f_cps is None:
            f = self.problem.f
            M = len(self.cps)
            self._f_cps = np.zeros((M, 3)) if f is None else np.asarray(f(self.cps.location), dtype=float)
        return self._f_cps

    # ---------------------------------------------------------------- interface solves
    def interface_solve(self, phi=None, with_forcing=False):
        """Solve the interface problem with density ``phi`` and (optionally) the forcing.

        Returns ``(MACField, JumpData)``.
        """
        F = self.forcing_jump() if with_forcing else None
        jd = self.jumps(phi, F)
        ledger = self.plan.apply(jd)
        g = self.grids
        if with_forcing:
            f = self.forcing_nodes()
        else:
            f = tuple(np.zeros(g.interior_shape(fam)) for fam in UFAMS)
        rhs_f, rhs_g = ledger.rhs(f, np.zeros(g.interior_shape("p")))
        fld, _, info = self.saddle.solve(rhs_f, rhs_g)
        self.diagnostics.cg_iterations.append(info.cg_iterations)
        return fld, jd

    def evaluate_volume_trace(self):
        """Continuous boundary trace ``(M, 3)`` of the volume potential at the control points."""
        if self.problem.f is None:
            return np.zeros((len(self.cps), 3))
        fld, jd = self.interface_solve(None, with_forcing=True)
        plus, _ = self.interp.extract(fld, jd)
        return plus

    def carried(self, values):
        """Entries of an ``(M, 3)`` trace at the unknowns, in the component each one carries."""
        return self.jumps.restrict(values)

    def apply_bie_operator(self, phi):
        """Domain-side trace of the double-layer interface solution, i.e. ``(I/2 - M) phi``.

        ``phi`` holds one value per unknown (the primary control points, see
        ``unknowns``); the result is the carried trace component at each.
        """
        phi = np.asarray(phi, dtype=float).reshape(len(self.unknowns))
        if not np.any(phi):
            return np.zeros_like(phi)
        fld, jd = self.interface_solve(phi, with_forcing=False)
        plus, _ = self.interp.extract(fld, jd)
        return self.carried(plus)

    def boundary_data(self):
        g = self.problem.g
        M = len(self.cps)
        return np.zeros((M, 3)) if g is None else np.asarray(g(self.cps.location), dtype=float)

    def solve_bie(self, rhs=None):
        """Density ``phi`` (P,) at the unknowns from GMRES; ``rhs`` defaults to the carried part of ``g - volume trace``."""
        t0 = time.perf_counter()
        if rhs is None:
            rhs = self.carried(self.boundary_data() - self.evaluate_volume_trace())
        def cb(k, rel):
            log.info("gmres iter=%d rel_residual=%.3e", k, rel)

        x, hist = gmres(lambda v: self.apply_bie_operator(v), np.asarray(rhs, dtype=float).ravel(),
                        tol=self.problem.gmres_tol, maxit=self.problem.gmres_maxit, callback=cb)
        self.diagnostics.gmres_iterations = len(hist) - 1
        self.diagnostics.gmres_residuals = hist
        self.diagnostics.timings["gmres"] = time.perf_counter() - t0
        return x

    def reconstruct_solution(self, phi):
        """Final fields on the box; values outside the domain are not meaningful."""
        fld, jd = self.interface_solve(phi, with_forcing=self.problem.f is not None)
        self._last_jumps = jd
        return fld

    def solve(self):
        """Run the whole pipeline; returns ``(fields, density, diagnostics)``."""
        t0 = time.perf_counter()
        phi = self.solve_bie()
        fld = self.reconstruct_solution(phi)
        self.diagnostics.solve_seconds = time.perf_counter() - t0
        self.fields, self.density = fld, phi
        return fld, phi, self.diagnostics

    def boundary_trace(self, fld, jd=None):
        """Domain-side velocity trace of a reconstructed field (Dirichlet audit)."""
        jd = jd if jd is not None else getattr(self, "_last_jumps", None)
        # the reconstruction carries the forcing jump; only [[u]] and derivatives matter here
        plus, _ = self.interp.extract(fld, jd)
        return plus


def build(problem: ProblemSpec) -> KFBISolver:
    return KFBISolver(problem)


def evaluate_volume_trace(problem: ProblemSpec, solver: KFBISolver | None = None):
    return (solver or KFBISolver(problem)).evaluate_volume_trace()


def apply_bie_operator(phi, problem: ProblemSpec, solver: KFBISolver | None = None):
    return (solver or KFBISolver(problem)).apply_bie_operator(phi)


def solve_bie(problem: ProblemSpec, solver: KFBISolver | None = None):
    s = solver or KFBISolver(problem)
    phi = s.solve_bie()
    return phi, s.diagnostics.gmres_iterations


def reconstruct_solution(phi, problem: ProblemSpec, solver: KFBISolver | None = None):
    return (solver or KFBISolver(problem)).reconstruct_solution(phi)


__all__ = [
    "Diagnostics",
    "JumpData",
    "KFBISolver",
    "ProblemSpec",
    "apply_bie_operator",
    "build",
    "evaluate_volume_trace",
    "gmres",
    "reconstruct_solution",
    "solve_bie",
]
