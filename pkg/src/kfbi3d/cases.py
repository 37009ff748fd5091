"""The six benchmark problems: surfaces, material data and exact solutions.

Forcing terms are produced by symbolic differentiation so that no
hand-expanded formula can drift from the exact solution.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import sympy as sp

from .geometry import ellipsoid, sphere, torus

X = sp.symbols("x y z", real=True)
x, y, z = X


def lame(E, nu):
    """``(lambda, mu)`` from Young's modulus and Poisson's ratio."""
    return E * nu / ((1 + nu) * (1 - 2 * nu)), E / (2 * (1 + nu))


def _vec(fns):
    def f(pts):
        pts = np.asarray(pts, dtype=float)
        out = np.empty(pts.shape[:-1] + (len(fns),))
        for i, fn in enumerate(fns):
            out[..., i] = fn(pts[..., 0], pts[..., 1], pts[..., 2])
        return out

    return f


def _scalar(fn):
    def f(pts):
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(fn(pts[..., 0], pts[..., 1], pts[..., 2]), pts.shape[:-1]).astype(float)

    return f


@dataclass
class ExampleCase:
    """A Dirichlet problem with known solution.

    ``kind`` is ``"stokes"`` or ``"navier"``.  For Navier problems the
    pressure is the auxiliary ``p = -(lambda + mu) div u`` of the unified
    formulation, and ``mu``, ``c`` are the coefficients of
    ``-mu Lap u + grad p = f``, ``div u + c p = 0``.
    """

    id: str
    kind: str
    surface: object
    u_sym: tuple
    p_sym: object
    mu: float
    c: float
    lam: float | None = None
    E: float | None = None
    nu: float | None = None

    def __post_init__(self):
        u = sp.Matrix(self.u_sym)
        lap = [sum(sp.diff(ui, v, 2) for v in X) for ui in u]
        gp = [sp.diff(self.p_sym, v) for v in X]
        self.f_sym = tuple(-self.mu * li + gi for li, gi in zip(lap, gp))
        self.div_sym = sum(sp.diff(u[i], X[i]) for i in range(3))
        mods = ["numpy"]
        self._u = [sp.lambdify(X, e, mods) for e in u]
        self._p = sp.lambdify(X, self.p_sym, mods)
        self._f = [sp.lambdify(X, e, mods) for e in self.f_sym]
        self._div = sp.lambdify(X, self.div_sym, mods)

    @functools.cached_property
    def _derivs(self):
        u = sp.Matrix(self.u_sym)
        grad = [sp.lambdify(X, sp.diff(u[i], X[j]), "numpy") for i in range(3) for j in range(3)]
        hess = [sp.lambdify(X, sp.diff(u[i], X[j], X[k]), "numpy")
                for i in range(3) for j in range(3) for k in range(3)]
        gp = [sp.lambdify(X, sp.diff(self.p_sym, v), "numpy") for v in X]
        return grad, hess, gp

    def traces(self, pts):
        """``(u, grad u, hess u, p, grad p, f)`` of the exact solution at ``pts`` (M, 3)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        M = len(pts)
        grad, hess, gp = self._derivs
        G = np.stack([_scalar(fn)(pts) for fn in grad], -1).reshape(M, 3, 3)
        Hs = np.stack([_scalar(fn)(pts) for fn in hess], -1).reshape(M, 3, 3, 3)
        P = np.stack([_scalar(fn)(pts) for fn in gp], -1)
        return self.u(pts), G, Hs, self.p(pts), P, self.f(pts)

    @property
    def u(self):
        return _vec(self._u)

    def u_component(self, i):
        return _scalar(self._u[i])

    @property
    def p(self):
        return _scalar(self._p)

    @property
    def f(self):
        return _vec(self._f)

    def f_component(self, i):
        return _scalar(self._f[i])

    @property
    def g(self):
        """Dirichlet data: the exact velocity on the boundary."""
        return self.u

    def pde_residual(self, pts, dps=30):
        """Max residual of the original equations at ``pts``.

        Derivatives are taken by high-precision numerical differentiation of
        ``u`` and ``p`` (mpmath), independently of the symbolic forcing.
        """
        import mpmath

        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        us = [sp.lambdify(X, e, "mpmath") for e in self.u_sym]
        ps = sp.lambdify(X, self.p_sym, "mpmath")
        f = self.f(pts)
        worst = 0.0
        with mpmath.workdps(dps):
            for m, q in enumerate(pts):
                q = [mpmath.mpf(float(v)) for v in q]

                def d(fn, orders):
                    return mpmath.diff(fn, q, orders)

                unit = [tuple(int(a == b) for b in range(3)) for a in range(3)]
                div = sum(d(us[a], unit[a]) for a in range(3))
                for i in range(3):
                    lap = sum(d(us[i], tuple(2 * o for o in unit[a])) for a in range(3))
                    if self.kind == "stokes":
                        r = -self.mu * lap + d(ps, unit[i]) - f[m, i]
                    else:
                        gdiv = sum(d(us[a], tuple(x + y for x, y in zip(unit[a], unit[i]))) for a in range(3))
                        r = -self.mu * lap - (self.lam + self.mu) * gdiv - f[m, i]
                    worst = max(worst, abs(float(r)) / max(1.0, abs(float(f[m, i]))))
                cont = div + (self.c * ps(*q) if self.kind == "navier" else 0)
                worst = max(worst, abs(float(cont)))
        return worst


def _stokes(cid, surface, u, p, mu=1.0):
    return ExampleCase(cid, "stokes", surface, tuple(u), p, float(mu), 0.0)


def _navier(cid, surface, u, E, nu):
    lam, mu = lame(E, nu)
    div = sum(sp.diff(ui, v) for ui, v in zip(u, X))
    p = -(lam + mu) * div
    return ExampleCase(cid, "navier", surface, tuple(u), p, float(mu), 1.0 / (lam + mu), lam=float(lam), E=E, nu=nu)


@functools.lru_cache(maxsize=None)
def get_case(cid: str) -> ExampleCase:
    cid = str(cid)
    r2 = x**2 + y**2 + z**2
    if cid == "5.1":
        u = (x**2 * (2 - x**2) + 4 * x * y * (x**2 + y**2 - 1) + z**2 * (3 * z**2 - 6 * x**2 - 2),
             # y^2 (1 - y^2) as printed leaves div u = -2y; this is the solenoidal variant
             x**2 * (3 * x**2 - 6 * y**2 - 1) + y**2 * (2 - y**2),
             4 * z * x * (z**2 + x**2 - 1))
        p = 8 * y * (3 * x**2 - y**2) + 8 * x * (3 * z**2 - x**2)
        return _stokes(cid, sphere(1.0), u, p)
    if cid == "5.2":
        u = (sp.Rational(2, 3) * x**3 * y - z**2 * x**2 + sp.exp(z) + sp.sin(sp.pi * z),
             -x**2 * y**2 + sp.cos(sp.pi * x),
             sp.Rational(2, 3) * z**3 * x + sp.exp(x) + sp.sin(sp.pi * x))
        p = (x - 1)**3 * (y - 1)**3 * (z - 1)**3
        return _stokes(cid, ellipsoid(1.0, 0.8, 0.6), u, p)
    if cid == "5.3":
        u = (-4 * x * y * (1 - x**2 - y**2) - x**2 * (x**2 + 6 * z**2 - 2) + z**2 * (3 * z**2 - 2)
             + sp.exp(sp.cos(y)) + sp.exp(sp.sin(z)),
             x**2 * (3 * x**2 - 6 * y**2 - 2) - y**2 * (y**2 - 2) + sp.exp(sp.sin(x)),
             -4 * (1 - x**2 - z**2) * x * z + sp.exp(sp.cos(x)))
        p = sp.exp(1 - y**2 - z**3) * sp.sin(x**2 + 1)
        return _stokes(cid, torus(0.35, 0.7), u, p)
    if cid == "5.4":
        s = sp.sin(2 * sp.pi * r2)
        u = (s * sp.cos(2 * y) * sp.cos(z), s * sp.cos(x) * sp.cos(x + z), s * sp.cos(sp.pi * x) * sp.cos(y))
        return _navier(cid, sphere(1.0), u, 1000.0, 0.1)
    if cid == "5.5":
        c3 = sp.cos(x) * sp.cos(y) * sp.cos(z)
        u = (r2 - 4 + c3, r2 - 4 + x * y + c3, r2 - 4 + y * z + c3)
        return _navier(cid, ellipsoid(1.0, 0.8, 0.6), u, 4000.0, 0.05)
    if cid == "5.6":
        u = (sp.exp(1 - y**2 - z**2) * sp.sin(3 * x**2 + 2), sp.sin(1 - r2), 3 * x**2 + 2 * y**2 + z**2)
        return _navier(cid, torus(0.35, 0.7), u, 2000.0, 0.4)
    raise KeyError(f"unknown example {cid!r}; choose one of {', '.join(CASE_IDS)}")


CASE_IDS = ("5.1", "5.2", "5.3", "5.4", "5.5", "5.6")
