"""Implicit surfaces, point classification and surface/grid-line intersections.

All surfaces are analytic level sets ``psi`` with ``psi < 0`` inside the
domain.  Control points are the intersections of the surface with the
axis-aligned lines of the staggered grid families; they are located on the
half-spacing lattice described in :mod:`kfbi3d.grid`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateGradient, MultipleRootsInCell

INSIDE, OUTSIDE = True, False


@dataclass(frozen=True)
class ImplicitSurface:
    """Analytic level set with gradient and Hessian.

    The three callables accept arrays of shape ``(..., 3)`` and return arrays of
    shape ``(...)``, ``(..., 3)`` and ``(..., 3, 3)`` respectively.
    """

    kind: str
    params: tuple
    levelset: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        return self.levelset(np.asarray(x, dtype=float))

    def bounding_radius(self):
        """Radius of a ball centred at the origin containing the surface (approximate for custom)."""
        if self.kind == "sphere":
            r, cx, cy, cz = self.params
            return r + float(np.linalg.norm([cx, cy, cz]))
        if self.kind == "ellipsoid":
            return max(self.params)
        if self.kind == "torus":
            a, c = self.params
            return a + c
        return np.inf


def sphere(r=1.0, center=(0.0, 0.0, 0.0)) -> ImplicitSurface:
    c = np.asarray(center, dtype=float)

    def psi(x):
        d = x - c
        return np.einsum("...i,...i->...", d, d) - r * r

    def grad(x):
        return 2.0 * (x - c)

    def hess(x):
        return np.broadcast_to(2.0 * np.eye(3), x.shape[:-1] + (3, 3)).copy()

    return ImplicitSurface("sphere", (float(r), *map(float, c)), psi, grad, hess)


def ellipsoid(ra=1.0, rb=0.8, rc=0.6) -> ImplicitSurface:
    w = 1.0 / np.array([ra, rb, rc]) ** 2

    def psi(x):
        return np.einsum("...i,i->...", x * x, w) - 1.0

    def grad(x):
        return 2.0 * x * w

    def hess(x):
        return np.broadcast_to(2.0 * np.diag(w), x.shape[:-1] + (3, 3)).copy()

    return ImplicitSurface("ellipsoid", (float(ra), float(rb), float(rc)), psi, grad, hess)


def torus(a=0.35, c=0.7) -> ImplicitSurface:
    """Torus ``(c - sqrt(x^2 + y^2))^2 + z^2 < a^2`` about the z axis."""

    def psi(x):
        rho = np.hypot(x[..., 0], x[..., 1])
        return (c - rho) ** 2 + x[..., 2] ** 2 - a * a

    def grad(x):
        rho = np.maximum(np.hypot(x[..., 0], x[..., 1]), 1e-300)
        f = 2.0 * (rho - c) / rho
        return np.stack([f * x[..., 0], f * x[..., 1], 2.0 * x[..., 2]], axis=-1)

    def hess(x):
        X, Y = x[..., 0], x[..., 1]
        rho = np.maximum(np.hypot(X, Y), 1e-300)
        r2, r3 = rho * rho, rho ** 3
        H = np.zeros(x.shape[:-1] + (3, 3))
        H[..., 0, 0] = 2.0 * (X * X / r2 + (rho - c) * Y * Y / r3)
        H[..., 1, 1] = 2.0 * (Y * Y / r2 + (rho - c) * X * X / r3)
        H[..., 0, 1] = H[..., 1, 0] = 2.0 * (X * Y / r2 - (rho - c) * X * Y / r3)
        H[..., 2, 2] = 2.0
        return H

    return ImplicitSurface("torus", (float(a), float(c)), psi, grad, hess)


def custom(levelset, gradient, hessian, params=()) -> ImplicitSurface:
    return ImplicitSurface("custom", tuple(params), levelset, gradient, hessian)


def make_surface(kind: str, params=()) -> ImplicitSurface:
    """Build one of the built-in surfaces from a kind name and a numeric parameter list."""
    params = [float(p) for p in params]
    if kind == "sphere":
        if len(params) == 0:
            return sphere()
        if len(params) == 1:
            return sphere(params[0])
        return sphere(params[0], params[1:4])
    if kind == "ellipsoid":
        return ellipsoid(*params) if params else ellipsoid()
    if kind == "torus":
        return torus(*params) if params else torus()
    raise ValueError(f"unknown surface kind {kind!r}")


def classify_point(surface: ImplicitSurface, x, tol=0.0):
    """True (inside) iff ``psi(x) <= tol``; grazing points count as interior."""
    return surface(np.asarray(x, dtype=float)) <= tol


@dataclass
class SurfaceFrame:
    point: np.ndarray
    normal: np.ndarray
    tangent1: np.ndarray
    tangent2: np.ndarray


def frames(surface: ImplicitSurface, x):
    """Vectorised surface frames at points ``x`` of shape ``(M, 3)``.

    Returns ``(normal, tangent1, tangent2)``, each ``(M, 3)``, right-handed with
    ``tangent1 x tangent2 = normal``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    g = surface.gradient(x)
    gn = np.linalg.norm(g, axis=1)
    if np.any(gn < 1e-10):
        raise DegenerateGradient(f"|grad psi| < 1e-10 at {int(np.sum(gn < 1e-10))} point(s)")
    n = g / gn[:, None]
    # complete with the Cartesian axis least aligned with n
    ax = np.argmin(np.abs(n), axis=1)
    e = np.zeros_like(n)
    e[np.arange(len(n)), ax] = 1.0
    t1 = e - np.sum(e * n, axis=1)[:, None] * n
    t1 /= np.linalg.norm(t1, axis=1)[:, None]
    t2 = np.cross(n, t1)
    return n, t1, t2


def surface_frame(surface: ImplicitSurface, x) -> SurfaceFrame:
    x = np.asarray(x, dtype=float)
    n, t1, t2 = frames(surface, x[None, :])
    return SurfaceFrame(x.copy(), n[0], t1[0], t2[0])


# --------------------------------------------------------------------------
# control points


@dataclass
class ControlPointSet:
    """Intersections of the surface with the grid lines of all families.

    Positions along lines are expressed in half-lattice sample indices
    ``s = 2 q + 1`` where ``q`` is the (possibly half-integer) grid index, so that
    every node of every family sits on an integer sample.  A control point lies
    in the segment ``[seg, seg + 1]`` of its line.
    """

    grids: object
    location: np.ndarray  # (M, 3)
    axis: np.ndarray  # (M,) pierced direction
    line: np.ndarray  # (M, 2) transverse sample indices (ascending axis order)
    seg: np.ndarray  # (M,) segment start sample along the axis
    s: np.ndarray  # (M,) coordinate along the axis
    normal: np.ndarray
    tangent1: np.ndarray
    tangent2: np.ndarray
    lower_inside: np.ndarray  # (M,) side of the node at sample ``seg``
    half_inside: np.ndarray = field(repr=False)  # inside flags on the full half lattice
    keys: np.ndarray = field(repr=False, default=None)
    _order: np.ndarray = field(repr=False, default=None)

    def __len__(self):
        return len(self.location)

    @property
    def grid_family(self):
        """Line family label: 0 for cell-centred lines, else the face family sharing the line."""
        out = np.zeros(len(self), dtype=int)
        for d in range(3):
            sel = self.axis == d
            others = [e for e in range(3) if e != d]
            odd0 = self.line[sel, 0] % 2 == 1
            odd1 = self.line[sel, 1] % 2 == 1
            fam = np.zeros(int(sel.sum()), dtype=int)
            fam[odd0] = others[0] + 1
            fam[odd1] = others[1] + 1
            out[sel] = fam
        return out

    @property
    def component(self):
        """Velocity component carried by each point: the face family whose nodes share its line."""
        fam = self.grid_family
        return np.where(fam == 0, self.axis, fam - 1)

    @property
    def primary(self):
        """Points whose line is the one most aligned with the normal.

        Their projections onto the surface are roughly ``h`` apart, whereas
        points cut by different line directions can nearly coincide.
        """
        return self.axis == np.argmax(np.abs(self.normal), axis=1)

    def sample_coords(self):
        """Full half-lattice coordinates ``(M, 3)`` of the segment start."""
        c = np.zeros((len(self), 3), dtype=np.int64)
        for d in range(3):
            sel = self.axis == d
            others = [e for e in range(3) if e != d]
            c[sel, d] = self.seg[sel]
            c[sel, others[0]] = self.line[sel, 0]
            c[sel, others[1]] = self.line[sel, 1]
        return c

    def lookup(self, axis, coords):
        """Control-point index of the segment starting at half-lattice ``coords`` along ``axis``; -1 if none."""
        S = self.grids.S
        coords = np.asarray(coords, dtype=np.int64)
        k = ((axis * S + coords[..., 0]) * S + coords[..., 1]) * S + coords[..., 2]
        if len(self.keys) == 0:
            return np.full(k.shape, -1, dtype=np.int64)
        pos = np.minimum(np.searchsorted(self.keys, k), len(self.keys) - 1)
        hit = self.keys[pos] == k
        return np.where(hit, self._order[pos], -1)

    def _build_keys(self):
        S = self.grids.S
        c = self.sample_coords()
        k = ((self.axis.astype(np.int64) * S + c[:, 0]) * S + c[:, 1]) * S + c[:, 2]
        order = np.argsort(k, kind="stable")
        self.keys = k[order]
        self._order = order


def half_lattice_inside(surface: ImplicitSurface, grids, tol=None):
    """Evaluate the inside flag on every half-lattice sample (slab by slab)."""
    S = grids.S
    xs = grids.half_coords()
    tol = 1e-12 * grids.h if tol is None else tol
    out = np.empty((S, S, S), dtype=bool)
    Y, Z = np.meshgrid(xs, xs, indexing="ij")
    pts = np.empty((S, S, 3))
    pts[..., 1] = Y
    pts[..., 2] = Z
    for i in range(S):
        pts[..., 0] = xs[i]
        out[i] = surface.levelset(pts) <= tol
    return out


def _line_root(surface, p0, p1, axis, lower_inside, tol, n_bisect=40, n_newton=5):
    """Safeguarded bisection + Newton on segments ``p0 -> p1`` parallel to ``axis``."""
    a = p0[:, axis].copy()
    b = p1[:, axis].copy()
    pts = p0.copy()
    for _ in range(n_bisect):
        m = 0.5 * (a + b)
        pts[:, axis] = m
        same = (surface.levelset(pts) <= tol) == lower_inside
        a = np.where(same, m, a)
        b = np.where(same, b, m)
    t = 0.5 * (a + b)
    lo, hi = np.minimum(p0[:, axis], p1[:, axis]), np.maximum(p0[:, axis], p1[:, axis])
    for _ in range(n_newton):
        pts[:, axis] = t
        f = surface.levelset(pts)
        if np.all(np.abs(f) <= 0.01 * tol):
            break
        df = surface.gradient(pts)[:, axis]
        step = np.where(np.abs(df) > 0, f / np.where(df == 0, 1.0, df), 0.0)
        tn = t - step
        ok = (tn >= lo) & (tn <= hi) & (np.abs(f) > 0.01 * tol)
        t = np.where(ok, tn, t)
    return t


def _check_single_root(surface, p0, p1, axis, tol, N, n_sub=8):
    """Raise if a bracketed segment shows more than one sign change under sub-sampling."""
    ts = np.linspace(0.0, 1.0, n_sub + 1)
    pts = np.repeat(p0[:, None, :], n_sub + 1, axis=1)
    pts[:, :, axis] = p0[:, None, axis] + ts[None, :] * (p1[:, None, axis] - p0[:, None, axis])
    inside = surface.levelset(pts) <= tol
    changes = np.count_nonzero(inside[:, 1:] != inside[:, :-1], axis=1)
    if np.any(changes > 1):
        raise MultipleRootsInCell(
            f"{int(np.sum(changes > 1))} segment(s) along axis {axis} hold several roots; "
            f"refine the grid (N={N})"
        )


def find_intersections(surface: ImplicitSurface, grids, tol=None) -> ControlPointSet:
    """All crossings of the surface with the nine line families of the staggered grids.

    Lines parallel to axis ``d`` are those whose two transverse sample indices are
    not both odd (odd samples sit on integer grid indices).  A line grazing
    the surface may cross twice inside one node spacing; both crossings are
    kept and the corrections skip arms whose end nodes share a side.  Raises
    :class:`MultipleRootsInCell` when sub-sampling a bracketed half-spacing
    segment reveals more than one sign change.
    """
    tol = 1e-12 * grids.h if tol is None else tol
    H = half_lattice_inside(surface, grids, tol)
    S = grids.S
    xs = grids.half_coords()
    locs, axes, lines, segs = [], [], [], []
    for d in range(3):
        Hd = np.moveaxis(H, d, 0)
        cross = Hd[1:] != Hd[:-1]  # (S-1, S, S) segments along d
        others = [e for e in range(3) if e != d]
        both_odd = (np.arange(S)[:, None] % 2 == 1) & (np.arange(S)[None, :] % 2 == 1)
        cross &= ~both_odd[None, :, :]
        sg, l0, l1 = np.nonzero(cross)
        if len(sg) == 0:
            continue
        p0 = np.empty((len(sg), 3))
        p0[:, d] = xs[sg]
        p0[:, others[0]] = xs[l0]
        p0[:, others[1]] = xs[l1]
        p1 = p0.copy()
        p1[:, d] = xs[sg + 1]
        lower_in = Hd[sg, l0, l1]
        _check_single_root(surface, p0, p1, d, tol, grids.N)
        t = _line_root(surface, p0, p1, d, lower_in, tol)
        p = p0.copy()
        p[:, d] = t
        # deterministic order: axis, line, position along line
        order = np.lexsort((sg, l1, l0))
        locs.append(p[order])
        axes.append(np.full(len(sg), d))
        lines.append(np.stack([l0, l1], axis=1)[order])
        segs.append(sg[order])
    if locs:
        loc = np.concatenate(locs)
        ax = np.concatenate(axes)
        ln = np.concatenate(lines)
        sg = np.concatenate(segs)
    else:
        loc, ax, ln, sg = np.zeros((0, 3)), np.zeros(0, int), np.zeros((0, 2), int), np.zeros(0, int)
    if len(loc):
        n, t1, t2 = frames(surface, loc)
    else:
        n = t1 = t2 = np.zeros((0, 3))
    coords = np.zeros((len(loc), 3), dtype=np.int64)
    for d in range(3):
        sel = ax == d
        others = [e for e in range(3) if e != d]
        coords[sel, d] = sg[sel]
        coords[sel, others[0]] = ln[sel, 0]
        coords[sel, others[1]] = ln[sel, 1]
    lower_inside = H[coords[:, 0], coords[:, 1], coords[:, 2]] if len(loc) else np.zeros(0, bool)
    cps = ControlPointSet(
        grids=grids,
        location=loc,
        axis=ax,
        line=ln,
        seg=sg,
        s=loc[np.arange(len(loc)), ax] if len(loc) else np.zeros(0),
        normal=n,
        tangent1=t1,
        tangent2=t2,
        lower_inside=lower_inside,
        half_inside=H,
    )
    cps._build_keys()
    return cps
