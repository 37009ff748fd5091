"""Staggered MAC grid families on the bounding cube and their difference operators.

Five node families live on the cube ``[lo, hi]^3`` with ``N`` cells per side:

========  =============================  ======================
family    node                           storage shape
========  =============================  ======================
``"v"``   (x_i, y_j, z_k)                (N+1, N+1, N+1)
``"p"``   (x_{i-1/2}, y_{j-1/2}, ...)    (N, N, N)
``"u1"``  (x_i, y_{j-1/2}, z_{k-1/2})    (N+1, N+2, N+2)
``"u2"``  (x_{i-1/2}, y_j, z_{k-1/2})    (N+2, N+1, N+2)
``"u3"``  (x_{i-1/2}, y_{j-1/2}, z_k)    (N+2, N+2, N+1)
========  =============================  ======================

Arrays are indexed ``[i, j, k]`` (x, y, z).  Every node of every family is
also a sample of the *half lattice* ``lo + (s - 1) h / 2``, ``s = 0 .. 2N+2``,
which is where intersections and side flags are computed.

Velocity nodes on the cube faces are Dirichlet (zero); the ghost layers of the
cell-centred directions carry the antisymmetric reflection so that the
homogeneous condition holds on the face.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidN

FAMILIES = ("p", "u1", "u2", "u3")
UFAMS = ("u1", "u2", "u3")


@dataclass(frozen=True)
class StaggeredGridSet:
    N: int
    lo: float = -1.2
    hi: float = 1.2

    @property
    def h(self):
        return (self.hi - self.lo) / self.N

    @property
    def side(self):
        return self.hi - self.lo

    @property
    def S(self):
        """Number of half-lattice samples per direction."""
        return 2 * self.N + 3

    def half_coords(self):
        s = np.arange(self.S)
        return self.lo + 0.5 * (s - 1) * self.h

    def sample_start(self, fam):
        """Half-lattice sample index of storage index 0, per axis."""
        if fam == "v":
            return (1, 1, 1)
        if fam == "p":
            return (2, 2, 2)
        m = UFAMS.index(fam)
        return tuple(1 if a == m else 0 for a in range(3))

    def shape(self, fam):
        N = self.N
        if fam == "v":
            return (N + 1,) * 3
        if fam == "p":
            return (N,) * 3
        m = UFAMS.index(fam)
        return tuple(N + 1 if a == m else N + 2 for a in range(3))

    def size(self, fam):
        return int(np.prod(self.shape(fam)))

    def coords(self, fam):
        """1D coordinate arrays of the storage lattice of ``fam``."""
        xs = self.half_coords()
        return tuple(xs[s0::2][:n] for s0, n in zip(self.sample_start(fam), self.shape(fam)))

    def points(self, fam, sl=None):
        X = np.meshgrid(*self.coords(fam), indexing="ij")
        P = np.stack(X, axis=-1)
        return P if sl is None else P[sl]

    def interior(self, fam):
        """Storage slices of the unknowns (nodes where equations are imposed)."""
        N = self.N
        if fam == "p":
            return (slice(0, N),) * 3
        m = UFAMS.index(fam)
        return tuple(slice(1, N) if a == m else slice(1, N + 1) for a in range(3))

    def interior_shape(self, fam):
        N = self.N
        if fam == "p":
            return (N,) * 3
        m = UFAMS.index(fam)
        return tuple(N - 1 if a == m else N for a in range(3))

    def sample_slices(self, fam, sl=None, offset=(0, 0, 0)):
        """Half-lattice slices addressing the nodes ``storage[sl]`` shifted by ``offset`` samples."""
        sl = sl if sl is not None else self.interior(fam)
        out = []
        for a, (s0, sa) in enumerate(zip(self.sample_start(fam), sl)):
            start = s0 + 2 * sa.start + offset[a]
            stop = s0 + 2 * (sa.stop - 1) + offset[a] + 1
            out.append(slice(start, stop, 2))
        return tuple(out)

    def sample_index(self, fam, idx):
        """Half-lattice sample coordinates of storage multi-indices ``idx`` (..., 3)."""
        return np.asarray(self.sample_start(fam)) + 2 * np.asarray(idx)


def build_grids(N: int, box=(-1.2, 1.2)) -> StaggeredGridSet:
    if int(N) != N or N < 4:
        raise InvalidN(f"N must be an integer >= 4, got {N}")
    lo, hi = box
    return StaggeredGridSet(int(N), float(lo), float(hi))


# --------------------------------------------------------------------------
# fields


@dataclass
class MACField:
    """Velocity components and pressure on their native storage lattices."""

    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    p: np.ndarray

    def __getitem__(self, fam):
        return getattr(self, fam)

    @classmethod
    def zeros(cls, grids):
        return cls(*(np.zeros(grids.shape(f)) for f in ("u1", "u2", "u3", "p")))

    @classmethod
    def from_interior(cls, grids, u1, u2, u3, p, fill_ghosts=True):
        f = cls.zeros(grids)
        for fam, v in zip(UFAMS, (u1, u2, u3)):
            arr = f[fam]
            arr[grids.interior(fam)] = v
            if fill_ghosts:
                fill_ghost_layers(arr, UFAMS.index(fam))
        f.p[...] = p
        return f

    def interior(self, grids):
        return tuple(self[f][grids.interior(f)] for f in ("u1", "u2", "u3", "p"))

    def copy(self):
        return MACField(self.u1.copy(), self.u2.copy(), self.u3.copy(), self.p.copy())


def fill_ghost_layers(arr, normal_axis):
    """Zero the face nodes and reflect antisymmetrically into the ghost layers (in place)."""
    for a in range(3):
        idx_lo = [slice(None)] * 3
        idx_hi = [slice(None)] * 3
        if a == normal_axis:
            idx_lo[a], idx_hi[a] = 0, -1
            arr[tuple(idx_lo)] = 0.0
            arr[tuple(idx_hi)] = 0.0
        else:
            src_lo, src_hi = [slice(None)] * 3, [slice(None)] * 3
            idx_lo[a], src_lo[a] = 0, 1
            idx_hi[a], src_hi[a] = -1, -2
            arr[tuple(idx_lo)] = -arr[tuple(src_lo)]
            arr[tuple(idx_hi)] = -arr[tuple(src_hi)]
    return arr


# --------------------------------------------------------------------------
# operators on interior (unknown) arrays with the box boundary conditions


def _pad(v, axis, dirichlet_node):
    """Pad one layer on both ends of ``axis``: zeros (node-aligned) or antisymmetric ghosts."""
    if dirichlet_node:
        width = [(0, 0)] * 3
        width[axis] = (1, 1)
        return np.pad(v, width)
    lo = -np.take(v, [0], axis=axis)
    hi = -np.take(v, [-1], axis=axis)
    return np.concatenate([lo, v, hi], axis=axis)


def laplacian(v, fam, h):
    """Seven-point Laplacian of an interior array of family ``fam`` with the box BCs."""
    m = UFAMS.index(fam) if fam in UFAMS else -1
    out = np.zeros_like(v)
    for a in range(3):
        w = _pad(v, a, a == m)
        n = v.shape[a]
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[a], hi[a] = slice(0, n), slice(2, n + 2)
        out += w[tuple(lo)] + w[tuple(hi)]
    out -= 6.0 * v
    return out / (h * h)


def gradient(p, h):
    """MAC gradient (forward differences of the cell-centred pressure) onto the face interiors."""
    return tuple(np.diff(p, axis=a) / h for a in range(3))


def divergence(u1, u2, u3, h):
    """MAC divergence (backward differences of face values) at cell centres; face nodes are zero."""
    out = None
    for a, u in enumerate((u1, u2, u3)):
        d = np.diff(_pad(u, a, True), axis=a) / h
        out = d if out is None else out + d
    return out


def stokes_apply(u, p, mu, c, h):
    """Block operator ``(-mu L u + G p, D u + c p)`` on interior arrays."""
    G = gradient(p, h)
    mom = tuple(-mu * laplacian(ui, fam, h) + gi for ui, fam, gi in zip(u, UFAMS, G))
    cont = divergence(*u, h) + c * p
    return mom, cont


# --------------------------------------------------------------------------
# operators on storage lattices (use the stored neighbours as they are)


def _lap_storage(arr, sl, h):
    out = -6.0 * arr[sl]
    for a in range(3):
        for sh in (-1, 1):
            s2 = list(sl)
            s2[a] = slice(sl[a].start + sh, sl[a].stop + sh)
            out = out + arr[tuple(s2)]
    return out / (h * h)


def mac_apply(field: MACField, mu, c, grids: StaggeredGridSet) -> MACField:
    """Uncorrected MAC residual ``(-mu L u + G p, D u + c p)`` at the interior index sets.

    Pure stencils on the stored values; ghost and face entries of the result are zero.
    """
    h = grids.h
    res = MACField.zeros(grids)
    p = field.p
    for m, fam in enumerate(UFAMS):
        sl = grids.interior(fam)
        lap = _lap_storage(field[fam], sl, h)
        # pressure cells adjacent to the face nodes in the interior range
        gp = np.diff(p, axis=m) / h
        res[fam][sl] = -mu * lap + gp
    div = np.zeros(grids.shape("p"))
    N = grids.N
    for m, fam in enumerate(UFAMS):
        u = field[fam]
        sl = [slice(1, N + 1)] * 3
        sl[m] = slice(0, N + 1)
        div += np.diff(u[tuple(sl)], axis=m) / h
    res.p[...] = div + c * p
    return res


# --------------------------------------------------------------------------
# node masks


@dataclass
class NodeMask:
    """Side flags on storage lattices and irregular flags on the interior unknowns."""

    inside: dict
    irregular: dict

    def regular(self, fam):
        return ~self.irregular[fam]


def crossed_segments(control_points):
    """Per-axis boolean half lattices marking segment starts that contain a control point."""
    S = control_points.grids.S
    out = []
    c = control_points.sample_coords()
    for d in range(3):
        C = np.zeros((S, S, S), dtype=bool)
        sel = control_points.axis == d
        C[c[sel, 0], c[sel, 1], c[sel, 2]] = True
        out.append(C)
    return out


def stencil_arms(fam):
    """Arms of the stencil at a node of ``fam`` as (axis, sample shift) pairs."""
    if fam == "p":
        return [(a, s) for a in range(3) for s in (-1, 1)]
    m = UFAMS.index(fam)
    arms = [(a, s) for a in range(3) for s in (-2, 2)]
    arms += [(m, -1), (m, 1)]
    return arms


def arm_crosses(crossed, grids, fam, axis, shift, sl=None):
    """Boolean lattice (over ``storage[sl]``) telling whether the arm crosses the interface."""
    out = None
    segs = range(0, shift) if shift > 0 else range(shift, 0)
    for o in segs:
        off = [0, 0, 0]
        off[axis] = o
        v = crossed[axis][grids.sample_slices(fam, sl, off)]
        out = v if out is None else out | v
    return out


def mark_nodes(grids, surface, control_points) -> NodeMask:
    """Inside/outside and regular/irregular flags derived from the control-point line data."""
    H = control_points.half_inside
    crossed = crossed_segments(control_points)
    inside, irregular = {}, {}
    for fam in ("v", "p", "u1", "u2", "u3"):
        full = tuple(slice(0, n) for n in grids.shape(fam))
        inside[fam] = H[grids.sample_slices(fam, full)].copy()
    for fam in FAMILIES:
        irr = np.zeros(grids.interior_shape(fam), dtype=bool)
        for axis, shift in stencil_arms(fam):
            irr |= arm_crosses(crossed, grids, fam, axis, shift)
        irregular[fam] = irr
    return NodeMask(inside, irregular)
