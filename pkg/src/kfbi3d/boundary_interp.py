"""One-sided limits of grid fields at control points.

The velocity stencil is the ten-node corner pattern ``b + s * (i, j, k)``,
``i + j + k <= 2``, where ``b`` is a grid node of the component's family near
the control point and ``s`` points from ``b`` toward it.  Such a stencil is
unisolvent for quadratics.  Nodes off the domain side are shifted by the
Taylor polynomial of the jump,

    v_i + J_i,    J_i = [[v]] + d_i . [[grad v]] + d_i^T [[grad grad v]] d_i / 2,

so that all ten values sample the smooth domain-side extension.  Since the
fit is linear, the limit is ``sum w_i v_i`` plus a jump term that only needs
three aggregated weights per point.  The pressure uses the four-node corner
``b, b + s_a e_a`` and a linear fit.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import NoValidStencil
from .grid import UFAMS

QUAD_PATTERN = np.array([c for c in itertools.product(range(3), repeat=3) if sum(c) <= 2])
LIN_PATTERN = np.array([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)])


def quad_design(d):
    """Rows ``1, xi, eta, gam, xi^2/2, eta^2/2, gam^2/2, eta gam, xi gam, xi eta`` for offsets ``d`` (..., 3)."""
    a, b, c = d[..., 0], d[..., 1], d[..., 2]
    one = np.ones_like(a)
    return np.stack([one, a, b, c, 0.5 * a * a, 0.5 * b * b, 0.5 * c * c, b * c, a * c, a * b], axis=-1)


def lin_design(d):
    return np.concatenate([np.ones(d.shape[:-1] + (1,)), d], axis=-1)


@dataclass
class InterpStencil:
    """Stencil of one control point for one family (offsets in lengths)."""

    center: int
    family: str
    nodes: np.ndarray  # (K, 3) storage indices
    inside: np.ndarray  # (K,) side flags
    offsets: np.ndarray  # (K, 3) z_i - x
    weights: np.ndarray  # (K,) weights of the limit value
    cond: float
    rounds: int


def _node_real_index(grids, fam, x):
    s0 = np.asarray(grids.sample_start(fam))
    return ((x - grids.lo) * 2.0 / grids.h + 1.0 - s0) / 2.0


def _interior_bounds(grids, fam):
    sl = grids.interior(fam)
    return np.array([s.start for s in sl]), np.array([s.stop - 1 for s in sl])


def _candidates(q):
    """Ordered (base, sign) candidates per point: nearest node first, then its neighbours by distance."""
    b0 = np.rint(q).astype(np.int64)
    deltas = np.array(list(itertools.product((-1, 0, 1), repeat=3)))
    out = []
    for dl in deltas:
        base = b0 + dl
        r = q - base
        s = np.where(r >= 0, 1, -1)
        dist = np.linalg.norm(r, axis=1)
        out.append((base, s, dist))
    # round 0 is the nearest node; later rounds sorted by distance per point
    dist = np.stack([o[2] for o in out], axis=1)
    order = np.argsort(dist, axis=1, kind="stable")
    bases = np.stack([o[0] for o in out], axis=1)
    signs = np.stack([o[1] for o in out], axis=1)
    M = len(q)
    rows = np.arange(M)[:, None]
    return bases[rows, order], signs[rows, order]


def _select(grids, fam, x, pattern, cond_max):
    """Pick the first candidate stencil per point lying on unknown nodes with a conditioned fit."""
    h = grids.h
    q = _node_real_index(grids, fam, x)
    lo, hi = _interior_bounds(grids, fam)
    bases, signs = _candidates(q)
    M, R = bases.shape[:2]
    chosen = np.full(M, -1)
    nodes = np.zeros((M, len(pattern), 3), dtype=np.int64)
    coords = grids.coords(fam)
    design = quad_design if len(pattern) == 10 else lin_design
    conds = np.full(M, np.inf)
    for r in range(R):
        todo = np.nonzero(chosen < 0)[0]
        if len(todo) == 0:
            break
        nd = bases[todo, r][:, None, :] + signs[todo, r][:, None, :] * pattern[None, :, :]
        ok = np.all((nd >= lo) & (nd <= hi), axis=(1, 2))
        if not np.any(ok):
            continue
        t = todo[ok]
        nd = nd[ok]
        pts = np.stack([coords[a][nd[..., a]] for a in range(3)], axis=-1)
        V = design((pts - x[t, None, :]) / h)
        c = np.linalg.cond(V)
        good = c <= cond_max
        chosen[t[good]] = r
        nodes[t[good]] = nd[good]
        conds[t[good]] = c[good]
    if np.any(chosen < 0):
        bad = int(np.argmax(chosen < 0))
        raise NoValidStencil(f"no conditioned {fam} stencil near control point {bad} at {x[bad]}")
    return nodes, chosen, conds


class BoundaryInterpolator:
    """Cached stencils and weights for all control points and families.

    ``extract(field, jd)`` returns ``(u_plus, u_minus)`` of shape ``(M, 3)``;
    ``extract_pressure`` does the same for the pressure.
    """

    def __init__(self, grids, control_points, masks, cond_max=1e8, keep_gradient=False):
        self.grids = grids
        self.cps = control_points
        self.masks = masks
        h = grids.h
        x = control_points.location
        M = len(x)
        self.flat, self.w, self.W0, self.W1, self.W2 = {}, {}, {}, {}, {}
        self.rounds, self.cond, self.grad_w = {}, {}, {}
        for fam in UFAMS + ("p",):
            pattern = QUAD_PATTERN if fam != "p" else LIN_PATTERN
            design = quad_design if fam != "p" else lin_design
            nodes, rounds, conds = _select(grids, fam, x, pattern, cond_max)
            coords = grids.coords(fam)
            pts = np.stack([coords[a][nodes[..., a]] for a in range(3)], axis=-1)
            d = pts - x[:, None, :]
            V = design(d / h)
            K = V.shape[-1]
            rhs = np.zeros((M, K, 4 if keep_gradient else 1))
            rhs[:, 0, 0] = 1.0
            if keep_gradient:
                for a in range(3):
                    rhs[:, 1 + a, 1 + a] = 1.0 / h
            W = np.linalg.solve(np.transpose(V, (0, 2, 1)), rhs)  # (M, K, r)
            w = W[..., 0]
            inside = masks.inside[fam][nodes[..., 0], nodes[..., 1], nodes[..., 2]]
            wo = np.where(inside, 0.0, w)
            self.flat[fam] = np.ravel_multi_index(tuple(np.moveaxis(nodes, -1, 0)), grids.shape(fam))
            self.w[fam] = w
            self.W0[fam] = wo.sum(axis=1)
            self.W1[fam] = np.einsum("mk,mka->ma", wo, d)
            self.W2[fam] = 0.5 * np.einsum("mk,mka,mkb->mab", wo, d, d) if fam != "p" else None
            self.rounds[fam] = rounds
            self.cond[fam] = conds
            if keep_gradient:
                self.grad_w[fam] = (W[..., 1:], np.where(inside, 0.0, 1.0))

    def stencil(self, i, fam):
        """:class:`InterpStencil` view of the cached data for control point ``i``."""
        nodes = np.stack(np.unravel_index(self.flat[fam][i], self.grids.shape(fam)), axis=-1)
        coords = self.grids.coords(fam)
        pts = np.stack([coords[a][nodes[:, a]] for a in range(3)], axis=-1)
        inside = self.masks.inside[fam][nodes[:, 0], nodes[:, 1], nodes[:, 2]]
        return InterpStencil(i, fam, nodes, inside, pts - self.cps.location[i], self.w[fam][i].copy(),
                             float(self.cond[fam][i]), int(self.rounds[fam][i]))

    def _plain(self, arr, fam):
        return np.einsum("mk,mk->m", self.w[fam], arr.ravel()[self.flat[fam]])

    def extract(self, field, jd=None):
        """Velocity limits from the domain side and from the complement at every control point."""
        M = len(self.cps)
        plus = np.empty((M, 3))
        for m, fam in enumerate(UFAMS):
            v = self._plain(field[fam], fam)
            if jd is not None:
                v = v + (self.W0[fam] * jd.u[:, m] + np.einsum("ma,ma->m", self.W1[fam], jd.grad_u[:, m, :])
                         + np.einsum("mab,mab->m", self.W2[fam], jd.hess_u[:, m, :, :]))
            plus[:, m] = v
        minus = plus - (jd.u if jd is not None else 0.0)
        return plus, minus

    def extract_pressure(self, field, jd=None):
        v = self._plain(field.p, "p")
        if jd is not None:
            v = v + self.W0["p"] * jd.p + np.einsum("ma,ma->m", self.W1["p"], jd.grad_p)
        return v, v - (jd.p if jd is not None else 0.0)

    def velocity_gradient(self, field, jd=None):
        """Domain-side velocity gradient ``(M, 3, 3)`` from the same quadratic fits (diagnostics)."""
        if not self.grad_w:
            raise ValueError("interpolator was built without keep_gradient=True")
        M = len(self.cps)
        G = np.empty((M, 3, 3))
        coords_cache = {}
        for m, fam in enumerate(UFAMS):
            Wg, outside = self.grad_w[fam]
            vals = field[fam].ravel()[self.flat[fam]]
            if jd is not None:
                if fam not in coords_cache:
                    nodes = np.stack(np.unravel_index(self.flat[fam], self.grids.shape(fam)), axis=-1)
                    c = self.grids.coords(fam)
                    coords_cache[fam] = np.stack([c[a][nodes[..., a]] for a in range(3)], -1) - self.cps.location[:, None]
                d = coords_cache[fam]
                J = (jd.u[:, m, None] + np.einsum("mka,ma->mk", d, jd.grad_u[:, m])
                     + 0.5 * np.einsum("mka,mab,mkb->mk", d, jd.hess_u[:, m], d))
                vals = vals + outside * J
            G[:, m, :] = np.einsum("mka,mk->ma", Wg, vals)
        return G

    def traction(self, field, jd, mu, kappa=1.0):
        """Domain-side traction ``-kappa p n + mu (grad u + grad u^T) n`` (diagnostics)."""
        G = self.velocity_gradient(field, jd)
        p, _ = self.extract_pressure(field, jd)
        n = self.cps.normal
        return -kappa * p[:, None] * n + mu * np.einsum("mij,mj->mi", G + G.transpose(0, 2, 1), n)


def build_stencil(cp_index, grids, control_points, masks, component="u1"):
    """Stencil for one control point and one family (``"u1" | "u2" | "u3" | "p"``)."""
    x = control_points.location[cp_index:cp_index + 1]
    pattern = QUAD_PATTERN if component != "p" else LIN_PATTERN
    nodes, rounds, conds = _select(grids, component, x, pattern, 1e8)
    nodes = nodes[0]
    coords = grids.coords(component)
    pts = np.stack([coords[a][nodes[:, a]] for a in range(3)], axis=-1)
    d = pts - x[0]
    design = quad_design if component != "p" else lin_design
    V = design(d / grids.h)
    e0 = np.zeros(len(pattern))
    e0[0] = 1.0
    w = np.linalg.solve(V.T, e0)
    inside = masks.inside[component][nodes[:, 0], nodes[:, 1], nodes[:, 2]]
    return InterpStencil(int(cp_index), component, nodes, inside, d, w, float(conds[0]), int(rounds[0]))


def extract_one_sided(values, jumps, stencil: InterpStencil):
    """``(value+, value-)`` of one scalar component from a stencil.

    ``values`` is the storage array of the stencil's family; ``jumps`` is a
    tuple ``(J0, J1, J2)`` with the value, gradient (3,) and Hessian (3, 3)
    jumps of that component (``J2`` ignored for the pressure).
    """
    J0, J1, J2 = jumps
    d = stencil.offsets
    v = values[stencil.nodes[:, 0], stencil.nodes[:, 1], stencil.nodes[:, 2]].astype(float)
    J = J0 + d @ np.asarray(J1)
    if stencil.family != "p":
        J = J + 0.5 * np.einsum("ka,ab,kb->k", d, np.asarray(J2), d)
    v = v + np.where(stencil.inside, 0.0, J)
    plus = float(stencil.weights @ v)
    return plus, plus - J0
