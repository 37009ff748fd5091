"""Right-hand-side corrections of the MAC scheme at irregular nodes.

A stencil coefficient ``a`` acting on a neighbour across the interface sees
the other side's values.  With ``s = +1`` for a centre in the domain and
``-1`` outside, the neighbour value is the centre-side extension minus
``s * J`` where ``J`` is the Taylor extension of the jump from the crossing
``r`` to the neighbour:

    J = [[v]] + xi [[v_d]] + xi^2 / 2 [[v_dd]],    xi = x_neighbour - r.

Adding ``C = -s * a * J`` to the right-hand side restores consistency.  The
three public primitives below evaluate this for the Laplacian, the pressure
gradient and the divergence; :class:`CorrectionPlan` precomputes the
geometry so that assembling all corrections for new jumps is a gather.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import MissingCrossingData
from .grid import FAMILIES, UFAMS, arm_crosses, crossed_segments, stencil_arms

EQUATIONS = ("mom-x", "mom-y", "mom-z", "continuity")


def _taylor(jump, xi):
    j = tuple(jump) + (0.0,) * (3 - len(jump))
    return j[0] + xi * j[1] + 0.5 * xi * xi * j[2]


def _side(center_inside):
    return np.where(center_inside, 1.0, -1.0)


def correction_laplacian(jump, xi, mu, h, center_inside=True):
    """Correction added to the momentum right-hand side for one crossed Laplacian arm.

    ``jump`` is ``([[v]], [[v_d]], [[v_dd]])`` at the crossing along the arm
    direction ``d``.
    """
    return _side(center_inside) * (mu / (h * h)) * _taylor(jump, xi)


def correction_gradient_p(jump, xi_p, h, center_inside=True, arm=-1):
    """Correction for the two-point pressure gradient at a face node.

    ``jump`` is ``([[p]], [[p_d]])``; ``arm`` is the side of the crossed
    pressure neighbour (``-1`` for the lower cell).
    """
    j0, j1 = tuple(jump)[:2]
    a = arm / h
    return -_side(center_inside) * a * (j0 + xi_p * j1)


def correction_divergence(jump, xi_u, h, center_inside=True, arm=-1):
    """Correction for one face term of the cell divergence; ``arm`` is the face side (``-1`` lower)."""
    a = arm / h
    return -_side(center_inside) * a * _taylor(jump, xi_u)


@dataclass
class CorrectionLedger:
    """Corrections per equation family on the interior index sets.

    ``values`` maps ``"u1" | "u2" | "u3" | "p"`` to arrays of the interior
    shapes; ``records`` (optional) lists every contributing arm.
    """

    values: dict
    records: dict | None = None

    @classmethod
    def empty(cls, grids):
        return cls({f: np.zeros(grids.interior_shape(f)) for f in FAMILIES})

    def rhs(self, f, g):
        """Add the corrections to an uncorrected right-hand side ``(f1, f2, f3), g``."""
        return tuple(fi + self.values[fam] for fi, fam in zip(f, UFAMS)), g + self.values["p"]

    def nonzero(self):
        return {f: np.argwhere(v != 0.0) for f, v in self.values.items()}

    def clear(self):
        for v in self.values.values():
            v[...] = 0.0

    def to_csv(self, path):
        if self.records is None:
            raise ValueError("ledger was assembled without records")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["equation", "i", "j", "k", "axis", "shift", "control_point", "value"])
            for fam, eq in zip(FAMILIES[1:] + FAMILIES[:1], EQUATIONS):
                r = self.records[fam]
                for row in zip(*(r[k] for k in ("i", "j", "k", "axis", "shift", "cp", "value"))):
                    w.writerow([eq, *map(int, row[:6]), repr(float(row[6]))])


class CorrectionPlan:
    """Geometry of every crossed stencil arm, reusable for any jump data on the same grids.

    Each term is ``coef * (J0 + xi J1 + xi^2/2 J2)`` where the jump comes from
    control point ``cp`` for velocity component ``comp`` (or the pressure when
    ``comp == 3``) and derivative axis ``axis``.
    """

    def __init__(self, grids, control_points, mu=1.0):
        self.grids = grids
        self.cps = control_points
        self.mu = mu
        h = grids.h
        H = control_points.half_inside
        crossed = crossed_segments(control_points)
        xs = grids.half_coords()
        self.terms = {}
        for fam in FAMILIES:
            shape = grids.interior_shape(fam)
            start = np.array([sl.start for sl in grids.interior(fam)])
            parts = []
            for axis, shift in stencil_arms(fam):
                hit = arm_crosses(crossed, grids, fam, axis, shift)
                idx = np.argwhere(hit)
                if len(idx) == 0:
                    continue
                c = grids.sample_index(fam, idx + start)
                nb = c.copy()
                nb[:, axis] += shift
                cin = H[c[:, 0], c[:, 1], c[:, 2]]
                nin = H[nb[:, 0], nb[:, 1], nb[:, 2]]
                keep = cin != nin  # arms grazing twice keep both ends on one side
                idx, c, nb, cin = idx[keep], c[keep], nb[keep], cin[keep]
                if len(idx) == 0:
                    continue
                cp = np.full(len(idx), -1, dtype=np.int64)
                offs = range(0, shift) if shift > 0 else range(shift, 0)
                for o in offs:
                    seg = c.copy()
                    seg[:, axis] += o
                    found = control_points.lookup(axis, seg)
                    cp = np.where(found >= 0, found, cp)
                if np.any(cp < 0):
                    bad = idx[np.argmax(cp < 0)]
                    raise MissingCrossingData(f"{fam} node {tuple(bad)} arm ({axis},{shift}) has no control point")
                xi = xs[nb[:, axis]] - control_points.location[cp, axis]
                s = np.where(cin, 1.0, -1.0)
                if fam == "p":
                    comp = np.full(len(idx), axis)
                    coef = -s * np.sign(shift) / h
                    order2 = np.ones(len(idx))
                elif abs(shift) == 2:
                    comp = np.full(len(idx), UFAMS.index(fam))
                    coef = s * mu / (h * h)
                    order2 = np.ones(len(idx))
                else:
                    comp = np.full(len(idx), 3)
                    coef = -s * np.sign(shift) / h
                    order2 = np.zeros(len(idx))
                flat = np.ravel_multi_index(idx.T, shape)
                parts.append(dict(flat=flat, idx=idx, axis=np.full(len(idx), axis), shift=np.full(len(idx), shift),
                                  cp=cp, comp=comp, xi=xi, coef=coef, order2=order2))
            if parts:
                self.terms[fam] = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
            else:
                self.terms[fam] = None

    def term_values(self, fam, jd):
        t = self.terms[fam]
        cp, comp, ax = t["cp"], t["comp"], t["axis"]
        isp = comp == 3
        ci = np.where(isp, 0, comp)
        j0 = np.where(isp, jd.p[cp], jd.u[cp, ci])
        j1 = np.where(isp, jd.grad_p[cp, ax], jd.grad_u[cp, ci, ax])
        j2 = np.where(isp, 0.0, jd.hess_u[cp, ci, ax, ax]) * t["order2"]
        xi = t["xi"]
        return t["coef"] * (j0 + xi * j1 + 0.5 * xi * xi * j2)

    def apply(self, jd, with_records=False) -> CorrectionLedger:
        g = self.grids
        ledger = CorrectionLedger.empty(g)
        records = {} if with_records else None
        for fam in FAMILIES:
            t = self.terms[fam]
            if t is None:
                if with_records:
                    records[fam] = {k: np.zeros(0) for k in ("i", "j", "k", "axis", "shift", "cp", "value")}
                continue
            vals = self.term_values(fam, jd)
            size = int(np.prod(g.interior_shape(fam)))
            ledger.values[fam] = np.bincount(t["flat"], weights=vals, minlength=size).reshape(g.interior_shape(fam))
            if with_records:
                records[fam] = dict(i=t["idx"][:, 0], j=t["idx"][:, 1], k=t["idx"][:, 2], axis=t["axis"],
                                    shift=t["shift"], cp=t["cp"], value=vals)
        ledger.records = records
        return ledger


def assemble_corrections(masks, control_points, jumps, problem, with_records=False) -> CorrectionLedger:
    """Corrections for ``jumps`` on the grids of ``control_points``.

    ``problem`` supplies the viscosity as ``problem.mu``.  ``masks`` is
    accepted for interface symmetry; the crossed arms are recomputed from the
    control points so that the two can be cross-checked in tests.
    """
    plan = CorrectionPlan(control_points.grids, control_points, mu=problem.mu)
    return plan.apply(jumps, with_records=with_records)
