"""Cartesian jumps of (u, p) and their derivatives at the control points.

Given the density ``phi = [[u]]`` and the forcing jump ``F = [[f~]]`` on the
surface, the jumps consumed by the corrections and by the one-sided
interpolation are rebuilt point by point:

1. tangential derivatives of ``phi`` from a quadratic least-squares fit over
   nearby control points, in scaled tangent-plane coordinates;
2. the normal derivative ``[[du/dn]]`` and ``[[p]]`` from traction continuity
   ``-kappa [[p]] n + mu ([[grad u]] + [[grad u]]^T) n = 0`` and
   ``tr [[grad u]] + c [[p]] = 0``;
3. the tangential/mixed blocks of ``[[grad grad u]]`` and the tangential part of
   ``[[grad p]]`` by fitting the first-stage jumps again;
4. the normal-normal block and ``n . [[grad p]]`` from the jumped momentum
   equation and the normal derivative of the jumped continuity equation.

``kappa`` is 1 for Stokes and ``lambda / (lambda + mu)`` for the Navier
system written with ``p = -(lambda + mu) div u``, so that the condition is
continuity of the elastic traction.  Every step is linear in ``(phi, F)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import RankDeficientFit, SingularClosure


@dataclass
class JumpData:
    """Per-control-point jumps (``+`` side is the domain, ``-`` the complement).

    Index conventions: ``grad_u[m, i, j] = [[d_j u_i]]`` and
    ``hess_u[m, i, j, k] = [[d_j d_k u_i]]``.
    """

    u: np.ndarray  # (M, 3)
    grad_u: np.ndarray  # (M, 3, 3)
    hess_u: np.ndarray  # (M, 3, 3, 3)
    p: np.ndarray  # (M,)
    grad_p: np.ndarray  # (M, 3)
    f: np.ndarray  # (M, 3)

    @classmethod
    def zeros(cls, M):
        return cls(np.zeros((M, 3)), np.zeros((M, 3, 3)), np.zeros((M, 3, 3, 3)),
                   np.zeros(M), np.zeros((M, 3)), np.zeros((M, 3)))

    def __len__(self):
        return len(self.p)

    def scaled(self, a):
        return JumpData(*(a * getattr(self, k) for k in ("u", "grad_u", "hess_u", "p", "grad_p", "f")))

    def __add__(self, other):
        return JumpData(*(getattr(self, k) + getattr(other, k)
                          for k in ("u", "grad_u", "hess_u", "p", "grad_p", "f")))

    def as_rows(self):
        """Flat ``(M, 46)`` table: u(3), grad_u(9), hess_u(27), p, grad_p(3), f(3)."""
        M = len(self)
        return np.hstack([self.u, self.grad_u.reshape(M, 9), self.hess_u.reshape(M, 27),
                          self.p[:, None], self.grad_p, self.f])

    @staticmethod
    def column_names():
        names = [f"u{i+1}" for i in range(3)]
        names += [f"du{i+1}_d{j+1}" for i in range(3) for j in range(3)]
        names += [f"ddu{i+1}_d{j+1}{k+1}" for i in range(3) for j in range(3) for k in range(3)]
        names += ["p"] + [f"dp_d{j+1}" for j in range(3)] + [f"f{i+1}" for i in range(3)]
        return names


@dataclass(frozen=True)
class InterfaceParams:
    """Material constants of the unified interface problem."""

    mu: float = 1.0
    c: float = 0.0
    kappa: float = 1.0

    @classmethod
    def stokes(cls, mu=1.0):
        return cls(mu, 0.0, 1.0)

    @classmethod
    def navier(cls, lam, mu):
        return cls(mu, 1.0 / (lam + mu), lam / (lam + mu))


def _quad_design(xi, eta):
    one = np.ones_like(xi)
    return np.stack([one, xi, eta, 0.5 * xi * xi, xi * eta, 0.5 * eta * eta], axis=-1)


class SurfaceFitter:
    """Least-squares quadratic fits on the surface, cached per control-point set.

    For every control point (the targets) the ``k`` nearest points of the
    ``source`` subset (all points by default) within ``radius_factor * h`` are
    projected on the target's tangent plane and scaled by ``h``.  Rows of the
    pseudo-inverse of the 6-column design matrix are linear weights for the
    fitted value (``D0``) and the two tangential derivatives (``D1``, ``D2``),
    stored as sparse ``(M, len(source))`` matrices.
    """

    def __init__(self, control_points, source=None, k=20, radius_factor=4.0, cond_max=1e8, min_neighbors=12):
        cps = control_points
        self.cps = cps
        self.h = h = cps.grids.h
        M = len(cps)
        self.source = np.arange(M) if source is None else np.asarray(source)
        src = cps.location[self.source]
        Ms = len(src)
        self.k = k = min(k, Ms)
        if M == 0 or Ms == 0:
            self.cond = np.zeros(M)
            self.D0 = self.D1 = self.D2 = sp.csr_matrix((M, Ms))
            return
        tree = cKDTree(src)
        dist, nbr = tree.query(cps.location, k=k, distance_upper_bound=radius_factor * h)
        dist, nbr = dist.reshape(M, k), nbr.reshape(M, k)
        valid = np.isfinite(dist)
        counts = valid.sum(axis=1)
        if counts.min() < min_neighbors:
            bad = int(np.argmin(counts))
            raise RankDeficientFit(
                f"control point {bad} has only {counts[bad]} fitting neighbours within {radius_factor}h"
            )
        nbr = np.where(valid, nbr, 0)
        d = src[nbr] - cps.location[:, None, :]
        xi = np.einsum("mkc,mc->mk", d, cps.tangent1) / h
        eta = np.einsum("mkc,mc->mk", d, cps.tangent2) / h
        V = _quad_design(xi, eta) * valid[..., None]
        U, sv, Wt = np.linalg.svd(V, full_matrices=False)
        self.cond = (sv[:, 0] / np.maximum(sv[:, -1], 1e-300)) ** 2  # normal-equation condition
        if np.any(self.cond > cond_max):
            bad = int(np.argmax(self.cond))
            raise RankDeficientFit(f"fit at control point {bad} has condition {self.cond[bad]:.2e}")
        self.pinv = np.einsum("mji,mj,mkj->mik", Wt, 1.0 / sv, U)  # (M, 6, k)
        self.nbr, self.valid, self.V = nbr, valid, V
        rows = np.repeat(np.arange(M), k)
        cols = nbr.ravel()

        def op(row, scale):
            w = (self.pinv[:, row, :] * valid).ravel() * scale
            return sp.csr_matrix((w, (rows, cols)), shape=(M, Ms))

        self.D0 = op(0, 1.0)
        self.D1 = op(1, 1.0 / h)
        self.D2 = op(2, 1.0 / h)

    def _apply(self, D, values):
        v = np.asarray(values, dtype=float)
        out = D @ v.reshape(v.shape[0], -1)
        return out.reshape((D.shape[0],) + v.shape[1:])

    def value(self, values):
        """Fitted values at every control point from ``values`` on the source points."""
        return self._apply(self.D0, values)

    def tangential_gradient(self, values):
        """``(d/dt1, d/dt2)`` at every control point of source values ``(Ms,)`` or ``(Ms, ...)``."""
        return self._apply(self.D1, values), self._apply(self.D2, values)

    def fit(self, values, i):
        """Full quadratic fit at control point ``i``: ``(coeffs, residual)`` in scaled coordinates."""
        v = np.asarray(values, dtype=float)[self.nbr[i]]
        coef = self.pinv[i] @ v
        r = self.V[i] @ coef - v
        mask = self.valid[i] if v.ndim == 1 else self.valid[i][:, None]
        return coef, float(np.linalg.norm(r * mask))


def tangential_fit(density, control_points, cp_index, fitter=None):
    """Surface gradient and surface Hessian of ``density`` at one control point.

    Returns ``(grad, hess, residual)`` with ``grad`` of shape ``(..., 2)`` holding
    derivatives along ``tangent1``/``tangent2`` and ``hess`` of shape ``(..., 2, 2)``
    holding second derivatives in the tangent-plane coordinates.
    """
    fitter = fitter or SurfaceFitter(control_points)
    h = fitter.h
    coef, res = fitter.fit(np.asarray(density, dtype=float), cp_index)
    grad = np.stack([coef[1], coef[2]], axis=-1) / h
    hess = np.stack([np.stack([coef[3], coef[4]], -1), np.stack([coef[4], coef[5]], -1)], -2) / h**2
    return grad, hess, res


class JumpOperator:
    """Linear map ``(density, F) -> JumpData`` for a fixed control-point set and material.

    With ``split=True`` the unknowns are scalars at the primary points
    (``ControlPointSet.primary``), each the velocity component of the grid
    family whose lines the point lies on (``ControlPointSet.component``).
    All other entries of ``[[u]]`` come from quadratic fits over the primary
    points carrying that component.  The density is then a ``(P,)`` array
    ordered like ``unknowns``; a full ``(M, 3)`` array is also accepted and
    its carried primary entries are used.  With ``split=False`` the density
    is the full ``(M, 3)`` jump.
    """

    def __init__(self, control_points, params: InterfaceParams, fitter=None, split=True, k=20):
        self.cps = control_points
        self.params = params
        self.split = split
        self.fitter = fitter or SurfaceFitter(control_points, k=k)
        denom = params.kappa / (2.0 * params.mu) + params.c
        if denom <= 0.0 or 1.0 / params.mu + params.c <= 0.0:
            raise SingularClosure("per-point closure is singular for these material constants")
        if split:
            comp = control_points.component
            self.unknowns = np.nonzero(control_points.primary)[0]
            self.comp = comp[self.unknowns]
            # positions within the unknown vector, and the matching point indices
            self.slots = [np.nonzero(self.comp == a)[0] for a in range(3)]
            self.members = [self.unknowns[sl] for sl in self.slots]
            self.comp_fitters = [SurfaceFitter(control_points, source=m, k=k) for m in self.members]

    @property
    def size(self):
        """Length of the density vector."""
        return len(self.unknowns) if self.split else 3 * len(self.cps)

    def restrict(self, values):
        """Carried primary entries of an ``(M, 3)`` array."""
        return np.asarray(values, dtype=float)[self.unknowns, self.comp]

    def _scalar_density(self, density):
        d = np.asarray(density, dtype=float)
        if d.ndim == 2:
            d = self.restrict(d)
        if d.shape != (len(self.unknowns),):
            raise ValueError(f"density must have shape ({len(self.unknowns)},) or ({len(self.cps)}, 3)")
        return d

    def full_density(self, density):
        """The full ``(M, 3)`` jump ``[[u]]`` implied by a density."""
        M = len(self.cps)
        if not self.split:
            return np.asarray(density, dtype=float).reshape(M, 3)
        d = self._scalar_density(density)
        phi = np.empty((M, 3))
        for a in range(3):
            phi[:, a] = self.comp_fitters[a].value(d[self.slots[a]])
            phi[self.members[a], a] = d[self.slots[a]]
        return phi

    def _first_derivatives(self, density, phi):
        if not self.split:
            return self.fitter.tangential_gradient(phi)
        M = len(self.cps)
        d = self._scalar_density(density)
        T1 = np.empty((M, 3))
        T2 = np.empty((M, 3))
        for a in range(3):
            T1[:, a], T2[:, a] = self.comp_fitters[a].tangential_gradient(d[self.slots[a]])
        return T1, T2

    def __call__(self, density=None, F=None) -> JumpData:
        cps, prm, fit = self.cps, self.params, self.fitter
        M = len(cps)
        mu, c, kappa = prm.mu, prm.c, prm.kappa
        if density is None:
            density = np.zeros(self.size if self.split else (M, 3))
        phi = self.full_density(density)
        F = np.zeros((M, 3)) if F is None else np.asarray(F, dtype=float).reshape(M, 3)
        n, t1, t2 = cps.normal, cps.tangent1, cps.tangent2

        # first derivatives and pressure jump
        T1, T2 = self._first_derivatives(density, phi)
        div_s = np.einsum("mi,mi->m", T1, t1) + np.einsum("mi,mi->m", T2, t2)
        q = -div_s / (kappa / (2.0 * mu) + c)
        wn = kappa * q / (2.0 * mu)
        w = (-np.einsum("mi,mi->m", T1, n)[:, None] * t1
             - np.einsum("mi,mi->m", T2, n)[:, None] * t2 + wn[:, None] * n)
        A = (T1[:, :, None] * t1[:, None, :] + T2[:, :, None] * t2[:, None, :]
             + w[:, :, None] * n[:, None, :])

        # tangential derivatives of the first-stage jumps
        dA1, dA2 = fit.tangential_gradient(A)  # dA_b[m, i, j] = sum_k H[i, j, k] t_b[k]
        q1, q2 = fit.tangential_gradient(q)
        m11 = np.einsum("mij,mj->mi", dA1, t1)
        m22 = np.einsum("mij,mj->mi", dA2, t2)
        m12 = 0.5 * (np.einsum("mij,mj->mi", dA2, t1) + np.einsum("mij,mj->mi", dA1, t2))
        k1 = np.einsum("mij,mj->mi", dA1, n)
        k2 = np.einsum("mij,mj->mi", dA2, n)

        # normal-normal block and normal pressure gradient
        R = F + mu * (m11 + m22) - q1[:, None] * t1 - q2[:, None] * t2
        s = -(np.einsum("mi,mi->m", k1, t1) + np.einsum("mi,mi->m", k2, t2))
        Pn = (s + np.einsum("mi,mi->m", n, R) / mu) / (1.0 / mu + c)
        hnn = (Pn[:, None] * n - R) / mu

        def outer(a, b):
            return a[:, None, :, None] * b[:, None, None, :]

        Hs = (m11[:, :, None, None] * outer(t1, t1)
              + m22[:, :, None, None] * outer(t2, t2)
              + m12[:, :, None, None] * (outer(t1, t2) + outer(t2, t1))
              + k1[:, :, None, None] * (outer(t1, n) + outer(n, t1))
              + k2[:, :, None, None] * (outer(t2, n) + outer(n, t2))
              + hnn[:, :, None, None] * outer(n, n))
        P = q1[:, None] * t1 + q2[:, None] * t2 + Pn[:, None] * n
        return JumpData(phi.copy(), A, Hs, q, P, F.copy())


def compute_jump_data(density, f_jump, params: InterfaceParams, control_points, fitter=None, split=None) -> JumpData:
    """Functional form of :class:`JumpOperator`; ``f_jump`` may be ``None``.

    ``split`` defaults to ``True`` for an ``(M,)`` density and ``False`` for ``(M, 3)``.
    """
    if split is None:
        split = np.ndim(density) == 1
    return JumpOperator(control_points, params, fitter, split=split)(density, f_jump)


def jump_residuals(jd: JumpData, control_points, params: InterfaceParams):
    """Max residuals of the interface relations satisfied by a :class:`JumpData`."""
    n = control_points.normal
    mu, c, kappa = params.mu, params.c, params.kappa
    A = jd.grad_u
    trac = -kappa * jd.p[:, None] * n + mu * np.einsum("mij,mj->mi", A + A.transpose(0, 2, 1), n)
    div = np.trace(A, axis1=1, axis2=2) + c * jd.p
    lap = np.trace(jd.hess_u, axis1=2, axis2=3)
    mom = -mu * lap + jd.grad_p - jd.f
    ddiv = np.einsum("miik->mk", jd.hess_u) + c * jd.grad_p
    return {
        "traction": float(np.abs(trac).max(initial=0.0)),
        "divergence": float(np.abs(div).max(initial=0.0)),
        "momentum": float(np.abs(mom).max(initial=0.0)),
        "normal_divergence": float(np.abs(np.einsum("mk,mk->m", ddiv, n)).max(initial=0.0)),
    }
