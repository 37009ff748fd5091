"""FFT-diagonalised Poisson solves and the pressure Schur-complement CG for the MAC system.

The unknowns of each family are diagonalised direction by direction by real
sine transforms: DST-I across node-aligned (Dirichlet) directions with
``N - 1`` modes and DST-II across cell-centred directions whose ghost layer
is the antisymmetric reflection (``N`` modes).  Both share the 1D symbol
``-(4 / h^2) sin^2(pi k / (2 N))``.

The saddle system solved is

    -mu L u + G p            = f
     D u    + c p + gamma l  = g
           -gamma^T p + a l  = 0

with ``gamma = h^3`` (so ``l`` is the scaled pressure mean) used only when
``c == 0``.  Eliminating ``u`` gives the SPD pressure operator
``(1/mu) G^T (-L)^{-1} G + c I + (1/a) gamma gamma^T``.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import CGNoConvergence, IndefiniteOperator
from .grid import UFAMS, MACField, divergence, gradient, laplacian

log = logging.getLogger(__name__)


@dataclass
class SaddleSystemSpec:
    mu: float = 1.0
    c: float = 0.0
    alpha: float = 1.0
    use_augmentation: bool | None = None
    cg_tol: float = 1e-12
    cg_maxit: int = 2000

    def __post_init__(self):
        if self.use_augmentation is None:
            self.use_augmentation = self.c == 0.0
        if self.use_augmentation and not self.alpha > 0:
            raise ValueError("alpha must be positive when augmenting")
        if not 0.0 < self.cg_tol <= 1e-6:
            raise ValueError("cg_tol must lie in (0, 1e-6]")


def _symbol(n_modes, N, h):
    k = np.arange(1, n_modes + 1)
    return -4.0 / (h * h) * np.sin(np.pi * k / (2 * N)) ** 2


class PoissonSolver:
    """Exact inverse of the seven-point Laplacian of one family, with cached symbols."""

    def __init__(self, grids, fam, workers=None):
        self.grids = grids
        self.fam = fam
        self.workers = workers
        N, h = grids.N, grids.h
        m = UFAMS.index(fam) if fam in UFAMS else -1
        self.types = tuple(1 if a == m else 2 for a in range(3))
        shape = grids.interior_shape(fam)
        lam = [_symbol(n, N, h) for n in shape]
        self.eig = lam[0][:, None, None] + lam[1][None, :, None] + lam[2][None, None, :]

    def _forward(self, v):
        for a, t in enumerate(self.types):
            v = sfft.dst(v, type=t, axis=a, norm="ortho", workers=self.workers)
        return v

    def _inverse(self, v):
        for a, t in enumerate(self.types):
            v = sfft.idst(v, type=t, axis=a, norm="ortho", workers=self.workers)
        return v

    def solve(self, rhs):
        return self._inverse(self._forward(rhs) / self.eig)


def poisson_fft_solve(rhs, fam, grids):
    """Solve ``L_h v = rhs`` on the unknowns of family ``fam`` (homogeneous box BCs)."""
    return PoissonSolver(grids, fam).solve(np.asarray(rhs, dtype=float))


@dataclass
class SolveInfo:
    cg_iterations: int = 0
    cg_residuals: list = field(default_factory=list)
    full_residual: float = float("nan")
    seconds: float = 0.0
    lam: float = 0.0


class SaddleSolver:
    """Matrix-free Schur-complement CG with cached Poisson solvers; re-entrant per call."""

    def __init__(self, grids, spec: SaddleSystemSpec, workers=None):
        self.grids = grids
        self.spec = spec
        self.poisson = {fam: PoissonSolver(grids, fam, workers) for fam in UFAMS}
        self.gamma = grids.h ** 3

    def _lap_inv(self, v):
        return tuple(self.poisson[fam].solve(vi) for fam, vi in zip(UFAMS, v))

    def schur_apply(self, p):
        s, h = self.spec, self.grids.h
        w = self._lap_inv(gradient(p, h))
        out = divergence(*w, h) / s.mu + s.c * p
        if s.use_augmentation:
            out = out + (self.gamma * self.gamma / s.alpha) * p.sum()
        return out

    def solve(self, f, g):
        """Return ``(MACField, lambda, SolveInfo)`` for interior right-hand sides ``f`` (3 arrays) and ``g``."""
        t0 = time.perf_counter()
        s, h = self.spec, self.grids.h
        f = tuple(np.asarray(fi, dtype=float) for fi in f)
        g = np.asarray(g, dtype=float)
        lf = self._lap_inv(f)
        rhs = g + divergence(*lf, h) / s.mu
        p, info = self._cg(rhs)
        # velocity from -mu L u = f - G p
        gp = gradient(p, h)
        u = tuple(-ui / s.mu for ui in self._lap_inv(tuple(fi - gi for fi, gi in zip(f, gp))))
        lam = self.gamma * p.sum() / s.alpha if s.use_augmentation else 0.0
        info.lam = lam
        info.full_residual = self.full_residual(u, p, lam, f, g)
        info.seconds = time.perf_counter() - t0
        log.info(
            "schur_solve N=%d cg_iters=%d cg_res=%.3e full_res=%.3e seconds=%.2f",
            self.grids.N, info.cg_iterations, info.cg_residuals[-1] if info.cg_residuals else 0.0,
            info.full_residual, info.seconds,
        )
        return MACField.from_interior(self.grids, *u, p), lam, info

    def full_residual(self, u, p, lam, f, g):
        s, h = self.spec, self.grids.h
        G = gradient(p, h)
        r2 = 0.0
        b2 = 0.0
        for ui, fam, gi, fi in zip(u, UFAMS, G, f):
            r = -s.mu * laplacian(ui, fam, h) + gi - fi
            r2 += np.sum(r * r)
            b2 += np.sum(fi * fi)
        rc = divergence(*u, h) + s.c * p - g
        if s.use_augmentation:
            rc = rc + self.gamma * lam
            r3 = -self.gamma * p.sum() + s.alpha * lam
            r2 += r3 * r3
        r2 += np.sum(rc * rc)
        b2 += np.sum(g * g)
        return float(np.sqrt(r2) / max(np.sqrt(b2), 1e-300))

    def _cg(self, b):
        s = self.spec
        info = SolveInfo()
        x = np.zeros_like(b)
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            info.cg_residuals.append(0.0)
            return x, info
        r = b.copy()
        d = r.copy()
        rr = np.vdot(r, r)
        for it in range(1, s.cg_maxit + 1):
            Sd = self.schur_apply(d)
            dSd = np.vdot(d, Sd)
            if dSd <= 0.0:
                raise IndefiniteOperator(f"non-positive curvature {dSd:.3e} at CG iteration {it}")
            a = rr / dSd
            x += a * d
            r -= a * Sd
            rr_new = np.vdot(r, r)
            rel = np.sqrt(rr_new) / bnorm
            info.cg_residuals.append(float(rel))
            if rel < s.cg_tol:
                info.cg_iterations = it
                return x, info
            d = r + (rr_new / rr) * d
            rr = rr_new
        raise CGNoConvergence(f"CG did not reach {s.cg_tol:g} in {s.cg_maxit} iterations (last {rel:.3e})")


def schur_solve(f, g, spec: SaddleSystemSpec, grids):
    """One-shot saddle solve; see :class:`SaddleSolver`."""
    return SaddleSolver(grids, spec).solve(f, g)
