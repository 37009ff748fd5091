import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kfbi3d.boundary_interp import BoundaryInterpolator, build_stencil, extract_one_sided
from kfbi3d.errors import NoValidStencil
from kfbi3d.geometry import find_intersections, sphere, torus
from kfbi3d.grid import UFAMS, MACField, build_grids, mark_nodes
from kfbi3d.jumps import JumpData


class Quadratic:
    """Three random quadratics and a random linear scalar."""

    def __init__(self, seed):
        rng = np.random.default_rng(seed)
        self.c = rng.normal(size=3)
        self.b = rng.normal(size=(3, 3))
        A = rng.normal(size=(3, 3, 3))
        self.A = A + A.transpose(0, 2, 1)
        self.pc, self.pb = rng.normal(), rng.normal(size=3)

    def u(self, x):
        return self.c + x @ self.b.T + 0.5 * np.einsum("...j,ijk,...k->...i", x, self.A, x)

    def grad(self, x):
        return self.b + np.einsum("ijk,...k->...ij", self.A, x)

    def p(self, x):
        return self.pc + x @ self.pb


def _setup(surface, N):
    g = build_grids(N)
    cps = find_intersections(surface, g)
    masks = mark_nodes(g, surface, cps)
    return g, cps, masks


def _piecewise(g, masks, qin, qout):
    fld = MACField.zeros(g)
    for i, fam in enumerate(UFAMS):
        P = g.points(fam)
        fld[fam][...] = np.where(masks.inside[fam], qin.u(P)[..., i], qout.u(P)[..., i])
    P = g.points("p")
    fld.p[...] = np.where(masks.inside["p"], qin.p(P), qout.p(P))
    return fld


def _jumps(x, qin, qout):
    M = len(x)
    hess = np.broadcast_to(qin.A - qout.A, (M, 3, 3, 3)).copy()
    return JumpData(qin.u(x) - qout.u(x), qin.grad(x) - qout.grad(x), hess, qin.p(x) - qout.p(x),
                    np.broadcast_to(qin.pb - qout.pb, (M, 3)).copy(), np.zeros((M, 3)))


@pytest.fixture(scope="module")
def sphere32():
    g, cps, masks = _setup(sphere(), 32)
    return g, cps, masks, BoundaryInterpolator(g, cps, masks, keep_gradient=True)


def test_piecewise_quadratic_extraction_is_exact(sphere32):
    g, cps, masks, bi = sphere32
    qin, qout = Quadratic(0), Quadratic(1)
    fld = _piecewise(g, masks, qin, qout)
    x = cps.location
    plus, minus = bi.extract(fld, _jumps(x, qin, qout))
    assert np.abs(plus - qin.u(x)).max() <= 1e-9
    assert np.abs(minus - qout.u(x)).max() <= 1e-9


def test_piecewise_linear_pressure_is_exact(sphere32):
    g, cps, masks, bi = sphere32
    qin, qout = Quadratic(2), Quadratic(3)
    fld = _piecewise(g, masks, qin, qout)
    x = cps.location
    plus, minus = bi.extract_pressure(fld, _jumps(x, qin, qout))
    assert np.abs(plus - qin.p(x)).max() <= 1e-9
    assert np.abs(minus - qout.p(x)).max() <= 1e-9


def test_gradient_and_traction_exact_for_piecewise_quadratic(sphere32):
    g, cps, masks, bi = sphere32
    qin, qout = Quadratic(4), Quadratic(5)
    fld = _piecewise(g, masks, qin, qout)
    x, n = cps.location, cps.normal
    jd = _jumps(x, qin, qout)
    G = qin.grad(x)
    assert np.abs(bi.velocity_gradient(fld, jd) - G).max() <= 1e-8
    mu, kappa = 1.7, 0.6
    expect = -kappa * qin.p(x)[:, None] * n + mu * np.einsum("mij,mj->mi", G + G.transpose(0, 2, 1), n)
    assert np.abs(bi.traction(fld, jd, mu, kappa) - expect).max() <= 1e-7


def test_stencils_are_conditioned_and_on_unknowns(sphere32):
    g, cps, masks, bi = sphere32
    for fam in UFAMS + ("p",):
        assert bi.cond[fam].max() < 1e3
        nodes = np.stack(np.unravel_index(bi.flat[fam], g.shape(fam)), axis=-1)
        for a, sl in enumerate(g.interior(fam)):
            assert nodes[..., a].min() >= sl.start and nodes[..., a].max() < sl.stop
        # weights reproduce constants
        np.testing.assert_allclose(bi.w[fam].sum(axis=1), 1.0, atol=1e-12)


def test_without_jumps_both_limits_agree(sphere32):
    g, cps, masks, bi = sphere32
    q = Quadratic(6)
    fld = _piecewise(g, masks, q, q)
    plus, minus = bi.extract(fld)
    np.testing.assert_array_equal(plus, minus)
    assert np.abs(plus - q.u(cps.location)).max() <= 1e-9


@settings(max_examples=15, deadline=None)
@given(i=st.integers(0, 10**6), fam=st.sampled_from(UFAMS + ("p",)))
def test_single_stencil_matches_batch(sphere32, i, fam):
    g, cps, masks, bi = sphere32
    i = i % len(cps)
    st_one = build_stencil(i, g, cps, masks, fam)
    st_b = bi.stencil(i, fam)
    np.testing.assert_array_equal(st_one.nodes, st_b.nodes)
    np.testing.assert_allclose(st_one.weights, st_b.weights, rtol=1e-12, atol=1e-14)
    qin, qout = Quadratic(7), Quadratic(8)
    fld = _piecewise(g, masks, qin, qout)
    x = cps.location[i:i + 1]
    jd = _jumps(x, qin, qout)
    if fam == "p":
        plus, minus = extract_one_sided(fld.p, (jd.p[0], jd.grad_p[0], None), st_one)
        assert plus == pytest.approx(qin.p(x)[0], abs=1e-9)
        assert minus == pytest.approx(qout.p(x)[0], abs=1e-9)
    else:
        a = UFAMS.index(fam)
        plus, minus = extract_one_sided(fld[fam], (jd.u[0, a], jd.grad_u[0, a], jd.hess_u[0, a]), st_one)
        assert plus == pytest.approx(qin.u(x)[0, a], abs=1e-9)
        assert minus == pytest.approx(qout.u(x)[0, a], abs=1e-9)


def test_torus_extraction_is_exact():
    g, cps, masks = _setup(torus(0.35, 0.7), 32)
    bi = BoundaryInterpolator(g, cps, masks)
    qin, qout = Quadratic(9), Quadratic(10)
    x = cps.location
    plus, _ = bi.extract(_piecewise(g, masks, qin, qout), _jumps(x, qin, qout))
    assert np.abs(plus - qin.u(x)).max() <= 1e-9


def test_impossible_condition_bound_raises():
    g, cps, masks = _setup(sphere(), 16)
    with pytest.raises(NoValidStencil):
        BoundaryInterpolator(g, cps, masks, cond_max=1.0)


def test_gradient_requires_flag():
    g, cps, masks = _setup(sphere(), 16)
    bi = BoundaryInterpolator(g, cps, masks)
    with pytest.raises(ValueError):
        bi.velocity_gradient(MACField.zeros(g))
