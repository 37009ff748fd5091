import numpy as np
import pytest
import sympy as sp

from kfbi3d.cases import CASE_IDS, X, get_case, lame


def _surface_points(surface, n, seed):
    """Points near the surface found by bisection along random rays from an interior point."""
    rng = np.random.default_rng(seed)
    c = np.array([0.7, 0.0, 0.0]) if surface.kind == "torus" else np.zeros(3)
    d = rng.normal(size=(n, 3))
    if surface.kind == "torus":
        d[:, 1] *= 0.2  # stay in the tube cross-section near x = 0.7
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    lo, hi = np.zeros(n), np.full(n, 1.2)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        ins = surface(c + mid[:, None] * d) < 0
        lo, hi = np.where(ins, mid, lo), np.where(ins, hi, mid)
    return c + lo[:, None] * d


@pytest.mark.parametrize("cid", CASE_IDS)
def test_exact_solution_satisfies_the_pde(cid):
    case = get_case(cid)
    rng = np.random.default_rng(0)
    pts = np.concatenate([rng.uniform(-0.5, 0.5, size=(4, 3)), _surface_points(case.surface, 4, 1)])
    assert case.pde_residual(pts) <= 1e-10


@pytest.mark.parametrize("cid", CASE_IDS)
def test_boundary_data_is_the_exact_velocity(cid):
    case = get_case(cid)
    pts = _surface_points(case.surface, 10, 2)
    np.testing.assert_array_equal(case.g(pts), case.u(pts))
    for i in range(3):
        np.testing.assert_allclose(case.u_component(i)(pts), case.u(pts)[:, i])
        np.testing.assert_allclose(case.f_component(i)(pts), case.f(pts)[:, i])


@pytest.mark.parametrize("cid", CASE_IDS)
def test_traces_match_symbolic_derivatives(cid):
    case = get_case(cid)
    q = np.array([[0.31, -0.22, 0.17]])
    u, G, H, p, gp, f = case.traces(q)
    sub = dict(zip(X, q[0]))
    for i in range(3):
        for j in range(3):
            assert G[0, i, j] == pytest.approx(float(sp.diff(case.u_sym[i], X[j]).subs(sub)), rel=1e-12, abs=1e-12)
            for k in range(3):
                e = float(sp.diff(case.u_sym[i], X[j], X[k]).subs(sub))
                assert H[0, i, j, k] == pytest.approx(e, rel=1e-12, abs=1e-12)
    assert p[0] == pytest.approx(float(case.p_sym.subs(sub)), rel=1e-12, abs=1e-12)


def test_material_data():
    # [PAPER] E and nu of the three Navier examples
    for cid, E, nu in (("5.4", 1000.0, 0.1), ("5.5", 4000.0, 0.05), ("5.6", 2000.0, 0.4)):
        case = get_case(cid)
        lam, mu = lame(E, nu)
        assert (case.E, case.nu) == (E, nu)
        assert case.mu == pytest.approx(mu) and case.c == pytest.approx(1 / (lam + mu))
    for cid in ("5.1", "5.2", "5.3"):
        assert get_case(cid).c == 0.0


def test_lame_constants():
    lam, mu = lame(1000.0, 0.1)
    assert mu == pytest.approx(1000 / 2.2)
    assert lam == pytest.approx(100 / 0.88)
    # lambda + 2 mu / 3 is the bulk modulus E / (3 (1 - 2 nu))
    assert lam + 2 * mu / 3 == pytest.approx(1000 / (3 * 0.8))


def test_surfaces():
    # [PAPER] sphere, ellipsoid (1, 0.8, 0.6) and torus a = 0.35, c = 0.7
    assert get_case("5.1").surface(np.array([1.0, 0.0, 0.0])) == pytest.approx(0.0)
    ell = get_case("5.2").surface
    for q in ([1.0, 0, 0], [0, 0.8, 0], [0, 0, 0.6]):
        assert ell(np.array(q)) == pytest.approx(0.0, abs=1e-14)
    tor = get_case("5.6").surface
    for q in ([1.05, 0, 0], [0.35, 0, 0], [0.7, 0, 0.35]):
        assert tor(np.array(q)) == pytest.approx(0.0, abs=1e-14)
    assert tor(np.array([0.7, 0.0, 0.0])) < 0 < tor(np.zeros(3))


def test_unknown_example():
    with pytest.raises(KeyError):
        get_case("5.7")


    # a u2 ending in y^2 (1 - y^2) has div = -2y; the example uses y^2 (2 - y^2)
    # the published u2 ends in y^2 (1 - y^2); the example uses y^2 (2 - y^2)
    x, y, z = X
    u = get_case("5.1").u_sym
    printed = (u[0], x**2 * (3 * x**2 - 6 * y**2 - 1) + y**2 * (1 - y**2), u[2])
    div = sp.simplify(sum(sp.diff(e, v) for e, v in zip(printed, X)))
    assert sp.simplify(div + 2 * y) == 0
    assert sp.simplify(sum(sp.diff(e, v) for e, v in zip(u, X))) == 0
