import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kfbi3d import bie
from kfbi3d.bie import KFBISolver, ProblemSpec, gmres
from kfbi3d.cases import get_case
from kfbi3d.errors import ConfigError, GMRESNoConvergence
from kfbi3d.geometry import sphere, torus
from kfbi3d.grid import UFAMS
from kfbi3d.harness import problem_for


# GMRES against a dense solve

@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 40), seed=st.integers(0, 10**6))
def test_gmres_matches_dense_solve(n, seed):
    rng = np.random.default_rng(seed)
    A = np.eye(n) + 0.3 * rng.normal(size=(n, n)) / np.sqrt(n)
    b = rng.normal(size=n)
    x, hist = gmres(lambda v: A @ v, b, tol=1e-12, maxit=n)
    np.testing.assert_allclose(x, np.linalg.solve(A, b), rtol=1e-8, atol=1e-10)
    assert all(a >= b - 1e-15 for a, b in zip(hist, hist[1:]))


def test_gmres_zero_rhs_and_nonconvergence():
    x, hist = gmres(lambda v: v, np.zeros(5))
    assert not x.any() and hist == [1.0]
    rng = np.random.default_rng(0)
    A = rng.normal(size=(30, 30))
    with pytest.raises(GMRESNoConvergence):
        gmres(lambda v: A @ v, rng.normal(size=30), tol=1e-12, maxit=3)


def test_problem_spec_validation():
    with pytest.raises(ConfigError):
        ProblemSpec("darcy", sphere(), 16)
    with pytest.raises(ConfigError):
        ProblemSpec("navier", sphere(), 16, E=1.0)
    with pytest.raises(ConfigError):
        ProblemSpec("navier", sphere(), 16, E=1.0, nu=0.5)
    with pytest.raises(ConfigError):
        ProblemSpec("stokes", sphere(), 16, mu_s=0.0)
    p = ProblemSpec("navier", sphere(), 16, E=1000.0, nu=0.1)
    assert p.lam == pytest.approx(1000 * 0.1 / (1.1 * 0.8))
    assert p.mu == pytest.approx(1000 / 2.2)
    assert p.c == pytest.approx(1 / (p.lam + p.mu))
    assert ProblemSpec("stokes", sphere(), 16).c == 0.0


@pytest.fixture(scope="module")
def stokes16():
    return KFBISolver(ProblemSpec("stokes", sphere(), 16))


def test_unknowns_are_primary_points(stokes16):
    s = stokes16
    np.testing.assert_array_equal(s.unknowns, np.nonzero(s.cps.primary)[0])
    assert np.all(s.comp == s.cps.component[s.unknowns])


# Rigid motions: u = v inside, 0 outside, p = 0 has [[u]] = v and no traction jump,
# so the domain-side trace of the double-layer solution is v itself.

@pytest.mark.parametrize("kind", ["stokes", "navier"])
@pytest.mark.parametrize("surf", [sphere(), torus(0.35, 0.7)], ids=["sphere", "torus"])
def test_translation_is_reproduced_exactly(kind, surf):
    kw = {} if kind == "stokes" else dict(E=1000.0, nu=0.1)
    s = KFBISolver(ProblemSpec(kind, surf, 16, **kw))
    phi = s.carried(np.tile([1.0, 2.0, -1.0], (len(s.cps), 1)))
    assert np.abs(s.apply_bie_operator(phi) - phi).max() <= 1e-12


@pytest.mark.parametrize("kind", ["stokes", "navier"])
@pytest.mark.parametrize("surf", [sphere(), torus(0.35, 0.7)], ids=["sphere", "torus"])
def test_rotation_is_reproduced_with_convergence(kind, surf):
    kw = {} if kind == "stokes" else dict(E=1000.0, nu=0.1)
    errs = []
    for N in (16, 32):
        s = KFBISolver(ProblemSpec(kind, surf, N, **kw))
        phi = s.carried(np.cross([0.3, -1.0, 0.5], s.cps.location))
        errs.append(np.abs(s.apply_bie_operator(phi) - phi).max() / np.abs(phi).max())
    assert errs[0] / errs[1] >= 3


def test_translation_field_in_the_box(stokes16):
    s = stokes16
    v = np.array([1.0, 2.0, -1.0])
    fld = s.reconstruct_solution(s.carried(np.tile(v, (len(s.cps), 1))))
    for a, fam in enumerate(UFAMS):
        sl = s.grids.interior(fam)
        ins = s.masks.inside[fam][sl]
        vals = fld[fam][sl]
        assert np.abs(vals[ins] - v[a]).max() < 1e-10
        assert np.abs(vals[~ins]).max() < 1e-10


@settings(max_examples=5, deadline=None)
@given(a=st.floats(-2, 2), b=st.floats(-2, 2), seed=st.integers(0, 1000))
def test_operator_is_linear(stokes16, a, b, seed):
    s = stokes16
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, len(s.unknowns)))
    lhs = s.apply_bie_operator(a * x + b * y)
    rhs = a * s.apply_bie_operator(x) + b * s.apply_bie_operator(y)
    assert np.abs(lhs - rhs).max() <= 1e-8 * (1 + np.abs(rhs).max())


def test_volume_trace_is_zero_without_forcing(stokes16):
    assert not stokes16.evaluate_volume_trace().any()


def test_jump_of_extracted_limits_is_the_density(stokes16):
    s = stokes16
    rng = np.random.default_rng(3)
    fld, jd = s.interface_solve(rng.normal(size=len(s.unknowns)))
    plus, minus = s.interp.extract(fld, jd)
    np.testing.assert_allclose(plus - minus, jd.u, atol=1e-12)
    np.testing.assert_allclose(jd.u[s.unknowns, s.comp], s.jumps.restrict(jd.u))


def _audit(case, N):
    s = KFBISolver(problem_for(case, N))
    fld, phi, diag = s.solve()
    err = np.abs(s.boundary_trace(fld) - case.g(s.cps.location)).max()
    return s, phi, diag, err


def test_round_trip_example_5_1_small_grid():
    case = get_case("5.1")
    s16, phi, diag, e16 = _audit(case, 16)
    assert phi.shape == (len(s16.unknowns),)
    assert 5 <= diag.gmres_iterations <= 30
    assert diag.gmres_residuals[-1] < 1e-9
    _, _, _, e32 = _audit(case, 32)
    assert e32 < e16 / 3


def test_module_level_entry_points_agree():
    case = get_case("5.4")
    prob = problem_for(case, 16)
    s = KFBISolver(prob)
    phi, its = bie.solve_bie(prob, s)
    assert its == s.diagnostics.gmres_iterations
    rhs = s.carried(s.boundary_data() - s.evaluate_volume_trace())
    res = bie.apply_bie_operator(phi, prob, s) - rhs
    assert np.linalg.norm(res) <= 1e-8 * np.linalg.norm(rhs)
