import numpy as np
import pytest
import scipy.sparse as sps

from kfbi3d.geometry import find_intersections, sphere, torus
from kfbi3d.grid import (FAMILIES, UFAMS, MACField, build_grids, divergence, gradient, laplacian, mac_apply,
                         mark_nodes, stokes_apply)


def test_family_shapes():
    g = build_grids(8)
    assert g.shape("p") == (8, 8, 8)
    assert g.shape("v") == (9, 9, 9)
    assert g.shape("u1") == (9, 10, 10)
    assert g.shape("u3") == (10, 10, 9)
    assert g.interior_shape("u2") == (8, 7, 8)
    assert g.h == pytest.approx(2.4 / 8)


def test_node_coordinates():
    g = build_grids(8)
    x, y, z = g.coords("u1")
    h = g.h
    assert x[0] == pytest.approx(-1.2) and x[-1] == pytest.approx(1.2)
    assert y[1] == pytest.approx(-1.2 + h / 2)  # first cell centre after the ghost
    assert g.coords("p")[0][0] == pytest.approx(-1.2 + h / 2)


def test_invalid_box_size():
    with pytest.raises(ValueError):
        build_grids(3)


def _laplacian_matrix(shape, h, node_axis):
    # [DERIVED] assembled independently from 1D Kronecker factors
    mats = []
    for a, n in enumerate(shape):
        T = sps.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format="lil")
        if a != node_axis:  # antisymmetric ghost reflection at cell-centred ends
            T[0, 0] = -3
            T[n - 1, n - 1] = -3
        mats.append(T.tocsr() / h**2)
    I = [sps.identity(n) for n in shape]
    return (sps.kron(sps.kron(mats[0], I[1]), I[2]) + sps.kron(sps.kron(I[0], mats[1]), I[2])
            + sps.kron(sps.kron(I[0], I[1]), mats[2])).tocsr()


@pytest.mark.parametrize("fam", FAMILIES)
def test_laplacian_matches_assembled_matrix(fam):
    g = build_grids(6)
    shape = g.interior_shape(fam)
    m = UFAMS.index(fam) if fam in UFAMS else -1
    L = _laplacian_matrix(shape, g.h, m)
    v = np.random.default_rng(0).standard_normal(shape)
    assert np.allclose(laplacian(v, fam, g.h).ravel(), L @ v.ravel(), atol=1e-10)


def test_gradient_and_divergence_are_adjoint():
    # D = -G^T with zero normal velocity on the box
    g = build_grids(6)
    rng = np.random.default_rng(1)
    p = rng.standard_normal(g.interior_shape("p"))
    u = [rng.standard_normal(g.interior_shape(f)) for f in UFAMS]
    lhs = np.sum(divergence(*u, g.h) * p)
    rhs = -sum(np.sum(ui * gi) for ui, gi in zip(u, gradient(p, g.h)))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_divergence_of_linear_field_is_exact():
    g = build_grids(8)
    u = []
    for a, fam in enumerate(UFAMS):
        P = g.points(fam, g.interior(fam))
        u.append((a + 1) * P[..., a])
    d = divergence(*u, g.h)
    # cells touching the box see the zero wall value, interior cells are exact
    assert np.allclose(d[1:-1, 1:-1, 1:-1], 6.0)


def test_mac_apply_agrees_with_interior_operator():
    g = build_grids(6)
    rng = np.random.default_rng(2)
    u = [rng.standard_normal(g.interior_shape(f)) for f in UFAMS]
    p = rng.standard_normal(g.interior_shape("p"))
    fld = MACField.from_interior(g, *u, p)
    res = mac_apply(fld, 1.7, 0.3, g)
    mom, cont = stokes_apply(u, p, 1.7, 0.3, g.h)
    for fam, m in zip(UFAMS, mom):
        assert np.allclose(res[fam][g.interior(fam)], m)
    assert np.allclose(res.p, cont)


@pytest.mark.parametrize("surf", [sphere(), torus()], ids=lambda s: s.kind)
def test_irregular_nodes_brute_force(surf):
    # [DERIVED] a node is irregular iff some stencil neighbour lies on the other side
    g = build_grids(12)
    cps = find_intersections(surf, g)
    masks = mark_nodes(g, surf, cps)
    for fam in FAMILIES:
        P = g.points(fam)
        side = surf(P) <= 1e-12 * g.h
        sl = g.interior(fam)
        c = side[sl]
        irr = np.zeros_like(c)
        if fam != "p":
            for a in range(3):
                for s in (-1, 1):
                    sh = list(sl)
                    sh[a] = slice(sl[a].start + s, sl[a].stop + s)
                    irr |= side[tuple(sh)] != c
            # the pressure gradient arms of face nodes
            m = UFAMS.index(fam)
            sp_ = surf(g.points("p")) <= 1e-12 * g.h
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[m] = slice(0, -1)
            hi[m] = slice(1, None)
            irr |= (sp_[tuple(lo)] != c) | (sp_[tuple(hi)] != c)
        else:
            for m, uf in enumerate(UFAMS):
                su = surf(g.points(uf)) <= 1e-12 * g.h
                inner = [slice(1, g.N + 1)] * 3
                lo = list(inner)
                hi = list(inner)
                lo[m] = slice(0, g.N)
                hi[m] = slice(1, g.N + 1)
                irr |= (su[tuple(lo)] != c) | (su[tuple(hi)] != c)
        assert np.array_equal(irr, masks.irregular[fam]), fam
        assert np.array_equal(masks.inside[fam], side)
