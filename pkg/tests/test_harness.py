import csv
import io
import math

import numpy as np
import pytest

from kfbi3d import harness
from kfbi3d.cases import get_case
from kfbi3d.errors import EmptyInterior, GMRESNoConvergence
from kfbi3d.geometry import find_intersections, sphere
from kfbi3d.grid import UFAMS, MACField, build_grids, mark_nodes
from kfbi3d.harness import ConvergenceRow, ConvergenceTable, cell_centred, compute_norms, write_vtk


def _exact_fields(case, N):
    g = build_grids(N)
    cps = find_intersections(case.surface, g)
    masks = mark_nodes(g, case.surface, cps)
    fld = MACField.zeros(g)
    for i, fam in enumerate(UFAMS):
        fld[fam][...] = case.u_component(i)(g.points(fam))
    fld.p[...] = case.p(g.points("p"))
    return g, masks, fld


def test_norms_vanish_on_exact_fields():
    case = get_case("5.1")
    g, masks, fld = _exact_fields(case, 16)
    fld.p[...] += 3.0  # a Stokes pressure is defined up to a constant
    errs = compute_norms(fld, case.u_component, case.p, g, masks, "stokes")
    assert set(errs) == {"u1", "u2", "u3", "p"}
    assert all(v == (0.0, 0.0) for k, v in errs.items() if k != "p")
    assert max(errs["p"]) < 1e-14


def test_navier_pressure_is_not_shifted():
    case = get_case("5.4")
    g, masks, fld = _exact_fields(case, 16)
    fld.p[...] += 1.0
    emax, el2 = compute_norms(fld, case.u_component, case.p, g, masks, "navier")["p"]
    ex = case.p(g.points("p")[masks.inside["p"]])
    assert emax == pytest.approx(1.0 / np.abs(ex).max())
    assert el2 == pytest.approx(1.0 / math.sqrt(np.mean(ex**2)))


def test_norms_of_a_known_perturbation():
    case = get_case("5.1")
    g, masks, fld = _exact_fields(case, 16)
    sl = g.interior("u2")
    ins = masks.inside["u2"][sl]
    ex = case.u_component(1)(g.points("u2", sl)[ins])
    view = fld.u2[sl]
    view[ins] += 0.01
    fld.u2[sl] = view
    emax, el2 = compute_norms(fld, case.u_component, case.p, g, masks)["u2"]
    assert emax == pytest.approx(0.01 / np.abs(ex).max())
    assert el2 == pytest.approx(0.01 / math.sqrt(np.mean(ex**2)))


def test_empty_interior_raises():
    case = get_case("5.1")
    tiny = sphere(0.01)
    g = build_grids(8)
    cps = find_intersections(tiny, g)
    masks = mark_nodes(g, tiny, cps)
    with pytest.raises(EmptyInterior):
        compute_norms(MACField.zeros(g), case.u_component, case.p, g, masks)


def _row(N, e):
    return ConvergenceRow(N, 12, {c: (e, e / 10) for c in harness.COLUMNS}, 1.0, 100)


def test_table_rates_and_text():
    t = ConvergenceTable("5.1", [_row(16, 4e-2), _row(32, 1e-2), _row(64, 2.5e-3)])
    assert t.rate(16, "u1") is None
    assert t.rate(32, "u1") == pytest.approx(2.0)
    assert t.rate(64, "p", "l2") == pytest.approx(2.0)
    assert t.rate(48, "u1") is None
    text = t.to_text()
    assert "Example 5.1, max norm errors" in text and "2.00" in text


def test_table_csv_round_trip(tmp_path):
    t = ConvergenceTable("5.4", [_row(16, 4e-2), ConvergenceRow(32, failure="GMRESNoConvergence: x"),
                                 _row(64, 1e-3)])
    path = tmp_path / "t.csv"
    text = t.to_csv(path)
    assert path.read_text() == text
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [r["status"] for r in rows] == ["ok", "failed", "ok"]
    assert list(rows[0]) == list(ConvergenceTable.CSV_HEADER)
    assert float(rows[0]["u1_max"]) == 4e-2
    assert rows[2]["u1_max_rate"] == ""  # the N = 32 row failed
    assert "FAILED" in t.to_text()


def test_failed_grid_does_not_stop_the_study(monkeypatch, tmp_path):
    def fake(case, N, **kw):
        if N == 32:
            raise GMRESNoConvergence("stalled")
        return _row(N, 1.0 / N**2), None, None

    monkeypatch.setattr(harness, "run_case", fake)
    t = harness.run_convergence(get_case("5.1"), [16, 32, 64], out_dir=str(tmp_path))
    assert [r.failed for r in t.rows] == [False, True, False]
    assert t.rows[1].failure.startswith("GMRESNoConvergence")
    assert (tmp_path / "example_5.1.csv").exists() and (tmp_path / "example_5.1.txt").exists()


def test_study_rejects_bad_grid_lists():
    with pytest.raises(ValueError):
        harness.run_convergence(get_case("5.1"), [8, 16])
    with pytest.raises(ValueError):
        harness.run_convergence(get_case("5.1"), [32, 16])


def _read_vtk(path):
    lines = open(path).read().split("\n")
    assert lines[0].startswith("# vtk DataFile")
    dims = [int(v) for v in lines[4].split()[1:]]
    n = int(np.prod(dims))
    i = lines.index("LOOKUP_TABLE default") + 1
    p = np.array([float(v) for v in lines[i:i + n]])
    j = i + n + 1
    u = np.array([[float(c) for c in r.split()] for r in lines[j:j + n]])
    k = lines.index("LOOKUP_TABLE default", j) + 1
    ins = np.array([int(v) for v in lines[k:k + n]])
    return dims, p, u, ins


def test_vtk_round_trip(tmp_path):
    case = get_case("5.1")
    g, masks, fld = _exact_fields(case, 8)
    path = tmp_path / "f.vtk"
    write_vtk(path, g, fld, masks)
    dims, p, u, ins = _read_vtk(path)
    N = g.N
    assert dims == [N, N, N]
    # file order is x fastest
    np.testing.assert_array_equal(p, fld.p.transpose(2, 1, 0).ravel())
    np.testing.assert_array_equal(u, cell_centred(fld, g).transpose(2, 1, 0, 3).reshape(-1, 3))
    np.testing.assert_array_equal(ins, masks.inside["p"].transpose(2, 1, 0).ravel().astype(int))


def test_cell_centred_average_is_exact_for_linear_fields():
    g = build_grids(8)
    fld = MACField.zeros(g)
    A = np.array([[1.0, 2.0, -1.0], [0.5, 0.0, 3.0], [-2.0, 1.0, 1.0]])
    for a, fam in enumerate(UFAMS):
        fld[fam][...] = g.points(fam) @ A[a]
    np.testing.assert_allclose(cell_centred(fld, g), g.points("p") @ A.T, atol=1e-13)


def test_runs_are_deterministic():
    case = get_case("5.4")
    a, _, fa = harness.run_case(case, 16)
    b, _, fb = harness.run_case(case, 16)
    assert a.errors == b.errors and a.gmres_iterations == b.gmres_iterations
    for fam in UFAMS + ("p",):
        np.testing.assert_array_equal(fa[fam], fb[fam])
