"""Error norms, convergence tables and field dumps for the benchmark problems."""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .bie import KFBISolver, ProblemSpec
from .errors import EmptyInterior, KFBIError
from .grid import UFAMS

log = logging.getLogger(__name__)

COLUMNS = ("u1", "u2", "u3", "p")


def problem_for(case, N, **overrides) -> ProblemSpec:
    """The Dirichlet problem of an :class:`~kfbi3d.cases.ExampleCase` on an ``N`` grid."""
    kw = dict(mu_s=case.mu) if case.kind == "stokes" else dict(E=case.E, nu=case.nu)
    kw.update(overrides)
    return ProblemSpec(case.kind, case.surface, N, f=case.f, g=case.g, **kw)


def compute_norms(fields, exact_u, exact_p, grids, masks, kind="stokes"):
    """Normalized max and l2 errors per column over nodes strictly inside the domain.

    ``exact_u(i)`` returns a callable for velocity component ``i``;
    ``exact_p`` is a callable for the pressure.  Returns
    ``{"u1": (e_max, e_l2), ..., "p": (e_max, e_l2)}``.  For Stokes the
    numerical pressure is shifted to the exact mean first.
    """
    out = {}
    for i, fam in enumerate(UFAMS):
        sl = grids.interior(fam)
        ins = masks.inside[fam][sl]
        if not ins.any():
            raise EmptyInterior(f"no {fam} nodes inside the domain; increase N")
        ex = np.asarray(exact_u(i)(grids.points(fam, sl)[ins]), dtype=float)
        out[fam] = _relative(fields[fam][sl][ins], ex)
    ins = masks.inside["p"]
    if not ins.any():
        raise EmptyInterior("no pressure nodes inside the domain; increase N")
    ex = np.asarray(exact_p(grids.points("p")[ins]), dtype=float)
    num = np.asarray(fields["p"], dtype=float)[ins]
    if kind == "stokes":
        num = num - num.mean() + ex.mean()
    out["p"] = _relative(num, ex)
    return out


def _relative(num, ex):
    err = num - ex
    emax = np.abs(err).max() / np.abs(ex).max()
    el2 = math.sqrt(np.mean(err * err) / np.mean(ex * ex))
    return float(emax), float(el2)


@dataclass
class ConvergenceRow:
    N: int
    gmres_iterations: int | None = None
    errors: dict | None = None
    seconds: float = 0.0
    control_points: int = 0
    failure: str | None = None

    @property
    def failed(self):
        return self.failure is not None


@dataclass
class ConvergenceTable:
    """Rows of a grid-refinement study; rates are ``log2(e(N/2) / e(N))``."""

    case_id: str
    rows: list = field(default_factory=list)

    def error(self, N, column, norm="max"):
        row = self._row(N)
        if row is None or row.failed:
            return None
        return row.errors[column][0 if norm == "max" else 1]

    def _row(self, N):
        for r in self.rows:
            if r.N == N:
                return r
        return None

    def rate(self, N, column, norm="max"):
        """Observed order between ``N/2`` and ``N``, or ``None`` if either row is missing."""
        if N % 2:
            return None
        a, b = self.error(N // 2, column, norm), self.error(N, column, norm)
        if a is None or b is None or a <= 0 or b <= 0:
            return None
        return math.log2(a / b)

    def to_text(self):
        buf = io.StringIO()
        for norm in ("max", "l2"):
            buf.write(f"Example {self.case_id}, {norm} norm errors\n")
            head = f"{'N':>5} {'steps':>6}" + "".join(f" {c:>10} {'rate':>5}" for c in COLUMNS)
            buf.write(head + "\n")
            for r in self.rows:
                if r.failed:
                    buf.write(f"{r.N:>5} {'-':>6}  FAILED: {r.failure}\n")
                    continue
                line = f"{r.N:>5} {r.gmres_iterations:>6}"
                for c in COLUMNS:
                    rt = self.rate(r.N, c, norm)
                    line += f" {r.errors[c][0 if norm == 'max' else 1]:>10.3e} {'-' if rt is None else f'{rt:.2f}':>5}"
                buf.write(line + "\n")
            buf.write("\n")
        return buf.getvalue()

    CSV_HEADER = ("example", "N", "status", "gmres_iterations", "control_points", "seconds",
                  *(f"{c}_{n}" for n in ("max", "l2") for c in COLUMNS),
                  *(f"{c}_{n}_rate" for n in ("max", "l2") for c in COLUMNS))

    def to_csv(self, path=None):
        """Write one row per grid (columns in ``CSV_HEADER``); returns the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for r in self.rows:
            if r.failed:
                w.writerow([self.case_id, r.N, "failed", "", r.control_points, f"{r.seconds:.3f}"]
                           + [""] * 16)
                continue
            errs = [repr(r.errors[c][k]) for k in (0, 1) for c in COLUMNS]
            rates = []
            for norm in ("max", "l2"):
                for c in COLUMNS:
                    rt = self.rate(r.N, c, norm)
                    rates.append("" if rt is None else f"{rt:.4f}")
            w.writerow([self.case_id, r.N, "ok", r.gmres_iterations, r.control_points, f"{r.seconds:.3f}"]
                       + errs + rates)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def run_case(case, N, **overrides):
    """Solve one example on one grid; returns ``(ConvergenceRow, solver, fields)``."""
    t0 = time.perf_counter()
    solver = KFBISolver(problem_for(case, N, **overrides))
    fields, _, diag = solver.solve()
    errors = compute_norms(fields, case.u_component, case.p, solver.grids, solver.masks, case.kind)
    row = ConvergenceRow(N, diag.gmres_iterations, errors, time.perf_counter() - t0, len(solver.cps))
    return row, solver, fields


def run_convergence(case, Ns, out_dir=None, dump_fields=False, **overrides) -> ConvergenceTable:
    """Grid-refinement study; a failing grid is recorded and the remaining grids still run."""
    Ns = [int(n) for n in Ns]
    if any(n < 16 for n in Ns) or Ns != sorted(Ns):
        raise ValueError("grid sizes must be ascending and at least 16")
    table = ConvergenceTable(case.id)
    for N in Ns:
        t0 = time.perf_counter()
        try:
            row, solver, fields = run_case(case, N, **overrides)
        except KFBIError as exc:
            log.warning("example %s N=%d failed: %s", case.id, N, exc)
            table.rows.append(ConvergenceRow(N, seconds=time.perf_counter() - t0,
                                             failure=f"{type(exc).__name__}: {exc}"))
            continue
        table.rows.append(row)
        log.info("example %s N=%d steps=%d e_u1=%.3e (%.1fs)", case.id, N, row.gmres_iterations,
                 row.errors["u1"][0], row.seconds)
        if dump_fields and out_dir is not None:
            write_vtk(f"{out_dir}/example_{case.id}_N{N}.vtk", solver.grids, fields, solver.masks)
    if out_dir is not None:
        table.to_csv(f"{out_dir}/example_{case.id}.csv")
        with open(f"{out_dir}/example_{case.id}.txt", "w") as fh:
            fh.write(table.to_text())
    return table


def cell_centred(fields, grids):
    """Velocity averaged from faces to the pressure nodes, ``(N, N, N, 3)``."""
    N = grids.N
    out = np.empty((N, N, N, 3))
    for a, fam in enumerate(UFAMS):
        v = np.asarray(fields[fam])
        # faces along axis a sit at i and i+1 around cell i; ghost layers pad the other axes
        lo = [slice(1, N + 1)] * 3
        hi = [slice(1, N + 1)] * 3
        lo[a] = slice(0, N)
        hi[a] = slice(1, N + 1)
        out[..., a] = 0.5 * (v[tuple(lo)] + v[tuple(hi)])
    return out


def write_vtk(path, grids, fields, masks=None):
    """Legacy ASCII VTK structured-points file of the fields on the cell centres.

    Values are written with 17 significant digits so they round-trip exactly.
    """
    N, h = grids.N, grids.h
    o = grids.lo + 0.5 * h
    vel = cell_centred(fields, grids)
    p = np.asarray(fields["p"], dtype=float)

    def rows(a):
        # VTK runs x fastest; arrays are indexed [i, j, k]
        return "\n".join(f"{v:.17g}" for v in np.asarray(a).transpose(2, 1, 0).ravel())

    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\nkfbi3d fields\nASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {N} {N} {N}\nORIGIN {o:.17g} {o:.17g} {o:.17g}\nSPACING {h:.17g} {h:.17g} {h:.17g}\n")
        fh.write(f"POINT_DATA {N ** 3}\nSCALARS p double 1\nLOOKUP_TABLE default\n{rows(p)}\n")
        fh.write("VECTORS u double\n")
        flat = vel.transpose(2, 1, 0, 3).reshape(-1, 3)
        fh.write("\n".join(" ".join(f"{c:.17g}" for c in r) for r in flat) + "\n")
        if masks is not None:
            fh.write(f"SCALARS inside int 1\nLOOKUP_TABLE default\n{rows(masks.inside['p'].astype(int))}\n")
