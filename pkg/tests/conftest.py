import functools
import gc
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

import acceptance_log  # noqa: E402


@dataclass(frozen=True)
class Solved:
    """What the slow tests need from one full solve; fields are dropped to bound memory."""

    row: object
    dirichlet_error: float


@functools.lru_cache(maxsize=None)
def solved(case_id, N):
    """One full solve per (example, N) for the whole session."""
    from kfbi3d.cases import get_case
    from kfbi3d.harness import run_case

    case = get_case(case_id)
    row, solver, fields = run_case(case, N)
    err = float(np.abs(solver.boundary_trace(fields) - case.g(solver.cps.location)).max())
    del solver, fields
    gc.collect()
    return Solved(row, err)


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.lines():
            terminalreporter.write_line(line)
