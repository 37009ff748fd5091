"""Grid refinement on any of the six benchmarks.

    python demos/convergence_study.py 5.4 16 32 64

Prints the max and l2 error tables with observed rates, and the GMRES step
counts, which should stay roughly flat as the grid is refined.
"""
import logging
import sys

from kfbi3d import get_case, run_convergence

logging.basicConfig(level=logging.INFO, format="%(message)s")
logging.getLogger("kfbi3d").setLevel(logging.WARNING)
logging.getLogger("kfbi3d.harness").setLevel(logging.INFO)

cid = sys.argv[1] if len(sys.argv) > 1 else "5.1"
Ns = [int(n) for n in sys.argv[2:]] or [16, 32, 64]

table = run_convergence(get_case(cid), Ns)
print(table.to_text())
steps = [r.gmres_iterations for r in table.rows if not r.failed]
print("GMRES steps:", steps)
