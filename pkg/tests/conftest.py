import itertools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from svexact.configuration import Constraint, SegreVeroneseSpec, build_matrices  # noqa: E402
from svexact.models import compile_model  # noqa: E402


def segre(*sizes):
    """Product of simplices: one index from each block."""
    cons, start = [], 1
    for m in sizes:
        cons.append(Constraint(start, start + m - 1, 1, 1))
        start += m
    return SegreVeroneseSpec(d=start - 1, tau=len(sizes), constraints=tuple(cons))


def veronese(d, tau):
    return SegreVeroneseSpec(d=d, tau=tau)


def raw_model(spec, weights=None):
    doc = {
        "type": "segre_veronese",
        "d": spec.d,
        "tau": spec.tau,
        "constraints": [{"s": c.s, "r": c.r, "c": c.c, "b": c.b} for c in spec.constraints],
    }
    if weights is not None:
        doc["weights"] = weights
    return compile_model(doc)


def single_locus_hw(alleles):
    return compile_model({
        "type": "genetics", "hypothesis": "hardy_weinberg",
        "loci": [{"name": "L", "alleles": list(alleles)}],
    })


def brute_cells(spec):
    """Oracle: filter every weakly increasing tau-tuple."""
    out = []
    for cell in itertools.combinations_with_replacement(range(1, spec.d + 1), spec.tau):
        if all(c.c <= sum(1 for k in cell if c.s <= k <= c.r) <= c.b for c in spec.constraints):
            out.append(cell)
    return out


def brute_fiber(A, t):
    """Oracle: every x with sum x = n and A x = t, by exhaustive search."""
    A = np.asarray(A)
    tau = int(A[:, 0].sum())
    n = int(np.sum(t)) // tau
    nu = A.shape[1]
    out = []
    for combo in itertools.combinations_with_replacement(range(nu), n):
        x = np.bincount(combo, minlength=nu)
        if np.array_equal(A @ x, t):
            out.append(tuple(int(v) for v in x))
    return out


SMALL_SPECS = {
    "veronese_2_2": veronese(2, 2),
    "veronese_3_2": veronese(3, 2),
    "veronese_2_3": veronese(2, 3),
    "segre_2_2": segre(2, 2),
    "segre_3_3": segre(3, 3),
    "segre_2_2_2": segre(2, 2, 2),
    "bounded": SegreVeroneseSpec(4, 3, (Constraint(1, 2, 1, 2), Constraint(3, 4, 1, 2))),
}


@pytest.fixture(params=sorted(SMALL_SPECS))
def small_config(request):
    return build_matrices(SMALL_SPECS[request.param])


# one line per acceptance criterion check, printed at the end of the run
ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
