"""Brute-force ground truth for small fibers.

``enumerate_fiber`` lists every nonnegative integer solution of ``A x = t``,
``exact_conditional`` weights them by ``prod h^x / x!`` in exact rational
arithmetic, and ``check_connectivity`` builds the move graph on every fiber
up to a sample size and checks that the sorting moves connect it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .configuration import Configuration
from .errors import InfeasibleTotal, SizeLimit
from .groebner import generate_groebner_basis
from .models import CompiledModel
from .stats import TIE_RTOL

DEFAULT_CAP = 10**6


def enumerate_fiber(config: Configuration, t, cap: int = DEFAULT_CAP) -> list:
    """All ``x >= 0`` with ``A x = t``, in lexicographically decreasing order.

    Cells are filled in lexicographic order; a cell's count is bounded by the
    residual margins it touches, and the last cell touching a row must use up
    that row exactly.
    """
    A = np.asarray(config.A, dtype=np.int64)
    t = np.asarray(t, dtype=np.int64)
    if t.shape != (config.d,) or np.any(t < 0):
        raise InfeasibleTotal("t must be a nonnegative vector of length d")
    if int(t.sum()) % config.tau:
        raise InfeasibleTotal(f"sum(t) = {int(t.sum())} is not divisible by tau = {config.tau}")
    nu = config.nu
    rows_of = [np.nonzero(A[:, i])[0] for i in range(nu)]
    last = np.full(config.d, -1)
    for i in range(nu):
        last[rows_of[i]] = i
    if np.any((last < 0) & (t > 0)):
        return []
    closing = [[j for j in rows_of[i] if last[j] == i] for i in range(nu)]

    resid = t.copy()
    x = np.zeros(nu, dtype=np.int64)
    out: list = []

    def rec(i: int):
        if i == nu:
            out.append(x.copy())
            if len(out) > cap:
                raise SizeLimit(f"fiber has more than {cap} states")
            return
        rows = rows_of[i]
        a = A[rows, i]
        hi = int(np.min(resid[rows] // a))
        lo = 0
        for j in closing[i]:
            need, rem = divmod(int(resid[j]), int(A[j, i]))
            if rem:
                return
            hi = min(hi, need)
            lo = max(lo, need)
        for k in range(hi, lo - 1, -1):
            x[i] = k
            resid[rows] -= k * a
            rec(i + 1)
            resid[rows] += k * a
        x[i] = 0

    rec(0)
    return out


def state_mass(model: CompiledModel, x) -> Fraction:
    """``prod_i h(i)^x(i) / x(i)!`` as an exact rational."""
    mass = Fraction(1)
    for h, k in zip(model.h, x):
        k = int(k)
        if k:
            mass *= Fraction(h) ** k / math.factorial(k)
    return mass


@dataclass
class ExactDistribution:
    states: list
    probabilities: list  # Fractions summing to exactly 1

    def as_float(self) -> np.ndarray:
        return np.array([float(p) for p in self.probabilities])

    def tail_probability(self, statistic, observed: float) -> Fraction:
        cut = observed - TIE_RTOL * max(1.0, abs(observed))
        return sum((p for s, p in zip(self.states, self.probabilities) if statistic(s) >= cut), Fraction(0))


def exact_conditional(model: CompiledModel, t, cap: int = DEFAULT_CAP) -> ExactDistribution:
    states = enumerate_fiber(model.configuration, t, cap=cap)
    masses = [state_mass(model, s) for s in states]
    total = sum(masses, Fraction(0))
    return ExactDistribution(states=states, probabilities=[m / total for m in masses])


def exact_p_value(model: CompiledModel, x, statistic, cap: int = DEFAULT_CAP) -> float:
    """Exact conditional probability that ``statistic`` is at least its observed value."""
    x = np.asarray(x, dtype=np.int64)
    dist = exact_conditional(model, model.configuration.A @ x, cap=cap)
    return float(dist.tail_probability(statistic, float(statistic(x))))


# --- connectivity -----------------------------------------------------------


def _multisets(nu: int, n: int) -> np.ndarray:
    """All weakly increasing length-``n`` sequences over ``range(nu)``, lexicographic."""
    states = np.arange(nu, dtype=np.int64)[:, None]
    for _ in range(n - 1):
        last = states[:, -1]
        reps = nu - last
        base = np.repeat(states, reps, axis=0)
        starts = np.repeat(last, reps)
        offs = np.arange(reps.sum()) - np.repeat(np.cumsum(reps) - reps, reps)
        states = np.hstack([base, (starts + offs)[:, None]])
    return states


def _encode(states: np.ndarray, base: int) -> np.ndarray:
    key = np.zeros(states.shape[0], dtype=np.int64)
    for k in range(states.shape[1]):
        key = key * base + states[:, k]
    return key


@dataclass
class ConnectivityReport:
    passed: bool
    n_max: int
    fibers: int = 0
    states: int = 0
    disconnected: list = field(default_factory=list)  # t vectors of broken fibers (capped)
    basis_size: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "passed": self.passed,
                "n_max": self.n_max,
                "fibers": self.fibers,
                "states": self.states,
                "basis_size": self.basis_size,
                "disconnected": [list(map(int, t)) for t in self.disconnected],
            },
            indent=2,
        )


def check_connectivity(
    config: Configuration,
    n_max: int,
    cap: int = 20_000_000,
    report_cap: int = 20,
    basis=None,
) -> ConnectivityReport:
    """Check that the sorting moves connect every fiber with sample size ``<= n_max``.

    States of size ``n`` are stored as sorted tuples of cell indices. Each
    position pair holding a nonsorted pair of cells gives an edge to the
    state with that pair replaced by its sorted form. Fibers are the classes
    of equal ``A x``; the check passes when every fiber is one component.
    ``basis`` overrides the generated sorting basis (e.g. to drop elements).
    """
    nu = config.nu
    if basis is None:
        basis = generate_groebner_basis(config)
    trail = np.full((nu, nu, 2), -1, dtype=np.int64)
    for b in basis:
        i, j = config.index(b.lead[0]), config.index(b.lead[1])
        c, e = config.index(b.trail[0]), config.index(b.trail[1])
        trail[i, j] = trail[j, i] = (c, e)
    A = np.asarray(config.A, dtype=np.int64)
    report = ConnectivityReport(passed=True, n_max=n_max, basis_size=len(basis))

    for n in range(1, n_max + 1):
        if math.comb(nu + n - 1, n) > cap:
            raise SizeLimit(f"{math.comb(nu + n - 1, n)} states of size {n} exceed the cap {cap}")
        if float(nu) ** n >= 2**62:
            raise SizeLimit("state keys would overflow")
        states = _multisets(nu, n)
        keys = _encode(states, nu)  # increasing, since states are lexicographic
        N = states.shape[0]
        t = np.zeros((N, config.d), dtype=np.int64)
        for k in range(n):
            t += A[:, states[:, k]].T
        _, fiber_id = np.unique(t, axis=0, return_inverse=True)
        fiber_id = fiber_id.ravel()
        n_fibers = int(fiber_id.max()) + 1

        labels = np.arange(N)
        for p in range(n):
            for q in range(p + 1, n):
                tr = trail[states[:, p], states[:, q]]
                src = np.nonzero(tr[:, 0] >= 0)[0]
                if src.size == 0:
                    continue
                nb = states[src].copy()
                nb[:, p] = tr[src, 0]
                nb[:, q] = tr[src, 1]
                nb.sort(axis=1)
                dst = np.searchsorted(keys, _encode(nb, nu))
                g = coo_matrix((np.ones(src.size, dtype=np.int8), (labels[src], labels[dst])), shape=(N, N))
                _, comp = connected_components(g, directed=False)
                labels = comp[labels]

        n_comp = np.unique(labels).size
        report.fibers += n_fibers
        report.states += N
        if n_comp != n_fibers:
            report.passed = False
            comps_per_fiber = np.zeros(n_fibers, dtype=np.int64)
            pairs = np.unique(np.stack([fiber_id, labels], axis=1), axis=0)
            np.add.at(comps_per_fiber, pairs[:, 0], 1)
            for f in np.nonzero(comps_per_fiber > 1)[0][: max(0, report_cap - len(report.disconnected))]:
                report.disconnected.append(t[np.argmax(fiber_id == f)])
    return report


def oracle_report(model: CompiledModel, x, statistic=None, cap: int = DEFAULT_CAP, max_states: int = 1000) -> dict:
    """Fiber size, exact probabilities and (optionally) the exact P-value as a dict."""
    x = np.asarray(x, dtype=np.int64)
    t = model.configuration.A @ x
    dist = exact_conditional(model, t, cap=cap)
    out = {
        "fiber_size": len(dist.states),
        "t": [int(v) for v in t],
    }
    if len(dist.states) <= max_states:
        out["states"] = [[int(v) for v in s] for s in dist.states]
        out["probabilities"] = [float(p) for p in dist.probabilities]
    if statistic is not None:
        obs = float(statistic(x))
        out["observed"] = obs
        out["p_exact"] = float(dist.tail_probability(statistic, obs))
    return out
