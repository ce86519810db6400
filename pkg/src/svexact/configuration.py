"""Segre-Veronese configurations.

A configuration is described by ``d`` rows, a common degree ``tau`` and a
list of interval constraints ``c <= #{k : s <= cell[k] <= r} <= b``. Each
cell (column of ``A``) is stored as its weakly increasing multiset of 1-based
row indices, i.e. a column of the index matrix ``Atilde``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import CellLimitExceeded, EmptyCellSet, WeightMismatch

Cell = tuple  # weakly increasing tuple of 1-based row indices

DEFAULT_MAX_CELLS = 10**6


@dataclass(frozen=True)
class Constraint:
    s: int
    r: int
    c: int
    b: int

    def count(self, cell: Cell) -> int:
        return sum(1 for k in cell if self.s <= k <= self.r)


@dataclass(frozen=True)
class SegreVeroneseSpec:
    d: int
    tau: int
    constraints: tuple = ()
    row_labels: tuple = ()

    def __post_init__(self):
        cons = tuple(c if isinstance(c, Constraint) else Constraint(**c) for c in self.constraints)
        object.__setattr__(self, "constraints", cons)
        labels = tuple(self.row_labels) if self.row_labels else tuple(str(j) for j in range(1, self.d + 1))
        object.__setattr__(self, "row_labels", labels)

    def admits(self, cell: Cell) -> bool:
        """True when ``cell`` has length tau, valid indices and meets every bound."""
        if len(cell) != self.tau or any(k < 1 or k > self.d for k in cell):
            return False
        if any(cell[i] > cell[i + 1] for i in range(len(cell) - 1)):
            return False
        return all(con.c <= con.count(cell) <= con.b for con in self.constraints)


@dataclass
class ValidationReport:
    ok: bool
    violations: list = field(default_factory=list)
    empty: bool = False


def validate_spec(spec: SegreVeroneseSpec) -> ValidationReport:
    violations = []
    if spec.d < 1:
        violations.append("d >= 1 fails")
    if spec.tau < 1:
        violations.append("tau >= 1 fails")
    for i, con in enumerate(spec.constraints):
        if not (1 <= con.s):
            violations.append(f"constraint {i}: 1 <= s fails")
        if not (con.s <= con.r):
            violations.append(f"constraint {i}: s <= r fails")
        if not (con.r <= spec.d):
            violations.append(f"constraint {i}: r <= d fails")
        if not (0 <= con.c):
            violations.append(f"constraint {i}: 0 <= c fails")
        if not (con.c <= con.b):
            violations.append(f"constraint {i}: c <= b fails")
    if len(spec.row_labels) != spec.d:
        violations.append("row_labels must have exactly d entries")
    elif len(set(spec.row_labels)) != spec.d:
        violations.append("row_labels must be distinct")
    if violations:
        return ValidationReport(ok=False, violations=violations)
    empty = next(_iter_cells(spec), None) is None
    return ValidationReport(ok=True, violations=[], empty=empty)


def _iter_cells(spec: SegreVeroneseSpec) -> Iterator[Cell]:
    d, tau = spec.d, spec.tau
    cons = spec.constraints
    counts = [0] * len(cons)
    prefix: list = []

    def feasible(pos: int, last: int) -> bool:
        remaining = tau - pos
        for i, con in enumerate(cons):
            if counts[i] > con.b:
                return False
            need = con.c - counts[i]
            if need > 0:
                # later indices are >= last, so an interval already passed can't grow
                if last > con.r or need > remaining:
                    return False
        return True

    def rec(pos: int, lo: int):
        if pos == tau:
            if all(con.c <= counts[i] <= con.b for i, con in enumerate(cons)):
                yield tuple(prefix)
            return
        for k in range(lo, d + 1):
            touched = [i for i, con in enumerate(cons) if con.s <= k <= con.r]
            for i in touched:
                counts[i] += 1
            prefix.append(k)
            if feasible(pos + 1, k):
                yield from rec(pos + 1, k)
            prefix.pop()
            for i in touched:
                counts[i] -= 1

    yield from rec(0, 1)


def enumerate_cells(spec: SegreVeroneseSpec, max_cells: int = DEFAULT_MAX_CELLS) -> list:
    """All admissible cells in lexicographic order."""
    cells = []
    for cell in _iter_cells(spec):
        cells.append(cell)
        if len(cells) > max_cells:
            raise CellLimitExceeded(f"more than {max_cells} cells")
    if not cells:
        raise EmptyCellSet("no multiset of size tau satisfies the interval bounds")
    return cells


def cell_label(cell: Cell) -> str:
    return ".".join(str(k) for k in cell)


@dataclass(frozen=True, eq=False)
class Configuration:
    spec: SegreVeroneseSpec
    cells: tuple
    A: np.ndarray
    Atilde: np.ndarray
    weights: tuple
    labels: tuple

    @property
    def nu(self) -> int:
        return len(self.cells)

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def tau(self) -> int:
        return self.spec.tau

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(np.array([float(w) for w in self.weights]))

    def index(self, cell: Cell) -> int:
        return self._index[tuple(cell)]

    def __contains__(self, cell) -> bool:
        return tuple(cell) in self._index

    def sufficient_statistic(self, x) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=np.int64)

    def __post_init__(self):
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.cells)})


def build_matrices(
    spec: SegreVeroneseSpec,
    weights: Sequence | None = None,
    labels: Sequence[str] | None = None,
    max_cells: int = DEFAULT_MAX_CELLS,
) -> Configuration:
    cells = enumerate_cells(spec, max_cells=max_cells)
    nu = len(cells)
    if weights is None:
        weights = [Fraction(1)] * nu
    else:
        weights = [Fraction(w) for w in weights]
        if len(weights) != nu:
            raise WeightMismatch(f"{len(weights)} weights given for {nu} cells")
        if any(w <= 0 for w in weights):
            raise WeightMismatch("weights must be positive")
    if labels is None:
        labels = [cell_label(c) for c in cells]
    elif len(labels) != nu:
        raise ValueError(f"{len(labels)} labels given for {nu} cells")

    atilde = np.array(cells, dtype=np.int64).T.reshape(spec.tau, nu)
    A = np.zeros((spec.d, nu), dtype=np.int64)
    for i, cell in enumerate(cells):
        for k in cell:
            A[k - 1, i] += 1
    return Configuration(
        spec=spec,
        cells=tuple(cells),
        A=A,
        Atilde=atilde,
        weights=tuple(weights),
        labels=tuple(labels),
    )


def cells_from_matrix(A: np.ndarray) -> list:
    """Recover the index multisets from the columns of ``A``."""
    A = np.asarray(A)
    sums = A.sum(axis=0)
    if sums.size and not np.all(sums == sums[0]):
        raise ValueError("column sums of A are not constant")
    cells = []
    for col in A.T:
        cell = []
        for j, a in enumerate(col):
            cell.extend([j + 1] * int(a))
        cells.append(tuple(cell))
    return cells


def format_matrix(M: np.ndarray) -> str:
    """Plain-text dump: ``rows cols`` header then one row per line."""
    M = np.asarray(M)
    lines = [f"{M.shape[0]} {M.shape[1]}"]
    lines.extend(" ".join(str(int(v)) for v in row) for row in M)
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    rows = [line.split() for line in text.splitlines() if line.strip()]
    if not rows:
        raise ValueError("empty matrix file")
    nrow, ncol = int(rows[0][0]), int(rows[0][1])
    body = rows[1:]
    if len(body) != nrow or any(len(r) != ncol for r in body):
        raise ValueError(f"matrix body does not match header {nrow} x {ncol}")
    return np.array([[int(v) for v in r] for r in body], dtype=np.int64).reshape(nrow, ncol)
