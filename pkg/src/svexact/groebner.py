"""Quadratic sorting basis of a Segre-Veronese configuration.

Every unordered pair of cells whose interleaved index string is not weakly
increasing gives one binomial ``lead - trail`` where ``trail`` is obtained by
sorting the ``2 tau`` indices and dealing them out alternately. Together these
binomials are the reduced Groebner basis of the toric ideal, and the
corresponding moves form a minimal Markov basis.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .configuration import Cell, Configuration, SegreVeroneseSpec


def sort_interleave(alpha: Cell, beta: Cell, spec: SegreVeroneseSpec | None = None) -> tuple:
    """Sort the indices of two cells and split them into odd/even positions.

    >>> sort_interleave((1, 3, 3), (1, 2, 4))
    ((1, 2, 3), (1, 3, 4))
    """
    gamma = sorted(tuple(alpha) + tuple(beta))
    odd, even = tuple(gamma[0::2]), tuple(gamma[1::2])
    if spec is not None:
        assert spec.admits(odd) and spec.admits(even), (
            f"sorting {alpha}, {beta} left the cell set: {odd}, {even}"
        )
    return odd, even


def is_sorted_pair(alpha: Cell, beta: Cell) -> bool:
    """``alpha_1 <= beta_1 <= alpha_2 <= ... <= alpha_tau <= beta_tau``."""
    prev = None
    for a, b in zip(alpha, beta):
        if prev is not None and a < prev:
            return False
        if b < a:
            return False
        prev = b
    return True


def pair_is_sorted(alpha: Cell, beta: Cell) -> bool:
    """Sortedness of the unordered pair (either orientation)."""
    return is_sorted_pair(alpha, beta) or is_sorted_pair(beta, alpha)


@dataclass(frozen=True)
class Move:
    """Degree-2 move ``z = plus - minus`` keyed by cell index."""

    plus: dict
    minus: dict

    def vector(self, nu: int) -> np.ndarray:
        z = np.zeros(nu, dtype=np.int64)
        for i, k in self.plus.items():
            z[i] += k
        for i, k in self.minus.items():
            z[i] -= k
        return z

    def negated(self) -> "Move":
        return Move(plus=dict(self.minus), minus=dict(self.plus))


def _pair_counts(i: int, j: int) -> dict:
    out: dict = {}
    for k in (i, j):
        out[k] = out.get(k, 0) + 1
    return out


@dataclass(frozen=True)
class Binomial:
    lead: tuple  # nonsorted pair of cells, lexicographic order
    trail: tuple  # sorted pair (gamma_odd, gamma_even)

    def move(self, config: Configuration) -> Move:
        """The move ``trail - lead`` (applying it reduces the lead)."""
        lead = _pair_counts(config.index(self.lead[0]), config.index(self.lead[1]))
        trail = _pair_counts(config.index(self.trail[0]), config.index(self.trail[1]))
        return Move(plus=trail, minus=lead)

    def format(self, config: Configuration) -> str:
        lab = config.labels
        a, b = (lab[config.index(c)] for c in self.lead)
        c, d = (lab[config.index(c)] for c in self.trail)
        return f"{a} {b} -> {c} {d}"


def generate_groebner_basis(config: Configuration) -> list:
    basis = []
    cells = config.cells
    spec = config.spec
    for i in range(len(cells)):
        for j in range(i + 1, len(cells)):
            alpha, beta = cells[i], cells[j]
            if pair_is_sorted(alpha, beta):
                continue
            trail = sort_interleave(alpha, beta, spec)
            assert trail[0] in config and trail[1] in config
            basis.append(Binomial(lead=(alpha, beta), trail=trail))
    return basis


def sorted_form(monomial: Iterable[Cell]) -> tuple:
    """Closed-form sorted monomial with the same index multiset.

    With ``k`` cells and the ``k * tau`` indices sorted as ``g``, cell ``r`` is
    ``g[r], g[r + k], g[r + 2k], ...``.
    """
    cells = [tuple(c) for c in monomial]
    k = len(cells)
    if k == 0:
        return ()
    g = sorted(i for c in cells for i in c)
    return tuple(sorted(tuple(g[r::k]) for r in range(k)))


def normal_form(
    config: Configuration | None,
    monomial: Sequence[Cell],
    rng: random.Random | None = None,
) -> tuple:
    """Reduce ``monomial`` by the sorting basis until every pair is sorted.

    Pairs are reduced in scan order, or in a random order when ``rng`` is
    given. The result is returned as a lexicographically ordered tuple.
    """
    cells = [tuple(c) for c in monomial]
    spec = config.spec if config is not None else None
    while True:
        pairs = [
            (i, j)
            for i in range(len(cells))
            for j in range(i + 1, len(cells))
            if not pair_is_sorted(cells[i], cells[j])
        ]
        if not pairs:
            return tuple(sorted(cells))
        i, j = rng.choice(pairs) if rng is not None else pairs[0]
        cells[i], cells[j] = sort_interleave(cells[i], cells[j], spec)


def format_basis(config: Configuration, basis: Sequence[Binomial]) -> str:
    return "".join(b.format(config) + "\n" for b in basis)


def moves_matrix(config: Configuration, basis: Sequence[Binomial]) -> np.ndarray:
    """One row of length nu per basis element."""
    if not basis:
        return np.zeros((0, config.nu), dtype=np.int64)
    return np.array([b.move(config).vector(config.nu) for b in basis], dtype=np.int64)
