import numpy as np
import pytest
from conftest import SMALL_SPECS, brute_cells, segre
from hypothesis import given, settings
from hypothesis import strategies as st

from svexact.configuration import (
    Constraint,
    SegreVeroneseSpec,
    build_matrices,
    cell_label,
    cells_from_matrix,
    enumerate_cells,
    format_matrix,
    parse_matrix,
    validate_spec,
)
from svexact.errors import CellLimitExceeded, EmptyCellSet, WeightMismatch


@st.composite
def specs(draw):
    d = draw(st.integers(1, 5))
    tau = draw(st.integers(1, 4))
    cons = []
    for _ in range(draw(st.integers(0, 3))):
        s = draw(st.integers(1, d))
        r = draw(st.integers(s, d))
        c = draw(st.integers(0, tau))
        b = draw(st.integers(c, tau))
        cons.append(Constraint(s, r, c, b))
    return SegreVeroneseSpec(d, tau, tuple(cons))


@given(specs())
@settings(max_examples=200, deadline=None)
def test_enumeration_matches_brute_force(spec):
    expected = brute_cells(spec)
    if not expected:
        with pytest.raises(EmptyCellSet):
            enumerate_cells(spec)
        assert validate_spec(spec).empty
    else:
        assert enumerate_cells(spec) == expected


@pytest.mark.parametrize("name", sorted(SMALL_SPECS))
def test_columns_sum_to_tau(name):
    config = build_matrices(SMALL_SPECS[name])
    assert np.all(config.A.sum(axis=0) == config.tau)
    assert config.Atilde.shape == (config.tau, config.nu)
    assert cells_from_matrix(config.A) == list(config.cells)


def test_veronese_and_segre_sizes():
    assert len(enumerate_cells(SegreVeroneseSpec(2, 2))) == 3
    assert len(enumerate_cells(SegreVeroneseSpec(4, 3))) == 20  # C(6, 3)
    assert len(enumerate_cells(segre(3, 4))) == 12
    assert enumerate_cells(segre(2, 2)) == [(1, 3), (1, 4), (2, 3), (2, 4)]


def test_lexicographic_order_and_labels():
    cells = enumerate_cells(SegreVeroneseSpec(3, 2))
    assert cells == sorted(cells)
    assert cell_label((1, 3, 3)) == "1.3.3"


def test_validation_messages():
    bad = SegreVeroneseSpec(3, 2, (Constraint(3, 2, 0, 1), Constraint(1, 2, 2, 1)))
    report = validate_spec(bad)
    assert not report.ok
    assert any("s <= r" in v for v in report.violations)
    assert any("c <= b" in v for v in report.violations)
    assert validate_spec(SegreVeroneseSpec(3, 0)).violations == ["tau >= 1 fails"]


def test_infeasible_bounds_are_empty():
    spec = SegreVeroneseSpec(4, 2, (Constraint(1, 2, 2, 2), Constraint(3, 4, 1, 2)))
    assert validate_spec(spec).empty
    with pytest.raises(EmptyCellSet):
        enumerate_cells(spec)


def test_cell_limit():
    with pytest.raises(CellLimitExceeded):
        enumerate_cells(SegreVeroneseSpec(10, 5), max_cells=100)


def test_weights_must_match():
    with pytest.raises(WeightMismatch):
        build_matrices(SegreVeroneseSpec(2, 2), weights=[1, 2])
    with pytest.raises(WeightMismatch):
        build_matrices(SegreVeroneseSpec(2, 2), weights=[1, 0, 1])


def test_sufficient_statistic():
    config = build_matrices(segre(2, 2))
    x = np.array([1, 2, 3, 4])
    assert config.sufficient_statistic(x).tolist() == [3, 7, 4, 6]


@pytest.mark.parametrize("name", sorted(SMALL_SPECS))
def test_matrix_round_trip(name):
    config = build_matrices(SMALL_SPECS[name])
    A = parse_matrix(format_matrix(config.A))
    assert np.array_equal(A, config.A)
    again = build_matrices(config.spec)
    assert again.cells == tuple(cells_from_matrix(A))
    assert np.array_equal(parse_matrix(format_matrix(config.Atilde)), config.Atilde)


def test_matrix_header():
    assert format_matrix(np.array([[1, 0], [0, 1], [1, 1]])).splitlines()[0] == "3 2"
    with pytest.raises(ValueError):
        parse_matrix("2 2\n1 0\n")
