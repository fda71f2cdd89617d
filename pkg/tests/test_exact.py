from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from nilflow import exact

entries = st.fractions(min_value=-4, max_value=4, max_denominator=3)


def matrices(m, n):
    return st.lists(st.lists(entries, min_size=n, max_size=n), min_size=m, max_size=m)


def smat(rows):
    return sympy.Matrix([[sympy.Rational(v.numerator, v.denominator) for v in r] for r in rows])


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5).flatmap(lambda m: st.integers(1, 5).flatmap(lambda n: matrices(m, n))))
def test_rank_and_nullspace_match_sympy(rows):
    n = len(rows[0])
    M = smat(rows)
    assert exact.rank(rows, n) == M.rank()
    kernel = exact.nullspace(rows, n)
    assert len(kernel) == n - M.rank()
    for v in kernel:
        assert all(sum(a * b for a, b in zip(r, v)) == 0 for r in rows)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: matrices(n, n)))
def test_rref_matches_sympy(rows):
    R, pivots = exact.rref(rows, len(rows))
    SR, spivots = smat(rows).rref()
    assert tuple(pivots) == spivots
    for i in range(SR.rows):
        expected = list(SR.row(i))
        got = [sympy.Rational(v.numerator, v.denominator) for v in R[i]] if i < len(R) else [0] * SR.cols
        assert got == expected


def test_solve_and_inverse():
    A = [[2, 1], [1, 3]]
    assert exact.solve(A, [3, 5]) == [Fraction(4, 5), Fraction(7, 5)]
    assert exact.inverse(A) == [[Fraction(3, 5), Fraction(-1, 5)], [Fraction(-1, 5), Fraction(2, 5)]]
    with pytest.raises(ZeroDivisionError):
        exact.inverse([[1, 2], [2, 4]])


def test_empty_nullspace_is_identity():
    assert exact.nullspace([], 2) == [[1, 0], [0, 1]]


def test_span_relations():
    assert exact.span_contains([[1, 0, 0], [0, 1, 0]], [[2, -3, 0]])
    assert not exact.span_contains([[1, 0, 0]], [[0, 1, 0]])
    assert exact.span_equal([[1, 1], [1, -1]], [[1, 0], [0, 1]])
