from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from nilflow.errors import NotNilpotentError
from nilflow.linear import linear_vector_field
from nilflow.nilpotent import (
    NOT_NILPOTENT,
    binomial_power,
    compute_tower,
    filtration_basis,
    flow_polynomial,
    iterate,
    monomials,
    span_contains,
    strict_integrability_report,
)
from nilflow.poly import Polynomial, VectorField, lie_derivative, variables

x, v, a = variables("x", "v", "a")
ACC = VectorField.from_mapping(x.coords, {"x": v, "v": a})
HALF = Fraction(1, 2)


def test_energy_tower():
    t = compute_tower(ACC, HALF * v**2)
    assert t.levels == (HALF * v**2, v * a, a**2)
    assert t.index == 3
    assert lie_derivative(ACC, t.constant).is_zero()


def test_constant_tower():
    t = compute_tower(ACC, Polynomial.constant(x.coords, 5))
    assert t.index == 1


def test_not_nilpotent():
    X = Polynomial.variable(("x",), "x")
    with pytest.raises(NotNilpotentError):
        compute_tower(VectorField(("x",), [X]), X, 10)


def test_bad_depth_and_zero_observable():
    with pytest.raises(ValueError):
        compute_tower(ACC, x, 0)
    with pytest.raises(ValueError):
        compute_tower(ACC, Polynomial.zero(x.coords))


def test_flow_of_position():
    f = flow_polynomial(ACC, x)
    X, V, A, T = variables("x", "v", "a", "t")
    assert f.as_polynomial() == X + V * T + HALF * A * T**2
    assert flow_polynomial(ACC, Polynomial.constant(x.coords, 3)).degree == 0


def test_flow_of_linear_nilpotent():
    V = linear_vector_field([[0, 1], [0, 0]])
    x1, x2, t = variables("x1", "x2", "t")
    assert flow_polynomial(V, Polynomial.variable(V.coords, "x1")).as_polynomial() == x1 + x2 * t


def test_flow_group_law():
    # F(s + u) equals flowing each coefficient for s and then summing in u
    f = flow_polynomial(ACC, x)
    s, u = Fraction(2, 3), Fraction(-5, 7)
    total = Polynomial.zero(x.coords)
    for j, c in enumerate(f.coefficients):
        total = total + flow_polynomial(ACC, c).at(s) * (u**j / [1, 1, 2][j]) if c else total
    assert f.at(s + u) == total


def _brute_force_kernel_dim(k, d):
    # independent oracle: sympy nullspace of V^k on the deg <= d coefficient space
    sx, sv, sa = sympy.symbols("x v a")
    monos = [sx**i * sv**j * sa**l for (i, j, l) in monomials(3, d)]
    cs = sympy.symbols(f"c0:{len(monos)}")
    p = sum(c * m for c, m in zip(cs, monos))
    for _ in range(k):
        p = sympy.expand(sv * sympy.diff(p, sx) + sa * sympy.diff(p, sv))
    eqs = sympy.Poly(p, sx, sv, sa).coeffs() if p != 0 else []
    M = sympy.Matrix([[sympy.diff(e, c) for c in cs] for e in eqs]) if eqs else sympy.zeros(0, len(cs))
    return len(cs) - M.rank()


def test_filtration_first_level():
    basis = filtration_basis(ACC, 1, 2)
    # the deg <= 2 constants are 1, a, a^2 and v^2 - 2 a x
    assert len(basis) == 4 == _brute_force_kernel_dim(1, 2)
    assert span_contains(basis, [Polynomial.constant(x.coords, 1), a, a**2, v**2 - 2 * a * x])
    for p in basis:
        assert lie_derivative(ACC, p).is_zero()


@pytest.mark.parametrize("k,d", [(2, 2), (3, 2), (2, 3), (4, 3)])
def test_filtration_dims_match_brute_force(k, d):
    assert len(filtration_basis(ACC, k, d)) == _brute_force_kernel_dim(k, d)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_filtration_reaches_full_space(d):
    # x is the slowest coordinate (index 3), so x^d needs k = 2d + 1
    assert len(filtration_basis(ACC, 2 * d + 1, d)) == len(monomials(3, d))
    assert len(filtration_basis(ACC, 2 * d, d)) < len(monomials(3, d))


def test_filtration_of_dilation():
    X = Polynomial.variable(("x",), "x")
    basis = filtration_basis(VectorField(("x",), [X]), 1, 1)
    assert basis == [Polynomial.constant(("x",), 1)]


@pytest.mark.parametrize("d", [1, 2, 3])
def test_filtration_nesting(d):
    prev = filtration_basis(ACC, 1, d)
    for k in range(2, 2 * d + 2):
        cur = filtration_basis(ACC, k, d)
        assert span_contains(cur, prev)
        prev = cur


def test_report_examples():
    r = strict_integrability_report(ACC)
    assert r.verdict == "STRICT"
    assert r.indices == {"x": 3, "v": 2, "a": 1}
    zero = strict_integrability_report(VectorField.zero(("p", "q")))
    assert zero.strict and set(zero.indices.values()) == {1}
    X = Polynomial.variable(("x",), "x")
    bad = strict_integrability_report(VectorField(("x",), [X]), 8)
    assert bad.verdict == "NOT_STRICT"
    assert bad.to_dict()["indices"]["x"] == NOT_NILPOTENT


constants = st.sampled_from(filtration_basis(ACC, 1, 2))
higher = st.integers(1, 4).flatmap(lambda k: st.tuples(
    st.just(k), st.sampled_from(filtration_basis(ACC, k, 2))))


@settings(max_examples=40, deadline=None)
@given(constants, higher, st.fractions(min_value=-3, max_value=3, max_denominator=4))
def test_module_property(f, kg, c):
    k, g = kg
    prod = (f * c) * g
    assert iterate(ACC, prod, k).is_zero()
    assert binomial_power(ACC, f * c, g, k) == iterate(ACC, prod, k)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([x, v, a, HALF * v**2, x * v, x**2 - v * a]))
def test_tower_consistency(g):
    t = compute_tower(ACC, g)
    for lo, hi in zip(t.levels, t.levels[1:]):
        assert lie_derivative(ACC, lo) == hi
