"""Towers of higher-order constants of motion and polynomial flows.

An observable ``g`` is a constant of motion of order ``k`` for a field ``V``
when ``V^k g = 0`` but ``V^(k-1) g != 0``. Its tower is the chain
``g, V g, ..., V^(k-1) g``; when it exists the flow of ``g`` is the
terminating exponential series ``sum_j t^j/j! V^j g``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement
from math import comb, factorial
from typing import Sequence

from . import exact
from .errors import NotNilpotentError
from .poly import Polynomial, VectorField, lie_derivative

DEFAULT_MAX_DEPTH = 16
NOT_NILPOTENT = "NOT_NILPOTENT_WITHIN_DEPTH"


@dataclass(frozen=True)
class Tower:
    """``levels[0]`` is the generator; each next level is the Lie derivative of the previous."""

    levels: tuple[Polynomial, ...]

    @property
    def index(self) -> int:
        return len(self.levels)

    @property
    def generator(self) -> Polynomial:
        return self.levels[0]

    @property
    def constant(self) -> Polynomial:
        """The bottom of the tower, an ordinary constant of motion."""
        return self.levels[-1]


def _check_depth(max_depth: int) -> None:
    if not isinstance(max_depth, int) or max_depth < 1:
        raise ValueError(f"max_depth must be a positive integer, got {max_depth!r}")


def compute_tower(V: VectorField, g: Polynomial, max_depth: int = DEFAULT_MAX_DEPTH) -> Tower:
    """Descendants of ``g`` under ``V``.

    Raises :class:`NotNilpotentError` when ``V^max_depth g`` is still nonzero.
    The zero observable has no nilpotency index and is rejected.
    """
    _check_depth(max_depth)
    if not isinstance(g, Polynomial):
        g = Polynomial.constant(V.coords, g)
    if g.is_zero():
        raise ValueError("the zero observable has no nilpotency index")
    levels = [g]
    for _ in range(max_depth):
        nxt = lie_derivative(V, levels[-1])
        if nxt.is_zero():
            return Tower(tuple(levels))
        levels.append(nxt)
    raise NotNilpotentError(g, max_depth)


@dataclass(frozen=True)
class FlowPolynomial:
    """``g o phi_t = sum_j coefficients[j] * t^j / j!`` with ``coefficients[j] = V^j g``."""

    coefficients: tuple[Polynomial, ...]
    name: str | None = None

    @property
    def observable(self) -> Polynomial:
        return self.coefficients[0]

    @property
    def degree(self) -> int:
        """Degree in t, one less than the nilpotency index."""
        return len(self.coefficients) - 1

    def at(self, t) -> Polynomial:
        """The flowed observable at a fixed rational time."""
        t = Fraction(t)
        out = Polynomial.zero(self.observable.coords)
        for j, c in enumerate(self.coefficients):
            out = out + c * (t**j / factorial(j))
        return out

    def as_polynomial(self, time: str = "t") -> Polynomial:
        """The flow as one polynomial over ``coords + (time,)``."""
        coords = self.observable.coords
        if time in coords:
            raise ValueError(f"time variable {time!r} clashes with a coordinate")
        ext = coords + (time,)
        tvar = Polynomial.variable(ext, time)
        out = Polynomial.zero(ext)
        for j, c in enumerate(self.coefficients):
            out = out + c.embed(ext) * tvar**j * Fraction(1, factorial(j))
        return out

    def evaluate(self, point, t):
        """Value of the flowed observable at ``point`` after time ``t``."""
        total = 0
        for j, c in enumerate(self.coefficients):
            total = total + c.evaluate(point) * (t**j) / factorial(j)
        return total


def flow_polynomial(V: VectorField, g: Polynomial, max_depth: int = DEFAULT_MAX_DEPTH,
                    name: str | None = None) -> FlowPolynomial:
    tower = compute_tower(V, g, max_depth)
    return FlowPolynomial(tower.levels, name)


def monomials(n: int, degree_bound: int) -> list[tuple[int, ...]]:
    """All exponent vectors in ``n`` variables of total degree <= degree_bound, graded."""
    out = []
    for d in range(degree_bound + 1):
        block = []
        for combo in combinations_with_replacement(range(n), d):
            e = [0] * n
            for i in combo:
                e[i] += 1
            block.append(tuple(e))
        out.extend(sorted(block, reverse=True))
    return out


def filtration_basis(V: VectorField, k: int, degree_bound: int) -> list[Polynomial]:
    """Basis of ``{p : deg p <= degree_bound, V^k p = 0}``.

    Solved as the exact nullspace of ``p -> V^k p`` on the monomial coefficient space.
    """
    _check_depth(k)
    if degree_bound < 0:
        raise ValueError("degree_bound must be non-negative")
    coords = V.coords
    basis = monomials(len(coords), degree_bound)
    images = []
    for e in basis:
        p = Polynomial(coords, {e: 1})
        for _ in range(k):
            p = lie_derivative(V, p)
            if p.is_zero():
                break
        images.append(p)
    rows_index: dict[tuple[int, ...], int] = {}
    for img in images:
        for e in img.terms:
            rows_index.setdefault(e, len(rows_index))
    rows = [[Fraction(0)] * len(basis) for _ in rows_index]
    for col, img in enumerate(images):
        for e, c in img.terms.items():
            rows[rows_index[e]][col] = c
    kernel = exact.nullspace(rows, len(basis))
    return [Polynomial(coords, {e: c for e, c in zip(basis, vec) if c}) for vec in kernel]


@dataclass(frozen=True)
class NilpotencyReport:
    """Per-coordinate nilpotency indices (``None`` when not reached within ``max_depth``)."""

    indices: dict[str, int | None]
    max_depth: int
    flows: dict[str, FlowPolynomial] = field(default_factory=dict, compare=False)

    @property
    def strict(self) -> bool:
        return all(k is not None and k <= self.max_depth for k in self.indices.values())

    @property
    def verdict(self) -> str:
        return "STRICT" if self.strict else "NOT_STRICT"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "max_depth": self.max_depth,
            "indices": {n: (k if k is not None else NOT_NILPOTENT) for n, k in self.indices.items()},
            "flows": {n: [str(c) for c in f.coefficients] for n, f in self.flows.items()},
        }


def strict_integrability_report(V: VectorField, max_depth: int = DEFAULT_MAX_DEPTH
                                ) -> NilpotencyReport:
    """Nilpotency of every coordinate function (the coordinates separate points)."""
    _check_depth(max_depth)
    indices: dict[str, int | None] = {}
    flows: dict[str, FlowPolynomial] = {}
    for name in V.coords:
        x = Polynomial.variable(V.coords, name)
        try:
            f = flow_polynomial(V, x, max_depth, name=name)
        except NotNilpotentError:
            indices[name] = None
        else:
            indices[name] = f.degree + 1
            flows[name] = f
    return NilpotencyReport(indices, max_depth, flows)


def binomial_power(V: VectorField, f: Polynomial, g: Polynomial, k: int) -> Polynomial:
    """``V^k (f g)`` expanded as sum_l C(k, l) V^l f V^(k-l) g (Leibniz' rule)."""
    fs, gs = [f], [g]
    for _ in range(k):
        fs.append(lie_derivative(V, fs[-1]))
        gs.append(lie_derivative(V, gs[-1]))
    out = Polynomial.zero(V.coords)
    for l in range(k + 1):
        out = out + fs[l] * gs[k - l] * comb(k, l)
    return out


def iterate(V: VectorField, g: Polynomial, k: int) -> Polynomial:
    for _ in range(k):
        g = lie_derivative(V, g)
    return g


def span_contains(basis: Sequence[Polynomial], polys: Sequence[Polynomial]) -> bool:
    """Exact span containment for polynomials on a shared coordinate system."""
    every = list(basis) + list(polys)
    index: dict[tuple[int, ...], int] = {}
    for p in every:
        for e in p.terms:
            index.setdefault(e, len(index))

    def vec(p):
        v = [Fraction(0)] * len(index)
        for e, c in p.terms.items():
            v[index[e]] = c
        return v

    if not index:
        return True
    return exact.span_contains([vec(p) for p in basis], [vec(p) for p in polys])
