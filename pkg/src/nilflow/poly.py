"""Exact sparse multivariate polynomials and polynomial vector fields.

A :class:`Polynomial` maps exponent tuples to :class:`fractions.Fraction`
coefficients over a named, ordered coordinate system. Zero coefficients are
never stored, so equality of term maps is equality of polynomials.

A :class:`VectorField` is a derivation of the polynomial algebra, given by one
component polynomial per coordinate. Parameters such as a constant
acceleration are ordinary coordinates whose component is zero.

    >>> x, v, a = variables("x", "v", "a")
    >>> V = VectorField.from_mapping(x.coords, {"x": v, "v": a})
    >>> lie_derivative(V, Fraction(1, 2) * v**2)
    Polynomial('v*a', coords=('x', 'v', 'a'))
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Sequence

from .errors import CoordinateMismatchError, DimensionMismatchError

Exponent = tuple[int, ...]
Scalar = int | Fraction


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"coefficients must be exact rationals, got {type(c).__name__}")


def _grlex_key(exp: Exponent):
    return (sum(exp), exp)


class Polynomial:
    """Immutable polynomial with rational coefficients."""

    __slots__ = ("_coords", "_terms", "_hash")

    def __init__(self, coords: Sequence[str], terms: Mapping[Exponent, Scalar] | None = None):
        coords = tuple(coords)
        if len(set(coords)) != len(coords):
            raise ValueError(f"duplicate coordinate names in {coords}")
        n = len(coords)
        clean: dict[Exponent, Fraction] = {}
        for exp, c in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != n:
                raise DimensionMismatchError(f"exponent {exp} does not match {n} coordinates")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent in {exp}")
            c = _as_fraction(c)
            if c:
                clean[exp] = clean.get(exp, Fraction(0)) + c
                if not clean[exp]:
                    del clean[exp]
        self._coords = coords
        self._terms = clean
        self._hash = None

    # construction -----------------------------------------------------
    @classmethod
    def _raw(cls, coords: tuple[str, ...], terms: dict[Exponent, Fraction]) -> "Polynomial":
        # internal fast path: caller guarantees canonical terms
        p = object.__new__(cls)
        p._coords = coords
        p._terms = terms
        p._hash = None
        return p

    @classmethod
    def constant(cls, coords: Sequence[str], value: Scalar) -> "Polynomial":
        coords = tuple(coords)
        return cls(coords, {(0,) * len(coords): value})

    @classmethod
    def zero(cls, coords: Sequence[str]) -> "Polynomial":
        return cls(coords)

    @classmethod
    def variable(cls, coords: Sequence[str], name: str) -> "Polynomial":
        coords = tuple(coords)
        if name not in coords:
            raise CoordinateMismatchError(f"{name!r} is not one of {coords}")
        exp = tuple(1 if c == name else 0 for c in coords)
        return cls(coords, {exp: 1})

    # accessors --------------------------------------------------------
    @property
    def coords(self) -> tuple[str, ...]:
        return self._coords

    @property
    def terms(self) -> dict[Exponent, Fraction]:
        return dict(self._terms)

    def items(self):
        """Terms in graded-lex order, highest first."""
        return sorted(self._terms.items(), key=lambda kv: _grlex_key(kv[0]), reverse=True)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self._terms)

    def constant_term(self) -> Fraction:
        return self._terms.get((0,) * len(self._coords), Fraction(0))

    def degree(self) -> int:
        """Total degree; the zero polynomial has degree -1."""
        return max((sum(e) for e in self._terms), default=-1)

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    # arithmetic -------------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other._coords != self._coords:
                raise CoordinateMismatchError(f"{self._coords} vs {other._coords}")
            return other
        return Polynomial.constant(self._coords, _as_fraction(other))

    def __add__(self, other) -> "Polynomial":
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        out = dict(self._terms)
        for exp, c in other._terms.items():
            s = out.get(exp, 0) + c
            if s:
                out[exp] = s
            else:
                out.pop(exp, None)
        return Polynomial._raw(self._coords, out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial._raw(self._coords, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other) -> "Polynomial":
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "Polynomial":
        return (-self) + other

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            try:
                c = _as_fraction(other)
            except TypeError:
                return NotImplemented
            if not c:
                return Polynomial._raw(self._coords, {})
            return Polynomial._raw(self._coords, {e: c * v for e, v in self._terms.items()})
        other = self._coerce(other)
        out: dict[Exponent, Fraction] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Polynomial._raw(self._coords, {e: c for e, c in out.items() if c})

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Polynomial":
        c = _as_fraction(other)
        if not c:
            raise ZeroDivisionError("polynomial division by zero")
        return self * (1 / c)

    def __pow__(self, n: int) -> "Polynomial":
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = Polynomial.constant(self._coords, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # comparison -------------------------------------------------------
    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self._coords == other._coords and self._terms == other._terms
        try:
            c = _as_fraction(other)
        except TypeError:
            return NotImplemented
        return self.is_constant() and self.constant_term() == c

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._coords, frozenset(self._terms.items())))
        return self._hash

    # calculus ---------------------------------------------------------
    def diff(self, name: str) -> "Polynomial":
        """Partial derivative with respect to the coordinate ``name``."""
        try:
            i = self._coords.index(name)
        except ValueError:
            raise CoordinateMismatchError(f"{name!r} is not one of {self._coords}") from None
        out: dict[Exponent, Fraction] = {}
        for e, c in self._terms.items():
            if e[i]:
                ne = e[:i] + (e[i] - 1,) + e[i + 1:]
                out[ne] = c * e[i]
        return Polynomial._raw(self._coords, out)

    def evaluate(self, point):
        """Value at ``point`` (a sequence aligned with ``coords`` or a name mapping).

        Exact for rational input; floats are accepted and give a float.
        """
        if isinstance(point, Mapping):
            missing = [c for c in self._coords if c not in point]
            if missing:
                raise DimensionMismatchError(f"no value for coordinates {missing}")
            point = [point[c] for c in self._coords]
        point = list(point)
        if len(point) != len(self._coords):
            raise DimensionMismatchError(
                f"point has {len(point)} entries, expected {len(self._coords)}")
        point = [p if isinstance(p, float) else _as_fraction(p) for p in point]
        total = Fraction(0)
        for e, c in self._terms.items():
            term = c
            for p, k in zip(point, e):
                if k:
                    term = term * p**k
            total = total + term
        return total

    __call__ = evaluate

    def substitute(self, mapping: Mapping[str, "Polynomial"], coords: Sequence[str] | None = None
                   ) -> "Polynomial":
        """Compose: replace each named coordinate by a polynomial.

        Every replacement must live on ``coords`` (default: the replacements'
        common coordinate system, else ``self.coords``). Coordinates not in
        ``mapping`` are kept and must exist in the target system.
        """
        if coords is None:
            systems = {p.coords for p in mapping.values()}
            coords = systems.pop() if len(systems) == 1 else self._coords
        coords = tuple(coords)
        images = []
        for name in self._coords:
            if name in mapping:
                img = mapping[name]
                if img.coords != coords:
                    raise CoordinateMismatchError(f"replacement for {name!r} is on {img.coords}")
                images.append(img)
            else:
                images.append(Polynomial.variable(coords, name))
        result = Polynomial.zero(coords)
        for e, c in self._terms.items():
            term = Polynomial.constant(coords, c)
            for img, k in zip(images, e):
                if k:
                    term = term * img**k
            result = result + term
        return result

    def embed(self, coords: Sequence[str]) -> "Polynomial":
        """The same polynomial viewed on a larger coordinate system."""
        coords = tuple(coords)
        missing = [c for c in self._coords if c not in coords]
        if missing:
            raise CoordinateMismatchError(f"cannot embed: {missing} not in {coords}")
        pos = [coords.index(c) for c in self._coords]
        out = {}
        for e, c in self._terms.items():
            ne = [0] * len(coords)
            for p, k in zip(pos, e):
                ne[p] = k
            out[tuple(ne)] = c
        return Polynomial._raw(coords, out)

    # printing ---------------------------------------------------------
    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for e, c in self.items():
            mono = "*".join(
                name if k == 1 else f"{name}^{k}" for name, k in zip(self._coords, e) if k)
            mag = abs(c)
            if not mono:
                body = str(mag)
            elif mag == 1:
                body = mono
            else:
                body = f"{mag}*{mono}"
            parts.append(("- " if c < 0 else "+ ") + body)
        s = " ".join(parts)
        return s[2:] if s.startswith("+ ") else "-" + s[2:]

    def __repr__(self) -> str:
        return f"Polynomial({str(self)!r}, coords={self._coords})"


def variables(*names: str) -> tuple[Polynomial, ...]:
    """Coordinate polynomials for the system ``names``."""
    return tuple(Polynomial.variable(names, n) for n in names)


def evaluate(p: Polynomial, point) -> Fraction:
    return p.evaluate(point)


class VectorField:
    """A polynomial derivation: ``components[i]`` multiplies d/d coords[i]."""

    __slots__ = ("_coords", "_components")

    def __init__(self, coords: Sequence[str], components: Iterable[Polynomial | Scalar]):
        coords = tuple(coords)
        comps = []
        for c in components:
            if not isinstance(c, Polynomial):
                c = Polynomial.constant(coords, c)
            elif c.coords != coords:
                raise CoordinateMismatchError(f"component on {c.coords}, field on {coords}")
            comps.append(c)
        if len(comps) != len(coords):
            raise DimensionMismatchError(
                f"{len(comps)} components for {len(coords)} coordinates")
        self._coords = coords
        self._components = tuple(comps)

    @classmethod
    def from_mapping(cls, coords: Sequence[str], mapping: Mapping[str, Polynomial | Scalar]
                     ) -> "VectorField":
        """Build from ``{coordinate: component}``; absent coordinates get 0."""
        coords = tuple(coords)
        unknown = set(mapping) - set(coords)
        if unknown:
            raise CoordinateMismatchError(f"unknown coordinates {sorted(unknown)}")
        return cls(coords, [mapping.get(c, 0) for c in coords])

    @classmethod
    def zero(cls, coords: Sequence[str]) -> "VectorField":
        return cls(coords, [0] * len(tuple(coords)))

    @property
    def coords(self) -> tuple[str, ...]:
        return self._coords

    @property
    def components(self) -> tuple[Polynomial, ...]:
        return self._components

    def __getitem__(self, name: str) -> Polynomial:
        return self._components[self._coords.index(name)]

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self._components)

    def __call__(self, f: Polynomial) -> Polynomial:
        return lie_derivative(self, f)

    def __add__(self, other: "VectorField") -> "VectorField":
        _check_same(self, other)
        return VectorField(self._coords, [a + b for a, b in zip(self._components, other._components)])

    def __sub__(self, other: "VectorField") -> "VectorField":
        _check_same(self, other)
        return VectorField(self._coords, [a - b for a, b in zip(self._components, other._components)])

    def __neg__(self) -> "VectorField":
        return VectorField(self._coords, [-a for a in self._components])

    def __mul__(self, c) -> "VectorField":
        return VectorField(self._coords, [a * c for a in self._components])

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, VectorField):
            return NotImplemented
        return self._coords == other._coords and self._components == other._components

    def __hash__(self) -> int:
        return hash((self._coords, self._components))

    def __repr__(self) -> str:
        body = " + ".join(f"({c})*d/d{n}" for n, c in zip(self._coords, self._components) if c)
        return f"VectorField({body or '0'})"


def _check_same(a, b) -> None:
    if a.coords != b.coords:
        raise CoordinateMismatchError(f"{a.coords} vs {b.coords}")


def lie_derivative(V: VectorField, f: Polynomial) -> Polynomial:
    """Sum over i of V_i * df/dx_i."""
    if not isinstance(f, Polynomial):
        f = Polynomial.constant(V.coords, f)
    _check_same(V, f)
    result = Polynomial.zero(V.coords)
    for name, comp in zip(V.coords, V.components):
        if comp:
            df = f.diff(name)
            if df:
                result = result + comp * df
    return result


def lie_bracket(V1: VectorField, V2: VectorField) -> VectorField:
    """Commutator [V1, V2], acting as f -> V1(V2 f) - V2(V1 f)."""
    _check_same(V1, V2)
    return VectorField(V1.coords, [
        lie_derivative(V1, b) - lie_derivative(V2, a)
        for a, b in zip(V1.components, V2.components)
    ])


def dilation(coords: Sequence[str]) -> VectorField:
    """The Euler field sum_i x_i d/dx_i."""
    coords = tuple(coords)
    return VectorField(coords, variables(*coords))
