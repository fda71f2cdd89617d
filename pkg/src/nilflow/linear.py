"""Linear vector fields, commutants and the Jordan-Chevalley split over Q.

Conventions
-----------
``linear_vector_field(A)`` is the field of ``dx/dt = A x``: component ``j``
is ``sum_i A[j][i] x_i``. On linear functions ``f_alpha(x) = alpha . x``
it acts as ``X_A f_alpha = f_{A^T alpha}``, and brackets satisfy

    [X_A, X_B] = X_{-[A, B]} = X_{BA - AB}.

This is the only place the sign is fixed; ``test_linear.py`` pins it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Iterable, Sequence

from . import exact
from .errors import DimensionMismatchError, NotNilpotentError
from .poly import Polynomial, VectorField, variables


class RationalMatrix:
    """Immutable square matrix of Fractions."""

    __slots__ = ("rows",)

    def __init__(self, rows: Iterable[Iterable]):
        rows = tuple(tuple(Fraction(v) for v in row) for row in rows)
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise DimensionMismatchError("matrix must be square")
        self.rows = rows

    @classmethod
    def identity(cls, n: int) -> "RationalMatrix":
        return cls([[int(i == j) for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, n: int) -> "RationalMatrix":
        return cls([[0] * n for _ in range(n)])

    @classmethod
    def from_vector(cls, vec: Sequence, n: int) -> "RationalMatrix":
        """Inverse of :meth:`vector` (row-major)."""
        return cls([vec[i * n:(i + 1) * n] for i in range(n)])

    @property
    def n(self) -> int:
        return len(self.rows)

    def vector(self) -> list[Fraction]:
        return [v for row in self.rows for v in row]

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def _check(self, other: "RationalMatrix") -> None:
        if other.n != self.n:
            raise DimensionMismatchError(f"{self.n}x{self.n} vs {other.n}x{other.n}")

    def __add__(self, other: "RationalMatrix") -> "RationalMatrix":
        self._check(other)
        return RationalMatrix([[a + b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def __sub__(self, other: "RationalMatrix") -> "RationalMatrix":
        self._check(other)
        return RationalMatrix([[a - b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def __neg__(self) -> "RationalMatrix":
        return RationalMatrix([[-a for a in r] for r in self.rows])

    def __mul__(self, c) -> "RationalMatrix":
        c = Fraction(c)
        return RationalMatrix([[a * c for a in r] for r in self.rows])

    __rmul__ = __mul__

    def __matmul__(self, other: "RationalMatrix") -> "RationalMatrix":
        self._check(other)
        cols = list(zip(*other.rows))
        return RationalMatrix([[sum((a * b for a, b in zip(r, c)), Fraction(0)) for c in cols]
                               for r in self.rows])

    def __pow__(self, k: int) -> "RationalMatrix":
        out = RationalMatrix.identity(self.n)
        base = self
        while k:
            if k & 1:
                out = out @ base
            base = base @ base
            k >>= 1
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, RationalMatrix) and self.rows == other.rows

    def __hash__(self) -> int:
        return hash(self.rows)

    def transpose(self) -> "RationalMatrix":
        return RationalMatrix(zip(*self.rows))

    def trace(self) -> Fraction:
        return sum((self.rows[i][i] for i in range(self.n)), Fraction(0))

    def is_zero(self) -> bool:
        return not any(v for r in self.rows for v in r)

    def is_nilpotent(self) -> bool:
        return (self ** self.n).is_zero()

    def inverse(self) -> "RationalMatrix":
        return RationalMatrix(exact.inverse(self.rows))

    def to_list(self) -> list[list[str]]:
        return [[str(v) for v in r] for r in self.rows]

    def __repr__(self) -> str:
        return f"RationalMatrix({self.to_list()})"


def as_matrix(A) -> RationalMatrix:
    return A if isinstance(A, RationalMatrix) else RationalMatrix(A)


def commutator(A: RationalMatrix, B: RationalMatrix) -> RationalMatrix:
    return A @ B - B @ A


# univariate polynomials: coefficient lists, lowest degree first -------------

def _trim(p: list[Fraction]) -> list[Fraction]:
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return p


def upoly_mul(p: Sequence[Fraction], q: Sequence[Fraction]) -> list[Fraction]:
    if not p or not q:
        return []
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return _trim(out)


def upoly_divmod(p: Sequence[Fraction], d: Sequence[Fraction]) -> tuple[list[Fraction], list[Fraction]]:
    p, d = _trim(p), _trim(d)
    if not d:
        raise ZeroDivisionError("division by the zero polynomial")
    q = [Fraction(0)] * max(len(p) - len(d) + 1, 0)
    r = list(p)
    while len(r) >= len(d) and r:
        shift = len(r) - len(d)
        f = r[-1] / d[-1]
        q[shift] = f
        for i, c in enumerate(d):
            r[i + shift] -= f * c
        r = _trim(r)
    return _trim(q), r


def upoly_gcd(p: Sequence[Fraction], q: Sequence[Fraction]) -> list[Fraction]:
    """Monic gcd (the gcd of two zero polynomials is 0)."""
    a, b = _trim(p), _trim(q)
    while b:
        a, b = b, upoly_divmod(a, b)[1]
    if not a:
        return []
    lead = a[-1]
    return [c / lead for c in a]


def upoly_derivative(p: Sequence[Fraction]) -> list[Fraction]:
    return _trim([i * c for i, c in enumerate(p)][1:])


def upoly_at_matrix(p: Sequence[Fraction], A: RationalMatrix) -> RationalMatrix:
    """Horner evaluation p(A)."""
    out = RationalMatrix.zeros(A.n)
    ident = RationalMatrix.identity(A.n)
    for c in reversed(list(p)):
        out = out @ A + ident * c
    return out


def characteristic_polynomial(A) -> list[Fraction]:
    """det(lambda I - A) by Faddeev-LeVerrier, monic, lowest degree first."""
    A = as_matrix(A)
    n = A.n
    coeffs = [Fraction(0)] * (n + 1)
    coeffs[n] = Fraction(1)
    M = RationalMatrix.zeros(n)
    ident = RationalMatrix.identity(n)
    for k in range(1, n + 1):
        M = A @ M + ident * coeffs[n - k + 1]
        coeffs[n - k] = -(A @ M).trace() / k
    return coeffs


def minimal_polynomial(A) -> list[Fraction]:
    """Monic minimal polynomial from the first linear dependency among I, A, A^2, ..."""
    A = as_matrix(A)
    powers = [RationalMatrix.identity(A.n).vector()]
    P = RationalMatrix.identity(A.n)
    while True:
        P = P @ A
        powers.append(P.vector())
        cols = len(powers)
        rows = [[powers[j][i] for j in range(cols)] for i in range(A.n * A.n)]
        kernel = exact.nullspace(rows, cols)
        if kernel:
            v = kernel[0]
            return [c / v[-1] for c in v]


def squarefree_part(p: Sequence[Fraction]) -> list[Fraction]:
    g = upoly_gcd(p, upoly_derivative(p))
    q, r = upoly_divmod(p, g)
    assert not r
    lead = q[-1]
    return [c / lead for c in q]


def linear_vector_field(A, coords: Sequence[str] | None = None) -> VectorField:
    A = as_matrix(A)
    coords = tuple(coords) if coords is not None else tuple(f"x{i + 1}" for i in range(A.n))
    if len(coords) != A.n:
        raise DimensionMismatchError(f"{len(coords)} coordinates for a {A.n}x{A.n} matrix")
    xs = variables(*coords)
    comps = []
    for j in range(A.n):
        comp = Polynomial.zero(coords)
        for i in range(A.n):
            if A[j, i]:
                comp = comp + xs[i] * A[j, i]
        comps.append(comp)
    return VectorField(coords, comps)


def commutant(S: Sequence, n: int | None = None) -> list[RationalMatrix]:
    """Basis of the matrices B with BA = AB for every A in S."""
    S = [as_matrix(A) for A in S]
    if not S:
        if n is None:
            raise ValueError("commutant of an empty set needs the matrix size n")
    else:
        n = S[0].n
        if any(A.n != n for A in S):
            raise DimensionMismatchError("all matrices in S must have the same size")
    rows = []
    for A in S:
        for i in range(n):
            for j in range(n):
                # coefficient of B[p][q] in (BA - AB)[i][j]
                row = [Fraction(0)] * (n * n)
                for k in range(n):
                    row[i * n + k] += A[k, j]
                    row[k * n + j] -= A[i, k]
                if any(row):
                    rows.append(row)
    return [RationalMatrix.from_vector(v, n) for v in exact.nullspace(rows, n * n)]


def span_contains(basis: Sequence[RationalMatrix], mats: Sequence[RationalMatrix]) -> bool:
    return exact.span_contains([B.vector() for B in basis], [M.vector() for M in mats])


def span_equal(a: Sequence[RationalMatrix], b: Sequence[RationalMatrix]) -> bool:
    return span_contains(a, b) and span_contains(b, a)


def is_abelian(mats: Sequence[RationalMatrix]) -> bool:
    return all(commutator(A, B).is_zero() for i, A in enumerate(mats) for B in mats[i + 1:])


@dataclass(frozen=True)
class CommutantChain:
    """``levels[0]`` spans S itself, ``levels[k]`` the k-th iterated commutant."""

    levels: tuple[tuple[RationalMatrix, ...], ...]

    @property
    def dims(self) -> list[int]:
        """Dimensions of S', S'', S''', ..."""
        return [len(b) for b in self.levels[1:]]

    def level(self, k: int) -> tuple[RationalMatrix, ...]:
        return self.levels[k]

    def stabilized(self) -> bool:
        """S' = S''' and S'' = S'''' (as far as the computed depth allows)."""
        ok = True
        for k in range(1, len(self.levels) - 2):
            ok = ok and span_equal(self.levels[k], self.levels[k + 2])
        return ok

    def contains_generators(self) -> bool:
        return len(self.levels) < 3 or span_contains(self.levels[2], self.levels[0])


def commutant_chain(S: Sequence, depth: int = 4, n: int | None = None) -> CommutantChain:
    if depth < 2:
        raise ValueError("depth must be at least 2")
    S = tuple(as_matrix(A) for A in S)
    if S:
        n = S[0].n
    levels = [S]
    current: Sequence[RationalMatrix] = S
    for _ in range(depth):
        current = tuple(commutant(current, n))
        levels.append(current)
    return CommutantChain(tuple(levels))


@dataclass(frozen=True)
class JordanChevalley:
    S: RationalMatrix
    N: RationalMatrix

    def check(self, A) -> bool:
        A = as_matrix(A)
        n = A.n
        mp = minimal_polynomial(self.S)
        return (self.S + self.N == A
                and commutator(self.S, self.N).is_zero()
                and (self.N ** n).is_zero()
                and upoly_gcd(mp, upoly_derivative(mp)) == [Fraction(1)])


def jordan_chevalley(A) -> JordanChevalley:
    """A = S + N with S semisimple, N nilpotent, SN = NS.

    Newton's iteration on the squarefree part f of the characteristic
    polynomial, S <- S - f(S) f'(S)^-1, which terminates exactly over Q.
    """
    A = as_matrix(A)
    f = squarefree_part(characteristic_polynomial(A))
    df = upoly_derivative(f)
    S = A
    for _ in range(2 * A.n + 2):
        fS = upoly_at_matrix(f, S)
        if fS.is_zero():
            return JordanChevalley(S, A - S)
        S = S - fS @ upoly_at_matrix(df, S).inverse()
    raise RuntimeError("Newton iteration did not terminate")  # unreachable in exact arithmetic


def nilpotent_matrix_flow(A, t) -> RationalMatrix:
    """exp(tA) for nilpotent A, as the terminating series."""
    A = as_matrix(A)
    if not A.is_nilpotent():
        raise NotNilpotentError(A, A.n)
    t = Fraction(t)
    out = RationalMatrix.identity(A.n)
    P = RationalMatrix.identity(A.n)
    for j in range(1, A.n):
        P = P @ A
        if P.is_zero():
            break
        out = out + P * (t**j / factorial(j))
    return out
