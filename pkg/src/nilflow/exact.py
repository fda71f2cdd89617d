"""Exact linear algebra over the rationals.

Rows are lists of rationals. Elimination is fraction-free (Bareiss): each row
is first scaled to integers, and every division performed during elimination
is exact, so no intermediate fractions ever appear. Only the final
normalisation to reduced row echelon form introduces denominators.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm
from typing import Sequence

Vector = list[Fraction]


def _integer_rows(rows: Sequence[Sequence]) -> list[list[int]]:
    out = []
    for row in rows:
        row = [Fraction(v) for v in row]
        den = lcm(*(v.denominator for v in row)) if row else 1
        out.append([int(v * den) for v in row])
    return out


def echelon(rows: Sequence[Sequence], ncols: int | None = None) -> tuple[list[list[int]], list[int]]:
    """Fraction-free row echelon form.

    Returns the integer echelon rows (zero rows dropped) and the pivot columns.
    """
    M = _integer_rows(rows)
    if ncols is None:
        ncols = len(M[0]) if M else 0
    m = len(M)
    pivots: list[int] = []
    r = 0
    prev = 1
    for c in range(ncols):
        if r == m:
            break
        p = next((i for i in range(r, m) if M[i][c]), None)
        if p is None:
            continue
        if p != r:
            M[r], M[p] = M[p], M[r]
        piv = M[r][c]
        for i in range(r + 1, m):
            lead = M[i][c]
            Mi, Mr = M[i], M[r]
            for j in range(c + 1, ncols):
                # Bareiss update; the division is exact
                Mi[j] = (piv * Mi[j] - lead * Mr[j]) // prev
            Mi[c] = 0
        prev = piv
        pivots.append(c)
        r += 1
    return M[:r], pivots


def rref(rows: Sequence[Sequence], ncols: int | None = None) -> tuple[list[Vector], list[int]]:
    """Reduced row echelon form with rational entries."""
    E, pivots = echelon(rows, ncols)
    R = [[Fraction(v) for v in row] for row in E]
    for k in range(len(R) - 1, -1, -1):
        c = pivots[k]
        inv = 1 / R[k][c]
        R[k] = [v * inv for v in R[k]]
        for i in range(k):
            f = R[i][c]
            if f:
                R[i] = [a - f * b for a, b in zip(R[i], R[k])]
    return R, pivots


def rank(rows: Sequence[Sequence], ncols: int | None = None) -> int:
    return len(echelon(rows, ncols)[1])


def nullspace(rows: Sequence[Sequence], ncols: int) -> list[Vector]:
    """Basis of {x : rows @ x = 0}, one vector per free column.

    Each basis vector has a 1 in its free column and 0 in the other free
    columns, so the basis is canonical for a given matrix.
    """
    if not rows:
        return [[Fraction(int(i == j)) for i in range(ncols)] for j in range(ncols)]
    R, pivots = rref(rows, ncols)
    free = [c for c in range(ncols) if c not in set(pivots)]
    basis = []
    for f in free:
        x = [Fraction(0)] * ncols
        x[f] = Fraction(1)
        for row, p in zip(R, pivots):
            x[p] = -row[f]
        basis.append(x)
    return basis


def solve(A: Sequence[Sequence], b: Sequence) -> Vector:
    """Unique solution of A x = b; raises if A is singular."""
    n = len(A)
    aug = [list(row) + [bi] for row, bi in zip(A, b)]
    R, pivots = rref(aug, n + 1)
    if pivots != list(range(n)):
        raise ZeroDivisionError("singular system")
    return [R[i][n] for i in range(n)]


def inverse(A: Sequence[Sequence]) -> list[Vector]:
    n = len(A)
    aug = [list(row) + [int(i == j) for j in range(n)] for i, row in enumerate(A)]
    R, pivots = rref(aug, 2 * n)
    if pivots[:n] != list(range(n)) or len(pivots) < n:
        raise ZeroDivisionError("matrix is singular")
    return [row[n:] for row in R]


def span_contains(basis: Sequence[Sequence], vectors: Sequence[Sequence]) -> bool:
    """True iff every vector lies in span(basis)."""
    if not vectors:
        return True
    if not basis:
        return all(not any(v) for v in vectors)
    ncols = len(vectors[0])
    r = rank(basis, ncols)
    return rank(list(basis) + list(vectors), ncols) == r


def span_equal(a: Sequence[Sequence], b: Sequence[Sequence]) -> bool:
    return span_contains(a, b) and span_contains(b, a)
