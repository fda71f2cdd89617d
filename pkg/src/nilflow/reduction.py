"""Angular reduction of free motion on 2x2 real symmetric matrices.

A symmetric matrix is written ``X = x I + y s1 + z s3`` and diagonalised by a
rotation, ``X = G(phi) diag(q1, q2) G(phi)^-1`` with

    G(phi) = [[cos phi, sin phi], [-sin phi, cos phi]],   q = q2 - q1.

Differentiating the factorisation k times gives ``X^(k) = G M^(k) G^-1`` with
``M^(k+1) = d/dt M^(k) + [tau, M^(k)]`` and ``tau = phi' s2``. Each ``M^(k)``
splits as ``Q^(k) + m3 s3 + m1 s1``; the coefficients obey

    m3' = d/dt m3 + 2 phi' m1
    m1' = d/dt m1 + phi' q^(k) - 2 phi' m3

and, eliminating ``phi' = l1 / q^2`` through the angular-momentum tower
``l_j = 1/2 tr(L^(j-1) s2)``, ``L = [X, X']``, they become rational functions
of ``q`` and its derivatives. For ``X^(k) = 0`` the reduced equations are
``q1^(k) = -m3``, ``q2^(k) = +m3`` together with the constraint ``m1 = 0``.

Reduced-coordinate numerics are binary64; only the symbolic recursion
(:func:`m_recursion`) is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb, factorial
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import SingularityError
from .poly import Polynomial, VectorField, lie_derivative

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]])
IDENTITY = np.eye(2)

ORDERS = (2, 3, 4)


@dataclass(frozen=True)
class SymMat2:
    """``x I + y s1 + z s3`` = [[x + z, y], [y, x - z]]."""

    x: float
    y: float
    z: float

    @classmethod
    def from_matrix(cls, M) -> "SymMat2":
        M = np.asarray(M, dtype=float)
        if M.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {M.shape}")
        if M[0, 1] != M[1, 0]:
            raise ValueError("matrix is not symmetric")
        return cls(0.5 * (M[0, 0] + M[1, 1]), float(M[0, 1]), 0.5 * (M[0, 0] - M[1, 1]))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.x + self.z, self.y], [self.y, self.x - self.z]])

    def __add__(self, other: "SymMat2") -> "SymMat2":
        return SymMat2(self.x + other.x, self.y + other.y, self.z + other.z)

    def __mul__(self, c: float) -> "SymMat2":
        return SymMat2(self.x * c, self.y * c, self.z * c)

    __rmul__ = __mul__

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.z]


ZERO = SymMat2(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class FreeState:
    """Initial jets (X0, V0, A0, ...) of the free system X^(order) = 0."""

    jets: tuple[SymMat2, ...]

    def __post_init__(self):
        if len(self.jets) < 2:
            raise ValueError("a free state needs at least X0 and V0")

    @property
    def order(self) -> int:
        return len(self.jets)


def free_flow(s: FreeState, t: float, n_derivs: int | None = None) -> tuple[SymMat2, ...]:
    """``X(t), X'(t), ..., X^(n_derivs - 1)(t)`` of the exact polynomial flow."""
    n = s.order if n_derivs is None else n_derivs
    out = []
    for m in range(n):
        acc = ZERO
        for j in range(m, s.order):
            acc = acc + s.jets[j] * (t ** (j - m) / factorial(j - m))
        out.append(acc)
    return tuple(out)


def rotation(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, s], [-s, c]])


class Diagonalization(NamedTuple):
    phi: float
    q1: float
    q2: float
    degenerate: bool = False


def diagonalize(X: SymMat2, branch_hint: float | None = None) -> Diagonalization:
    """Angle and eigenvalues with ``G(phi) diag(q1, q2) G(phi)^-1 = X`` and q2 >= q1.

    Without a hint phi is the principal value in (-pi/2, pi/2]; with a hint it
    is the representative ``phi + k pi`` closest to the hint.
    """
    r = math.hypot(X.y, X.z)
    if r == 0.0:
        phi = 0.0 if branch_hint is None else branch_hint
        return Diagonalization(phi, X.x, X.x, True)
    # (-z, y) = (q/2)(cos 2phi, sin 2phi)
    phi = 0.5 * math.atan2(X.y, -X.z)
    if phi == -0.5 * math.pi:
        phi = 0.5 * math.pi
    if branch_hint is not None:
        phi += math.pi * round((branch_hint - phi) / math.pi)
    return Diagonalization(phi, X.x - r, X.x + r, False)


def rebuild(phi: float, q1: float, q2: float) -> SymMat2:
    """Inverse of :func:`diagonalize`."""
    return SymMat2(0.5 * (q1 + q2), 0.5 * math.sin(2 * phi) * (q2 - q1),
                   0.5 * math.cos(2 * phi) * (q1 - q2))


@dataclass(frozen=True)
class ReducedJet:
    """Eigenvalue jets ``q1 = (q1, q1', q1'', ...)`` and likewise ``q2``."""

    q1: tuple[float, ...]
    q2: tuple[float, ...]
    phi: float | None = None
    phidot: float | None = None

    @property
    def q(self) -> float:
        return self.q2[0] - self.q1[0]

    def dq(self, k: int) -> float:
        return self.q2[k] - self.q1[k]

    @property
    def depth(self) -> int:
        return min(len(self.q1), len(self.q2))


@dataclass(frozen=True)
class AngularTower:
    """``values[j - 1] = l_j``; entries past the end are zero."""

    values: tuple[float, ...]

    def l(self, j: int) -> float:
        return self.values[j - 1] if 1 <= j <= len(self.values) else 0.0

    def at(self, t: float) -> "AngularTower":
        """Shift in time: ``l_j(t) = sum_i l_{j+i} t^i / i!``."""
        n = len(self.values)
        return AngularTower(tuple(
            sum(self.values[j + i] * t**i / factorial(i) for i in range(n - j)) for j in range(n)))


@dataclass(frozen=True)
class EnergyTower:
    e1: float
    e2: float
    e3: float


def _commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B - B @ A


def angular_tower(s: FreeState, t: float = 0.0) -> AngularTower:
    """``l_j = 1/2 tr(L^(j-1) s2)`` for ``j = 1 .. 2 order - 3``."""
    n_levels = 2 * s.order - 3
    X = [m.matrix for m in free_flow(s, t, n_levels + 1)]
    values = []
    for m in range(n_levels):
        # L^(m) = sum_i C(m, i) [X^(i), X^(m + 1 - i)]
        Lm = sum(comb(m, i) * _commutator(X[i], X[m + 1 - i]) for i in range(m + 1))
        values.append(0.5 * float(np.trace(Lm @ SIGMA2)))
    return AngularTower(tuple(values))


def energy_tower(s: FreeState, t: float = 0.0) -> EnergyTower:
    """``e1 = 1/2 tr(X'^2)``, ``e2 = tr(X' X'')``, ``e3 = tr(X''^2)``."""
    _, V, A = (m.matrix for m in free_flow(s, t, 3))
    return EnergyTower(0.5 * float(np.trace(V @ V)), float(np.trace(V @ A)),
                       float(np.trace(A @ A)))


# closed forms of the sigma_3 / sigma_1 coefficients --------------------------
# ``qd`` holds (q, q', q'', ...) for q = q2 - q1; ``ell`` is the tower at the same time.

def _check_q(q: float) -> None:
    if q == 0 or not math.isfinite(q):
        raise SingularityError("COLLISION_SINGULARITY", "q1 == q2")


def m3_order2(qd, ell: AngularTower) -> float:
    q = qd[0]
    _check_q(q)
    return 2 * ell.l(1) ** 2 / q**3


def m1_order2(qd, ell: AngularTower) -> float:
    q = qd[0]
    _check_q(q)
    return ell.l(2) / q


def m3_order3(qd, ell: AngularTower) -> float:
    q, dq = qd[0], qd[1]
    _check_q(q)
    l1, l2 = ell.l(1), ell.l(2)
    return 6 * l1 * l2 / q**3 - 6 * l1**2 * dq / q**4


def m3_order3_printed(qd, ell: AngularTower) -> float:
    # variant with a single power of l1 on the velocity term
    q, dq = qd[0], qd[1]
    _check_q(q)
    l1, l2 = ell.l(1), ell.l(2)
    return 6 * (l1 * l2 * q - l1 * dq) / q**4


def m1_order3(qd, ell: AngularTower) -> float:
    q, dq, ddq = qd[0], qd[1], qd[2]
    _check_q(q)
    l1, l2, l3 = ell.l(1), ell.l(2), ell.l(3)
    return l3 / q + (l1 * ddq - l2 * dq) / q**2 - 4 * l1**3 / q**5


def m3_order4(qd, ell: AngularTower) -> float:
    q, dq, ddq = qd[0], qd[1], qd[2]
    _check_q(q)
    l1, l2, l3 = ell.l(1), ell.l(2), ell.l(3)
    return ((6 * l2**2 + 8 * l1 * l3) / q**3
            - (4 * l1**2 * ddq + 32 * l1 * l2 * dq) / q**4
            + 24 * l1**2 * dq**2 / q**5
            - 8 * l1**4 / q**7)


def m3_order4_printed(qd, ell: AngularTower) -> float:
    # variant with coefficient 8 on the l1^2 q'^2 / q^5 term
    q, dq, ddq = qd[0], qd[1], qd[2]
    _check_q(q)
    l1, l2, l3 = ell.l(1), ell.l(2), ell.l(3)
    return ((6 * l2**2 + 8 * l1 * l3) / q**3
            - (4 * l1**2 * ddq + 32 * l1 * l2 * dq) / q**4
            + 8 * l1**2 * dq**2 / q**5
            - 8 * l1**4 / q**7)


def m1_order4(qd, ell: AngularTower) -> float:
    q, dq, ddq, dddq = qd[0], qd[1], qd[2], qd[3]
    _check_q(q)
    l1, l2, l3, l4 = ell.l(1), ell.l(2), ell.l(3), ell.l(4)
    return (l4 / q + 2 * (l1 * dddq - l3 * dq) / q**2
            - 2 * (l1 * dq * ddq - l2 * dq**2) / q**3
            - 24 * l1**2 * l2 / q**5 + 32 * l1**3 * dq / q**6)


def m1_order4_printed(qd, ell: AngularTower) -> float:
    q, dq, ddq, dddq = qd[0], qd[1], qd[2], qd[3]
    _check_q(q)
    l1, l2, l3, l4 = ell.l(1), ell.l(2), ell.l(3), ell.l(4)
    return (l4 / q + 2 * (l1 * dddq - l3 * dq) / q**2
            - 3 * (l1 * dq * ddq - l2 * dq**2) / q**3
            - 14 * l1**2 * l2 / q**5 - 18 * l1**3 * dq / q**6)


Form = Callable[[Sequence[float], AngularTower], float]

# Candidate closed forms per order. "recursion" is what the M^(k) recursion
# yields; "printed" is the competing closed form where one is in circulation.
SIGMA3_FORMS: dict[int, dict[str, Form]] = {
    2: {"recursion": m3_order2},
    3: {"recursion": m3_order3, "printed": m3_order3_printed},
    4: {"recursion": m3_order4, "printed": m3_order4_printed},
}
SIGMA1_FORMS: dict[int, dict[str, Form]] = {
    2: {"recursion": m1_order2},
    3: {"recursion": m1_order3},
    4: {"recursion": m1_order4, "printed": m1_order4_printed},
}
# Settled by the oracle audit (see verification.formula_audit).
CANONICAL_FORM = {2: "recursion", 3: "recursion", 4: "recursion"}


class MComponents(NamedTuple):
    diag: tuple[float, float] | None
    m3: float
    m1: float


def m_components(order: int, jet: ReducedJet, ell: AngularTower, form: str | None = None
                 ) -> MComponents:
    """``M^(order) = diag + m3 s3 + m1 s1`` at the jet's time.

    ``diag`` is ``(q1^(order), q2^(order))`` when the jet carries that
    derivative, else ``None``. ``ell`` must be the tower at the same time.
    """
    if order not in ORDERS:
        raise ValueError(f"order must be one of {ORDERS}")
    form = form or CANONICAL_FORM[order]
    qd = [jet.dq(k) for k in range(min(jet.depth, order))]
    m3 = SIGMA3_FORMS[order][form if form in SIGMA3_FORMS[order] else "recursion"](qd, ell)
    m1 = SIGMA1_FORMS[order][form if form in SIGMA1_FORMS[order] else "recursion"](qd, ell)
    diag = (jet.q1[order], jet.q2[order]) if jet.depth > order else None
    return MComponents(diag, m3, m1)


def m_recursion(order: int) -> tuple[Polynomial, Polynomial]:
    """Exact (m3, m1) of ``M^(order)`` as polynomials.

    Coordinates are ``q0 .. q{order}`` for q and its derivatives, ``w`` for
    1/q and ``l1 .. l{order+1}`` for the angular tower. The time derivative
    is the derivation ``q_i -> q_{i+1}``, ``w -> -q1 w^2``, ``l_j -> l_{j+1}``.
    """
    if order < 1:
        raise ValueError("order must be positive")
    qs = [f"q{i}" for i in range(order + 1)]
    ls = [f"l{j}" for j in range(1, order + 2)]
    coords = tuple(qs + ["w"] + ls)
    var = {c: Polynomial.variable(coords, c) for c in coords}
    comps = {qs[i]: var[qs[i + 1]] for i in range(order)}
    comps["w"] = -var["q1"] * var["w"] ** 2
    comps.update({ls[j]: var[ls[j + 1]] for j in range(len(ls) - 1)})
    D = VectorField.from_mapping(coords, comps)
    phidot = var["l1"] * var["w"] ** 2
    m3 = Polynomial.zero(coords)
    m1 = var["l1"] * var["w"]
    for k in range(1, order):
        m3, m1 = (lie_derivative(D, m3) + 2 * phidot * m1,
                  lie_derivative(D, m1) + phidot * var[qs[k]] - 2 * phidot * m3)
    return m3, m1


class CalogeroMoserRHS:
    """Reduced right-hand side for X^(order) = 0 at fixed angular data.

    The tower ``ell`` is given at t = 0 and shifted polynomially in time.
    State layout for the first-order form: ``[q1, q2, q1', q2', ...]``.
    ``sign`` is the locked sign of q2 - q1; a state with ``sign * q <= 0``
    raises a collision.
    """

    def __init__(self, order: int, ell: AngularTower, form: str | None = None, sign: int = 1):
        if order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}")
        self.order = order
        self.ell = ell
        self.form = form or CANONICAL_FORM[order]
        if self.form not in SIGMA3_FORMS[order]:
            raise ValueError(f"no {self.form!r} form for order {order}")
        self._m3 = SIGMA3_FORMS[order][self.form]
        self.sign = 1 if sign >= 0 else -1

    @property
    def dimension(self) -> int:
        return 2 * self.order

    def highest(self, t: float, q1: Sequence[float], q2: Sequence[float]) -> tuple[float, float]:
        q = q2[0] - q1[0]
        if self.sign * q <= 0 or not math.isfinite(q):
            raise SingularityError("COLLISION_SINGULARITY", f"q1 == q2 at t={t}", t)
        ell = self.ell.at(t) if self.order > 2 else self.ell
        qd = [b - a for a, b in zip(q1, q2)]
        m3 = self._m3(qd, ell)
        return -m3, m3

    def __call__(self, t: float, y: Sequence[float]) -> np.ndarray:
        k = self.order
        q1 = [y[2 * i] for i in range(k)]
        q2 = [y[2 * i + 1] for i in range(k)]
        h1, h2 = self.highest(t, q1, q2)
        out = np.empty(2 * k)
        out[:-2] = y[2:]
        out[-2], out[-1] = h1, h2
        return out

    @staticmethod
    def pack(jet: ReducedJet, order: int) -> np.ndarray:
        return np.array([v for i in range(order) for v in (jet.q1[i], jet.q2[i])], dtype=float)

    @staticmethod
    def unpack(y: Sequence[float], order: int) -> ReducedJet:
        return ReducedJet(tuple(y[2 * i] for i in range(order)),
                          tuple(y[2 * i + 1] for i in range(order)))


class WithAngle:
    """Reduced system extended by the angle, ``phi' = l1(t) / q^2``; phi is the last entry."""

    def __init__(self, rhs: CalogeroMoserRHS):
        self.rhs = rhs

    @property
    def dimension(self) -> int:
        return self.rhs.dimension + 1

    def __call__(self, t: float, y: Sequence[float]) -> np.ndarray:
        base = self.rhs(t, y[:-1])
        ell = self.rhs.ell.at(t) if self.rhs.order > 2 else self.rhs.ell
        return np.append(base, ell.l(1) / (y[1] - y[0]) ** 2)


def cm_rhs(order: int, ell: AngularTower, form: str | None = None, sign: int = 1
           ) -> CalogeroMoserRHS:
    return CalogeroMoserRHS(order, ell, form, sign)


def constraint_residual(jet: ReducedJet, ell: AngularTower, order: int = 3) -> float:
    """The sigma_1 coefficient of M^(order); zero on the invariant constraint manifold."""
    if order not in (3, 4):
        raise ValueError("the constraint exists for orders 3 and 4")
    qd = [jet.dq(k) for k in range(order)]
    return SIGMA1_FORMS[order]["recursion"](qd, ell)


def hamiltonian_accel(jet: ReducedJet, phi: float, c1: float, c2: float, c3: float, l1: float,
                      form: str = "consistent") -> float:
    """Energy of X'' = c1 I + c2 s1 + c3 s3 in reduced coordinates.

    ``"consistent"`` is twice 1/2|r'|^2 - c.r, the first integral whose
    c2 = c3 = 0 equations are q1'' = 2 l1^2/(q1 - q2)^3 + c1. ``"printed"``
    is the variant with 2 l1^2 and halved force terms, which is not conserved in general.
    """
    q1, q2 = jet.q1[0], jet.q2[0]
    _check_q(q2 - q1)
    kinetic = 0.5 * (jet.q1[1] ** 2 + jet.q2[1] ** 2)
    angular = -c2 * math.sin(2 * phi) + c3 * math.cos(2 * phi)
    if form == "consistent":
        return (kinetic + l1**2 / (q1 - q2) ** 2 - c1 * (q1 + q2)
                + (q2 - q1) * angular)
    if form == "printed":
        return (kinetic + 2 * l1**2 / (q1 - q2) ** 2 - 0.5 * c1 * (q1 + q2)
                + 0.5 * (q2 - q1) * angular)
    raise ValueError(f"unknown form {form!r}")


def accel_coefficients(A: SymMat2) -> tuple[float, float, float]:
    """(c1, c2, c3) = (tr A / 2, A12, (A11 - A22) / 2)."""
    return A.x, A.y, A.z


class AcceleratedCMRHS:
    """q1'' = 2 l^2/(q1 - q2)^3 + c1, q2'' = -2 l^2/(q1 - q2)^3 + c1."""

    def __init__(self, l1: float, c1: float, sign: int = 1):
        self.l1, self.c1, self.sign = l1, c1, sign

    def __call__(self, t: float, y: Sequence[float]) -> np.ndarray:
        q = y[1] - y[0]
        if self.sign * q <= 0:
            raise SingularityError("COLLISION_SINGULARITY", f"q1 == q2 at t={t}", t)
        f = 2 * self.l1**2 / (y[0] - y[1]) ** 3
        return np.array([y[2], y[3], f + self.c1, -f + self.c1])


class RadialRHS:
    """Radial reductions of free (order 2) and uniformly accelerated (order 3) motion.

    Order 2 state ``[r, r']``; order 3 state ``[r, r', r'']`` with the
    time-dependent ``E2(t) = a_sq t + c``.
    """

    def __init__(self, order: int, alpha: float = 0.0, l1_sq: float = 0.0, E1: float = 0.0,
                 a_sq: float = 0.0, c: float = 0.0):
        if order not in (2, 3):
            raise ValueError("radial reductions exist for orders 2 and 3")
        if order == 2 and not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        self.order = order
        self.alpha, self.l1_sq, self.E1 = alpha, l1_sq, E1
        self.a_sq, self.c = a_sq, c

    @property
    def dimension(self) -> int:
        return self.order

    def highest(self, t: float, r: float, rdot: float, rddot: float = 0.0) -> float:
        if r <= 0 or not math.isfinite(r):
            raise SingularityError("SINGULARITY", f"r = {r} at t={t}", t)
        if self.order == 2:
            a = self.alpha
            den = r * (a * r**2 + (1 - a))
            if den == 0:
                raise SingularityError("SINGULARITY", f"zero denominator at t={t}", t)
            return (a * self.l1_sq + 2 * (1 - a) * self.E1 - (1 - a) * rdot**2) / den
        E2 = self.a_sq * t + self.c
        return 3 * (E2 - rdot * rddot) / r

    def __call__(self, t: float, y: Sequence[float]) -> np.ndarray:
        if self.order == 2:
            return np.array([y[1], self.highest(t, y[0], y[1])])
        return np.array([y[1], y[2], self.highest(t, y[0], y[1], y[2])])


def radial_rhs(order: int, **params) -> RadialRHS:
    return RadialRHS(order, **params)


def reduced_jet_from_free_state(s: FreeState, t: float = 0.0, n_derivs: int | None = None,
                                branch_hint: float | None = None) -> ReducedJet:
    """Eigenvalue jets at time t from ``M^(j) = G^-1 X^(j) G``.

    ``q1^(j) = M^(j)_11 - m3^(j)`` and ``q2^(j) = M^(j)_22 + m3^(j)``, with
    ``phi' = M^(1)_12 / q``. Supports up to three derivatives.
    """
    n = s.order if n_derivs is None else n_derivs
    if n > 4:
        raise ValueError("at most three derivatives are available")
    Xs = free_flow(s, t, n)
    d = diagonalize(Xs[0], branch_hint)
    if d.degenerate:
        raise SingularityError("COLLISION_SINGULARITY", f"degenerate X at t={t}", t)
    G = rotation(d.phi)
    ell = angular_tower(s, t)
    q1s, q2s = [d.q1], [d.q2]
    qd = [d.q2 - d.q1]
    phidot = None
    for j in range(1, n):
        M = G.T @ Xs[j].matrix @ G
        m3 = 0.0 if j == 1 else SIGMA3_FORMS[j]["recursion"](qd, ell)
        if j == 1:
            phidot = float(M[0, 1]) / qd[0]
        q1s.append(float(M[0, 0]) - m3)
        q2s.append(float(M[1, 1]) + m3)
        qd.append(q2s[-1] - q1s[-1])
    return ReducedJet(tuple(q1s), tuple(q2s), d.phi, phidot)
