"""Ground truth for the reduced equations, built from exact free flows.

The oracle never uses the reduced formulas it is meant to test. At each
sample time the matrix flow ``X(t + s)`` is a polynomial in ``s``; its
eigenvalues and rotation angle are expanded as truncated Taylor series in
``s`` (square root and quotient recurrences), which yields their analytic
time derivatives to any order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from math import factorial
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from . import ode
from .errors import SingularityError
from .reduction import (
    SIGMA1_FORMS,
    SIGMA3_FORMS,
    AcceleratedCMRHS,
    AngularTower,
    CalogeroMoserRHS,
    FreeState,
    ReducedJet,
    SymMat2,
    angular_tower,
    diagonalize,
    free_flow,
    hamiltonian_accel,
    radial_rhs,
    rebuild,
)

AUDIT_TOL = 1e-9
COLLISION = "COLLISION"
NONE = "NONE"

TARGETS = ("E1_ORDER3", "CM3_RHS", "CM4_RHS", "E_TOWER_TRACE", "CM4_CONSTRAINT",
           "HAMILTONIAN_ACCEL")


# truncated Taylor series, coefficient k is f^(k)/k! ---------------------------

def taylor_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = len(a)
    return np.array([sum(a[j] * b[k - j] for j in range(k + 1)) for k in range(n)])


def taylor_div(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = len(a)
    c = np.zeros(n)
    for k in range(n):
        c[k] = (a[k] - sum(c[j] * b[k - j] for j in range(k))) / b[0]
    return c


def taylor_sqrt(a: np.ndarray) -> np.ndarray:
    n = len(a)
    r = np.zeros(n)
    r[0] = math.sqrt(a[0])
    for k in range(1, n):
        r[k] = (a[k] - sum(r[j] * r[k - j] for j in range(1, k))) / (2 * r[0])
    return r


def taylor_integrate(a: np.ndarray, c0: float) -> np.ndarray:
    return np.concatenate(([c0], a[:-1] / np.arange(1, len(a))))


def _to_derivs(c: np.ndarray) -> tuple[float, ...]:
    return tuple(float(v) * factorial(k) for k, v in enumerate(c))


@dataclass(frozen=True)
class OracleSample:
    """Reduced data at one time; jets hold (f, f', f'', ...)."""

    t: float
    X: SymMat2
    q1: tuple[float, ...]
    q2: tuple[float, ...]
    phi: tuple[float, ...]
    ell: AngularTower

    @property
    def q(self) -> float:
        return self.q2[0] - self.q1[0]

    def jet(self, depth: int | None = None) -> ReducedJet:
        d = depth or len(self.q1)
        return ReducedJet(self.q1[:d], self.q2[:d], self.phi[0], self.phi[1])

    def conjugation_error(self) -> float:
        R = rebuild(self.phi[0], self.q1[0], self.q2[0])
        scale = max(1.0, abs(self.X.x), abs(self.X.y), abs(self.X.z))
        return max(abs(R.x - self.X.x), abs(R.y - self.X.y), abs(R.z - self.X.z)) / scale


@dataclass
class OracleTrajectory:
    state: FreeState
    times: np.ndarray
    samples: list[OracleSample]
    collision: bool = False
    collision_time: float | None = None

    def series(self, name: str, k: int = 0) -> np.ndarray:
        """k-th derivative of ``q1``, ``q2``, ``q`` or ``phi`` across samples."""
        if name == "q":
            return np.array([s.q2[k] - s.q1[k] for s in self.samples])
        return np.array([getattr(s, name)[k] for s in self.samples])

    def ell(self, j: int) -> np.ndarray:
        return np.array([s.ell.l(j) for s in self.samples])

    @property
    def flag(self) -> str | None:
        return COLLISION if self.collision else None


def oracle_sample(s: FreeState, t: float, n_derivs: int = 5, branch_hint: float | None = None
                  ) -> OracleSample:
    """Analytic eigenvalue and angle jets of the free flow at time ``t``."""
    n = n_derivs + 1
    Xd = free_flow(s, t, max(s.order, 1))
    coeff = lambda attr: np.array([getattr(Xd[k], attr) / factorial(k) if k < len(Xd) else 0.0
                                   for k in range(n)])
    x, y, z = coeff("x"), coeff("y"), coeff("z")
    d = diagonalize(Xd[0], branch_hint)
    if d.degenerate:
        raise SingularityError("COLLISION_SINGULARITY", f"q1 == q2 at t={t}", t)
    r2 = taylor_mul(y, y) + taylor_mul(z, z)
    r = taylor_sqrt(r2)
    dy = np.append(y[1:] * np.arange(1, n), 0.0)
    dz = np.append(z[1:] * np.arange(1, n), 0.0)
    # 2 phi = atan2(y, -z)
    dphi = 0.5 * taylor_div(taylor_mul(-z, dy) + taylor_mul(y, dz), r2)
    phi = taylor_integrate(dphi, d.phi)
    return OracleSample(t, Xd[0], _to_derivs(x - r), _to_derivs(x + r), _to_derivs(phi),
                        angular_tower(s, t))


def oracle_trajectory(s: FreeState, times: Sequence[float] | np.ndarray, n_derivs: int = 5
                      ) -> OracleTrajectory:
    """Oracle samples with phi unwrapped sample to sample; stops at a collision."""
    times = np.asarray(times, dtype=float)
    samples: list[OracleSample] = []
    hint = None
    for t in times:
        try:
            smp = oracle_sample(s, float(t), n_derivs, hint)
        except SingularityError:
            return OracleTrajectory(s, times[: len(samples)], samples, True, float(t))
        samples.append(smp)
        hint = smp.phi[0]
    return OracleTrajectory(s, times, samples)


def min_gap(s: FreeState, t_end: float = 1.0, n: int = 401) -> float:
    """Smallest eigenvalue gap ``q`` on a fine grid of [0, t_end]."""
    return min(2 * math.hypot(X.y, X.z)
               for X in (free_flow(s, t, 1)[0] for t in np.linspace(0.0, t_end, n)))


def random_free_state(rng: np.random.Generator, order: int, low: float = -2.0, high: float = 2.0
                      ) -> FreeState:
    return FreeState(tuple(SymMat2(*rng.uniform(low, high, 3)) for _ in range(order)))


def ensemble(order: int, seed: int = 0, n_members: int = 5, min_q: float = 0.3,
             t_end: float = 1.0) -> list[FreeState]:
    """Seeded random free states whose eigenvalue gap stays above ``min_q`` on [0, t_end]."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n_members:
        s = random_free_state(rng, order)
        if min_gap(s, t_end) >= min_q:
            out.append(s)
    return out


# comparisons -------------------------------------------------------------------

@dataclass
class ComparisonReport:
    order: int
    form: str
    max_error: float
    tol: float
    t_end: float
    failure: dict | None = None
    constraint_max: float | None = None

    @property
    def passed(self) -> bool:
        return self.failure is None and self.max_error <= self.tol

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> dict:
        return {"order": self.order, "form": self.form, "max_error": self.max_error,
                "tol": self.tol, "t_end": self.t_end, "verdict": self.verdict,
                "failure": self.failure, "constraint_max": self.constraint_max}


def compare_reduction(order: int, s: FreeState, t_end: float = 1.0, tol: float = 1e-8,
                      rel_tol: float = 1e-10, abs_tol: float = 1e-12, grid: int = 20,
                      form: str | None = None) -> ComparisonReport:
    """Integrate the reduced system from the oracle's initial jet and compare eigenvalues."""
    if s.order != order:
        raise ValueError(f"free state has order {s.order}, expected {order}")
    times = np.linspace(0.0, t_end, grid + 1)
    orc = oracle_trajectory(s, times, n_derivs=order)
    rhs = CalogeroMoserRHS(order, angular_tower(s), form)
    y0 = CalogeroMoserRHS.pack(orc.samples[0].jet(), order)
    cfg = ode.IntegratorConfig(ode.ADAPTIVE_RK45, rel_tol=rel_tol, abs_tol=abs_tol,
                               grid=tuple(times))
    traj = ode.integrate(ode.OdeProblem(rhs, 0.0, y0), cfg, t_end)
    n = min(len(traj.times), len(orc.samples))
    err = 0.0
    cons = 0.0 if order in (3, 4) else None
    for i in range(n):
        smp = orc.samples[i]
        err = max(err, abs(traj.states[i, 0] - smp.q1[0]), abs(traj.states[i, 1] - smp.q2[0]))
        if cons is not None:
            jet = CalogeroMoserRHS.unpack(traj.states[i], order)
            ell = rhs.ell.at(traj.times[i])
            qd = [jet.dq(k) for k in range(order)]
            cons = max(cons, abs(SIGMA1_FORMS[order]["recursion"](qd, ell)))
    failure = traj.failure.to_dict() if traj.failure else None
    if failure is None and orc.collision:
        failure = {"kind": COLLISION, "t": orc.collision_time, "message": "oracle collision"}
    return ComparisonReport(order, rhs.form, float(err), tol, t_end, failure, cons)


def polyfit_residual(times: Sequence[float], values: Sequence[float], degree: int
                     ) -> tuple[np.ndarray, float]:
    """Least-squares fit; coefficients lowest degree first, residual is the max deviation."""
    ts = np.asarray(times, dtype=float)
    vs = np.asarray(values, dtype=float)
    if len(ts) != len(vs):
        raise ValueError("times and values differ in length")
    if len(ts) <= degree + 1:
        raise ValueError(f"need more than {degree + 1} samples for a degree-{degree} fit")
    coef = P.polyfit(ts, vs, degree)
    return coef, float(np.max(np.abs(P.polyval(ts, coef) - vs)))


# audits --------------------------------------------------------------------------

@dataclass
class AuditReport:
    target: str
    candidates: dict[str, str]
    deviations: dict[str, float]
    tol: float
    seed: int
    n_members: int
    details: dict = field(default_factory=dict)

    @property
    def matching(self) -> list[str]:
        return sorted(k for k, v in self.deviations.items() if v < self.tol)

    @property
    def verdict(self) -> str:
        m = self.matching
        if len(m) == 1:
            return m[0]
        return NONE if not m else "AMBIGUOUS"

    @property
    def unique(self) -> bool:
        return len(self.matching) == 1

    def to_dict(self) -> dict:
        return {"target": self.target, "candidates": self.candidates,
                "deviations": self.deviations, "tol": self.tol, "seed": self.seed,
                "n_members": self.n_members, "verdict": self.verdict,
                "details": self.details}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def summary(self) -> str:
        devs = ", ".join(f"{k}={v:.3e}" for k, v in sorted(self.deviations.items()))
        return f"{self.target}: verdict {self.verdict} ({devs}; tol {self.tol:g})"


def _e1_printed(smp: OracleSample) -> float:
    return 0.5 * (smp.q1[1] ** 2 + smp.q2[1] ** 2) + smp.q**2 * smp.phi[1]


def _e1_squared(smp: OracleSample) -> float:
    return 0.5 * (smp.q1[1] ** 2 + smp.q2[1] ** 2) + smp.q**2 * smp.phi[1] ** 2


def _e1_truth(smp: OracleSample, s: FreeState) -> float:
    V = free_flow(s, smp.t, 2)[1].matrix
    return 0.5 * float(np.trace(V @ V))


_E1_CANDIDATES = {
    "printed": ("1/2(q1'^2 + q2'^2) + q^2 phi'", _e1_printed),
    "squared": ("1/2(q1'^2 + q2'^2) + q^2 phi'^2", _e1_squared),
}

_DESCRIPTIONS = {
    "CM3_RHS": {"recursion": "6 l1 l2/q^3 - 6 l1^2 q'/q^4",
                "printed": "q1''' = 6 (l1 l2 (q1 - q2) - l1 (q1' - q2'))/(q2 - q1)^4"},
    "CM4_RHS": {"recursion": "(6 l2^2 + 8 l1 l3)/q^3 - (4 l1^2 q'' + 32 l1 l2 q')/q^4 + 24 l1^2 q'^2/q^5 - 8 l1^4/q^7",
                "printed": "(6 l2^2 + 8 l1 l3)/q^3 - (4 l1^2 q'' + 32 l1 l2 q')/q^4 + 8 l1^2 q'^2/q^5 - 8 l1^4/q^7"},
    "CM4_CONSTRAINT": {"recursion": "l4/q + 2 (l1 q''' - l3 q')/q^2 - 2 (l1 q' q'' - l2 q'^2)/q^3 - 24 l1^2 l2/q^5 + 32 l1^3 q'/q^6",
                       "printed": "l4/q + 2 (l1 q''' - l3 q')/q^2 - 3 (l1 q' q'' - l2 q'^2)/q^3 - 14 l1^2 l2/q^5 - 18 l1^3 q'/q^6"},
    "HAMILTONIAN_ACCEL": {"consistent": "1/2(q1'^2+q2'^2) + l1^2/q^2 - c1(q1+q2) + q(-c2 sin2phi + c3 cos2phi)",
                          "printed": "1/2(q1'^2+q2'^2) + 2 l1^2/q^2 - c1(q1+q2)/2 + q(-c2 sin2phi + c3 cos2phi)/2"},
}


def _rel(c: float, truth: float) -> float:
    return abs(c - truth) / max(1.0, abs(truth))


def formula_audit(target: str, seed: int = 0, n_members: int = 5, tol: float = AUDIT_TOL,
                  n_samples: int = 21, t_end: float = 1.0) -> AuditReport:
    """Score each candidate closed form against the oracle on a seeded ensemble.

    The deviation of a candidate is max |c - truth| / max(1, |truth|) over
    every member and sample.
    """
    if target not in TARGETS:
        raise ValueError(f"unknown audit target {target!r}; expected one of {TARGETS}")
    if n_members < 1:
        raise ValueError("n_members must be positive")
    order = {"E_TOWER_TRACE": 2, "E1_ORDER3": 3, "CM3_RHS": 3, "HAMILTONIAN_ACCEL": 3,
             "CM4_RHS": 4, "CM4_CONSTRAINT": 4}[target]
    times = np.linspace(0.0, t_end, n_samples)
    members = ensemble(order, seed, n_members, t_end=t_end)

    if target in ("E_TOWER_TRACE", "E1_ORDER3"):
        cands: dict[str, Callable] = {k: f for k, (_, f) in _E1_CANDIDATES.items()}
        desc = {k: d for k, (d, _) in _E1_CANDIDATES.items()}
    elif target in ("CM3_RHS", "CM4_RHS"):
        cands = dict(SIGMA3_FORMS[order])
        desc = _DESCRIPTIONS[target]
    elif target == "CM4_CONSTRAINT":
        cands = dict(SIGMA1_FORMS[4])
        desc = _DESCRIPTIONS[target]
    else:
        cands = {"consistent": None, "printed": None}
        desc = _DESCRIPTIONS[target]

    dev = {k: 0.0 for k in cands}
    asym = 0.0
    for s in members:
        orc = oracle_trajectory(s, times, n_derivs=order)
        h0 = {}
        for smp in orc.samples:
            qd = [smp.q2[k] - smp.q1[k] for k in range(order)]
            for name, f in cands.items():
                if target in ("E_TOWER_TRACE", "E1_ORDER3"):
                    d = _rel(f(smp), _e1_truth(smp, s))
                elif target in ("CM3_RHS", "CM4_RHS"):
                    # X^(k) = 0 forces q1^(k) = -m3 and q2^(k) = +m3
                    c = f(qd, smp.ell)
                    d = max(_rel(c, smp.q2[order]), _rel(-c, smp.q1[order]))
                elif target == "CM4_CONSTRAINT":
                    d = _rel(f(qd, smp.ell), 0.0)
                else:
                    c1, c2, c3 = s.jets[2].x, s.jets[2].y, s.jets[2].z
                    H = hamiltonian_accel(smp.jet(2), smp.phi[0], c1, c2, c3, smp.ell.l(1), name)
                    h0.setdefault(name, H)
                    d = _rel(H, h0[name])
                dev[name] = max(dev[name], d)
            if target in ("CM3_RHS", "CM4_RHS"):
                asym = max(asym, abs(smp.q1[order] + smp.q2[order]) / max(1.0, abs(smp.q2[order])))
    details = {"order": order, "n_samples": n_samples, "t_end": t_end}
    if target in ("CM3_RHS", "CM4_RHS"):
        details["diagonal_antisymmetry"] = asym
    return AuditReport(target, desc, dev, tol, seed, n_members, details)


# radial and accelerated checks --------------------------------------------------

def radial_free_compare(r0: Sequence[float], v0: Sequence[float], alpha: float,
                        t_end: float = 1.0, grid: int = 20, rel_tol: float = 1e-11,
                        abs_tol: float = 1e-13) -> float:
    """Max |r(t) - |r0 + v0 t|| for the order-2 radial family."""
    r0v, v0v = np.asarray(r0, float), np.asarray(v0, float)
    r = float(np.linalg.norm(r0v))
    rdot = float(r0v @ v0v) / r
    E1 = 0.5 * float(v0v @ v0v)
    l1_sq = float(np.sum(np.cross(r0v, v0v) ** 2))
    rhs = radial_rhs(2, alpha=alpha, l1_sq=l1_sq, E1=E1)
    times = np.linspace(0.0, t_end, grid + 1)
    traj = ode.integrate(ode.OdeProblem(rhs, 0.0, (r, rdot)),
                         ode.IntegratorConfig(rel_tol=rel_tol, abs_tol=abs_tol, grid=tuple(times)),
                         t_end)
    if traj.failure:
        return math.inf
    exact_r = np.linalg.norm(r0v[None, :] + times[:, None] * v0v[None, :], axis=1)
    return float(np.max(np.abs(traj.states[:, 0] - exact_r)))


def radial_jet(r0, v0, a, t: float, n: int = 4) -> tuple[float, ...]:
    """(r, r', r'', ...) of |r0 + v0 t + a t^2/2| by Taylor arithmetic."""
    r0, v0, a = (np.asarray(u, float) for u in (r0, v0, a))
    pos = r0 + v0 * t + 0.5 * a * t * t
    vel = v0 + a * t
    comps = [np.array([p, w, 0.5 * ai] + [0.0] * (n - 2))[: n + 1] for p, w, ai in zip(pos, vel, a)]
    r2 = sum(taylor_mul(c, c) for c in comps)
    return _to_derivs(taylor_sqrt(r2))


def radial_order3_fd_error(r0, v0, a, t_end: float = 1.0, h: float = 5e-3) -> float:
    """Max |r'''_fd - 3(E2 - r' r'')/r| / max(1, |r'''|) on a uniform grid.

    ``r'''_fd`` differentiates samples of |r(t)|.
    """
    r0, v0, a = (np.asarray(u, float) for u in (r0, v0, a))
    # pad by three samples each side so every compared point gets a central stencil
    n = int(round(t_end / h))
    ts = h * np.arange(-3, n + 4)
    rs = np.linalg.norm(r0[None, :] + ts[:, None] * v0 + 0.5 * ts[:, None] ** 2 * a, axis=1)
    fd3 = ode.differentiate(ts, rs, 3)
    rhs = radial_rhs(3, a_sq=float(a @ a), c=float(v0 @ a))
    err = 0.0
    for t, d3 in zip(ts[3:-3], fd3[3:-3]):
        r, rdot, rddot, _ = radial_jet(r0, v0, a, t, 4)[:4]
        err = max(err, _rel(d3, rhs.highest(t, r, rdot, rddot)))
    return err


def radial_ensemble(seed: int = 0, n_members: int = 5, min_r: float = 1.0, t_end: float = 1.0,
                    accelerated: bool = True) -> list[tuple[np.ndarray, ...]]:
    """Seeded (r0, v0, a) triples in [-2, 2]^3 keeping |r(t)| >= min_r on [0, t_end]."""
    rng = np.random.default_rng(seed)
    ts = np.linspace(0.0, t_end, 201)
    out = []
    while len(out) < n_members:
        r0, v0, a = rng.uniform(-2.0, 2.0, (3, 3))
        if not accelerated:
            a = np.zeros(3)
        path = r0[None, :] + ts[:, None] * v0 + 0.5 * ts[:, None] ** 2 * a
        if np.min(np.linalg.norm(path, axis=1)) >= min_r:
            out.append((r0, v0, a))
    return out


def accelerated_cm_compare(s: FreeState, t_end: float = 1.0, grid: int = 20,
                           rel_tol: float = 1e-10, abs_tol: float = 1e-12) -> float:
    """Oracle comparison for X'' = c1 I: eigenvalues follow CM plus a constant force."""
    A = s.jets[2]
    if A.y != 0 or A.z != 0:
        raise ValueError("the acceleration must be a multiple of the identity")
    times = np.linspace(0.0, t_end, grid + 1)
    orc = oracle_trajectory(s, times, n_derivs=2)
    smp0 = orc.samples[0]
    rhs = AcceleratedCMRHS(smp0.ell.l(1), A.x)
    y0 = (smp0.q1[0], smp0.q2[0], smp0.q1[1], smp0.q2[1])
    traj = ode.integrate(ode.OdeProblem(rhs, 0.0, y0),
                         ode.IntegratorConfig(rel_tol=rel_tol, abs_tol=abs_tol, grid=tuple(times)),
                         t_end)
    if traj.failure or orc.collision:
        return math.inf
    return float(max(max(abs(st[0] - sm.q1[0]), abs(st[1] - sm.q2[0]))
                     for st, sm in zip(traj.states, orc.samples)))


def hamiltonian_drift(s: FreeState, t_end: float = 1.0, n: int = 41, form: str = "consistent"
                      ) -> float:
    """Relative drift of the reduced energy along the oracle of X'' = A."""
    if s.order != 3:
        raise ValueError("needs an order-3 free state (X'' = A)")
    A = s.jets[2]
    orc = oracle_trajectory(s, np.linspace(0.0, t_end, n), n_derivs=2)
    Hs = [hamiltonian_accel(smp.jet(2), smp.phi[0], A.x, A.y, A.z, smp.ell.l(1), form)
          for smp in orc.samples]
    return max(abs(H - Hs[0]) for H in Hs) / max(1.0, abs(Hs[0]))
