"""Explicit Runge-Kutta integration and finite-difference differentiation.

Two steppers are provided: classical fixed-step RK4 and the adaptive
Dormand-Prince 5(4) pair with first-same-as-last reuse. Steps are shortened
so that every requested sample time is hit exactly, which avoids the need
for interpolation.

An evaluator that raises :class:`SingularityError` or returns a non-finite
value stops the run; the trajectory up to the last accepted sample is
returned together with a :class:`Failure` record.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import exact
from .errors import DimensionMismatchError, SingularityError

FIXED_RK4 = "FIXED_RK4"
ADAPTIVE_RK45 = "ADAPTIVE_RK45"
MODES = (FIXED_RK4, ADAPTIVE_RK45)

STIFF_OR_SINGULAR = "STIFF_OR_SINGULAR"

F = Fraction
# Dormand-Prince 5(4)
DP_C = (F(0), F(1, 5), F(3, 10), F(4, 5), F(8, 9), F(1), F(1))
DP_A = (
    (),
    (F(1, 5),),
    (F(3, 40), F(9, 40)),
    (F(44, 45), F(-56, 15), F(32, 9)),
    (F(19372, 6561), F(-25360, 2187), F(64448, 6561), F(-212, 729)),
    (F(9017, 3168), F(-355, 33), F(46732, 5247), F(49, 176), F(-5103, 18656)),
    (F(35, 384), F(0), F(500, 1113), F(125, 192), F(-2187, 6784), F(11, 84)),
)
DP_B5 = (F(35, 384), F(0), F(500, 1113), F(125, 192), F(-2187, 6784), F(11, 84), F(0))
DP_B4 = (F(5179, 57600), F(0), F(7571, 16695), F(393, 640), F(-92097, 339200), F(187, 2100),
         F(1, 40))

_C = np.array([float(c) for c in DP_C])
_A = [np.array([float(a) for a in row]) for row in DP_A]
_B5 = np.array([float(b) for b in DP_B5])
_E = np.array([float(b5 - b4) for b5, b4 in zip(DP_B5, DP_B4)])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


@dataclass(frozen=True)
class OdeProblem:
    """``y' = f(t, y)`` with ``y(t0) = y0``."""

    f: Callable[[float, np.ndarray], Sequence[float]]
    t0: float
    y0: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "y0", tuple(float(v) for v in self.y0))

    @property
    def dimension(self) -> int:
        return len(self.y0)


@dataclass(frozen=True)
class IntegratorConfig:
    """Stepper settings.

    ``grid`` is either a number of equal sample intervals or an explicit
    increasing sequence of sample times; ``None`` records every step.
    """

    mode: str = ADAPTIVE_RK45
    step: float | None = None
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    min_step: float = 1e-14
    grid: int | tuple[float, ...] | None = None
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == FIXED_RK4 and not (self.step and self.step > 0):
            raise ValueError("FIXED_RK4 needs a positive step")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.min_step < self.max_step:
            raise ValueError("need 0 < min_step < max_step")
        if isinstance(self.grid, (list, np.ndarray)):
            object.__setattr__(self, "grid", tuple(float(t) for t in self.grid))

    def sample_times(self, t0: float, t_end: float) -> np.ndarray | None:
        if self.grid is None:
            return None
        if isinstance(self.grid, int):
            if self.grid < 1:
                raise ValueError("grid needs at least one interval")
            return np.linspace(t0, t_end, self.grid + 1)
        ts = np.asarray(self.grid, dtype=float)
        if np.any(np.diff(ts) <= 0) or ts[0] < t0 or ts[-1] > t_end:
            raise ValueError("grid must be increasing and inside [t0, t_end]")
        return ts


@dataclass(frozen=True)
class Failure:
    kind: str
    t: float
    message: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "t": self.t, "message": self.message}


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    errors: list[float] = field(default_factory=list)
    failure: Failure | None = None
    n_steps: int = 0
    n_rejected: int = 0
    n_evals: int = 0

    @property
    def ok(self) -> bool:
        return self.failure is None

    def __len__(self) -> int:
        return len(self.times)

    def component(self, i: int) -> np.ndarray:
        return self.states[:, i]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, names: Sequence[str] | None = None) -> str:
        dim = self.states.shape[1] if self.states.ndim == 2 else 0
        names = list(names) if names is not None else [f"y{i}" for i in range(dim)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *names])
        for t, row in zip(self.times, self.states):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in row)])
        return buf.getvalue()

    def to_dict(self, names: Sequence[str] | None = None) -> dict:
        out = {
            "times": [float(t) for t in self.times],
            "states": [[float(v) for v in row] for row in self.states],
            "failure": self.failure.to_dict() if self.failure else None,
            "n_steps": self.n_steps,
            "n_rejected": self.n_rejected,
        }
        if names is not None:
            out["names"] = list(names)
        return out

    def to_json(self, names: Sequence[str] | None = None) -> str:
        return json.dumps(self.to_dict(names), sort_keys=True, indent=2)


class _Evaluator:
    def __init__(self, f, dim):
        self.f, self.dim, self.count = f, dim, 0

    def __call__(self, t, y):
        self.count += 1
        try:
            out = np.asarray(self.f(t, y), dtype=float)
        except (ZeroDivisionError, OverflowError) as exc:
            raise SingularityError("SINGULARITY", f"{exc} at t={t}", t) from exc
        if out.shape != (self.dim,):
            raise DimensionMismatchError(f"evaluator returned shape {out.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(out)):
            raise SingularityError("SINGULARITY", f"non-finite derivative at t={t}", t)
        return out


def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _dp_step(f, t, y, h, k1):
    ks = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * k for a, k in zip(_A[i], ks))
        ks.append(f(t + _C[i] * h, yi))
    # stage 7 is evaluated at the fifth-order solution (FSAL)
    y_new = y + h * sum(b * k for b, k in zip(_B5[:6], ks[:6]))
    err = h * sum(e * k for e, k in zip(_E, ks))
    return y_new, err, ks[6]


def _initial_step(f, t0, y0, f0, order, rtol, atol):
    scale = atol + np.abs(y0) * rtol
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = f(t0 + h0, y0 + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / (order + 1))
    return min(100 * h0, h1)


def integrate(p: OdeProblem, cfg: IntegratorConfig, t_end: float) -> Trajectory:
    if not t_end > p.t0:
        raise ValueError("t_end must exceed the initial time")
    f = _Evaluator(p.f, p.dimension)
    grid = cfg.sample_times(p.t0, t_end)
    targets = list(grid[1:]) if grid is not None else [t_end]
    if targets[-1] != t_end:
        targets.append(t_end)
    record_every = grid is None

    t = p.t0
    y = np.array(p.y0, dtype=float)
    times, states, errors = [t], [y.copy()], []
    failure = None
    n_steps = n_rejected = 0
    ti = 0

    try:
        if cfg.mode == FIXED_RK4:
            while ti < len(targets):
                target = targets[ti]
                h = min(cfg.step, target - t)
                y = _rk4_step(f, t, y, h)
                t = target if h == target - t else t + h
                n_steps += 1
                if not np.all(np.isfinite(y)):
                    raise SingularityError("SINGULARITY", f"non-finite state at t={t}", t)
                if t == target:
                    ti += 1
                if record_every or t == target:
                    times.append(t)
                    states.append(y.copy())
        else:
            k1 = f(t, y)
            h = min(cfg.max_step, _initial_step(f, t, y, k1, 4, cfg.rel_tol, cfg.abs_tol),
                    t_end - p.t0)
            while ti < len(targets):
                if n_steps + n_rejected >= cfg.max_steps:
                    failure = Failure(STIFF_OR_SINGULAR, float(t), "step budget exhausted")
                    break
                target = targets[ti]
                clipped = h >= target - t
                h_try = target - t if clipped else h
                try:
                    y_new, err, k_last = _dp_step(f, t, y, h_try, k1)
                    scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
                    err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
                except SingularityError:
                    # a stage may probe past the singular point; retry smaller first
                    if h_try / 2 < cfg.min_step:
                        raise
                    h = h_try / 2
                    n_rejected += 1
                    continue
                if err_norm <= 1.0:
                    t = target if clipped else t + h_try
                    y, k1 = y_new, k_last
                    n_steps += 1
                    errors.append(err_norm)
                    if clipped:
                        ti += 1
                    if record_every or clipped:
                        times.append(t)
                        states.append(y.copy())
                    factor = MAX_FACTOR if err_norm == 0 else min(
                        MAX_FACTOR, max(MIN_FACTOR, SAFETY * err_norm ** -0.2))
                    # a clipped step says nothing about the natural scale
                    h = min(cfg.max_step, max(h, h_try * factor) if clipped else h_try * factor)
                else:
                    n_rejected += 1
                    h = h_try * max(MIN_FACTOR, SAFETY * err_norm ** -0.2)
                if h < cfg.min_step and ti < len(targets):
                    failure = Failure(STIFF_OR_SINGULAR, float(t), f"step size {h:.3e} below min_step")
                    break
    except SingularityError as exc:
        failure = Failure(exc.kind, float(exc.t if exc.t is not None else t), str(exc))

    dim = p.dimension
    return Trajectory(np.array(times), np.array(states).reshape(len(states), dim), errors,
                      failure, n_steps, n_rejected, f.count)


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple[int, ...], order: int) -> tuple[Fraction, ...]:
    """Exact weights w with ``sum_j w_j f(x + o_j h) = h^order f^(order)(x) + O(h^n)``."""
    n = len(offsets)
    if not 0 <= order < n:
        raise ValueError("need more stencil points than the derivative order")
    A = [[Fraction(o) ** m for o in offsets] for m in range(n)]
    b = [Fraction(0)] * n
    b[order] = Fraction(math.factorial(order))
    return tuple(exact.solve(A, b))


def differentiate(times: Sequence[float], values: Sequence[float], order: int = 1,
                  points: int = 7) -> np.ndarray:
    """Finite-difference derivative on a uniform grid.

    Central stencils in the interior, one-sided windows near the ends.
    """
    ts = np.asarray(times, dtype=float)
    vs = np.asarray(values, dtype=float)
    n = len(ts)
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    if n < points:
        raise ValueError(f"need at least {points} samples, got {n}")
    dt = np.diff(ts)
    h = (ts[-1] - ts[0]) / (n - 1)
    if np.max(np.abs(dt - h)) > 1e-9 * abs(h):
        raise ValueError("numeric_derivative needs a uniform grid")
    half = points // 2
    out = np.empty(n)
    for i in range(n):
        start = min(max(i - half, 0), n - points)
        offsets = tuple(j - i for j in range(start, start + points))
        w = fd_weights(offsets, order)
        # weights sum to zero, so centring on vs[i] makes constants exact
        out[i] = sum(float(wj) * (vs[start + k] - vs[i]) for k, wj in enumerate(w)) / h**order
    return out


def numeric_derivative(samples: Trajectory, component: int, order: int = 1) -> np.ndarray:
    return differentiate(samples.times, samples.states[:, component], order)
