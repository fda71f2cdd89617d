"""Command-line front end: ``nilflow analyze|reduce|simulate|verify|audit <spec> [flags]``.

Exit codes: 0 success or PASS, 1 FAIL verdict, 2 input error, 3 singular abort.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import linear, nilpotent, ode, reduction, verification
from .errors import NotNilpotentError, SingularityError, SpecError
from .specfile import SystemSpec, parse_spec

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_SINGULAR = 0, 1, 2, 3

DEFAULTS = {
    "max_depth": nilpotent.DEFAULT_MAX_DEPTH,
    "degree_bound": None,
    "order": None,
    "t_end": 1.0,
    "tol": 1e-8,
    "rel_tol": 1e-10,
    "abs_tol": 1e-12,
    "step": None,
    "grid": 20,
    "seed": 0,
    "l1": None,
}
AUDIT_TARGETS = ("CM3_RHS", "E_TOWER_TRACE", "E1_ORDER3", "CM4_RHS", "CM4_CONSTRAINT",
                 "HAMILTONIAN_ACCEL")


class InputError(Exception):
    pass


def _settings(args: argparse.Namespace, spec: SystemSpec | None) -> dict[str, Any]:
    """Flag value, else spec option, else default."""
    opts = spec.options if spec else {}
    return {k: (getattr(args, k) if getattr(args, k, None) is not None else opts.get(k, d))
            for k, d in DEFAULTS.items()}


def _require(spec: SystemSpec, *kinds: str, command: str) -> None:
    if spec.kind not in kinds:
        raise InputError(f"{command} needs a {' or '.join(kinds)} spec, got {spec.kind}")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=str)


def _integrator(cfg: dict, times: np.ndarray) -> ode.IntegratorConfig:
    if cfg["step"] is not None:
        return ode.IntegratorConfig(ode.FIXED_RK4, step=cfg["step"], grid=tuple(times))
    return ode.IntegratorConfig(ode.ADAPTIVE_RK45, rel_tol=cfg["rel_tol"], abs_tol=cfg["abs_tol"],
                                grid=tuple(times))


# commands -----------------------------------------------------------------------

def cmd_analyze(spec: SystemSpec, cfg: dict) -> tuple[dict, int]:
    _require(spec, "POLY_FIELD", "LINEAR", command="analyze")
    if spec.kind == "LINEAR":
        A = spec.matrix
        V = linear.linear_vector_field(A, spec.payload.get("coordinates"))
    else:
        A = None
        V = spec.field
    report = nilpotent.strict_integrability_report(V, cfg["max_depth"])
    out = {"kind": spec.kind, "coordinates": list(V.coords), **report.to_dict()}
    towers = {}
    for g in spec.payload.get("observables", ()):
        try:
            t = nilpotent.compute_tower(V, g, cfg["max_depth"])
            towers[str(g)] = {"index": t.index, "levels": [str(p) for p in t.levels]}
        except NotNilpotentError:
            towers[str(g)] = {"index": nilpotent.NOT_NILPOTENT}
    if towers:
        out["towers"] = towers
    if cfg["degree_bound"] is not None:
        out["filtration"] = {}
        for k in range(1, cfg["max_depth"] + 1):
            basis = nilpotent.filtration_basis(V, k, cfg["degree_bound"])
            out["filtration"][str(k)] = [str(p) for p in basis]
            if len(basis) == len(nilpotent.monomials(len(V.coords), cfg["degree_bound"])):
                break
    if A is not None:
        jc = linear.jordan_chevalley(A)
        out["jordan_chevalley"] = {"S": jc.S.to_list(), "N": jc.N.to_list()}
        out["characteristic_polynomial"] = [str(c) for c in linear.characteristic_polynomial(A)]
        out["minimal_polynomial"] = [str(c) for c in linear.minimal_polynomial(A)]
    return out, EXIT_OK if report.strict else EXIT_FAIL


def _order(spec: SystemSpec, cfg: dict) -> int:
    s = spec.free_state
    if cfg["order"] is not None and cfg["order"] != s.order:
        raise InputError(f"--order {cfg['order']} does not match the spec's {s.order} jets")
    return s.order


def cmd_reduce(spec: SystemSpec, cfg: dict) -> tuple[dict, int]:
    _require(spec, "FREE_MATRIX", command="reduce")
    s = spec.free_state
    order = _order(spec, cfg)
    jet = reduction.reduced_jet_from_free_state(s)
    ell = reduction.angular_tower(s)
    out = {
        "order": order,
        "phi": jet.phi,
        "phidot": jet.phidot,
        "q1": list(jet.q1),
        "q2": list(jet.q2),
        "ell": list(ell.values),
        "form": reduction.CANONICAL_FORM[order],
    }
    e = reduction.energy_tower(s)
    out["energy"] = {"e1": e.e1, "e2": e.e2, "e3": e.e3}
    if order >= 3:
        out["constraint_residual"] = reduction.constraint_residual(jet, ell, order)
    return out, EXIT_OK


def cmd_simulate(spec: SystemSpec, cfg: dict, fmt: str) -> tuple[str, int]:
    _require(spec, "FREE_MATRIX", "RADIAL", command="simulate")
    t_end = cfg["t_end"]
    times = np.linspace(0.0, t_end, int(cfg["grid"]) + 1)
    warnings = []
    if spec.kind == "FREE_MATRIX":
        s = spec.free_state
        order = _order(spec, cfg)
        jet = reduction.reduced_jet_from_free_state(s)
        ell = reduction.angular_tower(s)
        if cfg["l1"] is not None:
            ell = reduction.AngularTower((float(cfg["l1"]),) + ell.values[1:])
            if order >= 3:
                res = reduction.constraint_residual(jet, ell, 3)
                if abs(res) > 1e-8:
                    warnings.append(f"constraint residual {res:.3e} exceeds 1e-8 after --l1 override")
        rhs = reduction.WithAngle(reduction.cm_rhs(order, ell))
        y0 = np.append(reduction.CalogeroMoserRHS.pack(jet, order), jet.phi)
        names = [f"q{i}" + ("" if k == 0 else "_d" + str(k)) for k in range(order) for i in (1, 2)]
        names.append("phi")
        # reorder columns so the header reads t,q1,q2,phi,...
        perm = [0, 1, len(names) - 1] + list(range(2, len(names) - 1))
    else:
        p = spec.payload
        rhs = reduction.radial_rhs(p["order"], **p["params"])
        y0 = np.array(p["initial"])
        names = ["r", "r_d1", "r_d2"][: p["order"]]
        perm = list(range(len(names)))
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    traj = ode.integrate(ode.OdeProblem(rhs, 0.0, y0), _integrator(cfg, times), t_end)
    traj = ode.Trajectory(traj.times, traj.states[:, perm], traj.errors, traj.failure,
                          traj.n_steps, traj.n_rejected, traj.n_evals)
    names = [names[i] for i in perm]
    text = traj.to_csv(names) if fmt == "csv" else traj.to_json(names)
    if traj.failure:
        print(f"{traj.failure.kind} at t={traj.failure.t!r}: {traj.failure.message}", file=sys.stderr)
        return text, EXIT_SINGULAR
    return text, EXIT_OK


def cmd_verify(spec: SystemSpec, cfg: dict) -> tuple[dict, int]:
    _require(spec, "FREE_MATRIX", command="verify")
    order = _order(spec, cfg)
    rep = verification.compare_reduction(order, spec.free_state, cfg["t_end"], cfg["tol"],
                                         cfg["rel_tol"], cfg["abs_tol"], int(cfg["grid"]))
    out = rep.to_dict()
    if rep.failure:
        return out, EXIT_SINGULAR
    return out, EXIT_OK if rep.passed else EXIT_FAIL


def cmd_audit(cfg: dict, targets: Sequence[str], members: int) -> tuple[dict, int]:
    reports = {t: verification.formula_audit(t, seed=int(cfg["seed"]), n_members=members)
               for t in targets}
    for r in reports.values():
        print(r.summary(), file=sys.stderr)
    out = {t: r.to_dict() for t, r in reports.items()}
    return out, EXIT_OK if all(r.unique for r in reports.values()) else EXIT_FAIL


# argument parsing ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nilflow", description="Nilpotent flows, matrix reductions and their oracle checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--max-depth", type=int, dest="max_depth")
    common.add_argument("--degree-bound", type=int, dest="degree_bound")
    common.add_argument("--order", type=int, choices=(2, 3, 4))
    common.add_argument("--t-end", type=float, dest="t_end")
    common.add_argument("--tol", type=float)
    common.add_argument("--rel-tol", type=float, dest="rel_tol")
    common.add_argument("--abs-tol", type=float, dest="abs_tol")
    common.add_argument("--step", type=float, help="fixed RK4 step; adaptive when omitted")
    common.add_argument("--grid", type=int, help="number of output intervals")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="write the result here instead of standard output")
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--l1", type=float, help="override the initial angular momentum")

    for name, helptext in (("analyze", "nilpotency report and flow polynomials"),
                           ("reduce", "reduced initial data and towers"),
                           ("simulate", "integrate the reduced system"),
                           ("verify", "compare the reduced system against the oracle")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("spec")
    p = sub.add_parser("audit", parents=[common], help="score candidate closed forms against the oracle")
    p.add_argument("spec", nargs="?")
    p.add_argument("--target", action="append", choices=AUDIT_TARGETS)
    p.add_argument("--members", type=int, default=5)
    return parser


def _positive(cfg: dict) -> None:
    for key in ("tol", "rel_tol", "abs_tol", "t_end"):
        if not cfg[key] > 0:
            raise InputError(f"{key} must be positive")
    if cfg["step"] is not None and not cfg["step"] > 0:
        raise InputError("step must be positive")
    if int(cfg["grid"]) < 1:
        raise InputError("grid must be at least 1")
    if int(cfg["max_depth"]) < 1:
        raise InputError("max_depth must be positive")


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = parse_spec(args.spec) if args.spec else None
        cfg = _settings(args, spec)
        _positive(cfg)
        if args.command == "analyze":
            result, code = cmd_analyze(spec, cfg)
        elif args.command == "reduce":
            result, code = cmd_reduce(spec, cfg)
        elif args.command == "simulate":
            text, code = cmd_simulate(spec, cfg, args.format)
            _emit(text, args.out)
            return code
        elif args.command == "verify":
            result, code = cmd_verify(spec, cfg)
        else:
            if args.members < 1:
                raise InputError("--members must be positive")
            result, code = cmd_audit(cfg, args.target or AUDIT_TARGETS, args.members)
    except (SpecError, InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SingularityError as exc:
        print(f"{exc.kind}: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    if args.format == "csv":
        print("note: CSV output applies to simulate only; writing JSON", file=sys.stderr)
    _emit(_dumps(result), args.out)
    return code


def main() -> None:
    sys.exit(run())
