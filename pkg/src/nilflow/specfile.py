"""System specification files.

A spec is a JSON object with a ``kind`` and a kind-specific payload::

    {"kind": "POLY_FIELD", "coordinates": ["x", "v", "a"],
     "components": {"x": "v", "v": "a", "a": "0"}}
    {"kind": "LINEAR", "matrix": [["0", "1"], ["0", "0"]]}
    {"kind": "FREE_MATRIX", "jets": [[[0, 0], [0, 1]], [[0, 1], [1, 0]]]}
    {"kind": "RADIAL", "order": 2, "params": {"alpha": 1, "l1_sq": 1, "E1": 1},
     "initial": [1.0, 0.0]}

Polynomials are written as sums of terms such as ``1/2*a*t^2 - 3*x*y``.
An optional ``options`` object supplies defaults for command-line flags.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

from .errors import SpecError, UnknownCoordinateError
from .linear import RationalMatrix
from .poly import Polynomial, VectorField
from .reduction import FreeState, SymMat2

KINDS = ("POLY_FIELD", "LINEAR", "FREE_MATRIX", "RADIAL")
OPTION_KEYS = ("max_depth", "degree_bound", "order", "t_end", "tol", "rel_tol", "abs_tol",
               "step", "grid", "seed", "l1")

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|[-+*/^()]))")


class _Parser:
    """Recursive descent over ``expr := term (('+'|'-') term)*`` with the usual precedence."""

    def __init__(self, text: str, coords: tuple[str, ...], where: str):
        self.text, self.coords, self.where = text, coords, where
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if not m:
                self._fail(pos, f"unexpected character {text[pos]!r}")
            kind = "num" if m.group(1) else "name" if m.group(2) else "op"
            start = m.start(m.lastindex)
            self.tokens.append((kind, m.group(m.lastindex), start))
            pos = m.end()
        self.i = 0

    def _fail(self, pos: int, msg: str):
        raise SpecError("SYNTAX", f"{self.where}: {msg} at column {pos + 1} in {self.text!r}")

    def _peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("end", "", len(self.text))

    def _take(self):
        tok = self._peek()
        self.i += 1
        return tok

    def parse(self) -> Polynomial:
        if not self.tokens:
            self._fail(0, "empty polynomial")
        p = self._expr()
        kind, val, pos = self._peek()
        if kind != "end":
            self._fail(pos, f"unexpected {val!r}")
        return p

    def _expr(self) -> Polynomial:
        p = self._term()
        while self._peek()[1] in ("+", "-") and self._peek()[0] == "op":
            op = self._take()[1]
            q = self._term()
            p = p + q if op == "+" else p - q
        return p

    def _term(self) -> Polynomial:
        p = self._unary()
        while self._peek()[0] == "op" and self._peek()[1] in ("*", "/"):
            _, op, pos = self._take()
            q = self._unary()
            if op == "*":
                p = p * q
            else:
                if not q.is_constant() or q.constant_term() == 0:
                    self._fail(pos, "division only by a nonzero constant")
                p = p / q.constant_term()
        return p

    def _unary(self) -> Polynomial:
        if self._peek()[0] == "op" and self._peek()[1] in ("+", "-"):
            op = self._take()[1]
            p = self._unary()
            return -p if op == "-" else p
        return self._power()

    def _power(self) -> Polynomial:
        base = self._atom()
        if self._peek()[0] == "op" and self._peek()[1] in ("^", "**"):
            self._take()
            kind, val, pos = self._take()
            if kind != "num" or not val.isdigit():
                self._fail(pos, "exponent must be a non-negative integer")
            return base ** int(val)
        return base

    def _atom(self) -> Polynomial:
        kind, val, pos = self._take()
        if kind == "num":
            return Polynomial.constant(self.coords, Fraction(val))
        if kind == "name":
            if val not in self.coords:
                raise UnknownCoordinateError(val)
            return Polynomial.variable(self.coords, val)
        if val == "(":
            p = self._expr()
            k2, v2, p2 = self._take()
            if v2 != ")":
                self._fail(p2, "expected ')'")
            return p
        self._fail(pos, "expected a number, coordinate or '('" if kind != "end" else "unexpected end")


def parse_polynomial(text: str, coords, where: str = "polynomial") -> Polynomial:
    if not isinstance(text, (str, int, float)):
        raise SpecError("INVALID_PAYLOAD", f"{where}: expected a polynomial string")
    return _Parser(str(text), tuple(coords), where).parse()


@dataclass(frozen=True)
class SystemSpec:
    kind: str
    payload: dict[str, Any]
    options: dict[str, Any] = field(default_factory=dict)
    name: str | None = None

    @property
    def field(self) -> VectorField:
        return self.payload["field"]

    @property
    def free_state(self) -> FreeState:
        return self.payload["state"]

    @property
    def matrix(self) -> RationalMatrix:
        return self.payload["matrix"]

    def __eq__(self, other) -> bool:
        return (isinstance(other, SystemSpec) and self.kind == other.kind
                and self.payload == other.payload and self.options == other.options)

    def __hash__(self) -> int:
        return hash(self.kind)


def _rational(v, where: str) -> Fraction:
    try:
        return Fraction(str(v)) if not isinstance(v, float) else Fraction(v)
    except (ValueError, ZeroDivisionError):
        raise SpecError("INVALID_PAYLOAD", f"{where}: {v!r} is not a rational number") from None


def _real(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise SpecError("INVALID_PAYLOAD", f"{where}: {v!r} is not a number")
    try:
        return float(Fraction(v)) if isinstance(v, str) else float(v)
    except (ValueError, ZeroDivisionError):
        raise SpecError("INVALID_PAYLOAD", f"{where}: {v!r} is not a number") from None


def _symmat(obj, where: str) -> SymMat2:
    if isinstance(obj, dict):
        try:
            return SymMat2(*(_real(obj[k], where) for k in ("x", "y", "z")))
        except KeyError as exc:
            raise SpecError("INVALID_PAYLOAD", f"{where}: missing {exc.args[0]!r}") from None
    if isinstance(obj, list) and len(obj) == 3 and not any(isinstance(v, list) for v in obj):
        return SymMat2(*(_real(v, where) for v in obj))
    if (isinstance(obj, list) and len(obj) == 2
            and all(isinstance(r, list) and len(r) == 2 for r in obj)):
        M = [[_real(v, where) for v in r] for r in obj]
        if M[0][1] != M[1][0]:
            raise SpecError("INVALID_PAYLOAD", f"{where}: matrix is not symmetric")
        return SymMat2.from_matrix(M)
    raise SpecError("INVALID_PAYLOAD", f"{where}: expected a 2x2 symmetric matrix or (x, y, z)")


def _build(obj: Any, name: str | None) -> SystemSpec:
    if not isinstance(obj, dict):
        raise SpecError("INVALID_PAYLOAD", "top level must be a JSON object")
    kind = obj.get("kind")
    if kind not in KINDS:
        raise SpecError("INVALID_KIND", f"kind must be one of {KINDS}, got {kind!r}")
    options = obj.get("options", {})
    if not isinstance(options, dict) or set(options) - set(OPTION_KEYS):
        bad = sorted(set(options) - set(OPTION_KEYS)) if isinstance(options, dict) else options
        raise SpecError("INVALID_PAYLOAD", f"unknown options {bad!r}")
    payload: dict[str, Any] = {}

    if kind == "POLY_FIELD":
        coords = obj.get("coordinates")
        if (not isinstance(coords, list) or not coords
                or not all(isinstance(c, str) and re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", c)
                           for c in coords)
                or len(set(coords)) != len(coords)):
            raise SpecError("INVALID_PAYLOAD", "coordinates must be distinct identifiers")
        coords = tuple(coords)
        comps = obj.get("components")
        if isinstance(comps, dict):
            extra = [k for k in comps if k not in coords]
            if extra:
                raise UnknownCoordinateError(extra[0])
            comps = [comps.get(c, "0") for c in coords]
        if not isinstance(comps, list) or len(comps) != len(coords):
            raise SpecError("INVALID_PAYLOAD", "components must list one polynomial per coordinate")
        polys = [parse_polynomial(c, coords, f"component {n}") for n, c in zip(coords, comps)]
        payload["field"] = VectorField(coords, polys)
        obs = obj.get("observables", [])
        if not isinstance(obs, list):
            raise SpecError("INVALID_PAYLOAD", "observables must be a list")
        payload["observables"] = tuple(parse_polynomial(o, coords, "observable") for o in obs)

    elif kind == "LINEAR":
        rows = obj.get("matrix")
        if (not isinstance(rows, list) or not rows
                or not all(isinstance(r, list) and len(r) == len(rows) for r in rows)):
            raise SpecError("INVALID_PAYLOAD", "matrix must be a non-empty square list of rows")
        payload["matrix"] = RationalMatrix([[_rational(v, "matrix") for v in r] for r in rows])
        coords = obj.get("coordinates")
        if coords is not None and (not isinstance(coords, list) or len(coords) != len(rows)):
            raise SpecError("INVALID_PAYLOAD", "coordinates must name every row")
        payload["coordinates"] = tuple(coords) if coords else None

    elif kind == "FREE_MATRIX":
        jets = obj.get("jets")
        if not isinstance(jets, list) or not 2 <= len(jets) <= 4:
            raise SpecError("INVALID_PAYLOAD", "jets must list 2 to 4 matrices (X0, V0, A0, J0)")
        order = obj.get("order", len(jets))
        if order != len(jets):
            raise SpecError("INVALID_PAYLOAD", f"order {order} does not match {len(jets)} jets")
        payload["state"] = FreeState(tuple(_symmat(j, f"jets[{i}]") for i, j in enumerate(jets)))

    else:
        order = obj.get("order")
        if order not in (2, 3):
            raise SpecError("INVALID_PAYLOAD", "radial order must be 2 or 3")
        params = obj.get("params", {})
        allowed = {2: ("alpha", "l1_sq", "E1"), 3: ("a_sq", "c")}[order]
        if not isinstance(params, dict) or set(params) - set(allowed):
            raise SpecError("INVALID_PAYLOAD", f"order-{order} radial params are {allowed}")
        initial = obj.get("initial")
        if not isinstance(initial, list) or len(initial) != order:
            raise SpecError("INVALID_PAYLOAD", f"initial must hold {order} values")
        payload["order"] = order
        payload["params"] = {k: _real(v, f"params.{k}") for k, v in sorted(params.items())}
        payload["initial"] = tuple(_real(v, "initial") for v in initial)

    return SystemSpec(kind, payload, dict(options), name)


def bundled_specs() -> list[str]:
    return sorted(p.name for p in resources.files("nilflow").joinpath("specs").iterdir()
                  if p.name.endswith(".json"))


def _resolve(path: str | Path) -> Path | None:
    p = Path(path)
    if p.exists():
        return p
    cand = resources.files("nilflow").joinpath("specs", p.name)
    return Path(str(cand)) if cand.is_file() else None


def parse_spec_text(text: str, name: str | None = None) -> SystemSpec:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError("SYNTAX", f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return _build(obj, name)


def parse_spec(source: str | Path) -> SystemSpec:
    """Parse a spec from a path (bundled names are found too) or from JSON text."""
    if isinstance(source, Path) or (isinstance(source, str) and source.strip()
                                    and not source.lstrip().startswith(("{", "["))):
        path = _resolve(source)
        if path is None:
            raise SpecError("IO", f"no such file {str(source)!r}")
        return parse_spec_text(path.read_text(), path.name)
    return parse_spec_text(source)


def to_dict(spec: SystemSpec) -> dict:
    out: dict[str, Any] = {"kind": spec.kind}
    p = spec.payload
    if spec.kind == "POLY_FIELD":
        V: VectorField = p["field"]
        out["coordinates"] = list(V.coords)
        out["components"] = {c: str(f) for c, f in zip(V.coords, V.components)}
        if p["observables"]:
            out["observables"] = [str(o) for o in p["observables"]]
    elif spec.kind == "LINEAR":
        out["matrix"] = p["matrix"].to_list()
        if p["coordinates"]:
            out["coordinates"] = list(p["coordinates"])
    elif spec.kind == "FREE_MATRIX":
        s: FreeState = p["state"]
        out["order"] = s.order
        out["jets"] = [{"x": j.x, "y": j.y, "z": j.z} for j in s.jets]
    else:
        out["order"] = p["order"]
        out["params"] = dict(p["params"])
        out["initial"] = list(p["initial"])
    if spec.options:
        out["options"] = dict(spec.options)
    return out


def serialize(spec: SystemSpec) -> str:
    return json.dumps(to_dict(spec), sort_keys=True, indent=2)
