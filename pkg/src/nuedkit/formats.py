"""System description files, canonical JSON and CSV artifacts.

Description files are UTF-8 JSON. Polynomial maps keep exact coefficients:
every coefficient is an integer or a ``"p/q"`` string (``["p/q", "r/s"]``
for ``re + i*im``); decimal literals are refused with the exact fraction to
write instead. Reports are written as canonical JSON (sorted keys, two-space
indent, shortest round-trip floats, trailing LF) and time series as CSV with
LF line endings, so identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import catalog
from .dichotomy import NormSampleGrid
from .odeint import Trajectory, VectorField
from .polyalg import GaussianRational, ParamBinding, ParamPolyMap, Poly, PolyAlgError, parse_rational

__all__ = [
    "SystemFileError",
    "SystemDescription",
    "load_system_file",
    "parse_system",
    "bundled_system",
    "builtin_system",
    "POLY_BUILTINS",
    "dumps_json",
    "to_jsonable",
    "trajectory_csv",
    "norm_grid_csv",
    "read_trajectory_csv",
    "read_norm_grid_csv",
]

POLY_BUILTINS = ("sec42", "example_3_3", "noninjective_demo")


class SystemFileError(ValueError):
    """A description that cannot be loaded; the message starts with its location."""

    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location
        self.message = message


class _Decimal(str):
    """A JSON number literal with a fraction part or exponent, kept verbatim."""


@dataclass(frozen=True)
class SystemDescription:
    """A validated system: an exact polynomial map or a linear system ``x' = A(t) x``.

    ``kind`` is ``poly_map`` (``poly_map`` set) or ``linear`` (either a
    builtin ``linear_name`` with ``linear_params`` or a constant exact
    ``matrix``).
    """

    kind: str
    dimension: int
    poly_map: ParamPolyMap | None = None
    linear_name: str | None = None
    linear_params: dict = field(default_factory=dict)
    matrix: tuple[tuple[Fraction, ...], ...] | None = None
    name: str = ""
    source: str = "<memory>"

    def vector_field(self) -> VectorField:
        if self.kind == "poly_map":
            return VectorField.from_poly_map(self.poly_map, self.name or "poly_map")
        if self.matrix is not None:
            A = np.array([[float(v) for v in row] for row in self.matrix])
            return VectorField.linear(lambda t: A, self.dimension, self.name or "constant_matrix",
                                      diagonal=bool(np.all(A == np.diag(np.diag(A)))))
        return catalog.linear_builtin(self.linear_name, **self.linear_params)

    def to_json(self) -> dict:
        """Description-file form; :func:`parse_system` reads it back."""
        if self.kind == "poly_map":
            out = self.poly_map.to_json()
        elif self.matrix is not None:
            out = {"kind": "linear", "dimension": self.dimension,
                   "matrix": [[_frac(v) for v in row] for row in self.matrix]}
        else:
            out = {"kind": "linear", "dimension": self.dimension, "builtin": self.linear_name,
                   "params": dict(self.linear_params)}
        if self.name:
            out["name"] = self.name
        return out

    @property
    def input_hash(self) -> str:
        """SHA-256 of the canonical description, independent of file formatting."""
        return hashlib.sha256(dumps_json(self.to_json()).encode("utf-8")).hexdigest()


def _frac(q) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------------------
# loading


def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ValueError(f"duplicate key {k!r}")
        out[k] = v
    return out


def load_system_file(path) -> SystemDescription:
    """Read and validate a description file.

    Raises :class:`SystemFileError` for malformed JSON (with line and column),
    dimension mismatches, unbound parameter symbols and non-rational
    coefficients (with the JSON path of the offending entry). Missing files
    raise ``FileNotFoundError``.
    """
    path = Path(path)
    text = path.read_bytes().decode("utf-8")
    return parse_system_text(text, str(path))


def parse_system_text(text: str, source: str = "<memory>") -> SystemDescription:
    try:
        obj = json.loads(text, parse_float=_Decimal, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise SystemFileError(f"{source}:{exc.lineno}:{exc.colno}", exc.msg) from None
    except ValueError as exc:
        raise SystemFileError(source, str(exc)) from None
    return parse_system(obj, source)


def bundled_system(name: str) -> SystemDescription:
    """A description shipped with the package, e.g. ``"sec42"``."""
    ref = resources.files("nuedkit") / "data" / f"{name}.json"
    if not ref.is_file():
        raise FileNotFoundError(f"no bundled system {name!r}")
    return parse_system_text(ref.read_text(encoding="utf-8"), f"<bundled {name}.json>")


def builtin_system(name: str, **params) -> SystemDescription:
    """Named systems: the polynomial maps in :data:`POLY_BUILTINS` or a linear builtin."""
    if name == "sec42":
        lam = params.get("lam", -1)
        if str(lam) in ("-1", "-1/1"):
            return bundled_system("sec42")
        F = catalog.sec42_map(parse_rational(str(lam)))
        return SystemDescription("poly_map", 3, poly_map=F, name=f"sec42(lam={lam})", source="<builtin>")
    if name == "example_3_3":
        return SystemDescription("poly_map", 3, poly_map=catalog.example_3_3_map(), name=name, source="<builtin>")
    if name == "noninjective_demo":
        return SystemDescription("poly_map", 1, poly_map=catalog.noninjective_demo_map(), name=name,
                                 source="<builtin>")
    if name in catalog.LINEAR_BUILTINS:
        vf = catalog.linear_builtin(name, **params)
        return SystemDescription("linear", vf.dimension, linear_name=name, linear_params=_plain(params),
                                 name=vf.name, source="<builtin>")
    raise ValueError(f"unknown system {name!r}; choose from {sorted(POLY_BUILTINS + catalog.LINEAR_BUILTINS)}")


def _plain(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, (list, tuple)):
            out[k] = [float(x) for x in v]
        elif isinstance(v, str):
            out[k] = float(Fraction(v))
        else:
            out[k] = int(v) if k == "n" else float(v)
    return out


def _require(obj, key, where, kind=None):
    if not isinstance(obj, dict):
        raise SystemFileError(where, "expected an object")
    if key not in obj:
        raise SystemFileError(where, f"missing key {key!r}")
    v = obj[key]
    if kind is not None and not isinstance(v, kind):
        raise SystemFileError(f"{where}.{key}", f"expected {kind.__name__ if isinstance(kind, type) else 'a different type'}")
    return v


def _rational(value, where):
    if isinstance(value, bool):
        raise SystemFileError(where, "expected a rational number, got a boolean")
    if isinstance(value, _Decimal):
        raise SystemFileError(where, f"non-rational coefficient {str(value)!r}: write it as the exact fraction "
                                     f"\"{_suggest(value)}\"")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            q = parse_rational(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise SystemFileError(where, str(exc)) from None
        return Fraction(int(q.numerator), int(q.denominator))
    raise SystemFileError(where, f"expected an integer or a 'p/q' string, got {type(value).__name__}")


def _suggest(text: str) -> str:
    return _frac(Fraction(str(text)))


def _coefficient(value, where) -> GaussianRational:
    if isinstance(value, list):
        if len(value) != 2:
            raise SystemFileError(where, "a complex coefficient is [re, im]")
        return GaussianRational(_rational(value[0], f"{where}[0]"), _rational(value[1], f"{where}[1]"))
    return GaussianRational(_rational(value, where))


def _exponent(value, where) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise SystemFileError(where, f"exponents must be non-negative integers, got {value!r}")
    return value


def _dimension(obj, where) -> int:
    n = _require(obj, "dimension", where)
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise SystemFileError(f"{where}.dimension", f"expected a positive integer, got {n!r}")
    return n


def _bindings(raw, where) -> list[ParamBinding]:
    if not isinstance(raw, list):
        raise SystemFileError(where, "expected a list of bindings")
    out, seen = [], set()
    for i, b in enumerate(raw):
        w = f"{where}[{i}]"
        sym = _require(b, "symbol", w, str)
        kind = _require(b, "kind", w, str)
        if sym in seen:
            raise SystemFileError(f"{w}.symbol", f"symbol {sym!r} bound twice")
        seen.add(sym)
        if kind == "exp_decay":
            out.append(ParamBinding.exp_decay(sym, _rational(_require(b, "rate", w), f"{w}.rate")))
        elif kind == "constant":
            out.append(ParamBinding.constant(sym, _rational(_require(b, "value", w), f"{w}.value")))
        else:
            raise SystemFileError(f"{w}.kind", f"unknown binding kind {kind!r}; use 'exp_decay' or 'constant'")
    return out


def _poly_map(obj, source) -> SystemDescription:
    n = _dimension(obj, source)
    coords_raw = _require(obj, "coordinates", source, list)
    if len(coords_raw) != n:
        raise SystemFileError(f"{source}.coordinates", f"dimension mismatch: {len(coords_raw)} coordinates for "
                                                      f"dimension {n}")
    bindings = _bindings(obj.get("bindings", []), f"{source}.bindings")
    bound = {b.symbol for b in bindings}
    params = tuple(sorted(bound))
    coords = []
    for i, terms in enumerate(coords_raw):
        wi = f"{source}.coordinates[{i}]"
        if not isinstance(terms, list):
            raise SystemFileError(wi, "expected a list of terms")
        triples = []
        for j, term in enumerate(terms):
            w = f"{wi}[{j}]"
            c = _coefficient(_require(term, "coefficient", w), f"{w}.coefficient")
            state = _require(term, "state_exponents", w, list)
            if len(state) != n:
                raise SystemFileError(f"{w}.state_exponents", f"dimension mismatch: {len(state)} exponents for "
                                                               f"dimension {n}")
            state = [_exponent(e, f"{w}.state_exponents[{k}]") for k, e in enumerate(state)]
            pexp = term.get("param_exponents", {})
            if not isinstance(pexp, dict):
                raise SystemFileError(f"{w}.param_exponents", "expected an object symbol -> exponent")
            for sym, e in pexp.items():
                _exponent(e, f"{w}.param_exponents.{sym}")
                if sym not in bound:
                    raise SystemFileError(f"{w}.param_exponents", f"unbound symbol {sym!r}: add a binding for it")
            triples.append((c, state, pexp))
        coords.append(Poly.from_terms(n, params, triples))
    lam = obj.get("lambda")
    lam = None if lam is None else _rational(lam, f"{source}.lambda")
    try:
        F = ParamPolyMap(coords, bindings, linear_coefficient=lam)
    except PolyAlgError as exc:
        raise SystemFileError(source, str(exc)) from None
    return SystemDescription("poly_map", n, poly_map=F, name=str(obj.get("name", "")), source=source)


def _linear(obj, source) -> SystemDescription:
    n = _dimension(obj, source)
    name = str(obj.get("name", ""))
    if "matrix" in obj:
        rows = _require(obj, "matrix", source, list)
        if len(rows) != n or any(not isinstance(r, list) or len(r) != n for r in rows):
            raise SystemFileError(f"{source}.matrix", f"dimension mismatch: expected a {n}x{n} matrix")
        M = tuple(tuple(_rational(v, f"{source}.matrix[{i}][{j}]") for j, v in enumerate(r))
                  for i, r in enumerate(rows))
        return SystemDescription("linear", n, matrix=M, name=name, source=source)
    builtin = _require(obj, "builtin", source, str)
    raw = obj.get("params", {})
    if not isinstance(raw, dict):
        raise SystemFileError(f"{source}.params", "expected an object")
    params = {k: _real(v, f"{source}.params.{k}") for k, v in raw.items()}
    try:
        vf = catalog.linear_builtin(builtin, **params)
    except (TypeError, ValueError) as exc:
        raise SystemFileError(f"{source}.builtin", str(exc)) from None
    if vf.dimension != n:
        raise SystemFileError(f"{source}.dimension", f"dimension mismatch: {builtin} has dimension {vf.dimension}")
    return SystemDescription("linear", n, linear_name=builtin, linear_params=_plain(params), name=name or vf.name,
                             source=source)


def _real(v, where):
    if isinstance(v, list):
        return [_real(x, f"{where}[{i}]") for i, x in enumerate(v)]
    if isinstance(v, _Decimal):
        return float(v)
    if isinstance(v, bool):
        raise SystemFileError(where, "expected a number")
    if isinstance(v, int):
        return v
    if isinstance(v, str):
        return float(_rational(v, where))
    raise SystemFileError(where, "expected a number")


def parse_system(obj, source: str = "<memory>") -> SystemDescription:
    """Validate a decoded description object."""
    try:
        kind = _require(obj, "kind", "$", str)
        if kind == "poly_map":
            desc = _poly_map(obj, "$")
        elif kind == "linear":
            desc = _linear(obj, "$")
        else:
            raise SystemFileError("$.kind", f"unknown kind {kind!r}; use 'poly_map' or 'linear'")
    except SystemFileError as exc:
        raise SystemFileError(f"{source} at {exc.location}", exc.message) from None
    return replace(desc, source=source)


# ---------------------------------------------------------------------------
# canonical output


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become the strings ``"inf"``, ``"-inf"``, ``"nan"``."""
    if hasattr(obj, "to_json"):
        return to_jsonable(obj.to_json())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(obj, Fraction):
        return _frac(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps_json(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) for v in r])
    return buf.getvalue()


def trajectory_csv(traj: Trajectory) -> str:
    """Columns ``t, x1, ..., xn``."""
    n = traj.states.shape[1]
    return _csv(["t", *(f"x{i + 1}" for i in range(n))],
                (np.concatenate([[t], x]) for t, x in zip(traj.times, traj.states)))


def norm_grid_csv(grid: NormSampleGrid) -> str:
    """Columns ``t, s, norm``."""
    return _csv(["t", "s", "norm"], zip(grid.t, grid.s, grid.norm))


def _read_csv(path, expect_prefix):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SystemFileError(str(path), "empty CSV file")
    header = rows[0]
    if header[: len(expect_prefix)] != expect_prefix:
        raise SystemFileError(f"{path}:1", f"expected header starting with {','.join(expect_prefix)}")
    data = []
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise SystemFileError(f"{path}:{i}", f"expected {len(header)} fields, got {len(r)}")
        try:
            data.append([float(v) for v in r])
        except ValueError as exc:
            raise SystemFileError(f"{path}:{i}", str(exc)) from None
    return header, np.array(data, dtype=float).reshape(-1, len(header))


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """``(times, states)`` from a trajectory CSV."""
    _, arr = _read_csv(path, ["t"])
    return arr[:, 0], arr[:, 1:]


def read_norm_grid_csv(path, system_id: str = "", split: float | None = None) -> NormSampleGrid:
    _, arr = _read_csv(path, ["t", "s", "norm"])
    try:
        return NormSampleGrid(arr[:, 0], arr[:, 1], arr[:, 2], system_id or Path(path).stem, split)
    except ValueError as exc:
        raise SystemFileError(str(path), str(exc)) from None
