"""Parametrised polynomial maps ``x -> F(t, x)`` and the exact operations on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations_with_replacement
from typing import Callable, Sequence

import numpy as np
from gmpy2 import mpq

from .compiled import CompiledPolys
from .numbers import GaussianRational, as_rational
from .poly import _BITS, _MASK, Poly, pack, unit, unpack

__all__ = [
    "PolyAlgError",
    "DimensionMismatch",
    "BindingConflict",
    "UnboundSymbol",
    "NoStabilization",
    "NotHomogeneousError",
    "ParamBinding",
    "ParamPolyMap",
    "PolyMatrix",
    "Nilpotency",
    "ShiftConjugate",
    "CubicBound",
    "ZERO",
    "NOT_HOMOGENEOUS",
    "variables",
    "compose",
    "jacobian",
    "is_nilpotent",
    "formal_inverse",
    "shift_conjugate",
    "realify",
    "evaluate_map",
    "cubic_bound_constant",
    "homogeneity_degree",
    "substitute_state",
]

ZERO = "zero"
NOT_HOMOGENEOUS = "not_homogeneous"


class PolyAlgError(ValueError):
    pass


class DimensionMismatch(PolyAlgError):
    pass


class BindingConflict(PolyAlgError):
    pass


class UnboundSymbol(PolyAlgError):
    pass


class NoStabilization(PolyAlgError):
    pass


class NotHomogeneousError(PolyAlgError):
    pass


def _exact(value):
    if isinstance(value, float):
        return Fraction(value)
    return Fraction(str(value)) if isinstance(value, str) else Fraction(value)


@dataclass(frozen=True)
class ParamBinding:
    """How a parameter symbol depends on time.

    ``exp_decay`` means ``s(t) = exp(-rate * t)``; ``constant`` is a fixed
    value; ``bounded_generic`` wraps an arbitrary evaluator with a declared
    supremum on ``t >= 0``.
    """

    symbol: str
    kind: str
    rate: Fraction | None = None
    value: Fraction | None = None
    evaluator: Callable[[float], float] | None = field(default=None, compare=False)
    declared_sup: float | None = None

    def __post_init__(self):
        if self.kind == "exp_decay":
            if self.rate is None:
                raise ValueError("exp_decay binding needs a rate")
            object.__setattr__(self, "rate", _exact(self.rate))
            if self.rate > 0:
                object.__setattr__(self, "declared_sup", 1.0)
            elif self.declared_sup is None:
                object.__setattr__(self, "declared_sup", math.inf)
        elif self.kind == "constant":
            if self.value is None:
                raise ValueError("constant binding needs a value")
            object.__setattr__(self, "value", _exact(self.value))
            object.__setattr__(self, "declared_sup", float(abs(self.value)))
        elif self.kind == "bounded_generic":
            if self.evaluator is None:
                raise ValueError("bounded_generic binding needs an evaluator")
            if self.declared_sup is None or not math.isfinite(self.declared_sup):
                raise ValueError("bounded_generic binding must declare a finite sup")
        else:
            raise ValueError(f"unknown binding kind {self.kind!r}")

    @classmethod
    def exp_decay(cls, symbol: str, rate=1) -> "ParamBinding":
        return cls(symbol, "exp_decay", rate=rate)

    @classmethod
    def constant(cls, symbol: str, value) -> "ParamBinding":
        return cls(symbol, "constant", value=value)

    @classmethod
    def bounded_generic(cls, symbol: str, evaluator, declared_sup: float) -> "ParamBinding":
        return cls(symbol, "bounded_generic", evaluator=evaluator, declared_sup=float(declared_sup))

    def evaluate(self, t: float) -> float:
        if self.kind == "exp_decay":
            return math.exp(-float(self.rate) * t)
        if self.kind == "constant":
            return float(self.value)
        return float(self.evaluator(t))

    def exact_value(self, t) -> Fraction | None:
        """Exact value at rational ``t`` when it is rational, else ``None``."""
        if self.kind == "constant":
            return self.value
        if self.kind == "exp_decay" and (Fraction(t) == 0 or self.rate == 0):
            return Fraction(1)
        return None

    @property
    def transcendental_for_rational_t(self) -> bool:
        # exp(-r t) is transcendental for rational r*t != 0
        return self.kind == "exp_decay" and self.rate != 0

    def compatible(self, other: "ParamBinding") -> bool:
        if self.kind != other.kind:
            return False
        if self.kind == "bounded_generic":
            return self.evaluator is other.evaluator and self.declared_sup == other.declared_sup
        return self.rate == other.rate and self.value == other.value

    def to_json(self) -> dict:
        out = {"symbol": self.symbol, "kind": self.kind}
        if self.kind == "exp_decay":
            out["rate"] = _frac_str(self.rate)
        elif self.kind == "constant":
            out["value"] = _frac_str(self.value)
        else:
            out["sup"] = self.declared_sup
        return out


def _frac_str(q) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _merge_bindings(*groups) -> tuple[ParamBinding, ...]:
    merged: dict[str, ParamBinding] = {}
    for group in groups:
        for b in group:
            prev = merged.get(b.symbol)
            if prev is None:
                merged[b.symbol] = b
            elif not prev.compatible(b):
                raise BindingConflict(f"conflicting bindings for symbol {b.symbol!r}: {prev} vs {b}")
    return tuple(merged[s] for s in sorted(merged))


def variables(n: int, params: Sequence[str] = ()) -> tuple[list[Poly], dict[str, Poly]]:
    """State variables and parameter symbols as polynomials in a common ring."""
    params = tuple(sorted(params))
    xs = [Poly.variable(i, n, params) for i in range(n)]
    ps = {s: Poly.param(s, n, params) for s in params}
    return xs, ps


class ParamPolyMap:
    """An ``n``-dimensional polynomial map with time-parameter symbols.

    Equality compares the coordinate polynomials exactly (over the union of
    parameter symbols); bindings and ``linear_coefficient`` are metadata.
    """

    __slots__ = ("coordinates", "bindings", "linear_coefficient", "__dict__")

    def __init__(self, coordinates: Sequence[Poly], bindings: Sequence[ParamBinding] = (), linear_coefficient=None):
        coords = list(coordinates)
        if not coords:
            raise DimensionMismatch("a map needs at least one coordinate")
        nvars = coords[0].nvars
        params = tuple(sorted(set().union(*(set(p.params) for p in coords))))
        coords = [p.with_params(params) if p.nvars == nvars else _dim_error(p, nvars) for p in coords]
        self.coordinates = tuple(coords)
        self.bindings = _merge_bindings(bindings)
        bound = {b.symbol for b in self.bindings}
        used = set().union(*(p.used_params() for p in coords))
        if used - bound:
            raise UnboundSymbol(f"parameter symbol(s) {sorted(used - bound)} have no binding")
        if linear_coefficient is not None:
            lam = as_rational(linear_coefficient) if not isinstance(linear_coefficient, float) else None
            if lam is None:
                raise TypeError("linear coefficient must be an exact rational")
            if len(coords) != nvars:
                raise DimensionMismatch("linear form lambda*X + H needs a square map")
            linear_coefficient = lam
        self.linear_coefficient = linear_coefficient
        if linear_coefficient is not None:
            H = self.nonlinear_part()
            low = [i for i, p in enumerate(H.coordinates) if any(d < 2 for d in p.degrees())]
            if low:
                raise PolyAlgError(
                    f"map is not of the form lambda*X + H with H of degree >= 2 (coordinates {low})"
                )

    # shape ------------------------------------------------------------
    @property
    def dimension(self) -> int:
        return len(self.coordinates)

    @property
    def nvars(self) -> int:
        return self.coordinates[0].nvars

    @property
    def params(self) -> tuple[str, ...]:
        return self.coordinates[0].params

    def binding(self, symbol: str) -> ParamBinding:
        for b in self.bindings:
            if b.symbol == symbol:
                return b
        raise UnboundSymbol(symbol)

    @property
    def max_degree(self) -> int:
        return max(p.degree for p in self.coordinates)

    @property
    def is_real(self) -> bool:
        return all(p.is_real for p in self.coordinates)

    # constructors -----------------------------------------------------
    @classmethod
    def identity(cls, n: int, params: Sequence[str] = ()) -> "ParamPolyMap":
        xs, _ = variables(n, params)
        return cls(xs, linear_coefficient=1)

    @classmethod
    def linear(cls, lam, n: int) -> "ParamPolyMap":
        xs, _ = variables(n)
        return cls([x * GaussianRational.coerce(as_rational(lam)) for x in xs], linear_coefficient=lam)

    @classmethod
    def constant_map(cls, values, nvars: int) -> "ParamPolyMap":
        return cls([Poly.constant(GaussianRational.coerce(as_rational(v) if not isinstance(v, GaussianRational) else v), nvars) for v in values])

    def with_linear_coefficient(self, lam) -> "ParamPolyMap":
        return ParamPolyMap(self.coordinates, self.bindings, lam)

    def nonlinear_part(self) -> "ParamPolyMap":
        """``H = F - lambda*X`` (requires ``linear_coefficient``)."""
        lam = self.linear_coefficient
        if lam is None:
            raise PolyAlgError("map has no declared linear coefficient")
        xs, _ = variables(self.nvars, self.params)
        c = GaussianRational(lam)
        return ParamPolyMap([p - x * c for p, x in zip(self.coordinates, xs)], self.bindings)

    # evaluation -------------------------------------------------------
    @cached_property
    def compiled(self) -> CompiledPolys:
        return CompiledPolys(self.coordinates, self.bindings)

    def __call__(self, t: float, x):
        return evaluate_map(self, t, x)

    # equality ---------------------------------------------------------
    def __eq__(self, other) -> bool:
        if not isinstance(other, ParamPolyMap):
            return NotImplemented
        if self.dimension != other.dimension or self.nvars != other.nvars:
            return False
        params = tuple(sorted(set(self.params) | set(other.params)))
        return all(a.with_params(params) == b.with_params(params) for a, b in zip(self.coordinates, other.coordinates))

    def __hash__(self):
        return hash(tuple(self.coordinates))

    def is_identity(self) -> bool:
        return self.nvars == self.dimension and self == ParamPolyMap.identity(self.nvars)

    def __repr__(self) -> str:
        body = ", ".join(str(p) for p in self.coordinates)
        return f"ParamPolyMap(({body}))"

    def to_json(self) -> dict:
        """Description-file form: monomial lists with exact coefficient strings."""
        coords = []
        for p in self.coordinates:
            coords.append(
                [
                    {
                        "coefficient": c.to_json(),
                        "state_exponents": list(m.state_exponents),
                        "param_exponents": dict(m.param_exponents),
                    }
                    for m, c in p.monomials()
                ]
            )
        out = {
            "kind": "poly_map",
            "dimension": self.nvars,
            "coordinates": coords,
            "bindings": [b.to_json() for b in self.bindings if b.kind != "bounded_generic"],
        }
        if self.linear_coefficient is not None:
            out["lambda"] = _frac_str(Fraction(int(self.linear_coefficient.numerator), int(self.linear_coefficient.denominator)))
        return out


def _dim_error(p, nvars):
    raise DimensionMismatch(f"coordinate has {p.nvars} variables, expected {nvars}")


@dataclass(frozen=True)
class PolyMatrix:
    """Square grid of polynomials sharing one ring."""

    entries: tuple[tuple[Poly, ...], ...]
    bindings: tuple[ParamBinding, ...] = ()

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.entries), len(self.entries[0]) if self.entries else 0

    def __getitem__(self, ij) -> Poly:
        i, j = ij
        return self.entries[i][j]

    @property
    def is_zero(self) -> bool:
        return all(p.is_zero for row in self.entries for p in row)

    def __matmul__(self, other: "PolyMatrix") -> "PolyMatrix":
        n, m = self.shape
        m2, k = other.shape
        if m != m2:
            raise DimensionMismatch(f"cannot multiply {self.shape} by {other.shape}")
        ref = self.entries[0][0]
        rows = []
        for i in range(n):
            row = []
            for j in range(k):
                acc = Poly.zero(ref.nvars, ref.params)
                for l in range(m):
                    a, b = self.entries[i][l], other.entries[l][j]
                    if a and b:
                        acc = acc + a * b
                row.append(acc)
            rows.append(tuple(row))
        return PolyMatrix(tuple(rows), _merge_bindings(self.bindings, other.bindings))

    def __add__(self, other: "PolyMatrix") -> "PolyMatrix":
        return PolyMatrix(
            tuple(tuple(a + b for a, b in zip(r1, r2)) for r1, r2 in zip(self.entries, other.entries)),
            _merge_bindings(self.bindings, other.bindings),
        )

    def scale(self, c) -> "PolyMatrix":
        return PolyMatrix(tuple(tuple(p.scale(c) for p in r) for r in self.entries), self.bindings)

    @cached_property
    def compiled(self) -> CompiledPolys:
        return CompiledPolys([p for row in self.entries for p in row], self.bindings)

    def evaluate(self, t: float, x) -> np.ndarray:
        n, m = self.shape
        return self.compiled(t, np.asarray(x, dtype=float)).reshape(n, m)

    def evaluate_many(self, ts, xs) -> np.ndarray:
        """Matrices at paired times and states; shape ``(N, n, m)``."""
        n, m = self.shape
        return self.compiled.at_times(ts, np.asarray(xs, dtype=float)).reshape(-1, n, m)

    def __str__(self) -> str:
        return "[" + "; ".join("[" + ", ".join(str(p) for p in r) + "]" for r in self.entries) + "]"


@dataclass(frozen=True)
class Nilpotency:
    nilpotent: bool
    index: int | None


@dataclass(frozen=True)
class ShiftConjugate:
    """``G(t, z) = F(t, z + x) - F(t, x)`` together with its candidate constant solution."""

    map: ParamPolyMap
    base_point: tuple
    second_point: tuple
    z0: tuple


@dataclass(frozen=True)
class CubicBound:
    C_coeff: float
    C_empirical: float
    C_coeff_squared: Fraction
    a_symbol: str | None
    a_power: int


# ---------------------------------------------------------------------------
# composition


def compose(outer: ParamPolyMap, inner: ParamPolyMap, max_degree: int | None = None) -> ParamPolyMap:
    """Exact composition ``outer(t, inner(t, x))``.

    ``max_degree`` drops intermediate and final terms of higher state degree.
    """
    if outer.nvars != inner.dimension:
        raise DimensionMismatch(f"outer map takes {outer.nvars} inputs but inner map has {inner.dimension} outputs")
    bindings = _merge_bindings(outer.bindings, inner.bindings)
    params = tuple(sorted(set(outer.params) | set(inner.params)))
    n_in = inner.nvars
    m = outer.nvars
    ins = [p.with_params(params) for p in inner.coordinates]
    powers: dict[tuple[int, int], Poly] = {}

    def power(j, e):
        key = (j, e)
        p = powers.get(key)
        if p is None:
            if e == 1:
                p = ins[j] if max_degree is None else ins[j].truncate(max_degree)
            else:
                half = power(j, e // 2)
                p = half.mul(half, max_degree)
                if e % 2:
                    p = p.mul(power(j, 1), max_degree)
            powers[key] = p
        return p

    products: dict[tuple[int, ...], Poly] = {(0,) * m: Poly.constant(1, n_in, params)}

    def product(exps: tuple[int, ...]) -> Poly:
        p = products.get(exps)
        if p is None:
            j = next(i for i, e in enumerate(exps) if e)
            rest = exps[:j] + (0,) + exps[j + 1:]
            p = power(j, exps[j]).mul(product(rest), max_degree)
            products[exps] = p
        return p

    out = []
    for poly in outer.coordinates:
        op = poly.with_params(params)
        acc: dict[int, GaussianRational] = {}
        w = m + len(params)
        for key, c in op.items():
            e = unpack(key, w)
            pkey = (key >> (_BITS * m)) << (_BITS * n_in)
            for k2, c2 in product(e[:m]).items():
                k = k2 + pkey
                v = acc.get(k)
                acc[k] = c * c2 if v is None else v + c * c2
        out.append(Poly(n_in, params, acc))
    return ParamPolyMap(out, bindings)


# ---------------------------------------------------------------------------
# differentiation and nilpotency


def jacobian(F: ParamPolyMap) -> PolyMatrix:
    """Entry ``(i, j)`` is the exact partial of coordinate ``i`` in ``x_j`` (never in ``t``)."""
    return PolyMatrix(tuple(tuple(p.diff(j) for j in range(F.nvars)) for p in F.coordinates), F.bindings)


def is_nilpotent(m: PolyMatrix, n: int | None = None) -> Nilpotency:
    """Exact test: some power ``m^k``, ``k <= n``, is the zero matrix."""
    rows, cols = m.shape
    if rows != cols:
        raise DimensionMismatch("nilpotency needs a square matrix")
    n = rows if n is None else n
    power = m
    for k in range(1, n + 1):
        if power.is_zero:
            return Nilpotency(True, k)
        if k < n:
            power = power @ m
    return Nilpotency(False, None)


# ---------------------------------------------------------------------------
# inversion


def formal_inverse(F: ParamPolyMap, degree_cap: int | None = None) -> ParamPolyMap:
    """Polynomial inverse of ``F = lambda*X + H`` by truncated fixed-point iteration.

    ``G <- (Y - H(G)) / lambda`` from ``G = Y / lambda``, truncated above
    ``degree_cap`` (default ``deg(H)**(n-1)``). The result is checked by exact
    composition on both sides before it is returned.
    """
    lam = F.linear_coefficient
    if lam is None or lam == 0:
        raise PolyAlgError("formal_inverse needs a map lambda*X + H with lambda != 0")
    n = F.dimension
    H = F.nonlinear_part()
    d = max(H.max_degree, 1)
    cap = degree_cap if degree_cap is not None else max(d ** (n - 1), 1)
    lam_g = GaussianRational(lam)
    Y, _ = variables(n, F.params)
    G = [y / lam_g for y in Y]
    for _ in range(cap + 2):
        HG = compose(H, ParamPolyMap(G, F.bindings), max_degree=cap).coordinates
        G_next = [((y - h) / lam_g).truncate(cap) for y, h in zip(Y, HG)]
        if G_next == G:
            break
        G = G_next
    else:
        raise NoStabilization(f"iteration did not reach a fixed point within degree cap {cap}")
    inv = ParamPolyMap(G, F.bindings, linear_coefficient=1 / lam)
    if not compose(F, inv).is_identity():
        raise NoStabilization(
            f"truncated fixed point is not a right inverse (degree cap {cap}); "
            "the map is not a polynomial automorphism within the cap"
        )
    if not compose(inv, F).is_identity():
        raise NoStabilization(f"truncated fixed point is not a left inverse (degree cap {cap})")
    return inv


# ---------------------------------------------------------------------------
# shifting and realification


def shift_conjugate(F: ParamPolyMap, x, y) -> ShiftConjugate:
    """Return ``G(t, z) = F(t, z + x) - F(t, x)``; ``G(t, 0) = 0`` exactly."""
    n = F.nvars
    x = [as_rational(v) for v in x]
    y = [as_rational(v) for v in y]
    if len(x) != n or len(y) != n:
        raise DimensionMismatch("points must match the map's input dimension")
    zs, _ = variables(n)
    shifted = compose(F, ParamPolyMap([z + GaussianRational(v) for z, v in zip(zs, x)]))
    base = compose(F, ParamPolyMap.constant_map(x, n))
    G = ParamPolyMap([a - b for a, b in zip(shifted.coordinates, base.coordinates)], F.bindings)
    for p in G.coordinates:
        assert all(d > 0 for d in p.degrees())
    return ShiftConjugate(G, tuple(x), tuple(y), tuple(b - a for a, b in zip(x, y)))


def realify(F: ParamPolyMap) -> ParamPolyMap:
    """Real ``2n``-dimensional form: ``x_k = u_k + i v_k``, output ``(Re F_1, Im F_1, ...)``.

    Variables of the result are interleaved the same way: ``(u_1, v_1, ..., u_n, v_n)``.
    """
    n = F.nvars
    params = F.params
    N = 2 * n
    I = GaussianRational(0, 1)
    zs = [Poly.variable(2 * k, N, params) + Poly.variable(2 * k + 1, N, params).scale(I) for k in range(n)]
    pw: dict[tuple[int, int], Poly] = {}

    def zpow(k, e):
        if (k, e) not in pw:
            pw[(k, e)] = zs[k].power(e)
        return pw[(k, e)]

    w = n + len(params)
    out = []
    for p in F.coordinates:
        acc = Poly.zero(N, params)
        for key, c in p.items():
            e = unpack(key, w)
            term = Poly.constant(c, N, params)
            for k in range(n):
                if e[k]:
                    term = term * zpow(k, e[k])
            pkey = (key >> (_BITS * n)) << (_BITS * N)
            acc = acc + term.shift_key(pkey)
        out.extend([acc.real_part(), acc.imag_part()])
    lam = F.linear_coefficient
    return ParamPolyMap(out, F.bindings, lam if lam is not None else None)


# ---------------------------------------------------------------------------
# evaluation


def evaluate_map(F: ParamPolyMap, t: float, x) -> np.ndarray:
    """Floating-point value of ``F(t, x)``; ``x`` may be real or complex, one point or a batch."""
    x = np.asarray(x)
    if x.shape[-1] != F.nvars:
        raise DimensionMismatch(f"expected {F.nvars} coordinates, got {x.shape[-1]}")
    out = F.compiled(float(t), x)
    if np.iscomplexobj(out) and not np.iscomplexobj(x) and F.is_real:
        out = out.real
    return out


def substitute_state(F: ParamPolyMap, x) -> tuple[Poly, ...]:
    """Exact ``F(t, x)`` for rational ``x``: polynomials in the parameter symbols only."""
    x = [GaussianRational.coerce(v if isinstance(v, GaussianRational) else as_rational(v)) for v in x]
    if len(x) != F.nvars:
        raise DimensionMismatch("point dimension mismatch")
    n = F.nvars
    params = F.params
    w = n + len(params)
    out = []
    for p in F.coordinates:
        acc: dict[int, GaussianRational] = {}
        for key, c in p.items():
            e = unpack(key, w)
            v = c
            for xi, ei in zip(x, e[:n]):
                if ei:
                    v = v * xi ** ei
            pk = key >> (_BITS * n)
            acc[pk] = acc.get(pk, GaussianRational(0)) + v
        out.append(Poly(0, params, acc))
    return tuple(out)


# ---------------------------------------------------------------------------
# homogeneity and the cubic bound


def homogeneity_degree(p: Poly):
    """Common state degree of all terms, ``ZERO`` for the zero polynomial, else ``NOT_HOMOGENEOUS``."""
    degs = p.degrees()
    if not degs:
        return ZERO
    if len(degs) == 1:
        return next(iter(degs))
    return NOT_HOMOGENEOUS


def _sextic_multiplicity(nu: tuple[int, ...]) -> int:
    # coefficient of x^nu in (x_1^2 + ... + x_n^2)^3, nu all even
    halves = [e // 2 for e in nu]
    out = math.factorial(3)
    for h in halves:
        out //= math.factorial(h)
    return out


def _dominate(mu: tuple[int, ...]) -> list[tuple[Fraction, tuple[int, ...]]]:
    """Bound ``|x^mu|`` (degree 6) by a weighted sum of even sextic monomials."""
    if all(e % 2 == 0 for e in mu):
        return [(Fraction(1), mu)]
    n = len(mu)
    support = [(i, e) for i, e in enumerate(mu) if e]
    pattern = sorted((e for _, e in support), reverse=True)

    def mono(**kw):
        v = [0] * n
        for i, e in kw.items():
            v[int(i[1:])] += e
        return tuple(v)

    if pattern == [5, 1]:
        (i, _), (j, _) = sorted(support, key=lambda r: -r[1])
        return [(Fraction(5, 6), mono(**{f"i{i}": 6})), (Fraction(1, 6), mono(**{f"i{j}": 6}))]
    if pattern == [3, 3]:
        (i, _), (j, _) = support
        return [(Fraction(1, 2), mono(**{f"i{i}": 6})), (Fraction(1, 2), mono(**{f"i{j}": 6}))]
    if pattern == [4, 1, 1]:
        i = next(k for k, e in support if e == 4)
        j, k = [k for k, e in support if e == 1]
        return [
            (Fraction(1, 2), mono(**{f"i{i}": 4, f"i{j}": 2})),
            (Fraction(1, 2), mono(**{f"i{i}": 4, f"i{k}": 2})),
        ]
    if pattern == [3, 2, 1]:
        i = next(k for k, e in support if e == 3)
        j = next(k for k, e in support if e == 2)
        k = next(k for k, e in support if e == 1)
        return [(Fraction(1, 2), mono(**{f"i{i}": 6})), (Fraction(1, 2), mono(**{f"i{j}": 4, f"i{k}": 2}))]
    # |x^a x^b| <= (x^{2a} + x^{2b}) / 2 for a balanced split mu = a + b, |a| = |b| = 3
    a = [e // 2 for e in mu]
    b = [e // 2 for e in mu]
    toggle = True
    for i, e in enumerate(mu):
        if e % 2:
            (a if toggle else b)[i] += 1
            toggle = not toggle
    return [(Fraction(1, 2), tuple(2 * v for v in a)), (Fraction(1, 2), tuple(2 * v for v in b))]


def cubic_bound_constant(H: ParamPolyMap, n_samples: int = 10_000, seed: int = 0) -> CubicBound:
    """Constant ``C`` with ``||H(t, x)|| <= C a(t) ||x||^3``.

    ``C_coeff`` comes from dominating every mixed sextic monomial of
    ``sum_l H_l^2`` by even monomials of ``(x_1^2 + ... + x_n^2)^3``;
    ``C_empirical`` is the sampled maximum of ``||H(1, x)|| / a(1)`` on the unit sphere.
    """
    n = H.nvars
    pkeys = set()
    for p in H.coordinates:
        deg = homogeneity_degree(p)
        if deg not in (3, ZERO):
            raise NotHomogeneousError("every coordinate must be zero or homogeneous of degree 3")
        if not p.is_real:
            raise PolyAlgError("cubic bound needs real coefficients; realify the map first")
        pkeys |= {p.param_part(k) for k in p.terms}
    if len(pkeys) > 1:
        raise PolyAlgError("terms carry different parameter factors; a single shared a(t) is required")
    pkey = pkeys.pop() if pkeys else 0
    params = H.params
    a_symbol, a_power = None, 0
    pe = unpack(pkey, len(params))
    nz = [(s, e) for s, e in zip(params, pe) if e]
    if len(nz) > 1:
        raise PolyAlgError("a(t) must be a power of a single parameter symbol")
    if nz:
        a_symbol, a_power = nz[0]

    W: dict[tuple[int, ...], Fraction] = {}
    for p in H.coordinates:
        cub = [(unpack(k, n), Fraction(int(c.re.numerator), int(c.re.denominator))) for k, c in p.items()]
        sq: dict[tuple[int, ...], Fraction] = {}
        for (ma, ca), (mb, cb) in ((u, v) for u in cub for v in cub):
            mu = tuple(x + y for x, y in zip(ma, mb))
            sq[mu] = sq.get(mu, Fraction(0)) + ca * cb
        for mu, c in sq.items():
            if c == 0:
                continue
            if all(e % 2 == 0 for e in mu):
                if c > 0:
                    W[mu] = W.get(mu, Fraction(0)) + c
                continue
            for w, nu in _dominate(mu):
                W[nu] = W.get(nu, Fraction(0)) + abs(c) * w
    c2 = max((v / _sextic_multiplicity(nu) for nu, v in W.items()), default=Fraction(0))
    C_coeff = math.sqrt(c2)

    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((n_samples, n))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    a1 = H.binding(a_symbol).evaluate(1.0) ** a_power if a_symbol else 1.0
    vals = np.linalg.norm(evaluate_map(H, 1.0, pts), axis=1) / a1
    if n == 1:
        vals = np.append(vals, np.abs(evaluate_map(H, 1.0, np.array([[1.0], [-1.0]]))).ravel() / a1)
    return CubicBound(C_coeff, float(np.max(vals)), c2, a_symbol, a_power)


def bound_weight(H: ParamPolyMap, bound: CubicBound, t: float) -> float:
    """``a(t)`` for a map analysed by :func:`cubic_bound_constant`."""
    if bound.a_symbol is None:
        return 1.0
    return H.binding(bound.a_symbol).evaluate(t) ** bound.a_power
