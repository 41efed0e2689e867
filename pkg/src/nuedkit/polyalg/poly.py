"""Sparse multivariate polynomials over Q(i) in state variables and time parameters.

A monomial is packed into one Python int: field ``i`` (``_BITS`` wide) holds the
exponent of variable ``i``. State variables come first, then parameter symbols.
Multiplying monomials is then integer addition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .numbers import GaussianRational

__all__ = ["Monomial", "Poly"]

_BITS = 20
_MASK = (1 << _BITS) - 1


def pack(exponents: Iterable[int]) -> int:
    key = 0
    for i, e in enumerate(exponents):
        if e < 0:
            raise ValueError("exponents must be non-negative")
        if e > _MASK:
            raise OverflowError("exponent too large")
        key |= e << (_BITS * i)
    return key


def unpack(key: int, width: int) -> tuple[int, ...]:
    return tuple((key >> (_BITS * i)) & _MASK for i in range(width))


def unit(i: int) -> int:
    return 1 << (_BITS * i)


@dataclass(frozen=True)
class Monomial:
    """Readable view of a packed monomial."""

    state_exponents: tuple[int, ...]
    param_exponents: Mapping[str, int]

    @property
    def degree(self) -> int:
        return sum(self.state_exponents)


class Poly:
    """Immutable sparse polynomial.

    ``nvars`` state variables ``x_1..x_n`` and parameter symbols ``params``
    (sorted names). Zero coefficients are never stored and the term order is
    canonical, so ``==`` is exact structural equality.
    """

    __slots__ = ("nvars", "params", "_terms", "_hash")

    def __init__(self, nvars: int, params: tuple[str, ...] = (), terms: Mapping[int, GaussianRational] | None = None):
        self.nvars = nvars
        self.params = tuple(params)
        clean = {}
        if terms:
            for k, c in terms.items():
                c = GaussianRational.coerce(c)
                if c:
                    clean[k] = c
        self._terms = dict(sorted(clean.items()))
        self._hash = None

    @classmethod
    def _raw(cls, nvars, params, terms: dict) -> "Poly":
        # terms already coerced and zero-free
        p = cls.__new__(cls)
        p.nvars = nvars
        p.params = params
        p._terms = dict(sorted(terms.items()))
        p._hash = None
        return p

    # construction ------------------------------------------------------
    @classmethod
    def zero(cls, nvars: int, params: tuple[str, ...] = ()) -> "Poly":
        return cls._raw(nvars, tuple(params), {})

    @classmethod
    def constant(cls, value, nvars: int, params: tuple[str, ...] = ()) -> "Poly":
        c = GaussianRational.coerce(value)
        return cls._raw(nvars, tuple(params), {0: c} if c else {})

    @classmethod
    def variable(cls, i: int, nvars: int, params: tuple[str, ...] = ()) -> "Poly":
        if not 0 <= i < nvars:
            raise IndexError(f"variable index {i} out of range for {nvars} variables")
        return cls._raw(nvars, tuple(params), {unit(i): GaussianRational(1)})

    @classmethod
    def param(cls, symbol: str, nvars: int, params: tuple[str, ...]) -> "Poly":
        j = tuple(params).index(symbol)
        return cls._raw(nvars, tuple(params), {unit(nvars + j): GaussianRational(1)})

    @classmethod
    def from_terms(cls, nvars: int, params: tuple[str, ...], terms: Iterable[tuple]) -> "Poly":
        """Build from ``(coefficient, state_exponents, {symbol: exponent})`` triples."""
        params = tuple(params)
        acc: dict[int, GaussianRational] = {}
        for coeff, state, pexp in terms:
            state = tuple(state)
            if len(state) != nvars:
                raise ValueError(f"monomial has {len(state)} state exponents, expected {nvars}")
            full = list(state) + [0] * len(params)
            for sym, e in dict(pexp or {}).items():
                if sym not in params:
                    raise KeyError(f"unknown parameter symbol {sym!r}")
                full[nvars + params.index(sym)] += e
            k = pack(full)
            acc[k] = acc.get(k, GaussianRational(0)) + GaussianRational.coerce(coeff)
        return cls(nvars, params, acc)

    # inspection --------------------------------------------------------
    @property
    def terms(self) -> dict[int, GaussianRational]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    def monomials(self) -> list[tuple[Monomial, GaussianRational]]:
        w = self.nvars + len(self.params)
        out = []
        for k, c in self._terms.items():
            e = unpack(k, w)
            pe = {s: v for s, v in zip(self.params, e[self.nvars:]) if v}
            out.append((Monomial(e[: self.nvars], pe), c))
        return out

    def state_degree_of(self, key: int) -> int:
        d = 0
        for i in range(self.nvars):
            d += (key >> (_BITS * i)) & _MASK
        return d

    def degrees(self) -> set[int]:
        return {self.state_degree_of(k) for k in self._terms}

    @property
    def degree(self) -> int:
        """Total state degree (``-1`` for the zero polynomial)."""
        return max(self.degrees(), default=-1)

    def param_part(self, key: int) -> int:
        return key >> (_BITS * self.nvars)

    @property
    def is_real(self) -> bool:
        return all(c.is_real for c in self._terms.values())

    # equality ----------------------------------------------------------
    def __eq__(self, other) -> bool:
        if not isinstance(other, Poly):
            return NotImplemented
        return (
            self.nvars == other.nvars
            and self.params == other.params
            and self._terms == other._terms
        )

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.nvars, self.params, tuple(self._terms.items())))
        return self._hash

    # arithmetic --------------------------------------------------------
    def _check(self, other: "Poly"):
        if self.nvars != other.nvars or self.params != other.params:
            raise ValueError(
                f"polynomial rings differ: ({self.nvars}, {self.params}) vs ({other.nvars}, {other.params})"
            )

    def _lift(self, other) -> "Poly":
        if isinstance(other, Poly):
            self._check(other)
            return other
        return Poly.constant(other, self.nvars, self.params)

    def __add__(self, other) -> "Poly":
        other = self._lift(other)
        acc = dict(self._terms)
        for k, c in other._terms.items():
            v = acc.get(k)
            v = c if v is None else v + c
            if v:
                acc[k] = v
            else:
                acc.pop(k, None)
        return Poly._raw(self.nvars, self.params, acc)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly._raw(self.nvars, self.params, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other) -> "Poly":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "Poly":
        return self._lift(other) - self

    def scale(self, c) -> "Poly":
        c = GaussianRational.coerce(c)
        if not c:
            return Poly.zero(self.nvars, self.params)
        return Poly._raw(self.nvars, self.params, {k: v * c for k, v in self._terms.items()})

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            return self.scale(other)
        return self.mul(other)

    __rmul__ = __mul__

    def __truediv__(self, c) -> "Poly":
        c = GaussianRational.coerce(c)
        return Poly._raw(self.nvars, self.params, {k: v / c for k, v in self._terms.items()})

    def mul(self, other: "Poly", max_degree: int | None = None) -> "Poly":
        """Product, optionally dropping terms of state degree above ``max_degree``."""
        self._check(other)
        a, b = self._terms, other._terms
        if len(a) > len(b):
            a, b = b, a
        acc: dict[int, GaussianRational] = {}
        if max_degree is None:
            for ka, ca in a.items():
                for kb, cb in b.items():
                    k = ka + kb
                    v = acc.get(k)
                    acc[k] = ca * cb if v is None else v + ca * cb
        else:
            deg = self.state_degree_of
            bl = sorted(((deg(k), k, c) for k, c in b.items()), key=lambda r: r[0])
            for ka, ca in a.items():
                room = max_degree - deg(ka)
                if room < 0:
                    continue
                for db, kb, cb in bl:
                    if db > room:
                        break
                    k = ka + kb
                    v = acc.get(k)
                    acc[k] = ca * cb if v is None else v + ca * cb
        return Poly._raw(self.nvars, self.params, {k: v for k, v in acc.items() if v})

    def __pow__(self, k: int) -> "Poly":
        return self.power(k)

    def power(self, k: int, max_degree: int | None = None) -> "Poly":
        if k < 0:
            raise ValueError("negative power")
        out = Poly.constant(1, self.nvars, self.params)
        base = self
        while k:
            if k & 1:
                out = out.mul(base, max_degree)
            k >>= 1
            if k:
                base = base.mul(base, max_degree)
        return out

    def truncate(self, max_degree: int) -> "Poly":
        deg = self.state_degree_of
        return Poly._raw(self.nvars, self.params, {k: c for k, c in self._terms.items() if deg(k) <= max_degree})

    def homogeneous_part(self, d: int) -> "Poly":
        deg = self.state_degree_of
        return Poly._raw(self.nvars, self.params, {k: c for k, c in self._terms.items() if deg(k) == d})

    def shift_key(self, key: int) -> "Poly":
        """Multiply by the monomial with packed key ``key`` (coefficient 1)."""
        return Poly._raw(self.nvars, self.params, {k + key: c for k, c in self._terms.items()})

    def diff(self, i: int) -> "Poly":
        """Partial derivative with respect to state variable ``i``."""
        if not 0 <= i < self.nvars:
            raise IndexError(i)
        shift = _BITS * i
        u = unit(i)
        acc = {}
        for k, c in self._terms.items():
            e = (k >> shift) & _MASK
            if e:
                acc[k - u] = c * e
        return Poly._raw(self.nvars, self.params, acc)

    def real_part(self) -> "Poly":
        return Poly(self.nvars, self.params, {k: GaussianRational(c.re) for k, c in self._terms.items()})

    def imag_part(self) -> "Poly":
        return Poly(self.nvars, self.params, {k: GaussianRational(c.im) for k, c in self._terms.items()})

    # ring changes ------------------------------------------------------
    def with_params(self, params: tuple[str, ...]) -> "Poly":
        """Re-encode over a parameter list that contains all used symbols."""
        params = tuple(params)
        if params == self.params:
            return self
        n = self.nvars
        w = n + len(self.params)
        pos = {}
        for j, s in enumerate(self.params):
            if s in params:
                pos[j] = params.index(s)
        acc = {}
        for k, c in self._terms.items():
            e = unpack(k, w)
            full = list(e[:n]) + [0] * len(params)
            for j, v in enumerate(e[n:]):
                if v:
                    if j not in pos:
                        raise ValueError(f"symbol {self.params[j]!r} missing from target ring")
                    full[n + pos[j]] = v
            acc[pack(full)] = c
        return Poly._raw(n, params, acc)

    def used_params(self) -> set[str]:
        used = set()
        for k in self._terms:
            pk = self.param_part(k)
            for j, s in enumerate(self.params):
                if (pk >> (_BITS * j)) & _MASK:
                    used.add(s)
        return used

    # display -----------------------------------------------------------
    def __repr__(self) -> str:
        return f"Poly({self})"

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        names = [f"x{i + 1}" for i in range(self.nvars)] + list(self.params)
        w = len(names)
        parts = []
        for k, c in self._terms.items():
            e = unpack(k, w)
            mon = "*".join(n if v == 1 else f"{n}^{v}" for n, v in zip(names, e) if v)
            if not mon:
                parts.append(str(c))
            elif c == 1:
                parts.append(mon)
            elif c == -1:
                parts.append("-" + mon)
            else:
                parts.append(f"{c}*{mon}")
        return " + ".join(parts).replace("+ -", "- ")
