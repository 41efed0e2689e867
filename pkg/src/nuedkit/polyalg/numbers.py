"""Exact Gaussian rationals, the coefficient field of every polynomial map."""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

from gmpy2 import mpq

__all__ = ["GaussianRational", "as_rational", "parse_rational"]


def as_rational(value) -> mpq:
    """Coerce an exact rational-like value to ``mpq``.

    Floats are rejected on purpose: coefficients must stay exact.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not coefficients")
    if isinstance(value, (int, Rational)) or type(value) is type(mpq(0)):
        return mpq(value)
    if isinstance(value, str):
        return parse_rational(value)
    raise TypeError(f"expected an exact rational, got {type(value).__name__}: {value!r}")


def parse_rational(text: str) -> mpq:
    """Parse ``"p"`` or ``"p/q"``. Decimal literals such as ``"0.5"`` are refused."""
    s = text.strip()
    if not s:
        raise ValueError("empty rational literal")
    if any(c in s for c in ".eE") and not s.lstrip("+-").isdigit():
        raise ValueError(f"non-rational coefficient {text!r}: write it as the exact fraction {_suggest(s)!r}")
    num, _, den = s.partition("/")
    try:
        p = int(num)
        q = int(den) if den else 1
    except ValueError:
        raise ValueError(f"malformed rational literal {text!r}; expected 'p' or 'p/q'") from None
    if q == 0:
        raise ZeroDivisionError(f"zero denominator in {text!r}")
    return mpq(p, q)


def _suggest(s: str) -> str:
    try:
        q = Fraction(s)
    except ValueError:
        return "p/q"
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


class GaussianRational:
    """An element ``re + i*im`` of Q(i), kept in lowest terms by ``mpq``."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = re if type(re) is _MPQ else as_rational(re)
        self.im = im if type(im) is _MPQ else as_rational(im)

    @classmethod
    def coerce(cls, value) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, tuple) and len(value) == 2:
            return cls(value[0], value[1])
        return cls(value, 0)

    @property
    def is_real(self) -> bool:
        return self.im == 0

    def __bool__(self) -> bool:
        return bool(self.re) or bool(self.im)

    def __eq__(self, other) -> bool:
        if isinstance(other, GaussianRational):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Rational)) or type(other) is _MPQ:
            return self.im == 0 and self.re == other
        return NotImplemented

    def __hash__(self) -> int:
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __neg__(self) -> "GaussianRational":
        return GaussianRational(-self.re, -self.im)

    def __add__(self, other) -> "GaussianRational":
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other) -> "GaussianRational":
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other) -> "GaussianRational":
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other) -> "GaussianRational":
        o = _coerce(other)
        if o is None:
            return NotImplemented
        a, b, c, d = self.re, self.im, o.re, o.im
        if not b and not d:
            return GaussianRational(a * c, _ZERO)
        return GaussianRational(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "GaussianRational":
        o = _coerce(other)
        if o is None:
            return NotImplemented
        c, d = o.re, o.im
        if not d:
            return GaussianRational(self.re / c, self.im / c)
        den = c * c + d * d
        a, b = self.re, self.im
        return GaussianRational((a * c + b * d) / den, (b * c - a * d) / den)

    def __rtruediv__(self, other) -> "GaussianRational":
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __pow__(self, k: int) -> "GaussianRational":
        if k < 0:
            return GaussianRational(1) / (self ** -k)
        out = GaussianRational(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __float__(self) -> float:
        if self.im:
            raise TypeError(f"{self} is not real")
        return float(self.re)

    def to_json(self):
        """``"p/q"`` for reals, ``["p/q", "r/s"]`` otherwise."""
        if not self.im:
            return _fmt(self.re)
        return [_fmt(self.re), _fmt(self.im)]

    def __repr__(self) -> str:
        if not self.im:
            return f"GaussianRational({_fmt(self.re)})"
        return f"GaussianRational({_fmt(self.re)}, {_fmt(self.im)})"

    def __str__(self) -> str:
        if not self.im:
            return _fmt(self.re)
        if not self.re:
            return f"{_fmt(self.im)}i"
        sign = "+" if self.im > 0 else "-"
        return f"({_fmt(self.re)}{sign}{_fmt(abs(self.im))}i)"


_MPQ = type(mpq(0))
_ZERO = mpq(0)


def _fmt(q: mpq) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def _coerce(value):
    if isinstance(value, GaussianRational):
        return value
    if isinstance(value, (int, Rational)) or type(value) is _MPQ:
        return GaussianRational(mpq(value), _ZERO)
    return None


def to_fraction(q: mpq) -> Fraction:
    return Fraction(int(q.numerator), int(q.denominator))
