"""Built-in maps and linear systems used by the examples, tests and CLI."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .odeint import VectorField
from .polyalg import ParamBinding, ParamPolyMap, variables
from .polyalg.numbers import as_rational

__all__ = [
    "sec42_map",
    "sec42_printed_inverse",
    "example_3_3_map",
    "example_3_3_printed_inverse",
    "noninjective_demo_map",
    "diag_constant",
    "example_3_4_field",
    "example_3_4_phi",
    "LowerBoundWitness",
    "example_3_4_lower_bound",
    "linear_builtin",
    "LINEAR_BUILTINS",
]


def _rat(v) -> Fraction:
    q = as_rational(v)
    return Fraction(int(q.numerator), int(q.denominator))


def sec42_map(lam=-1) -> ParamPolyMap:
    """``M(t, x, y, z) = (lam x + s y^3, lam y + s (x+z)^3, lam z - s y^3)`` with ``s = exp(-t)``."""
    lam = _rat(lam)
    (x, y, z), ps = variables(3, ("s",))
    s = ps["s"]
    coords = [lam * x + s * y ** 3, lam * y + s * (x + z) ** 3, lam * z - s * y ** 3]
    return ParamPolyMap(coords, [ParamBinding.exp_decay("s", 1)], linear_coefficient=lam)


def sec42_printed_inverse(lam=-1) -> ParamPolyMap:
    """The explicit inverse ``N_t`` as printed, expanded into monomials."""
    lam = _rat(lam)
    (x, y, z), ps = variables(3, ("s",))
    s = ps["s"]
    inv = Fraction(1) / lam
    n2 = inv * (y - s * ((x + z) * inv) ** 3)
    n1 = inv * (x - s * n2 ** 3)
    n3 = inv * (z + s * n2 ** 3)
    return ParamPolyMap([n1, n2, n3], [ParamBinding.exp_decay("s", 1)])


def example_3_3_map() -> ParamPolyMap:
    """``(-x + s(x+y)^3, -y + s[(x+z)^3 - (x+y)^3], -z - s(x+y)^3)``."""
    (x, y, z), ps = variables(3, ("s",))
    s = ps["s"]
    u, w = (x + y) ** 3, (x + z) ** 3
    coords = [-x + s * u, -y + s * (w - u), -z - s * u]
    return ParamPolyMap(coords, [ParamBinding.exp_decay("s", 1)], linear_coefficient=-1)


def example_3_3_printed_inverse() -> ParamPolyMap:
    """The inverse formulas printed for the nilpotent cubic example, taken literally."""
    (x, y, z), ps = variables(3, ("s",))
    s = ps["s"]
    u = x + y
    core = u ** 3 * (1 + s * u ** 2) ** 3
    coords = [-x - s * core, -y - s * u ** 3 - core, -z + s * core]
    return ParamPolyMap(coords, [ParamBinding.exp_decay("s", 1)])


def noninjective_demo_map() -> ParamPolyMap:
    """``F(x) = x - x^3``: F(0) = F(1) = 0."""
    (x,), _ = variables(1)
    return ParamPolyMap([x - x ** 3], linear_coefficient=1)


# ---------------------------------------------------------------------------
# linear systems


def diag_constant(values) -> VectorField:
    d = np.atleast_1d(np.asarray(values, dtype=float))
    A = np.diag(d)
    return VectorField.linear(lambda t: A, len(d), f"diag{list(map(float, d))}", diagonal=True)


def _check_34(lam0: float, a: float):
    if not lam0 < a < 0:
        raise ValueError(f"need lambda0 < a < 0, got lambda0={lam0}, a={a}")


def example_3_4_field(lam0: float = -4.0, a: float = -1.0) -> VectorField:
    """Scalar ``x' = (lam0 + a t sin t) x``."""
    _check_34(lam0, a)
    return VectorField.linear(lambda t: np.array([[lam0 + a * t * math.sin(t)]]), 1,
                              f"example_3_4(lambda0={lam0}, a={a})", diagonal=True)


def _g(u):
    return np.sin(u) - u * np.cos(u)


def example_3_4_phi(t, s, lam0: float = -4.0, a: float = -1.0):
    """Closed-form ``Phi(t, s) = exp(lam0 (t-s) + a (g(t) - g(s)))``, ``g(u) = sin u - u cos u``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    return np.exp(lam0 * (t - s) + a * (_g(t) - _g(s)))


@dataclass(frozen=True)
class LowerBoundWitness:
    """Sample pairs on which ``log Phi(t,s) = (lam0 + |a|)(t-s) + 2|a| s`` exactly.

    Any bound ``K exp(-alpha (t-s) + eps s)`` valid on these pairs forces
    ``eps >= eps_lower`` and ``alpha <= alpha_upper``.
    """

    pairs: tuple[tuple[float, float], ...]
    log_values: tuple[float, ...]
    eps_lower: float
    alpha_upper: float
    strict_feasible: bool
    description: str

    def to_json(self) -> dict:
        return {
            "pairs": [list(p) for p in self.pairs],
            "log_phi": list(self.log_values),
            "eps_lower": self.eps_lower,
            "alpha_upper": self.alpha_upper,
            "strict_certificate_possible": self.strict_feasible,
            "description": self.description,
        }


def example_3_4_lower_bound(lam0: float = -4.0, a: float = -1.0, kmax: int = 8) -> LowerBoundWitness:
    """Pairs ``t = 2k pi``, ``s = (2j+1) pi`` (``j < k``) where the nonuniform growth is attained."""
    _check_34(lam0, a)
    pairs, logs = [], []
    for k in range(1, kmax + 1):
        for j in range(k):
            t, s = 2 * k * math.pi, (2 * j + 1) * math.pi
            pairs.append((t, s))
            logs.append(float(lam0 * (t - s) + a * (_g(t) - _g(s))))
    eps_lo = 2 * abs(a)
    alpha_hi = abs(lam0) - abs(a)
    desc = (
        f"at t=2k*pi, s=(2j+1)*pi: log Phi = ({lam0 + abs(a):g})(t-s) + {2 * abs(a):g} s, "
        f"so eps >= {eps_lo:g} and alpha <= {alpha_hi:g}"
    )
    return LowerBoundWitness(tuple(pairs), tuple(logs), eps_lo, alpha_hi, eps_lo < alpha_hi, desc)


def _perturbed_diag(delta: float = 0.5, eps: float = 0.0, base: float = -1.0, n: int = 2) -> VectorField:
    """``diag{base} + B(t)`` with ``B(t) = delta exp(-eps t) R(t)``, ``R(t)`` a rotation-like unit-norm matrix (``R = 1`` when ``n = 1``)."""
    def A(t):
        c, s_ = math.cos(t), math.sin(t)
        R = np.eye(n)
        if n > 1:
            R[:2, :2] = [[c, -s_], [s_, c]]
        return base * np.eye(n) + delta * math.exp(-eps * t) * R

    return VectorField.linear(A, n, f"perturbed_diag(delta={delta}, eps={eps})")


def linear_builtin(name: str, **params) -> VectorField:
    """Named linear system: ``diag`` (values=...), ``example_3_4`` (lambda0, a), ``perturbed_diag``."""
    if name == "diag":
        return diag_constant(params.get("values", [-1.0]))
    if name == "example_3_4":
        return example_3_4_field(float(params.get("lambda0", -4.0)), float(params.get("a", -1.0)))
    if name == "perturbed_diag":
        return _perturbed_diag(**{k: float(v) if k != "n" else int(v) for k, v in params.items()})
    raise ValueError(f"unknown linear system {name!r}; choose from {sorted(LINEAR_BUILTINS)}")


LINEAR_BUILTINS = ("diag", "example_3_4", "perturbed_diag")
