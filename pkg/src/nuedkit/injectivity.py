"""The four parametrised injectivity notions for families ``x -> F_t(x)``.

Quantifiers over unbounded ``t`` are searched on a bounded grid, so a search
can only support a notion; ``Holds`` comes from analytic deciders, including a
polynomial inverse of the symbolic map (valid for every ``t`` at once).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import catalog
from .polyalg import NoStabilization, ParamPolyMap, PolyAlgError, formal_inverse, substitute_state

__all__ = [
    "NOTIONS",
    "IMPLICATIONS",
    "ParamFamily",
    "SearchConfig",
    "CollisionWitness",
    "Inconclusive",
    "InjectivityVerdict",
    "injective_at",
    "test_injectivity",
    "implication_audit",
    "AuditReport",
    "verify_witness",
    "builtin_family",
    "BUILTIN_FAMILIES",
]

NOTIONS = ("partial", "pseudo_partial", "eventual", "pseudo_eventual")
# (stronger, weaker)
IMPLICATIONS = (("partial", "pseudo_partial"), ("eventual", "pseudo_eventual"), ("eventual", "partial"))


def _frac_json(q: Fraction) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _point_json(p):
    return [_frac_json(v) if isinstance(v, Fraction) else float(v) for v in p]


@dataclass(frozen=True)
class CollisionWitness:
    """``x != y`` with ``F_t(x) = F_t(y)``; ``exact`` when equality was decided in exact arithmetic."""

    t: float
    x: tuple
    y: tuple
    exact: bool

    def to_json(self) -> dict:
        return {"t": self.t, "x": _point_json(self.x), "y": _point_json(self.y), "exact": self.exact}


@dataclass(frozen=True)
class Inconclusive:
    reason: str

    def __bool__(self) -> bool:
        return False


@dataclass
class ParamFamily:
    """A family ``F_t`` with optional exact and analytic information.

    ``exact_map`` is a symbolic map valid for every ``t``; ``analytic`` maps a
    notion to ``("holds" | "falsified", note)``; ``collision_at(t)`` returns a
    witness when ``F_t`` is known not to be injective; ``scalar_coefficient``
    describes scalar families ``F_t(x) = c(t) x`` so that roots of ``c`` can be
    refined.
    """

    family_id: str
    dimension: int
    evaluator: Callable[[float, np.ndarray], np.ndarray]
    exact_map: ParamPolyMap | None = None
    analytic_injective_at: Callable[[float], bool] | None = None
    analytic: dict = field(default_factory=dict)
    collision_at: Callable[[float], CollisionWitness | None] | None = None
    scalar_coefficient: Callable[[float], float] | None = None
    domain: str = "R^n"
    params: dict = field(default_factory=dict)

    def __call__(self, t: float, x) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.evaluator(float(t), np.asarray(x, dtype=float)), dtype=float))

    @cached_property
    def inverse(self) -> ParamPolyMap | None:
        """Polynomial inverse of the symbolic map, when one exists within the default degree cap."""
        if self.exact_map is None or self.exact_map.linear_coefficient is None:
            return None
        try:
            return formal_inverse(self.exact_map)
        except (NoStabilization, PolyAlgError):
            return None

    @property
    def autonomous(self) -> bool:
        return self.exact_map is not None and not _uses_params(self.exact_map)

    def exact_equal(self, t: float, x, y) -> bool | None:
        """Decide ``F_t(x) == F_t(y)`` exactly for rational points, or ``None``.

        After substituting rational points every coordinate is a polynomial in
        the parameter symbols. A symbol ``exp(-r t)`` with ``r t != 0`` rational
        is transcendental, so a nonzero polynomial cannot vanish there.
        """
        F = self.exact_map
        if F is None:
            return None
        try:
            fx = substitute_state(F, x)
            fy = substitute_state(F, y)
        except (TypeError, ValueError):
            return None
        for a, b in zip(fx, fy):
            diff = a - b
            if diff.is_zero:
                continue
            values = {}
            for sym in diff.used_params():
                v = F.binding(sym).exact_value(Fraction(t))
                if v is None:
                    if F.binding(sym).transcendental_for_rational_t:
                        return False
                    return None
                values[sym] = v
            if _eval_param_poly(diff, values) != 0:
                return False
        return True


def _eval_param_poly(p, values: dict) -> Fraction:
    total = Fraction(0)
    params = p.params
    for m, c in p.monomials():
        v = Fraction(int(c.re.numerator), int(c.re.denominator))
        if not c.is_real:
            return Fraction(1)  # complex coefficient: treat as nonzero for the real check
        for sym, e in m.param_exponents.items():
            v *= values[sym] ** e
        total += v
    return total


def _uses_params(F: ParamPolyMap) -> bool:
    return any(p.used_params() for p in F.coordinates)


@dataclass(frozen=True)
class SearchConfig:
    tau_grid: tuple[float, ...] = tuple(float(k) for k in range(11))
    horizon: float = 100.0
    t_step: float = 0.1
    pairs: int = 200
    box: float = 2.0
    snap_denominator: int = 16
    mode: str = "exact"  # exact | float
    tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if not self.tau_grid:
            raise ValueError("tau grid is empty")
        if not self.horizon > max(self.tau_grid):
            raise ValueError("horizon must exceed every tau in the grid")
        if self.pairs < 1:
            raise ValueError("pair count must be >= 1")
        if self.mode not in ("exact", "float"):
            raise ValueError("mode must be 'exact' or 'float'")

    def t_values(self, tau: float) -> np.ndarray:
        n = int(math.floor((self.horizon - tau) / self.t_step + 1e-9))
        return tau + self.t_step * np.arange(n + 1)

    def to_json(self) -> dict:
        return {"tau_grid": list(self.tau_grid), "horizon": self.horizon, "t_step": self.t_step, "pairs": self.pairs,
                "box": self.box, "snap_denominator": self.snap_denominator, "mode": self.mode, "tol": self.tol,
                "seed": self.seed}


@dataclass(frozen=True)
class InjectivityVerdict:
    family_id: str
    notion: str
    outcome: str  # Holds | Falsified | SupportedBySearch | Inconclusive
    basis: str
    witness: dict | None = None
    stats: dict | None = None
    seed: int = 0

    def to_json(self) -> dict:
        return {"family": self.family_id, "notion": self.notion, "outcome": self.outcome, "basis": self.basis,
                "witness": self.witness, "stats": self.stats, "seed": self.seed}


# ---------------------------------------------------------------------------
# single-parameter injectivity


def _sample_pairs(dim: int, cfg: SearchConfig, rng) -> list[tuple[tuple, tuple]]:
    q = cfg.snap_denominator
    out = []
    while len(out) < cfg.pairs:
        x = rng.uniform(-cfg.box, cfg.box, size=dim)
        y = rng.uniform(-cfg.box, cfg.box, size=dim)
        xs = tuple(Fraction(round(v * q), q) for v in x)
        ys = tuple(Fraction(round(v * q), q) for v in y)
        if xs != ys:
            out.append((xs, ys))
    return out


def _equal(family: ParamFamily, t: float, x, y, cfg: SearchConfig) -> tuple[bool, bool]:
    """``(F_t(x) == F_t(y), decided_exactly)``."""
    if cfg.mode == "exact":
        e = family.exact_equal(t, x, y)
        if e is not None:
            return e, True
    fx = family(t, [float(v) for v in x])
    fy = family(t, [float(v) for v in y])
    scale = np.linalg.norm([float(v) for v in x]) + np.linalg.norm([float(v) for v in y]) + np.linalg.norm(fx)
    return bool(np.linalg.norm(fx - fy) <= cfg.tol * max(scale, 1.0)), False


def _scalar_poly_collision(family: ParamFamily, t: float, cfg: SearchConfig) -> CollisionWitness | None:
    """For scalar polynomial maps: roots ``y != x`` of ``F_t(y) - F_t(x)`` at small rational ``x``."""
    F = family.exact_map
    if F is None or F.nvars != 1:
        return None
    coeff = np.zeros(F.max_degree + 1)
    for m, c in F.coordinates[0].monomials():
        w = float(c)
        for sym, e in m.param_exponents.items():
            w *= F.binding(sym).evaluate(t) ** e
        coeff[m.state_exponents[0]] += w
    for x in (Fraction(0), Fraction(1), Fraction(-1), Fraction(1, 2), Fraction(2)):
        c = coeff.copy()
        c[0] -= np.polyval(coeff[::-1], float(x))
        roots = np.roots(c[::-1]) if np.any(c[1:]) else []
        for r in roots:
            if abs(r.imag) > 1e-9:
                continue
            y = Fraction(float(r.real)).limit_denominator(cfg.snap_denominator * 64)
            if y == x:
                continue
            eq, exact = _equal(family, t, (x,), (y,), cfg)
            if eq:
                return CollisionWitness(float(t), (x,), (y,), exact)
    return None


def _collision_search(family: ParamFamily, t: float, cfg: SearchConfig, rng) -> CollisionWitness | None:
    w = _scalar_poly_collision(family, t, cfg)
    if w is not None:
        return w
    for x, y in _sample_pairs(family.dimension, cfg, rng):
        eq, exact = _equal(family, t, x, y, cfg)
        if eq:
            return CollisionWitness(float(t), x, y, exact)
    return None


def injective_at(family: ParamFamily, t: float, cfg: SearchConfig | None = None):
    """Is ``F_t`` injective? Returns ``True``, a :class:`CollisionWitness` or :class:`Inconclusive`.

    Precedence: analytic decider, then a polynomial inverse of the exact map,
    then a collision search.
    """
    cfg = cfg or SearchConfig()
    if family.analytic_injective_at is not None:
        if family.analytic_injective_at(t):
            return True
        w = family.collision_at(t) if family.collision_at else None
        if w is not None:
            return w
        return False
    if family.inverse is not None:
        return True
    rng = np.random.default_rng([cfg.seed, int(round(t * 1000))])
    w = _collision_search(family, t, cfg, rng)
    if w is not None:
        return w
    return Inconclusive(f"no collision among {cfg.pairs} sampled pairs and no polynomial inverse")


# ---------------------------------------------------------------------------
# notions


def _roots_after(c: Callable[[float], float], tau: float, horizon: float, step: float) -> list[float]:
    """Roots of ``c`` in ``(tau, horizon]`` located by sign changes and refined with Brent's method."""
    ts = np.arange(tau, horizon + step / 2, step)
    vals = np.array([c(t) for t in ts])
    out = []
    for a, b, fa, fb in zip(ts, ts[1:], vals, vals[1:]):
        if fa == 0 and a > tau:
            out.append(float(a))
        elif fa * fb < 0:
            out.append(float(brentq(c, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)))
    return out


def _holds(family, notion, basis, seed):
    return InjectivityVerdict(family.family_id, notion, "Holds", basis, seed=seed)


def test_injectivity(family: ParamFamily, notion: str, cfg: SearchConfig | None = None) -> InjectivityVerdict:
    """Decide or search one of ``partial``, ``pseudo_partial``, ``eventual``, ``pseudo_eventual``."""
    if notion not in NOTIONS:
        raise ValueError(f"unknown notion {notion!r}; choose from {NOTIONS}")
    cfg = cfg or SearchConfig()
    fid, seed = family.family_id, cfg.seed

    # analytic short-circuits
    if notion in family.analytic:
        status, note = family.analytic[notion]
        if status == "holds":
            return _holds(family, notion, f"analytic: {note}", seed)
        return InjectivityVerdict(fid, notion, "Falsified", f"analytic: {note}", _analytic_witness(family, notion, cfg), seed=seed)
    if family.inverse is not None:
        return _holds(family, notion, "polynomial inverse of the symbolic map (valid for every t)", seed)
    if family.exact_map is not None and family.autonomous:
        w = _collision_search(family, 0.0, cfg, np.random.default_rng(seed))
        if w is not None and w.exact:
            return InjectivityVerdict(fid, notion, "Falsified", "exact collision of a t-independent map",
                                      {"collision": w.to_json(), "tau": 0.0, "valid_for": "every t"}, seed=seed)

    rng = np.random.default_rng(seed)
    if notion == "partial":
        return _search_partial(family, cfg, rng)
    if notion == "eventual":
        return _search_eventual(family, cfg, rng)
    return _search_pseudo(family, notion, cfg, rng)


def _analytic_witness(family: ParamFamily, notion: str, cfg: SearchConfig) -> dict | None:
    """Concrete, re-checkable witness for an analytically falsified notion."""
    taus = cfg.tau_grid
    if family.scalar_coefficient is not None:
        c = family.scalar_coefficient
        per_tau = []
        for tau in taus:
            roots = _roots_after(c, tau, cfg.horizon, cfg.t_step)
            roots = [r for r in roots if r > tau]
            if roots:
                t_tau = roots[0]
                per_tau.append({"tau": tau, "t": t_tau, "coefficient": c(t_tau),
                                "x": ["0"], "y": ["1"]})
        if notion == "pseudo_eventual":
            return {"x": ["0"], "y": ["1"], "rule": "for every tau the next root t_tau of the coefficient gives F(x) = F(y)",
                    "roots": per_tau}
        return {"rule": "t_tau = min{t > tau : coefficient(t) = 0}; any x != y collide there", "per_tau": per_tau}
    if family.collision_at is not None:
        tau = taus[0]
        coll = [family.collision_at(t) for t in cfg.t_values(tau)[:: max(1, int(round(1 / cfg.t_step)))]]
        return {"tau": tau, "rule": "every t >= tau has a collision", "collisions": [w.to_json() for w in coll if w][:20]}
    return None


def _search_partial(family, cfg, rng) -> InjectivityVerdict:
    stats = {}
    for tau in cfg.tau_grid:
        found = None
        collisions = []
        inconclusive = 0
        for t in cfg.t_values(tau):
            r = injective_at(family, float(t), cfg)
            if r is True:
                found = float(t)
                break
            if isinstance(r, CollisionWitness):
                collisions.append(r)
            else:
                inconclusive += 1
        if found is not None:
            stats[str(tau)] = found
            continue
        if inconclusive == 0 and collisions and all(w.exact or cfg.mode == "float" for w in collisions):
            return InjectivityVerdict(family.family_id, "partial", "Falsified", "bounded search: every sampled t >= tau collides",
                                      {"tau": tau, "collisions": [w.to_json() for w in collisions[:20]],
                                       "n_collisions": len(collisions)}, seed=cfg.seed)
        return InjectivityVerdict(family.family_id, "partial", "Inconclusive",
                                  f"no injective F_t certified for t in [{tau}, {cfg.horizon}]", stats={"tau": tau},
                                  seed=cfg.seed)
    return InjectivityVerdict(family.family_id, "partial", "SupportedBySearch", "injective F_t found after every tau",
                              stats={"first_injective_t": stats}, seed=cfg.seed)


def _search_eventual(family, cfg, rng) -> InjectivityVerdict:
    per_tau = []
    for tau in cfg.tau_grid:
        bad = None
        inconclusive = False
        for t in cfg.t_values(tau):
            r = injective_at(family, float(t), cfg)
            if isinstance(r, CollisionWitness):
                bad = r
                break
            if r is not True:
                inconclusive = True
        if bad is None and not inconclusive:
            return InjectivityVerdict(family.family_id, "eventual", "SupportedBySearch",
                                      f"F_t injective for every sampled t >= {tau}", stats={"tau": tau}, seed=cfg.seed)
        if bad is None:
            return InjectivityVerdict(family.family_id, "eventual", "Inconclusive",
                                      f"injectivity undecided on sampled t >= {tau}", seed=cfg.seed)
        per_tau.append({"tau": tau, **bad.to_json()})
    if all(w["exact"] for w in per_tau) or cfg.mode == "float":
        return InjectivityVerdict(family.family_id, "eventual", "Falsified", "bounded search: a collision after every tau",
                                  {"per_tau": per_tau}, seed=cfg.seed)
    return InjectivityVerdict(family.family_id, "eventual", "Inconclusive", "collisions found only in floating point",
                              stats={"per_tau": per_tau}, seed=cfg.seed)


def _search_pseudo(family, notion, cfg, rng) -> InjectivityVerdict:
    pairs = _sample_pairs(family.dimension, cfg, rng)
    stats = {"pairs": len(pairs), "taus": len(cfg.tau_grid)}
    for x, y in pairs:
        for tau in (cfg.tau_grid if notion == "pseudo_partial" else cfg.tau_grid[:1]):
            ts = cfg.t_values(tau)
            eq_all = True
            exact_all = True
            sep_tail_start = None
            for t in ts:
                eq, exact = _equal(family, float(t), x, y, cfg)
                exact_all &= exact
                if not eq:
                    eq_all = False
                    if notion == "pseudo_partial":
                        break
                    if sep_tail_start is None:
                        sep_tail_start = float(t)
                else:
                    sep_tail_start = None
            if notion == "pseudo_partial" and eq_all:
                if exact_all or cfg.mode == "float":
                    return InjectivityVerdict(family.family_id, notion, "Falsified",
                                              "bounded search: F_t(x) = F_t(y) for every sampled t >= tau",
                                              {"x": _point_json(x), "y": _point_json(y), "tau": tau,
                                               "t_range": [float(ts[0]), float(ts[-1])]}, seed=cfg.seed)
                return InjectivityVerdict(family.family_id, notion, "Inconclusive", "collisions only in floating point",
                                          seed=cfg.seed)
            if notion == "pseudo_eventual" and sep_tail_start is None:
                return InjectivityVerdict(family.family_id, notion, "Falsified" if exact_all or cfg.mode == "float" else "Inconclusive",
                                          "bounded search: F_t(x) = F_t(y) at the end of the window",
                                          {"x": _point_json(x), "y": _point_json(y), "tau": tau}, seed=cfg.seed)
    return InjectivityVerdict(family.family_id, notion, "SupportedBySearch", "every sampled pair separated", stats=stats,
                              seed=cfg.seed)


def verify_witness(family: ParamFamily, verdict: InjectivityVerdict, cfg: SearchConfig | None = None) -> bool:
    """Re-evaluate every collision recorded in a Falsified verdict."""
    cfg = cfg or SearchConfig()
    if verdict.outcome != "Falsified":
        return True
    w = verdict.witness or {}
    checks = []

    def parse(p):
        return tuple(Fraction(v) if isinstance(v, str) else Fraction(v) for v in p)

    if "collision" in w:
        c = w["collision"]
        checks.append((c["t"], parse(c["x"]), parse(c["y"])))
    for c in w.get("collisions", []):
        checks.append((c["t"], parse(c["x"]), parse(c["y"])))
    for c in w.get("per_tau", []):
        checks.append((c["t"], parse(c["x"]), parse(c["y"])))
    for c in w.get("roots", []):
        checks.append((c["t"], parse(c["x"]), parse(c["y"])))
    if "x" in w and "t_range" in w:
        ts = np.arange(w["t_range"][0], w["t_range"][1] + 1e-9, max(cfg.t_step, (w["t_range"][1] - w["t_range"][0]) / 50))
        checks.extend((float(t), parse(w["x"]), parse(w["y"])) for t in ts)
    if not checks:
        return False
    for t, x, y in checks:
        if x == y:
            return False
        if not _equal(family, t, x, y, cfg)[0]:
            return False
    return True


@dataclass(frozen=True)
class AuditReport:
    consistent: bool
    violations: tuple[dict, ...]
    checked: tuple[tuple[str, str], ...]

    def to_json(self) -> dict:
        return {"consistent": self.consistent, "violations": list(self.violations),
                "checked": [list(c) for c in self.checked]}


def implication_audit(verdicts) -> AuditReport:
    """Flag outcome sets contradicting partial => pseudo_partial, eventual => pseudo_eventual, eventual => partial.

    ``Holds`` on a notion may not coexist with ``Falsified`` on a notion it
    implies. Search support is compatible with anything.
    """
    by = {}
    for v in verdicts:
        if v.notion in by and by[v.notion].outcome != v.outcome:
            raise ValueError(f"two different verdicts for {v.notion}")
        by[v.notion] = v
    if len(by) < 2:
        raise ValueError("the audit needs verdicts for at least two notions")
    viol, checked = [], []
    for strong, weak in IMPLICATIONS:
        if strong in by and weak in by:
            checked.append((strong, weak))
            if by[strong].outcome == "Holds" and by[weak].outcome == "Falsified":
                viol.append({"implication": f"{strong} => {weak}", strong: "Holds", weak: "Falsified"})
    return AuditReport(not viol, tuple(viol), tuple(checked))


# ---------------------------------------------------------------------------
# built-in families


def _example_3_2() -> ParamFamily:
    def ev(t, x):
        return np.where(t < x, 0.0, t * x)

    def collision(t):
        x = Fraction(math.floor(t) + 1)
        return CollisionWitness(float(t), (x,), (x + 1,), True)

    return ParamFamily(
        "example_3_2", 1, ev,
        analytic_injective_at=lambda t: False,
        collision_at=collision,
        analytic={
            "partial": ("falsified", "for every t the points x, y > t both map to 0"),
            "eventual": ("falsified", "for every t the points x, y > t both map to 0"),
            "pseudo_partial": ("holds", "for t >= max(x, y, tau), F_t(x) = F_t(y) reduces to t x = t y"),
            "pseudo_eventual": ("holds", "for t >= max(x, y, 1), F_t(x) = t x and F_t(y) = t y differ"),
        },
        domain="R",
    )


def _example_3_4(lambda0: float = -4.0, a: float = -1.0) -> ParamFamily:
    if not lambda0 < a < 0:
        raise ValueError(f"need lambda0 < a < 0, got lambda0={lambda0}, a={a}")

    def c(t):
        return lambda0 + a * t * math.sin(t)

    def vanishes(t):
        # a float root is only a root up to the rounding of the coefficient
        return abs(c(t)) <= 1e-12 * (abs(lambda0) + abs(a) * abs(t))

    def collision(t):
        if vanishes(t):
            return CollisionWitness(float(t), (Fraction(0),), (Fraction(1),), False)
        return None

    return ParamFamily(
        f"example_3_4(lambda0={lambda0:g}, a={a:g})", 1, lambda t, x: c(t) * x,
        analytic_injective_at=lambda t: not vanishes(t),
        collision_at=collision,
        scalar_coefficient=c,
        analytic={
            "partial": ("holds", "the zero set of lambda0 + a t sin t is discrete, so injective t exist after every tau"),
            "pseudo_partial": ("holds", "implied by partial injectivity"),
            "eventual": ("falsified", "the coefficient has a root after every tau"),
            "pseudo_eventual": ("falsified", "at the roots after any tau every pair collides"),
        },
        domain="R",
        params={"lambda0": lambda0, "a": a},
    )


def _poly_family(fid: str, F: ParamPolyMap, **params) -> ParamFamily:
    comp = F.compiled
    return ParamFamily(fid, F.nvars, lambda t, x: np.asarray(comp(t, x), dtype=float), exact_map=F, params=params)


BUILTIN_FAMILIES = ("example_3_2", "example_3_3", "example_3_4", "example_4_2", "noninjective_demo")


def builtin_family(name: str, **params) -> ParamFamily:
    """Families from the worked examples; ``example_3_4`` takes ``lambda0``, ``a`` and ``example_4_2`` takes ``lam``."""
    if name == "example_3_2":
        return _example_3_2()
    if name == "example_3_3":
        return _poly_family("example_3_3", catalog.example_3_3_map())
    if name == "example_3_4":
        return _example_3_4(float(params.get("lambda0", -4.0)), float(params.get("a", -1.0)))
    if name == "example_4_2":
        lam = params.get("lam", -1)
        if Fraction(str(lam)) >= 0:
            raise ValueError("the section 4.2 family needs lam < 0")
        return _poly_family("example_4_2", catalog.sec42_map(lam), lam=str(lam))
    if name == "noninjective_demo":
        return _poly_family("noninjective_demo", catalog.noninjective_demo_map())
    raise ValueError(f"unknown family {name!r}; choose from {BUILTIN_FAMILIES}")
