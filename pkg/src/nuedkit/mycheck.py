"""End-to-end checks of the stability hypotheses on cubic nilpotent families.

A family ``f(t, x) = lam x + H(t, x)`` is checked against

* ``cond_i``   continuous time dependence of the coefficients,
* ``cond_ii``  every ``H_i`` zero or homogeneous of degree 3, ``JH`` nilpotent,
* ``cond_iii`` the factor ``a(t)`` bounded,
* ``cond_iv``  ``||JH(t, omega(t))|| <= delta exp(-eps t)`` for ``t >= T_omega``,
* ``G1``       forward existence (probed only),
* ``G2``       ``f(t, 0) = 0``,
* ``G3star``   nonuniform exponential stability of the linearisation along
  each bounded signal of a finite suite.

The universal statements (all bounded signals, all initial data) are out of
reach; every report says which finite sample it covers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import catalog
from .dichotomy import (
    CertificateSearch,
    DichotomyCertificate,
    EnvelopeFit,
    Violation,
    build_norm_grid,
    check_uniform_fit,
    fit_gnuas_envelope,
    fit_stability_certificate,
)
from .injectivity import (
    ParamFamily,
    SearchConfig,
    builtin_family,
    implication_audit,
    test_injectivity,
    verify_witness,
)
from .odeint import (
    Completed,
    IntegratorConfig,
    PiecewiseSignal,
    VectorField,
    integrate,
    linearize_along,
    transition_matrix,
)
from .polyalg import (
    NOT_HOMOGENEOUS,
    ZERO,
    ParamPolyMap,
    PolyAlgError,
    compose,
    cubic_bound_constant,
    formal_inverse,
    homogeneity_degree,
    is_nilpotent,
    jacobian,
    shift_conjugate,
    substitute_state,
    variables,
)

__all__ = [
    "CHECK_IDS",
    "NotLinearForm",
    "NoThreshold",
    "CheckEntry",
    "HypothesisReport",
    "HypothesisConfig",
    "ConditionIvCertificate",
    "default_omega_suite",
    "check_hypotheses",
    "condition_iv_threshold",
    "GnuasReport",
    "default_ic_grid",
    "verify_gnuas",
    "ConstantSolutionReport",
    "constant_solution_check",
    "ExampleReport",
    "reproduce_example",
    "EXAMPLES",
    "jh_norm",
]

CHECK_IDS = ("cond_i", "cond_ii", "cond_iii", "cond_iv", "G1", "G2", "G3star")
EXAMPLES = ("3.2", "3.3", "3.4", "4.2")


class NotLinearForm(ValueError):
    """The map carries no linear coefficient ``lam`` (not of the form ``lam X + H``)."""


class NoThreshold(ValueError):
    """No ``T_omega`` within the horizon after which the decay bound holds."""


def _lam(F: ParamPolyMap) -> float:
    if F.linear_coefficient is None:
        raise NotLinearForm("map is not in lambda*X + H form (no linear coefficient declared)")
    return float(F.linear_coefficient)


def _is_sec42(F: ParamPolyMap) -> bool:
    """Does ``F`` have the nonlinear part ``(s y^3, s (x+z)^3, -s y^3)``, ``s = exp(-t)``?"""
    if F.linear_coefficient is None or F.nvars != 3 or F.dimension != 3:
        return False
    ref = catalog.sec42_map(-1).nonlinear_part()
    try:
        H = F.nonlinear_part()
    except PolyAlgError:
        return False
    if H != ref:
        return False
    return all(F.binding(s).kind == "exp_decay" and F.binding(s).rate == 1 for s in H.params
               if any(s in p.used_params() for p in H.coordinates))


def jh_norm(H: ParamPolyMap, t: float, w) -> float:
    """Spectral norm of ``JH(t, w)``."""
    return float(np.linalg.norm(jacobian(H).evaluate(t, np.asarray(w, dtype=float)), ord=2))


# ---------------------------------------------------------------------------
# report types


@dataclass(frozen=True)
class CheckEntry:
    id: str
    status: str  # pass | fail | evidence_only
    details: dict

    def to_json(self) -> dict:
        return {"status": self.status, "details": self.details}


@dataclass(frozen=True)
class HypothesisReport:
    entries: tuple[CheckEntry, ...]
    notes: tuple[str, ...] = ()

    @property
    def overall(self) -> str:
        return "fail" if any(e.status == "fail" for e in self.entries) else "pass"

    def __getitem__(self, check_id: str) -> CheckEntry:
        for e in self.entries:
            if e.id == check_id:
                return e
        raise KeyError(check_id)

    def to_json(self) -> dict:
        return {"overall": self.overall, "checks": {e.id: e.to_json() for e in self.entries}, "notes": list(self.notes)}

    def summary(self) -> str:
        lines = [f"{e.id:8s} {e.status}" for e in self.entries]
        return "\n".join([*lines, f"overall  {self.overall}"])


@dataclass(frozen=True)
class HypothesisConfig:
    """Knobs of :func:`check_hypotheses`.

    ``delta`` defaults to ``|lam| / 2``. ``ic_norms`` are the radii of the
    forward-existence probe, run along the coordinate axes and the diagonal.
    """

    delta: float | None = None
    eps: float = 0.0
    horizon: float = 50.0
    iv_step: float = 0.01
    g3_horizon: float = 30.0
    g3_step: float = 0.5
    ic_norms: tuple[float, ...] = (0.1, 1.0, 5.0)
    ic_window: float = 40.0
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    search: CertificateSearch = field(default_factory=CertificateSearch)


def default_omega_suite(n: int) -> list[PiecewiseSignal]:
    """Zero, constants of norm 1 and 5, a piecewise-constant switch and a sinusoid."""
    u = np.ones(n) / math.sqrt(n)
    e = np.eye(n)
    return [
        PiecewiseSignal.constant(np.zeros(n), "zero"),
        PiecewiseSignal.constant(u, "constant_norm_1"),
        PiecewiseSignal.constant(5 * u, "constant_norm_5"),
        PiecewiseSignal.switch((2.0, 5.0), (e[0], 2 * e[-1], -u), "switch"),
        PiecewiseSignal.sinusoid(np.linspace(1.0, 2.0, n), 1.0, np.arange(n) * 0.5, "sinusoid"),
    ]


# ---------------------------------------------------------------------------
# condition (iv)


@dataclass(frozen=True)
class ConditionIvCertificate:
    """``||JH(t, omega(t))|| <= delta exp(-eps t)`` on every checked ``t >= T_omega``.

    ``max_violation`` is the largest sampled ``||JH|| - delta exp(-eps t)``
    on ``[T_omega, horizon]`` (``<= 0`` when the certificate holds).
    """

    eps: float
    delta: float
    T_omega: float
    max_violation: float
    method: str  # closed_form | scan
    L_omega: float | None
    horizon: float
    signal: str

    def to_json(self) -> dict:
        return {"eps": self.eps, "delta": self.delta, "T_omega": self.T_omega, "max_violation": self.max_violation,
                "method": self.method, "L_omega": self.L_omega, "horizon": self.horizon, "signal": self.signal}


def _sample_times(omega: PiecewiseSignal, a: float, b: float, step: float) -> np.ndarray:
    ts = np.arange(a, b + step / 2, step)
    bps = [p for p in omega.breakpoints if a <= p <= b]
    return np.union1d(np.append(ts[ts <= b], [a, b]), bps)


def _iv_gap(H, omega, delta, eps, ts) -> np.ndarray:
    ts = np.asarray(ts, dtype=float)
    W = np.array([omega(t) for t in ts], dtype=float).reshape(ts.size, -1)
    norms = np.linalg.norm(jacobian(H).evaluate_many(ts, W), ord=2, axis=(1, 2))
    return norms - delta * np.exp(-eps * ts)


def condition_iv_threshold(F: ParamPolyMap, omega: PiecewiseSignal, delta: float, eps: float,
                           horizon: float = 50.0, step: float = 0.01) -> ConditionIvCertificate:
    """Smallest ``T_omega`` after which ``||JH(t, omega(t))|| <= delta exp(-eps t)``.

    For the nonlinear part ``(s y^3, s (x+z)^3, -s y^3)`` with ``s = exp(-t)``
    and ``eps < 1`` the norm is ``sqrt(18) exp(-t) max{w2^2, (w1+w3)^2}``, so
    ``T = ln(delta^2 / (18 L^2)) / (2 (eps - 1))`` with
    ``L = sup max{w2^2, (w1+w3)^2}`` (clamped at 0). Otherwise ``T`` is found
    by scanning. Either way the bound is re-checked on a grid of ``[T, horizon]``.
    """
    lam = _lam(F)
    if not lam < 0:
        raise ValueError(f"condition (iv) needs lambda < 0, got {lam}")
    if not 0 <= delta < -lam:
        raise ValueError(f"need 0 <= delta < -lambda = {-lam}, got delta = {delta}")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    H = F.nonlinear_part()
    T = None
    L = None
    method = "scan"
    if _is_sec42(F) and eps < 1:
        L = omega.sampled_sup(lambda w: max(w[1] ** 2, (w[0] + w[2]) ** 2), horizon, step)
        if L == 0:
            T = 0.0
        elif delta > 0:
            T = max(0.0, math.log(delta ** 2 / (18 * L ** 2)) / (2 * (eps - 1)))
        method = "closed_form"
        if T is not None:
            ts = _sample_times(omega, T, horizon, step)
            gap = _iv_gap(H, omega, delta, eps, ts)
            tol = 1e-12 * delta * np.exp(-eps * ts)
            if np.any(gap > tol):
                # sampled sup underestimated L: fall back to the scan
                T, method = None, "scan"
    if T is None:
        ts = _sample_times(omega, 0.0, horizon, step)
        gap = _iv_gap(H, omega, delta, eps, ts)
        bad = np.flatnonzero(gap > 0)
        if bad.size == 0:
            T = 0.0
        elif bad[-1] == ts.size - 1:
            raise NoThreshold(f"bound still violated at t = {ts[-1]:g}; no T_omega within the horizon {horizon:g}")
        else:
            lo, hi = float(ts[bad[-1]]), float(ts[bad[-1] + 1])
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if _iv_gap(H, omega, delta, eps, [mid])[0] > 0:
                    lo = mid
                else:
                    hi = mid
            T = hi
    ts = _sample_times(omega, T, horizon, step)
    gap = _iv_gap(H, omega, delta, eps, ts)
    worst = float(gap.max())
    if worst > 1e-12 * delta:
        raise NoThreshold(f"bound violated by {worst:.3g} on [T_omega, horizon] after refinement")
    return ConditionIvCertificate(float(eps), float(delta), float(T), worst, method, L, float(horizon), omega.label)


# ---------------------------------------------------------------------------
# hypotheses


def _cond_ii(H: ParamPolyMap) -> CheckEntry:
    degrees = []
    for p in H.coordinates:
        d = homogeneity_degree(p)
        degrees.append(d if d in (ZERO, NOT_HOMOGENEOUS) else int(d))
    homog = all(d in (3, ZERO) for d in degrees)
    nil = is_nilpotent(jacobian(H), H.nvars)
    status = "pass" if homog and nil.nilpotent else "fail"
    return CheckEntry("cond_ii", status, {"degrees": degrees, "homogeneous_cubic_or_zero": homog,
                                          "nilpotent": nil.nilpotent, "nilpotency_index": nil.index})


def _a_symbols(H: ParamPolyMap) -> list[str]:
    return sorted(set().union(*(p.used_params() for p in H.coordinates)))


def _cond_iii(H: ParamPolyMap) -> CheckEntry:
    sups = {s: H.binding(s).declared_sup for s in _a_symbols(H)}
    ok = all(v is not None and math.isfinite(v) for v in sups.values())
    return CheckEntry("cond_iii", "pass" if ok else "fail", {"declared_sup": sups})


def _cond_i(F: ParamPolyMap) -> CheckEntry:
    kinds = {b.symbol: b.kind for b in F.bindings}
    note = "exp_decay and constant bindings are continuous"
    if any(k == "bounded_generic" for k in kinds.values()):
        note += "; bounded_generic evaluators are assumed continuous, not checked"
    return CheckEntry("cond_i", "pass", {"bindings": kinds, "note": note})


def _g2(F: ParamPolyMap) -> CheckEntry:
    at0 = substitute_state(F, [0] * F.nvars)
    ok = all(p.is_zero for p in at0)
    return CheckEntry("G2", "pass" if ok else "fail", {"f(t,0)_is_zero_exactly": ok})


def _ic_directions(n: int) -> list[np.ndarray]:
    out = [np.eye(n)[i] for i in range(n)]
    out.append(np.ones(n) / math.sqrt(n))
    return out


def _comparison_radius(H: ParamPolyMap, lam: float):
    """``sqrt(|lam| / (C sup a))``: data inside stay bounded by the comparison equation."""
    try:
        cb = cubic_bound_constant(H, n_samples=2000)
    except PolyAlgError:
        return None, None
    if cb.C_coeff == 0:
        return math.inf, cb
    sup_a = 1.0 if cb.a_symbol is None else H.binding(cb.a_symbol).declared_sup ** cb.a_power
    if not math.isfinite(sup_a):
        return None, cb
    return math.sqrt(abs(lam) / (cb.C_coeff * sup_a)), cb


def _g1(F: ParamPolyMap, cfg: HypothesisConfig) -> CheckEntry:
    lam = _lam(F)
    H = F.nonlinear_part()
    radius, cb = _comparison_radius(H, lam)
    field_ = VectorField.from_poly_map(F, "f")
    runs = []
    guaranteed_blowup = False
    for r in cfg.ic_norms:
        for d in _ic_directions(F.nvars):
            x0 = r * d
            res = integrate(field_, 0.0, x0, cfg.ic_window, cfg.integrator)
            inside = radius is not None and r <= radius
            entry = {"x0": [float(v) for v in x0], "norm": float(r), "outcome": type(res).__name__,
                     "comparison_guaranteed": inside}
            if isinstance(res, Completed):
                entry["final_norm"] = float(res.trajectory.norms[-1])
            else:
                entry["t_stop"] = float(getattr(res, "t_star", getattr(res, "t", math.nan)))
                guaranteed_blowup |= inside
            runs.append(entry)
    details = {
        "comparison_radius": radius,
        "C_coeff": None if cb is None else cb.C_coeff,
        "window": [0.0, cfg.ic_window],
        "runs": runs,
        "note": "forward existence is probed on finitely many initial data, never proved; "
                "inside the comparison radius the comparison equation keeps solutions bounded",
    }
    return CheckEntry("G1", "fail" if guaranteed_blowup else "evidence_only", details)


def _g3(F: ParamPolyMap, suite, cfg: HypothesisConfig) -> CheckEntry:
    per = []
    ok = True
    for om in suite:
        lin = linearize_along(F, om)
        grid = build_norm_grid(lin, cfg.g3_horizon, cfg.g3_step)
        res = fit_stability_certificate(grid, cfg.search)
        good = isinstance(res, DichotomyCertificate)
        ok &= good
        per.append({"signal": om.label, "feasible": good, "result": res.to_json()})
    return CheckEntry("G3star", "pass" if ok else "fail",
                      {"signals": per, "note": "checked on a finite signal suite; the statement quantifies over every "
                                               "bounded piecewise continuous signal"})


def _cond_iv(F: ParamPolyMap, suite, cfg: HypothesisConfig) -> CheckEntry:
    lam = _lam(F)
    delta = cfg.delta if cfg.delta is not None else abs(lam) / 2
    per = []
    ok = True
    for om in suite:
        try:
            c = condition_iv_threshold(F, om, delta, cfg.eps, cfg.horizon, cfg.iv_step)
            per.append(c.to_json())
        except (NoThreshold, ValueError) as exc:
            ok = False
            per.append({"signal": om.label, "error": str(exc)})
    return CheckEntry("cond_iv", "pass" if ok else "fail", {"delta": delta, "eps": cfg.eps, "signals": per})


def check_hypotheses(F: ParamPolyMap, omega_suite: Sequence[PiecewiseSignal] | None = None,
                     cfg: HypothesisConfig | None = None) -> HypothesisReport:
    """Run every hypothesis check on ``F = lam X + H``.

    Raises :class:`NotLinearForm` when no linear coefficient is declared.
    Numerical checks need a real map; realify complex maps first.
    """
    lam = _lam(F)
    cfg = cfg or HypothesisConfig()
    H = F.nonlinear_part()
    suite = list(omega_suite) if omega_suite is not None else default_omega_suite(F.nvars)
    entries = [_cond_i(F), _cond_ii(H), _cond_iii(H)]
    numeric = F.is_real and lam < 0
    if numeric:
        entries.append(_cond_iv(F, suite, cfg))
    else:
        entries.append(CheckEntry("cond_iv", "fail", {"reason": "needs a real map with lambda < 0"}))
    entries.append(_g1(F, cfg) if numeric else CheckEntry("G1", "evidence_only", {"reason": "not probed"}))
    entries.append(_g2(F))
    entries.append(_g3(F, suite, cfg) if F.is_real else CheckEntry("G3star", "fail", {"reason": "realify first"}))
    notes = (f"signal suite: {[om.label for om in suite]}",)
    return HypothesisReport(tuple(entries), notes)


# ---------------------------------------------------------------------------
# GNUAS ensembles


def default_ic_grid(n: int = 3, radius: float = 10.0) -> list[np.ndarray]:
    """``{-a, 0, a}^n`` with ``a = radius / sqrt(n)``, so every point has norm ``<= radius``."""
    a = radius / math.sqrt(n)
    axes = np.meshgrid(*[[-a, 0.0, a]] * n, indexing="ij")
    return [np.array(p) for p in np.stack([ax.ravel() for ax in axes], axis=1)]


@dataclass(frozen=True)
class GnuasReport:
    """Ensemble outcome of :func:`verify_gnuas`."""

    runs: tuple[dict, ...]
    all_completed: bool
    all_decayed: bool
    decay_threshold: float
    identity_max_error: float | None
    identity_tol: float
    envelope: object  # EnvelopeFit | Violation | None
    envelope_dominates: bool | None

    @property
    def passed(self) -> bool:
        ident = self.identity_max_error is None or self.identity_max_error <= self.identity_tol
        return (self.all_completed and self.all_decayed and ident and isinstance(self.envelope, EnvelopeFit)
                and bool(self.envelope_dominates))

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "all_completed": self.all_completed,
            "all_decayed": self.all_decayed,
            "decay_threshold": self.decay_threshold,
            "x_plus_z_identity": None if self.identity_max_error is None else
            {"max_relative_error": self.identity_max_error, "tol": self.identity_tol},
            "envelope": None if self.envelope is None else self.envelope.to_json(),
            "envelope_dominates_all_samples": self.envelope_dominates,
            "runs": list(self.runs),
        }


def _identity_error(tr, lam: float) -> float:
    """Relative error of ``x + z = exp(lam (t - t0)) (x0 + z0)`` along a trajectory.

    Measured against the exact right-hand side; when ``x0 + z0 = 0`` the
    right-hand side vanishes and ``|x| + |z|`` is used as the scale instead.
    """
    x, z = tr.states[:, 0], tr.states[:, 2]
    ref = math.fsum([tr.x0[0], tr.x0[2]]) * np.exp(lam * (tr.times - tr.t0))
    err = np.abs(x + z - ref)
    scale = np.abs(ref) if np.all(ref != 0) else np.abs(x) + np.abs(z)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(scale > 0, err / np.where(scale > 0, scale, 1.0), err)
    return float(rel.max())


def verify_gnuas(F: ParamPolyMap, x0s: Sequence | None = None, t0s: Sequence[float] = (0.0, 5.0, 10.0),
                 window: float = 40.0, decay_threshold: float = 1e-6, identity_tol: float = 1e-8,
                 cfg: IntegratorConfig | None = None, search: CertificateSearch | None = None) -> GnuasReport:
    """Integrate an ensemble, check decay by ``t0 + window`` and fit a GNUAS envelope.

    For the ``(s y^3, s (x+z)^3, -s y^3)`` family the identity
    ``x(t) + z(t) = exp(lam (t - t0)) (x0 + z0)`` is checked on every trajectory.
    Failed runs are reported, not raised. The default integrator control is
    purely relative (negligible ``atol``): the solutions pass through
    ``|x| ~ 1e5`` and end near ``1e-13``, and an absolute floor would let the
    small late values drift.
    """
    field_ = VectorField.from_poly_map(F, "f")
    cfg = cfg or IntegratorConfig(rtol=1e-10, atol=1e-30, blowup_threshold=1e12)
    x0s = default_ic_grid(F.nvars) if x0s is None else [np.asarray(x, dtype=float) for x in x0s]
    check_identity = _is_sec42(F)
    lam = float(F.linear_coefficient) if F.linear_coefficient is not None else math.nan
    runs, completed = [], []
    ident = 0.0 if check_identity else None
    all_ok = all_decayed = True
    for t0 in t0s:
        for x0 in x0s:
            res = integrate(field_, float(t0), x0, float(t0) + window, cfg)
            entry = {"t0": float(t0), "x0": [float(v) for v in x0], "outcome": type(res).__name__}
            if isinstance(res, Completed):
                tr = res.trajectory
                completed.append(res)
                fin = float(tr.norms[-1])
                entry.update(final_norm=fin, max_norm=float(tr.norms.max()), steps=tr.steps)
                decayed = fin <= decay_threshold
                all_decayed &= decayed
                entry["decayed"] = decayed
                if check_identity:
                    e = _identity_error(tr, lam)
                    entry["identity_error"] = e
                    ident = max(ident, e)
            else:
                all_ok = all_decayed = False
                entry["t_stop"] = float(getattr(res, "t_star", getattr(res, "t", math.nan)))
            runs.append(entry)
    envelope = fit_gnuas_envelope(completed, search) if completed else None
    dominates = None
    if isinstance(envelope, EnvelopeFit):
        dominates = True
        for res in completed:
            tr = res.trajectory
            bound = envelope.K * envelope.theta(tr.t0) * np.linalg.norm(tr.x0) * np.exp(-envelope.alpha * (tr.times - tr.t0))
            # the fit works in logarithms; allow for the rounding of exp(log K)
            dominates &= bool(np.all(tr.norms <= bound * (1 + 1e-12)))
    return GnuasReport(tuple(runs), all_ok, all_decayed, decay_threshold, ident, identity_tol, envelope, dominates)


# ---------------------------------------------------------------------------
# constant solutions of shift-conjugated systems


@dataclass(frozen=True)
class ConstantSolutionReport:
    status: str  # pass | fail | premise_failure
    z0: tuple
    g_zero_exact: bool | None
    max_deviation: float | None
    tol: float
    window: tuple[float, float]
    envelope: object
    details: dict

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "z0": [str(v) if isinstance(v, Fraction) else float(v) for v in self.z0],
            "G(t,0)_is_zero_exactly": self.g_zero_exact,
            "max_deviation": self.max_deviation,
            "tol": self.tol,
            "window": list(self.window),
            "envelope": None if self.envelope is None else self.envelope.to_json(),
            "details": self.details,
        }


def _fraction(v) -> Fraction:
    return Fraction(v) if isinstance(v, (int, float, Fraction)) else Fraction(str(v))


def constant_solution_check(family, x, y, window: tuple[float, float] = (0.0, 20.0), tol: float = 1e-6,
                            probe_step: float = 0.5, cfg: IntegratorConfig | None = None) -> ConstantSolutionReport:
    """``G(t, z) = F_t(z + x) - F_t(x)`` has the constant solution ``z = y - x`` when ``F_t(x) = F_t(y)``.

    ``family`` is a :class:`ParamFamily` or a :class:`ParamPolyMap`. The
    premise is checked on the probe times of ``window`` (exactly for
    polynomial maps); the solution from ``z0 = y - x`` must stay within
    ``tol`` of ``z0`` and a GNUAS envelope fit must fail.
    """
    x = tuple(_fraction(v) for v in np.atleast_1d(np.asarray(x, dtype=object)))
    y = tuple(_fraction(v) for v in np.atleast_1d(np.asarray(y, dtype=object)))
    if x == y:
        raise ValueError("need x != y")
    if isinstance(family, ParamPolyMap):
        fam = ParamFamily("map", family.nvars, lambda t, v, F=family: np.asarray(F(t, v), dtype=float), exact_map=family)
    else:
        fam = family
    a, b = map(float, window)
    probe = np.arange(a, b + probe_step / 2, probe_step)
    z0 = tuple(q - p for p, q in zip(x, y))
    for t in probe:
        eq = fam.exact_equal(float(t), x, y) if fam.exact_map is not None else None
        if eq is None:
            fx, fy = fam(t, [float(v) for v in x]), fam(t, [float(v) for v in y])
            eq = bool(np.allclose(fx, fy, rtol=1e-12, atol=0))
        if not eq:
            return ConstantSolutionReport("premise_failure", z0, None, None, tol, (a, b), None,
                                          {"t": float(t), "reason": "F_t(x) != F_t(y)"})
    if fam.exact_map is not None:
        sc = shift_conjugate(fam.exact_map, x, y)
        G = sc.map
        g0 = all(p.is_zero for p in substitute_state(G, [0] * G.nvars))
        field_ = VectorField.from_poly_map(G, "shift_conjugate")
        kind = "exact shift conjugate"
    else:
        xf = np.array([float(v) for v in x])
        fx0 = lambda t: fam(t, xf)  # noqa: E731
        field_ = VectorField.closed_form(lambda t, z: fam(t, z + xf) - fx0(t), fam.dimension, "shift_conjugate")
        g0 = bool(all(np.all(field_(t, np.zeros(fam.dimension)) == 0) for t in probe))
        kind = "numerical shift conjugate"
    z0f = np.array([float(v) for v in z0])
    res = integrate(field_, a, z0f, b, cfg or IntegratorConfig())
    if not isinstance(res, Completed):
        return ConstantSolutionReport("fail", z0, g0, None, tol, (a, b), None,
                                      {"reason": f"integration stopped: {type(res).__name__}", "construction": kind})
    tr = res.trajectory
    dev = float(np.max(np.linalg.norm(tr.states - z0f, axis=1)))
    env = fit_gnuas_envelope([tr])
    ok = bool(g0) and dev <= tol and isinstance(env, Violation)
    return ConstantSolutionReport("pass" if ok else "fail", z0, g0, dev, tol, (a, b), env,
                                  {"construction": kind, "samples": len(tr)})


# ---------------------------------------------------------------------------
# worked examples


@dataclass(frozen=True)
class ExampleReport:
    example: str
    checks: tuple[dict, ...]
    data: dict

    @property
    def passed(self) -> bool:
        return all(c["passed"] is not False for c in self.checks)

    def to_json(self) -> dict:
        return {"example": self.example, "passed": self.passed, "checks": list(self.checks), "data": self.data}

    def summary(self) -> str:
        lines = [f"example {self.example}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            mark = {True: "ok  ", False: "FAIL", None: "info"}[c["passed"]]
            lines.append(f"  [{mark}] {c['id']}: {c['summary']}")
        return "\n".join(lines)


def _check(cid: str, passed, summary: str, **details) -> dict:
    return {"id": cid, "passed": passed, "summary": summary, "details": details}


def _verdicts(family: ParamFamily, notions, cfg: SearchConfig) -> tuple[list, dict]:
    vs = [test_injectivity(family, n, cfg) for n in notions]
    return vs, {v.notion: v.to_json() for v in vs}


def _reproduce_42() -> ExampleReport:
    checks, data = [], {}
    M = catalog.sec42_map(-1)
    N = formal_inverse(M)
    printed = catalog.sec42_printed_inverse(-1)
    mn, nm = compose(M, N), compose(N, M)
    checks.append(_check("inverse_composition", mn.is_identity() and nm.is_identity(),
                         "M o N = N o M = identity by exact polynomial composition"))
    checks.append(_check("inverse_matches_printed", N == printed, "computed inverse equals the printed N_t after expansion",
                         printed_composes_to_identity=compose(M, printed).is_identity()))
    data["inverse"] = N.to_json()
    H = M.nonlinear_part()
    JH = jacobian(H)
    nil = is_nilpotent(JH, 3)
    sq = JH @ JH
    checks.append(_check("nilpotency", nil.nilpotent and nil.index == 3 and not sq.is_zero,
                         f"(JH)^3 = 0 exactly, (JH)^2 != 0, index {nil.index}"))
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        t = float(rng.uniform(0, 10))
        w = rng.uniform(-3, 3, 3)
        num = jh_norm(H, t, w)
        ref = math.sqrt(18) * math.exp(-t) * max(w[1] ** 2, (w[0] + w[2]) ** 2)
        worst = max(worst, abs(num - ref) / ref)
    checks.append(_check("operator_norm_identity", worst <= 1e-10,
                         f"||JH(t,w)|| = sqrt(18) e^-t max(w2^2, (w1+w3)^2) on 100 samples, max rel err {worst:.2e}",
                         max_relative_error=worst))
    om = PiecewiseSignal.constant([0.0, 1.0, 0.0], "omega_(0,1,0)")
    iv = condition_iv_threshold(M, om, 0.5, 0.0)
    expect = -0.5 * math.log(0.25 / 18)
    checks.append(_check("T_omega", abs(iv.T_omega - expect) <= 1e-9 and iv.max_violation <= 0,
                         f"T_omega = {iv.T_omega:.10f} (expected {expect:.10f}), bound holds on [T_omega, 50]",
                         certificate=iv.to_json()))
    hyp = check_hypotheses(M, cfg=HypothesisConfig(g3_horizon=20.0, horizon=30.0, iv_step=0.02))
    checks.append(_check("hypotheses", hyp.overall == "pass", "conditions (i)-(iv), G1 probe, G2, G3* on the signal suite",
                         report=hyp.to_json()))
    lin0 = linearize_along(M, PiecewiseSignal.constant([0.0, 0.0, 0.0], "zero"))
    uni = check_uniform_fit(build_norm_grid(lin0, 20.0, 0.5))
    checks.append(_check("uniform_linearisation_at_0", uni.feasible, "linearisation along 0 is uniformly stable",
                         result=uni.to_json()))
    g = verify_gnuas(M)
    env = g.envelope
    checks.append(_check("gnuas_ensemble", g.passed,
                         f"27 initial data x t0 in {{0,5,10}} decay below 1e-6 by t0+40; x+z identity max rel err "
                         f"{g.identity_max_error:.2e}; envelope {'fitted' if isinstance(env, EnvelopeFit) else 'not fitted'}",
                         report={k: v for k, v in g.to_json().items() if k != "runs"}))
    return ExampleReport("4.2", tuple(checks), data)


def _reproduce_33() -> ExampleReport:
    checks, data = [], {}
    F = catalog.example_3_3_map()
    G = formal_inverse(F)
    checks.append(_check("inverse_composition", compose(F, G).is_identity() and compose(G, F).is_identity(),
                         "formal inverse composes to the identity on both sides"))
    (u, v, w), ps = variables(3, ("s",))
    s = ps["s"]
    g1 = -u - s * (u + v + s * (u + w) ** 3) ** 3
    checks.append(_check("derived_G1", G.coordinates[0] == g1, "G1 = -u - s(u + v + s(u + w)^3)^3"))
    printed = catalog.example_3_3_printed_inverse()
    ok_r, ok_l = compose(F, printed).is_identity(), compose(printed, F).is_identity()
    checks.append(_check("printed_inverse", None,
                         "printed inverse " + ("satisfies" if ok_r and ok_l else "does not satisfy") + " F o G = id",
                         right_inverse=ok_r, left_inverse=ok_l, equals_computed=printed == G))
    nil = is_nilpotent(jacobian(F.nonlinear_part()), 3)
    checks.append(_check("nilpotency", nil.nilpotent, f"JH nilpotent, index {nil.index}"))
    fam = builtin_family("example_3_3")
    cfg = SearchConfig()
    vs, js = _verdicts(fam, ("eventual", "partial"), cfg)
    checks.append(_check("eventual", vs[0].outcome == "Holds", f"eventual: {vs[0].outcome} ({vs[0].basis})"))
    audit = implication_audit(vs)
    checks.append(_check("implication_audit", audit.consistent, "verdicts consistent with the implications",
                         audit=audit.to_json()))
    data["inverse"] = G.to_json()
    data["verdicts"] = js
    return ExampleReport("3.3", tuple(checks), data)


def _reproduce_32() -> ExampleReport:
    checks = []
    fam = builtin_family("example_3_2")
    cfg = SearchConfig()
    vs, js = _verdicts(fam, ("partial", "pseudo_partial"), cfg)
    checks.append(_check("partial", vs[0].outcome == "Falsified" and verify_witness(fam, vs[0], cfg),
                         f"partial: {vs[0].outcome}"))
    checks.append(_check("pseudo_partial", vs[1].outcome == "Holds", f"pseudo_partial: {vs[1].outcome}"))
    audit = implication_audit(vs)
    checks.append(_check("implication_audit", audit.consistent, "verdicts consistent with the implications",
                         audit=audit.to_json()))
    cs = constant_solution_check(fam, (Fraction(25),), (Fraction(26),), (0.0, 20.0))
    checks.append(_check("constant_solution", cs.passed,
                         "for x, y > 20 the shifted system keeps z = y - x constant on [0, 20]", report=cs.to_json()))
    return ExampleReport("3.2", tuple(checks), {"verdicts": js})


def _reproduce_34() -> ExampleReport:
    checks, data = [], {}
    fam = builtin_family("example_3_4", lambda0=-4.0, a=-1.0)
    cfg = SearchConfig()
    vs, js = _verdicts(fam, NOTIONS_34, cfg)
    by = {v.notion: v for v in vs}
    checks.append(_check("partial", by["partial"].outcome == "Holds", f"partial: {by['partial'].outcome}"))
    checks.append(_check("eventual", by["eventual"].outcome == "Falsified", f"eventual: {by['eventual'].outcome}",
                         witness=by["eventual"].witness))
    audit = implication_audit(vs)
    checks.append(_check("implication_audit", audit.consistent, "verdicts consistent with the implications",
                         audit=audit.to_json()))
    data["verdicts"] = js
    field_ = catalog.example_3_4_field(-4.0, -1.0)
    ts = np.arange(0.0, 30.0 + 1e-9, 0.5)
    worst = 0.0
    for t, phi in transition_matrix(field_, 0.0, ts):
        worst = max(worst, abs(phi[0, 0] / catalog.example_3_4_phi(t, 0.0) - 1))
    checks.append(_check("transition_accuracy", worst <= 1e-7, f"Phi(t,0) vs closed form, max rel err {worst:.2e}"))
    fits = {}
    for lam0 in (-4.0, -2.0):
        lb = catalog.example_3_4_lower_bound(lam0, -1.0)
        grid = build_norm_grid(catalog.example_3_4_field(lam0, -1.0), lower_bound=lb)
        res = fit_stability_certificate(grid)
        uni = check_uniform_fit(grid)
        fits[str(lam0)] = {"fit": res.to_json(), "uniform": uni.to_json()}
        if lam0 == -4.0:
            ok = isinstance(res, DichotomyCertificate) and 1.8 <= res.eps <= 2.2 and not uni.feasible
            summ = (f"lambda0=-4: eps = {res.eps:.3f}, alpha = {res.alpha:.3f}" if isinstance(res, DichotomyCertificate)
                    else "lambda0=-4: infeasible") + f"; uniform fit {'feasible' if uni.feasible else 'infeasible'}"
        else:
            ok = not isinstance(res, DichotomyCertificate)
            summ = f"lambda0=-2: {'infeasible' if ok else 'feasible'}; {lb.description}"
        checks.append(_check(f"certificate_lambda0_{lam0:g}", ok, summ))
    data["certificates"] = fits
    return ExampleReport("3.4", tuple(checks), data)


NOTIONS_34 = ("partial", "pseudo_partial", "eventual", "pseudo_eventual")


def reproduce_example(example: str) -> ExampleReport:
    """Run the checks belonging to one worked example (``"3.2"``, ``"3.3"``, ``"3.4"`` or ``"4.2"``)."""
    runners = {"3.2": _reproduce_32, "3.3": _reproduce_33, "3.4": _reproduce_34, "4.2": _reproduce_42}
    if example not in runners:
        raise ValueError(f"unknown example {example!r}; choose from {EXAMPLES}")
    return runners[example]()
