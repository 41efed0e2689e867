"""Fitting nonuniform exponential stability/dichotomy certificates from sampled transition norms.

A bound ``||Phi(t,s)|| <= K exp(-alpha (t-s) + eps s)`` can always be met on a
finite grid by inflating ``K``. A pair ``(alpha, eps)`` is therefore accepted
only when the implied constant stops growing with the horizon: with
``r = log||Phi|| + alpha (t-s) - eps s``, the maximum of ``r`` over all samples
may exceed its maximum over samples ending before ``split`` by at most
``growth_tol``. ``K`` is then ``exp(max(0, max r))``, so every sample holds
with slack ``>= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels
from .odeint import IntegratorConfig, Trajectory, VectorField, pairwise_transitions

__all__ = [
    "NormSampleGrid",
    "build_norm_grid",
    "CertificateSearch",
    "Projector",
    "DichotomyCertificate",
    "Infeasible",
    "UniformFitReport",
    "fit_stability_certificate",
    "check_uniform_fit",
    "SpectrumScan",
    "SpectrumEstimate",
    "BoundedGrowth",
    "estimate_spectrum",
    "PreconditionViolated",
    "roughness_predict",
    "extend_certificate",
    "validate_certificate",
    "EnvelopeFit",
    "Violation",
    "fit_gnuas_envelope",
    "ComparisonFunctionSample",
    "ComparisonCheck",
    "validate_comparison_function",
    "STRICT_MARGIN",
]

STRICT_MARGIN = 1e-6
LOGK_MAX = 700.0  # keeps K = exp(log K) a finite double


# ---------------------------------------------------------------------------
# samples


@dataclass(frozen=True)
class NormSampleGrid:
    """Samples ``(t, s, ||Phi(t, s)||)`` with ``t >= s >= 0``.

    ``split`` is the time separating the reference samples (``t <= split``)
    from the late ones used to detect horizon growth; it defaults to half the
    horizon and is kept when samples are added.
    """

    t: np.ndarray
    s: np.ndarray
    norm: np.ndarray
    system_id: str = ""
    split: float | None = None
    metadata: dict = field(default_factory=dict)
    lower_bound: object | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).ravel()
        s = np.asarray(self.s, dtype=float).ravel()
        nrm = np.asarray(self.norm, dtype=float).ravel()
        if not (t.size == s.size == nrm.size) or t.size == 0:
            raise ValueError("grid needs equally many t, s and norm values (at least one)")
        if not np.all(np.isfinite(nrm)) or np.any(nrm <= 0):
            raise ValueError("norms must be finite and positive")
        if np.any(t < s) or np.any(s < 0):
            raise ValueError("samples need t >= s >= 0")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "norm", nrm)
        if self.split is None:
            object.__setattr__(self, "split", float(t.min() + (t.max() - t.min()) / 2))

    @classmethod
    def from_entries(cls, entries, system_id: str = "", split: float | None = None, **kw) -> "NormSampleGrid":
        arr = np.asarray(list(entries), dtype=float).reshape(-1, 3)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], system_id, split, **kw)

    @property
    def entries(self) -> list[tuple[float, float, float]]:
        return list(zip(self.t.tolist(), self.s.tolist(), self.norm.tolist()))

    @property
    def horizon(self) -> float:
        return float(self.t.max())

    def __len__(self) -> int:
        return self.t.size

    def with_entries(self, extra) -> "NormSampleGrid":
        arr = np.asarray(list(extra), dtype=float).reshape(-1, 3)
        return replace(self, t=np.concatenate([self.t, arr[:, 0]]), s=np.concatenate([self.s, arr[:, 1]]),
                       norm=np.concatenate([self.norm, arr[:, 2]]))


def _grid_points(horizon: float, step: float) -> np.ndarray:
    n = int(round(horizon / step))
    return np.linspace(0.0, n * step, n + 1)


def build_norm_grid(field_: VectorField, horizon: float = 50.0, step: float = 0.5,
                    cfg: IntegratorConfig | None = None, lower_bound=None) -> NormSampleGrid:
    """Sample ``||Phi(t, s)||`` (spectral norm) for every grid pair ``t >= s`` on ``[0, horizon]``."""
    pts = _grid_points(horizon, step)
    P = pairwise_transitions(field_, pts, cfg)
    j, i = np.tril_indices(len(pts))
    norms = np.linalg.norm(P[j, i], ord=2, axis=(1, 2))
    return NormSampleGrid(pts[j], pts[i], norms, field_.name, horizon / 2,
                          {"horizon": horizon, "step": step, "dimension": field_.dimension}, lower_bound)


@dataclass(frozen=True)
class _Samples:
    logn: np.ndarray
    d: np.ndarray
    tau: np.ndarray
    late: np.ndarray
    split: float

    def growth(self, alpha: float, eps: float) -> tuple[float, float, int]:
        """``(max r, max r - max early r, argmax)``."""
        mx, i, me = _kernels.envelope_max(self.logn, self.d, self.tau, self.late, float(alpha), float(eps), float(self.split))
        return mx, mx - me, int(i)


def _stable_samples(grid: NormSampleGrid) -> _Samples:
    return _Samples(np.log(grid.norm), grid.t - grid.s, grid.s, grid.t, float(grid.split))


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class CertificateSearch:
    """Search box and refinement for the lexicographic fit.

    Both parameters are scanned on a coarse grid (``eps_step``,
    ``alpha_step``) and then refined by bisection to ``tol``.
    """

    alpha_range: tuple[float, float] = (0.0, 50.0)
    eps_range: tuple[float, float] = (0.0, 10.0)
    eps_step: float = 0.05
    alpha_step: float = 0.05
    tol: float = 1e-4
    growth_tol: float = 0.02
    margin: float = STRICT_MARGIN

    def __post_init__(self):
        if self.alpha_range[0] > self.alpha_range[1] or self.eps_range[0] > self.eps_range[1]:
            raise ValueError("empty search range")
        if min(self.eps_step, self.alpha_step, self.tol) <= 0:
            raise ValueError("steps and tolerance must be positive")


@dataclass(frozen=True)
class Projector:
    rank: int
    kind: str  # identity | zero | declared_splitting

    def to_json(self) -> dict:
        return {"rank": self.rank, "kind": self.kind}


@dataclass(frozen=True)
class DichotomyCertificate:
    """``||Phi(t,s) P(s)|| <= K exp(-alpha (t-s) + eps s)`` on ``[T, inf)``.

    ``max_slack`` is the worst (smallest) margin ``log(K e^{...}) - log||Phi||``
    over the fitted samples; it is ``>= 0`` by construction.
    """

    K: float
    alpha: float
    eps: float
    projector: Projector = Projector(0, "identity")
    interval: tuple[float, float | None] = (0.0, None)
    max_slack: float = 0.0
    system_id: str = ""
    active_sample: tuple[float, float, float] | None = None

    def __post_init__(self):
        if not self.K >= 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0 <= self.eps < self.alpha:
            raise ValueError(f"need 0 <= eps < alpha, got eps={self.eps}, alpha={self.alpha}")

    @property
    def uniform(self) -> bool:
        return self.eps == 0

    def bound(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        return self.K * np.exp(-self.alpha * (t - s) + self.eps * s)

    def to_json(self) -> dict:
        T, end = self.interval
        return {
            "status": "certificate",
            "K": self.K,
            "alpha": self.alpha,
            "eps": self.eps,
            "projector": self.projector.to_json(),
            "interval": [T, "inf" if end is None else end],
            "max_slack": self.max_slack,
            "system_id": self.system_id,
            "active_sample": None if self.active_sample is None else list(self.active_sample),
        }


@dataclass(frozen=True)
class Infeasible:
    """No ``(alpha, eps)`` in the search box with ``eps < alpha`` passed the growth test.

    ``best`` is the least-violating candidate found, ``witness`` the sample
    where its envelope keeps growing, and ``lower_bound`` an analytic witness
    supplied with the grid, if any.
    """

    reason: str
    best_alpha: float
    best_eps: float
    growth_excess: float
    witness: tuple[float, float, float]
    lower_bound: object | None = None
    system_id: str = ""
    ok: bool = field(default=False, init=False)

    def to_json(self) -> dict:
        lb = self.lower_bound
        return {
            "status": "infeasible",
            "reason": self.reason,
            "best_candidate": {"alpha": self.best_alpha, "eps": self.best_eps, "growth_excess": self.growth_excess},
            "witness_sample": {"t": self.witness[0], "s": self.witness[1], "norm": self.witness[2]},
            "lower_bound_witness": None if lb is None else lb.to_json(),
            "system_id": self.system_id,
        }


def _bisect(feasible, bad: float, good: float, tol: float) -> float:
    """Boundary between an infeasible and a feasible value; returns the feasible side."""
    while abs(good - bad) > tol:
        mid = 0.5 * (good + bad)
        if feasible(mid):
            good = mid
        else:
            bad = mid
    return good


def _lexicographic_fit(S: _Samples, search: CertificateSearch, strict: bool = True, eps_fixed: float | None = None):
    """Minimise eps, then maximise alpha. Returns ``(alpha, eps)`` or ``(None, best)``."""
    a_lo, a_hi = search.alpha_range
    growth_tol = search.growth_tol

    def alpha_floor(e):
        return max(e + search.margin, a_lo) if strict else a_lo

    def ok(a, e):
        if a > a_hi or a <= 0 and strict:
            return False
        mx, excess, _ = S.growth(a, e)
        return excess <= growth_tol and mx <= LOGK_MAX

    if eps_fixed is not None:
        eps_grid = np.array([eps_fixed])
    else:
        e_lo, e_hi = search.eps_range
        n = int(math.floor((e_hi - e_lo) / search.eps_step + 1e-9))
        eps_grid = np.append(e_lo + search.eps_step * np.arange(n + 1), e_hi) if e_lo + n * search.eps_step < e_hi else e_lo + search.eps_step * np.arange(n + 1)

    best = None
    first = None
    for k, e in enumerate(eps_grid):
        a = alpha_floor(e)
        if a > a_hi:
            break
        mx, excess, idx = S.growth(a, e)
        if best is None or excess < best[2]:
            best = (a, float(e), excess, idx)
        if excess <= growth_tol and mx <= LOGK_MAX and (a > 0 or not strict):
            first = k
            break
    if first is None:
        return None, best
    eps = float(eps_grid[first])
    if first > 0:
        eps = _bisect(lambda e: ok(alpha_floor(e), e), float(eps_grid[first - 1]), eps, search.tol)

    alpha = alpha_floor(eps)
    a = alpha
    while True:
        nxt = min(a + search.alpha_step, a_hi)
        if nxt <= a:
            break
        if ok(nxt, eps):
            a = nxt
            continue
        a = _bisect(lambda v: ok(v, eps), nxt, a, search.tol)
        break
    return (a, eps), None


def _certificate(S: _Samples, grid_t, grid_s, grid_n, alpha, eps, projector, system_id, interval=(0.0, None)):
    r = S.logn + alpha * S.d - eps * S.tau
    logK = max(0.0, float(r.max()))
    slack = logK - r
    i = int(np.argmax(r))
    return DichotomyCertificate(
        K=math.exp(logK), alpha=float(alpha), eps=float(eps), projector=projector, interval=interval,
        max_slack=float(slack.min()), system_id=system_id,
        active_sample=(float(grid_t[i]), float(grid_s[i]), float(grid_n[i])),
    )


def fit_stability_certificate(grid: NormSampleGrid, search: CertificateSearch | None = None):
    """Fit ``(K, alpha, eps)`` with ``||Phi(t,s)|| <= K exp(-alpha(t-s) + eps s)`` on every sample.

    Lexicographic objective: smallest ``eps``, then largest ``alpha`` with
    ``eps <= alpha - 1e-6``, then smallest ``K``. Returns
    :class:`DichotomyCertificate` or :class:`Infeasible`.
    """
    search = search or CertificateSearch()
    S = _stable_samples(grid)
    res, best = _lexicographic_fit(S, search)
    if res is None:
        return _infeasible(grid, best, "no (alpha, eps) with eps < alpha keeps the constant bounded over the horizon")
    alpha, eps = res
    T = float(grid.s.min())
    return _certificate(S, grid.t, grid.s, grid.norm, alpha, eps, Projector(grid.metadata.get("dimension", 1), "identity"),
                        grid.system_id, (T, None))


def _infeasible(grid: NormSampleGrid, best, reason: str) -> Infeasible:
    if best is None:
        return Infeasible(reason, math.nan, math.nan, math.inf, (math.nan, math.nan, math.nan), grid.lower_bound, grid.system_id)
    a, e, excess, idx = best
    return Infeasible(reason, float(a), float(e), float(excess),
                      (float(grid.t[idx]), float(grid.s[idx]), float(grid.norm[idx])), grid.lower_bound, grid.system_id)


@dataclass(frozen=True)
class UniformFitReport:
    feasible: bool
    result: object  # DichotomyCertificate or Infeasible

    def to_json(self) -> dict:
        return {"uniform_feasible": self.feasible, "result": self.result.to_json()}


def check_uniform_fit(grid: NormSampleGrid, search: CertificateSearch | None = None) -> UniformFitReport:
    """Same fit with ``eps`` pinned to 0 (classical uniform exponential stability)."""
    search = search or CertificateSearch()
    S = _stable_samples(grid)
    res, best = _lexicographic_fit(S, search, eps_fixed=0.0)
    if res is None:
        return UniformFitReport(False, _infeasible(grid, best, "no alpha > 0 gives a uniform (eps = 0) bound"))
    alpha, eps = res
    cert = _certificate(S, grid.t, grid.s, grid.norm, alpha, 0.0, Projector(grid.metadata.get("dimension", 1), "identity"),
                        grid.system_id, (float(grid.s.min()), None))
    return UniformFitReport(True, cert)


def validate_certificate(cert: DichotomyCertificate, grid: NormSampleGrid) -> float:
    """Worst log-slack of ``cert`` on ``grid`` (``>= 0`` means every sample is dominated)."""
    lhs = np.log(grid.norm)
    rhs = math.log(cert.K) - cert.alpha * (grid.t - grid.s) + cert.eps * grid.s
    return float((rhs - lhs).min())


# ---------------------------------------------------------------------------
# roughness and extension


class PreconditionViolated(ValueError):
    pass


def roughness_predict(cert: DichotomyCertificate, delta: float, eps_pert: float | None = None) -> DichotomyCertificate:
    """Certificate ``(K, alpha - delta K, eps)`` for ``A + B`` with ``||B(t)|| <= delta exp(-eps t)``.

    Requires ``delta < alpha / K``. A perturbation bound with a decay rate
    ``eps_pert`` below ``cert.eps`` does not meet the hypothesis.
    """
    if delta < 0:
        raise PreconditionViolated("delta must be nonnegative")
    if not delta < cert.alpha / cert.K:
        raise PreconditionViolated(f"need delta < alpha/K = {cert.alpha / cert.K:.6g}, got delta = {delta:g}")
    if eps_pert is not None and eps_pert < cert.eps:
        raise PreconditionViolated(f"perturbation decay rate {eps_pert:g} is below the certificate's eps = {cert.eps:g}")
    new_alpha = cert.alpha - delta * cert.K
    if not cert.eps < new_alpha:
        raise PreconditionViolated(
            f"degraded rate alpha - delta K = {new_alpha:.6g} does not exceed eps = {cert.eps:g}; "
            "the predicted bound is not a nonuniform exponential stability certificate"
        )
    return replace(cert, alpha=new_alpha, max_slack=0.0, active_sample=None)


def extend_certificate(cert: DichotomyCertificate, L: float) -> DichotomyCertificate:
    """Certificate on ``[T, inf)`` to one on ``[0, inf)``: ``K' = L K exp(alpha T)``.

    ``L`` bounds ``||Phi(t,s) P(s)||`` on ``0 <= s <= t <= T``.
    """
    if not math.isfinite(L) or L <= 0:
        raise ValueError("L must be a finite positive bound")
    T = cert.interval[0]
    K = L * cert.K * math.exp(cert.alpha * T)
    return replace(cert, K=max(K, 1.0), interval=(0.0, None), max_slack=0.0, active_sample=None)


# ---------------------------------------------------------------------------
# spectrum


@dataclass(frozen=True)
class SpectrumScan:
    """``lam`` scan: coarse grid on ``range`` then bisection of interval ends to ``tol``.

    A shifted system counts as resolvent only with a certificate whose
    ``alpha`` exceeds ``eps`` by at least ``margin``.
    """

    range: tuple[float, float] = (-10.0, 10.0)
    coarse_step: float = 0.05
    tol: float = 1e-3
    margin: float = 2e-3
    eps_max: float = 10.0
    eps_step: float = 0.1
    growth_tol: float = 0.02


@dataclass(frozen=True)
class BoundedGrowth:
    """Sampled ``||Phi(t,s)|| <= M exp(nu (t-s) + delta s)``."""

    M: float
    nu: float
    delta: float

    def to_json(self) -> dict:
        return {"M": self.M, "nu": self.nu, "delta": self.delta}


@dataclass(frozen=True)
class SpectrumEstimate:
    intervals: tuple[tuple[float, float], ...]
    left_unbounded: bool
    right_unbounded: bool
    confidence: str  # high | low
    scan: SpectrumScan
    horizon: float
    step: float
    method: str
    exponent_range: tuple[float, float]
    bounded_growth: BoundedGrowth | None = None
    notes: tuple[str, ...] = ()

    @property
    def midpoints(self) -> list[float]:
        return [(a + b) / 2 for a, b in self.intervals]

    def contains(self, lam: float) -> bool:
        """Membership up to the bisection tolerance of the endpoints."""
        tol = self.scan.tol
        return any(a - tol <= lam <= b + tol for a, b in self.intervals)

    def to_json(self) -> dict:
        return {
            "intervals": [list(iv) for iv in self.intervals],
            "left_unbounded": self.left_unbounded,
            "right_unbounded": self.right_unbounded,
            "confidence": self.confidence,
            "exponent_range": list(self.exponent_range),
            "method": self.method,
            "scan": {"range": list(self.scan.range), "coarse_step": self.scan.coarse_step, "tol": self.scan.tol,
                     "margin": self.scan.margin},
            "horizon": self.horizon,
            "step": self.step,
            "bounded_growth": None if self.bounded_growth is None else self.bounded_growth.to_json(),
            "notes": list(self.notes),
        }


class _Channel:
    """One scalar exponent channel with stable and reverse-time samples."""

    def __init__(self, logphi, d, s_early, t_late, split, scan: SpectrumScan):
        self.L = np.ascontiguousarray(logphi)
        self.d = np.ascontiguousarray(d)
        self.s = np.ascontiguousarray(s_early)
        self.t = np.ascontiguousarray(t_late)
        self.split = float(split)
        self.scan = scan
        n = int(math.floor(scan.eps_max / scan.eps_step + 1e-9))
        self.eps = scan.eps_step * np.arange(n + 1)
        self._cache: dict[float, str] = {}

    def _ok(self, base, tau) -> bool:
        mu, tol = self.scan.margin, self.scan.growth_tol
        for eps in self.eps:
            mx, _, me = _kernels.envelope_max(base, self.d, tau, self.t, float(eps + mu), float(eps), self.split)
            if mx - me <= tol:
                return True
        return False

    def label(self, lam: float) -> str:
        key = float(lam)
        if key in self._cache:
            return self._cache[key]
        stable = self._ok(self.L - lam * self.d, self.s)
        unstable = self._ok(-self.L + lam * self.d, self.t)
        out = "spectral" if stable == unstable else ("stable" if stable else "unstable")
        self._cache[key] = out
        return out


def _edge(ch: _Channel, resolvent: float, spectral: float, tol: float) -> float:
    while abs(resolvent - spectral) > tol:
        mid = 0.5 * (resolvent + spectral)
        if ch.label(mid) == "spectral":
            spectral = mid
        else:
            resolvent = mid
    return spectral


def _channel_intervals(ch: _Channel, scan: SpectrumScan):
    lo, hi = scan.range
    n = int(round((hi - lo) / scan.coarse_step))
    lams = np.linspace(lo, hi, n + 1)
    labels = [ch.label(l) for l in lams]
    out = []
    left_unb = right_unb = False
    i = 0
    while i < len(lams):
        if labels[i] == "spectral":
            j = i
            while j + 1 < len(lams) and labels[j + 1] == "spectral":
                j += 1
            if i == 0:
                a, left_unb = lo, True
            else:
                a = _edge(ch, lams[i - 1], lams[i], scan.tol)
            if j == len(lams) - 1:
                b, right_unb = hi, True
            else:
                b = _edge(ch, lams[j + 1], lams[j], scan.tol)
            out.append((float(a), float(b)))
            i = j + 1
            continue
        if i + 1 < len(lams) and labels[i + 1] not in ("spectral", labels[i]):
            # the label jumps between two resolvent points: a thin spectral set lies between
            a_, b_ = float(lams[i]), float(lams[i + 1])
            found = None
            while b_ - a_ > scan.tol:
                mid = 0.5 * (a_ + b_)
                lab = ch.label(mid)
                if lab == "spectral":
                    found = mid
                    break
                if lab == labels[i]:
                    a_ = mid
                else:
                    b_ = mid
            if found is None:
                out.append((a_, b_))
            else:
                out.append((_edge(ch, a_, found, scan.tol), _edge(ch, b_, found, scan.tol)))
        i += 1
    return out, left_unb, right_unb


def _merge(intervals, tol):
    out = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1] + tol:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def estimate_spectrum(field_: VectorField, scan: SpectrumScan | None = None, horizon: float = 50.0, step: float = 0.5,
                      cfg: IntegratorConfig | None = None) -> SpectrumEstimate:
    """Approximate the dichotomy spectrum of ``x' = A(t) x`` on ``[0, horizon]``.

    ``lam`` is resolvent when the shifted system ``x' = (A - lam I) x``
    admits a stable certificate (decay forward) or an unstable one (decay in
    reverse time). Diagonal fields are split per coordinate (confidence
    ``high``); coupled fields use the singular values of ``Phi(t, s)`` as
    exponent channels (confidence ``low``). The shift needs no re-integration
    since ``Phi_lam(t, s) = exp(-lam (t-s)) Phi(t, s)``.

    Also reported: the range of finite-time exponents
    ``log||Phi(t, 0)|| / t`` per channel over ``t`` in the second half of the
    horizon, and a sampled half bounded growth bound.
    """
    if field_.matrix is None:
        raise ValueError("estimate_spectrum needs a linear field")
    scan = scan or SpectrumScan()
    pts = _grid_points(horizon, step)
    P = pairwise_transitions(field_, pts, cfg)
    j, i = np.tril_indices(len(pts))
    d = pts[j] - pts[i]
    n = field_.dimension
    if field_.diagonal or n == 1:
        logs = [np.log(np.abs(P[j, i, k, k])) for k in range(n)]
        method, confidence = "per-coordinate", "high"
    else:
        sv = np.linalg.svd(P[j, i], compute_uv=False)
        logs = [np.log(sv[:, k]) for k in range(n)]
        method, confidence = "singular-value channels", "low"
    split = horizon / 2
    raw, left_unb, right_unb = [], False, False
    late = (i == 0) & (pts[j] >= split)
    exps = np.concatenate([L[late] / d[late] for L in logs])
    exponent_range = (float(exps.min()), float(exps.max()))
    for L in logs:
        ch = _Channel(L, d, pts[i], pts[j], split, scan)
        iv, lu, ru = _channel_intervals(ch, scan)
        raw.extend(iv)
        left_unb |= lu
        right_unb |= ru
    intervals = _merge(raw, scan.tol)

    norms = np.linalg.norm(P[j, i], ord=2, axis=(1, 2))
    grid = NormSampleGrid(pts[j], pts[i], norms, field_.name, split)
    growth = _bounded_growth(grid)
    notes = []
    if confidence == "low":
        notes.append("coupled system: splitting rank proposed from singular values, not certified")
    return SpectrumEstimate(tuple(intervals), left_unb, right_unb, confidence, scan, horizon, step, method,
                            exponent_range, growth, tuple(notes))


def _bounded_growth(grid: NormSampleGrid, nu_max: float = 50.0, delta_max: float = 10.0,
                    step: float = 0.05, tol: float = 1e-4, growth_tol: float = 0.02) -> BoundedGrowth | None:
    """Smallest ``nu >= 0``, then smallest ``delta >= 0``, with a horizon-stable ``M``."""
    S = _stable_samples(grid)

    def ok(nu, delta):
        return S.growth(-nu, delta)[1] <= growth_tol

    def smallest(pred, hi):
        if pred(0.0):
            return 0.0
        v = step
        while v <= hi:
            if pred(v):
                return _bisect(pred, v - step, v, tol)
            v += step
        return None

    nu = smallest(lambda v: ok(v, delta_max), nu_max)
    if nu is None:
        return None
    delta = smallest(lambda v: ok(nu, v), delta_max)
    r = S.logn - nu * S.d - delta * S.tau
    return BoundedGrowth(math.exp(max(0.0, float(r.max()))), float(nu), float(delta))


# ---------------------------------------------------------------------------
# GNUAS envelopes


@dataclass(frozen=True)
class EnvelopeFit:
    """``|x(t)| <= K exp(eps t0) |x0| exp(-alpha (t - t0))`` on every sample."""

    K: float
    alpha: float
    eps: float
    n_trajectories: int
    n_samples: int
    max_slack: float
    ok: bool = field(default=True, init=False)

    def beta(self, r, tau):
        """The class-KL part ``K r exp(-alpha tau)``."""
        return self.K * np.asarray(r, dtype=float) * np.exp(-self.alpha * np.asarray(tau, dtype=float))

    def theta(self, t0):
        return np.exp(self.eps * np.asarray(t0, dtype=float))

    def to_json(self) -> dict:
        return {
            "status": "envelope",
            "form": "|x(t)| <= K*exp(eps*t0)*|x0|*exp(-alpha*(t-t0))",
            "K": self.K, "alpha": self.alpha, "eps": self.eps,
            "n_trajectories": self.n_trajectories, "n_samples": self.n_samples, "max_slack": self.max_slack,
        }


@dataclass(frozen=True)
class Violation:
    """No envelope fits. ``sample`` is where the least-violating candidate keeps growing."""

    trajectory_index: int
    sample: tuple[float, float]
    candidate: tuple[float, float]
    non_decay: dict | None
    ok: bool = field(default=False, init=False)

    def to_json(self) -> dict:
        return {
            "status": "violation",
            "trajectory_index": self.trajectory_index,
            "sample": {"t": self.sample[0], "norm": self.sample[1]},
            "best_candidate": {"alpha": self.candidate[0], "eps": self.candidate[1]},
            "non_decay_witness": self.non_decay,
        }


def _non_decay(traj: Trajectory, index: int) -> dict | None:
    norms = traj.norms
    t = traj.times
    mid = t[0] + (t[-1] - t[0]) / 2
    at_mid = float(np.interp(mid, t, norms))
    if norms[-1] >= 0.5 * at_mid and norms[-1] > 0:
        return {"trajectory_index": index, "t_mid": float(mid), "norm_mid": at_mid,
                "t_end": float(t[-1]), "norm_end": float(norms[-1])}
    return None


def fit_gnuas_envelope(ensemble: Sequence, search: CertificateSearch | None = None):
    """Fit an exponential GNUAS envelope to an ensemble of trajectories.

    Accepts :class:`Trajectory` objects or ``Completed`` outcomes. Trajectories
    starting at the origin are skipped. Same lexicographic objective as
    :func:`fit_stability_certificate`, with ``alpha >= 0.01`` by default.
    """
    search = search or CertificateSearch(alpha_range=(0.01, 50.0))
    trajs = []
    for k, tr in enumerate(ensemble):
        if not isinstance(tr, Trajectory):
            if not getattr(tr, "ok", False):
                raise ValueError(f"ensemble member {k} did not complete: {tr!r}")
            tr = tr.trajectory
        trajs.append(tr)
    logn, d, tau, late, owner, tt, nn = [], [], [], [], [], [], []
    for k, tr in enumerate(trajs):
        n0 = float(np.linalg.norm(tr.x0))
        if n0 == 0:
            continue
        norms = tr.norms
        keep = norms > 0
        logn.append(np.log(norms[keep] / n0))
        d.append(tr.times[keep] - tr.t0)
        tau.append(np.full(keep.sum(), tr.t0))
        late.append(tr.times[keep])
        owner.append(np.full(keep.sum(), k))
        tt.append(tr.times[keep])
        nn.append(norms[keep])
    if not logn:
        return EnvelopeFit(1.0, search.alpha_range[1], 0.0, len(trajs), 0, math.inf)
    late_all = np.concatenate(late)
    t0s = np.concatenate(tau)
    split = float(t0s.min() + (late_all.max() - t0s.min()) / 2)
    S = _Samples(np.concatenate(logn), np.concatenate(d), t0s, late_all, split)
    owner = np.concatenate(owner)
    tt = np.concatenate(tt)
    nn = np.concatenate(nn)
    res, best = _lexicographic_fit(S, search)
    if res is None:
        a, e, _, idx = best
        k = int(owner[idx])
        witness = None
        for j, tr in enumerate(trajs):
            witness = _non_decay(tr, j) if np.linalg.norm(tr.x0) > 0 else None
            if witness:
                break
        return Violation(k, (float(tt[idx]), float(nn[idx])), (float(a), float(e)), witness)
    alpha, eps = res
    r = S.logn + alpha * S.d - eps * S.tau
    logK = max(0.0, float(r.max()))
    slack = float((logK - r).min())
    if slack < 0:  # cannot happen: K is the maximum
        raise AssertionError("fitted envelope violated by an input sample")
    return EnvelopeFit(math.exp(logK), float(alpha), float(eps), len(trajs), int(S.logn.size), slack)


# ---------------------------------------------------------------------------
# comparison functions


@dataclass(frozen=True)
class ComparisonFunctionSample:
    """Sampled comparison function.

    For ``K``, ``Kinf`` and ``N``: ``values[i] = f(grid[i])``. For ``KL``:
    ``values[i, j] = beta(grid[i], grid2[j])``.
    """

    grid: np.ndarray
    values: np.ndarray
    claimed: str
    grid2: np.ndarray | None = None
    divergence_threshold: float = 10.0
    decay_threshold: float = 1e-3

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.claimed not in ("K", "Kinf", "N", "KL"):
            raise ValueError(f"unknown class {self.claimed!r}")
        if self.claimed == "KL":
            g2 = np.asarray(self.grid2, dtype=float)
            if np.any(np.diff(g2) <= 0):
                raise ValueError("grid2 must be strictly increasing")
            object.__setattr__(self, "grid2", g2)


@dataclass(frozen=True)
class ComparisonCheck:
    passed: bool
    claimed: str
    violation: dict | None = None

    def to_json(self) -> dict:
        return {"class": self.claimed, "passed": self.passed, "violation": self.violation}


def _check_K(g, v, strict=False):
    if g[0] != 0:
        return {"reason": "grid does not start at 0"}
    if v[0] != 0:
        return {"reason": "f(0) != 0", "at": 0.0, "value": float(v[0])}
    if np.any(v < 0):
        k = int(np.argmax(v < 0))
        return {"reason": "negative value", "at": float(g[k]), "value": float(v[k])}
    dv = np.diff(v)
    bad = dv <= 0 if strict else dv < 0
    if np.any(bad):
        k = int(np.argmax(bad))
        return {"reason": "not strictly increasing" if strict else "decreasing", "pair": [float(g[k]), float(g[k + 1])],
                "values": [float(v[k]), float(v[k + 1])]}
    return None


def validate_comparison_function(sample: ComparisonFunctionSample) -> ComparisonCheck:
    """Check the defining properties of the claimed class on the sample grid."""
    g, v, cls = sample.grid, sample.values, sample.claimed
    viol = None
    if cls == "K":
        viol = _check_K(g, v)
    elif cls == "Kinf":
        viol = _check_K(g, v, strict=True)
        if viol is None and v[-1] < sample.divergence_threshold:
            viol = {"reason": "no divergence on the grid", "last_value": float(v[-1]),
                    "threshold": sample.divergence_threshold}
    elif cls == "N":
        if np.any(v <= 0):
            k = int(np.argmax(v <= 0))
            viol = {"reason": "value not positive", "at": float(g[k]), "value": float(v[k])}
        elif np.any(np.diff(v) < 0):
            k = int(np.argmax(np.diff(v) < 0))
            viol = {"reason": "decreasing", "pair": [float(g[k]), float(g[k + 1])], "values": [float(v[k]), float(v[k + 1])]}
    else:
        g2 = sample.grid2
        for j in range(v.shape[1]):
            sub = _check_K(g, v[:, j])
            if sub:
                viol = {"slice": "first argument", "s": float(g2[j]), **sub}
                break
        if viol is None:
            for i in range(v.shape[0]):
                row = v[i]
                if g[i] == 0:
                    continue
                if np.any(np.diff(row) >= 0):
                    k = int(np.argmax(np.diff(row) >= 0))
                    viol = {"slice": "second argument", "r": float(g[i]), "reason": "not decreasing",
                            "pair": [float(g2[k]), float(g2[k + 1])], "values": [float(row[k]), float(row[k + 1])]}
                    break
                if row[-1] > sample.decay_threshold * max(row[0], 1e-300):
                    viol = {"slice": "second argument", "r": float(g[i]), "reason": "no decay to 0 on the grid",
                            "last_value": float(row[-1])}
                    break
    return ComparisonCheck(viol is None, cls, viol)
