"""Adaptive integration of nonautonomous ODEs, transition matrices and the Bernoulli comparison solution."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .polyalg import ParamPolyMap, jacobian

__all__ = [
    "VectorField",
    "PiecewiseSignal",
    "IntegratorConfig",
    "Trajectory",
    "Completed",
    "Blowup",
    "StepFailure",
    "integrate",
    "transition_matrix",
    "pairwise_transitions",
    "linearize_along",
    "bernoulli_reference",
    "BernoulliSolution",
    "HORIZON_CAP",
]

HORIZON_CAP = 1e4
# Propagators are chained over many intervals, so local errors add up; the
# transition routines default to tighter tolerances than single trajectories.
TRANSITION_RTOL = 1e-11
TRANSITION_ATOL = 1e-14


@dataclass(frozen=True)
class PiecewiseSignal:
    """Vector signal ``omega(t)``: ``pieces[k]`` is used on ``[breakpoints[k-1], breakpoints[k])``."""

    breakpoints: tuple[float, ...]
    pieces: tuple[Callable[[float], Sequence[float]], ...]
    declared_bound: float | None = None
    label: str = "signal"

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(self.pieces) != len(bps) + 1:
            raise ValueError("need one piece per interval (len(breakpoints) + 1)")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "pieces", tuple(self.pieces))

    def __call__(self, t: float) -> np.ndarray:
        k = bisect.bisect_right(self.breakpoints, t)
        return np.asarray(self.pieces[k](t), dtype=float)

    @property
    def dimension(self) -> int:
        return int(self(0.0).size)

    @classmethod
    def constant(cls, value, label: str | None = None) -> "PiecewiseSignal":
        v = np.asarray(value, dtype=float)
        return cls((), (lambda t, v=v: v,), float(np.linalg.norm(v)), label or f"constant{[float(c) for c in v]}")

    @classmethod
    def switch(cls, times, values, label: str = "switch") -> "PiecewiseSignal":
        vals = [np.asarray(v, dtype=float) for v in values]
        return cls(tuple(times), tuple((lambda t, v=v: v) for v in vals), max(float(np.linalg.norm(v)) for v in vals), label)

    @classmethod
    def sinusoid(cls, amplitude, frequency: float = 1.0, phase=None, label: str = "sinusoid") -> "PiecewiseSignal":
        amp = np.asarray(amplitude, dtype=float)
        ph = np.zeros_like(amp) if phase is None else np.asarray(phase, dtype=float)
        return cls((), (lambda t: amp * np.sin(frequency * t + ph),), float(np.linalg.norm(amp)), label)

    def sampled_sup(self, func: Callable[[np.ndarray], float] | None = None, horizon: float = 100.0, step: float = 0.01) -> float:
        """Sup of ``func(omega(t))`` (default: the norm) on a dense grid, breakpoints included."""
        func = func or (lambda w: float(np.linalg.norm(w)))
        ts = np.union1d(np.arange(0.0, horizon + step / 2, step), [b for b in self.breakpoints if b <= horizon])
        return max(func(self(t)) for t in ts)


@dataclass
class VectorField:
    """Right-hand side ``f(t, x)`` of ``x' = f(t, x)``.

    ``source`` is ``"poly_map"``, ``"closed_form"`` or ``"linear"``; linear
    fields carry ``matrix(t)``.
    """

    dimension: int
    evaluator: Callable[[float, np.ndarray], np.ndarray]
    source: str
    name: str = ""
    poly_map: ParamPolyMap | None = None
    matrix: Callable[[float], np.ndarray] | None = None
    breakpoints: tuple[float, ...] = ()
    diagonal: bool = False

    def __call__(self, t: float, x) -> np.ndarray:
        return self.evaluator(t, np.asarray(x, dtype=float))

    @classmethod
    def from_poly_map(cls, F: ParamPolyMap, name: str = "poly_map") -> "VectorField":
        if not F.is_real:
            raise ValueError("integrate the realified map; complex coefficients are not supported")
        if F.nvars != F.dimension:
            raise ValueError("vector field must be square")
        comp = F.compiled
        return cls(F.dimension, lambda t, x: np.asarray(comp(t, x), dtype=float), "poly_map", name, poly_map=F)

    @classmethod
    def linear(cls, matrix: Callable[[float], np.ndarray], n: int, name: str = "linear", breakpoints=(), diagonal: bool = False) -> "VectorField":
        def ev(t, x):
            return np.asarray(matrix(t), dtype=float) @ x

        return cls(n, ev, "linear", name, matrix=lambda t: np.asarray(matrix(t), dtype=float).reshape(n, n), breakpoints=tuple(breakpoints), diagonal=diagonal)

    @classmethod
    def closed_form(cls, fn: Callable[[float, np.ndarray], np.ndarray], n: int, name: str) -> "VectorField":
        return cls(n, fn, "closed_form", name)

    def shifted(self, lam: float) -> "VectorField":
        """``x' = [A(t) - lam I] x`` for a linear field."""
        if self.matrix is None:
            raise ValueError("only linear fields can be shifted")
        A = self.matrix
        n = self.dimension
        return VectorField.linear(lambda t: A(t) - lam * np.eye(n), n, f"{self.name}-({lam})", self.breakpoints, self.diagonal)


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = math.inf
    blowup_threshold: float = 1e8
    sample_times: tuple[float, ...] = ()
    max_steps: int = _kernels.MAX_STEPS

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("rtol and atol must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.blowup_threshold <= 0:
            raise ValueError("blowup_threshold must be positive")
        object.__setattr__(self, "sample_times", tuple(float(s) for s in self.sample_times))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    t0: float
    x0: np.ndarray
    steps: int = 0
    rejections: int = 0

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def __len__(self) -> int:
        return len(self.times)

    def __repr__(self) -> str:
        return f"Trajectory(t0={self.t0}, t_end={float(self.times[-1])}, samples={len(self.times)}, dim={self.states.shape[1]})"


@dataclass(frozen=True)
class Completed:
    trajectory: Trajectory
    ok: bool = field(default=True, init=False)


@dataclass(frozen=True)
class Blowup:
    t_star: float
    last_norm: float
    trajectory: Trajectory
    ok: bool = field(default=False, init=False)


@dataclass(frozen=True)
class StepFailure:
    t: float
    diagnostics: str
    trajectory: Trajectory
    ok: bool = field(default=False, init=False)


def _poly_kernel_args(F: ParamPolyMap):
    comp = F.compiled
    kinds, rates, values = [], [], []
    for b in comp.bindings:
        if b.kind == "exp_decay":
            kinds.append(0)
            rates.append(float(b.rate))
            values.append(0.0)
        elif b.kind == "constant":
            kinds.append(1)
            rates.append(0.0)
            values.append(float(b.value))
        else:
            return None
    return (
        np.ascontiguousarray(comp.coeff, dtype=float),
        comp.coeff_lo,
        comp.coord,
        comp.state_exp,
        comp.param_exp,
        np.asarray(kinds, dtype=np.int64),
        np.asarray(rates, dtype=float),
        np.asarray(values, dtype=float),
        F.dimension,
    )


def _run(field_: VectorField, t0, x0, tf, cfg: IntegratorConfig, record):
    if field_.source == "poly_map" and field_.poly_map is not None:
        args = _poly_kernel_args(field_.poly_map)
        if args is not None:
            return _kernels.dopri5_poly(*args, t0, x0, tf, cfg.rtol, cfg.atol, cfg.max_step,
                                        cfg.blowup_threshold, cfg.sample_times, record, cfg.max_steps)
    ev = field_.evaluator
    if tf in field_.breakpoints:
        # stages at the segment end must see the left piece, not the next one
        t_left = math.nextafter(tf, t0)
        ev = lambda t, x, ev=field_.evaluator: ev(min(t, t_left), x)  # noqa: E731
    return _kernels.dopri5(ev, t0, x0, tf, cfg.rtol, cfg.atol, cfg.max_step,
                           cfg.blowup_threshold, cfg.sample_times, record, cfg.max_steps)


def integrate(field_: VectorField, t0: float, x0, t_f: float, cfg: IntegratorConfig | None = None):
    """Integrate with an embedded Dormand-Prince 5(4) pair.

    Samples are the accepted steps, or ``cfg.sample_times`` (dense output) when
    given. The run is restarted at every breakpoint of the field. Returns
    :class:`Completed`, :class:`Blowup` or :class:`StepFailure`.
    """
    cfg = cfg or IntegratorConfig()
    t0, t_f = float(t0), float(t_f)
    if not t_f > t0 >= 0:
        raise ValueError("need t_f > t0 >= 0")
    if t_f - t0 > HORIZON_CAP:
        raise ValueError(f"integration window exceeds the horizon cap {HORIZON_CAP}")
    x = np.array(x0, dtype=float).ravel()
    if x.size != field_.dimension:
        raise ValueError(f"initial state has {x.size} components, field has {field_.dimension}")
    cuts = [b for b in field_.breakpoints if t0 < b < t_f]
    edges = [t0, *cuts, t_f]
    record = not cfg.sample_times
    ts, xs = [t0], [x.copy()]
    steps = rej = 0
    for a, b in zip(edges, edges[1:]):
        status, t_end, ts_, xs_, ns, nr, last = _run(field_, a, xs[-1] if record else x, b, cfg, record)
        steps += ns
        rej += nr
        ts.extend(float(v) for v in ts_[1:])
        xs.extend(np.asarray(v, dtype=float) for v in xs_[1:])
        x = np.asarray(xs_[-1], dtype=float) if record else _state_at_end(field_, a, x, b, cfg, status, t_end, xs_)
        if status != _kernels.COMPLETED:
            traj = Trajectory(np.array(ts), np.array(xs), t0, np.array(x0, dtype=float).ravel(), steps, rej)
            if status == _kernels.BLOWUP:
                return Blowup(float(t_end), float(last), traj)
            if status == _kernels.STEP_BUDGET:
                return StepFailure(float(t_end), f"step budget of {cfg.max_steps} exhausted at t={t_end:.17g} "
                                                 f"with |x|={last:.6g}", traj)
            return StepFailure(float(t_end), f"step size underflow at t={t_end:.17g} with |x|={last:.6g}", traj)
    traj = Trajectory(np.array(ts), np.array(xs), t0, np.array(x0, dtype=float).ravel(), steps, rej)
    return Completed(traj)


def _state_at_end(field_, a, x, b, cfg, status, t_end, xs_):
    # with sample_times the kernel only returns samples; rerun cheaply to get x(b)
    if status != _kernels.COMPLETED:
        return x
    end_cfg = replace(cfg, sample_times=(b,))
    _, _, _, xe, _, _, _ = _run(field_, a, x, b, end_cfg, False)
    return np.asarray(xe[-1], dtype=float)


# ---------------------------------------------------------------------------
# transition matrices


def _propagator(field_: VectorField, a: float, b: float, cfg: IntegratorConfig) -> np.ndarray:
    """``Phi(b, a)`` from the matrix ODE ``Phi' = A(t) Phi``, ``Phi(a, a) = I``."""
    n = field_.dimension
    A = field_.matrix
    if A is None:
        raise ValueError("transition matrices need a linear field")
    if b == a:
        return np.eye(n)
    # linear systems cannot escape in finite time; growth is not a blow-up here
    cfg = replace(cfg, blowup_threshold=1e300)
    if field_.diagonal:
        # decoupled scalar equations: integrate each diagonal entry on its own
        out = np.zeros((n, n))
        for i in range(n):
            scalar = VectorField(1, lambda t, y, i=i: A(t)[i, i] * y, "linear", breakpoints=field_.breakpoints)
            res = integrate(scalar, a, [1.0], b, cfg)
            if not isinstance(res, Completed):
                raise RuntimeError(f"propagator failed on [{a}, {b}]: {res}")
            out[i, i] = res.trajectory.states[-1, 0]
        return out
    flat = VectorField(n * n, lambda t, y: (A(t) @ y.reshape(n, n)).ravel(), "linear", breakpoints=field_.breakpoints)
    res = integrate(flat, a, np.eye(n).ravel(), b, cfg)
    if not isinstance(res, Completed):
        raise RuntimeError(f"propagator failed on [{a}, {b}]: {res}")
    return res.trajectory.states[-1].reshape(n, n)


def transition_matrix(field_: VectorField, s: float, t_grid, cfg: IntegratorConfig | None = None):
    """``[(t, Phi(t, s)) for t in t_grid]`` with ``t_grid >= s``.

    Each grid interval is integrated from the identity and the results are
    chained, so ``Phi`` is never obtained by inverting a fundamental matrix.
    """
    cfg = cfg or IntegratorConfig(rtol=TRANSITION_RTOL, atol=TRANSITION_ATOL)
    grid = sorted(float(t) for t in t_grid)
    if grid and grid[0] < s:
        raise ValueError("t_grid must satisfy t >= s")
    n = field_.dimension
    out = []
    phi = np.eye(n)
    prev = float(s)
    for t in grid:
        if t > prev:
            phi = _propagator(field_, prev, t, cfg) @ phi
            prev = t
        out.append((t, phi.copy()))
    return out


def pairwise_transitions(field_: VectorField, grid, cfg: IntegratorConfig | None = None) -> np.ndarray:
    """``Phi[j, i] = Phi(grid[j], grid[i])`` for every pair (both time directions)."""
    cfg = cfg or IntegratorConfig(rtol=TRANSITION_RTOL, atol=TRANSITION_ATOL)
    grid = [float(g) for g in grid]
    n = field_.dimension
    N = len(grid)
    steps = [_propagator(field_, a, b, cfg) for a, b in zip(grid, grid[1:])]
    inv = [np.linalg.inv(P) for P in steps]
    out = np.empty((N, N, n, n))
    for i in range(N):
        out[i, i] = np.eye(n)
        for j in range(i + 1, N):
            out[j, i] = steps[j - 1] @ out[j - 1, i]
        for j in range(i - 1, -1, -1):
            out[j, i] = inv[j] @ out[j + 1, i]
    return out


def linearize_along(F: ParamPolyMap, omega: PiecewiseSignal) -> VectorField:
    """Linear field ``theta' = JF(t, omega(t)) theta`` (Jacobian in the state only)."""
    if omega.dimension != F.nvars:
        raise ValueError(f"signal has dimension {omega.dimension}, map has {F.nvars}")
    J = jacobian(F)
    n = F.nvars
    return VectorField.linear(lambda t: J.evaluate(t, omega(t)), n, f"linearization[{omega.label}]", omega.breakpoints)


# ---------------------------------------------------------------------------
# comparison equation v' = lam v + c v^3


@dataclass(frozen=True)
class BernoulliSolution:
    lam: float
    c: float
    v0: float
    t0: float
    blowup_time: float | None

    @property
    def global_solution(self) -> bool:
        return self.blowup_time is None

    def __call__(self, t):
        """``v(t)`` from ``w = v^-2``: ``w = (w0 - c/|lam|) exp(2|lam|(t - t0)) + c/|lam|``."""
        t = np.asarray(t, dtype=float)
        if self.v0 == 0:
            return np.zeros_like(t)
        mu = abs(self.lam)
        r = self.c / mu
        w0 = self.v0 ** -2
        w = (w0 - r) * np.exp(2 * mu * (t - self.t0)) + r
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(w > 0, 1 / np.sqrt(np.where(w > 0, w, 1.0)), np.inf)


def bernoulli_reference(lam: float, c: float, v0: float, t0: float = 0.0) -> BernoulliSolution:
    if not lam < 0 or not c > 0 or v0 < 0:
        raise ValueError("need lam < 0, c > 0, v0 >= 0")
    mu = abs(lam)
    r = c / mu
    if v0 == 0 or v0 * v0 <= mu / c:
        return BernoulliSolution(lam, c, v0, t0, None)
    w0 = v0 ** -2
    return BernoulliSolution(lam, c, v0, t0, t0 + math.log(r / (r - w0)) / (2 * mu))
