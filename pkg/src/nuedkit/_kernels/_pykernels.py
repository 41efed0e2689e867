"""Pure-Python kernels: Dormand-Prince 5(4) with dense output, and envelope maxima.

These define the reference behaviour; ``_ckernels.pyx`` mirrors them.
"""

from __future__ import annotations

import math

import numpy as np

# Dormand-Prince 5(4) tableau, FSAL, with the 4th-order continuous extension.
C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1])
A = np.array(
    [
        [0, 0, 0, 0, 0],
        [1 / 5, 0, 0, 0, 0],
        [3 / 40, 9 / 40, 0, 0, 0],
        [44 / 45, -56 / 15, 32 / 9, 0, 0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    ]
)
B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERR_EXP = -1 / 5
# step underflow with this much norm growth is read as a finite-time singularity
UNDERFLOW_GROWTH = 1e3
# consecutive accepted steps held at the step floor before giving up
FLOOR_STALL = 100

COMPLETED, BLOWUP, STEP_FAILURE, STEP_BUDGET = 0, 1, 2, 3
MAX_STEPS = 1_000_000


def _rms(v):
    return math.sqrt(float(np.dot(v, v)) / v.size)


def initial_step(fun, t0, y0, f0, tf, rtol, atol):
    """Hairer-Norsett-Wanner starting step for an order-4 error estimator."""
    if y0.size == 0:
        return math.inf
    scale = atol + np.abs(y0) * rtol
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, tf - t0)
    y1 = y0 + h0 * f0
    f1 = fun(t0 + h0, y1)
    d2 = _rms((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, tf - t0)


def _underflow(t, y, norm0, ts, xs, n_steps, n_rej):
    norm = float(np.linalg.norm(y))
    status = BLOWUP if norm >= UNDERFLOW_GROWTH * max(1.0, norm0) else STEP_FAILURE
    return status, t, ts, xs, n_steps, n_rej, norm


def dopri5(fun, t0, x0, tf, rtol, atol, max_step, blowup, sample_times, record_steps, max_steps=MAX_STEPS):
    """Integrate ``x' = fun(t, x)`` on ``[t0, tf]``.

    Returns ``(status, t_end, ts, xs, n_steps, n_rejected, last_norm)``. With
    ``record_steps`` every accepted step is recorded, otherwise only the
    requested ``sample_times`` (interpolated by the dense output). ``t0`` is
    always the first sample. More than ``max_steps`` attempted steps end the
    run with ``STEP_BUDGET``.
    """
    y = np.array(x0, dtype=float)
    n = y.size
    norm0 = float(np.linalg.norm(y))
    t = float(t0)
    ts = [t]
    xs = [y.copy()]
    samples = [s for s in np.asarray(sample_times, dtype=float) if t0 < s <= tf]
    si = 0
    f = np.asarray(fun(t, y), dtype=float)
    h = min(initial_step(fun, t, y, f, tf, rtol, atol), max_step)
    K = np.empty((7, n))
    n_steps = n_rej = stall = 0
    while t < tf:
        if n_steps + n_rej >= max_steps:
            return STEP_BUDGET, t, ts, xs, n_steps, n_rej, float(np.linalg.norm(y))
        min_step = 10 * np.spacing(t)
        # a step below the floor is raised to it; failure is a rejected floor step
        # or a long run of accepted floor steps (no real progress)
        clamped = min(h, max_step) < min_step
        h = max(min(h, max_step), min_step)
        t_new = t + h
        if t_new >= tf or tf - t_new < min_step:
            t_new = tf
            h = tf - t
        K[0] = f
        for s in range(1, 6):
            dy = np.dot(K[:s].T, A[s, :s]) * h
            K[s] = fun(t + C[s] * h, y + dy)
        y_new = y + h * np.dot(K[:6].T, B)
        f_new = np.asarray(fun(t_new, y_new), dtype=float)
        K[6] = f_new
        scale = atol + np.maximum(np.abs(y), np.abs(y_new)) * rtol
        err = _rms(np.dot(K.T, E) * h / scale)
        if not math.isfinite(err) or err > 1:
            n_rej += 1
            if h <= min_step:
                return _underflow(t, y, norm0, ts, xs, n_steps, n_rej)
            h *= max(MIN_FACTOR, SAFETY * err**ERR_EXP) if math.isfinite(err) else MIN_FACTOR
            continue
        factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, SAFETY * err**ERR_EXP)
        n_steps += 1
        if record_steps:
            ts.append(t_new)
            xs.append(y_new.copy())
        else:
            Q = np.dot(K.T, P)
            while si < len(samples) and samples[si] <= t_new:
                ts_ = samples[si]
                if ts_ == t_new:
                    xs.append(y_new.copy())
                else:
                    th = (ts_ - t) / h
                    xs.append(y + h * np.dot(Q, th ** np.arange(1, 5)))
                ts.append(ts_)
                si += 1
        norm = float(np.linalg.norm(y_new))
        t, y, f = t_new, y_new, f_new
        if norm > blowup:
            return BLOWUP, t, ts, xs, n_steps, n_rej, norm
        stall = stall + 1 if clamped else 0
        if stall >= FLOOR_STALL:
            return _underflow(t, y, norm0, ts, xs, n_steps, n_rej)
        h *= factor
    return COMPLETED, t, ts, xs, n_steps, n_rej, float(np.linalg.norm(y))


_SPLIT = 134217729.0  # 2**27 + 1


def _two_prod(a, b):
    """Error-free product ``a*b = p + e`` (Dekker)."""
    p = a * b
    c = _SPLIT * a
    ah = c - (c - a)
    al = a - ah
    c = _SPLIT * b
    bh = c - (c - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def _mul_dd(hi, lo, b):
    p, e = _two_prod(hi, b)
    e = e + lo * b
    s = p + e
    return s, e - (s - p)


def poly_rhs(coeff, coeff_lo, coord, state_exp, param_exp, param_kind, param_rate, param_value, n):
    """Right-hand side of a compiled polynomial field.

    Terms are formed in double-double and summed exactly with ``math.fsum``, so
    expanded powers of sums such as ``(x + z)**3`` do not lose the small
    result to cancellation between huge monomials.
    """
    coeff = np.asarray(coeff, dtype=float)
    coeff_lo = np.asarray(coeff_lo, dtype=float)
    param_exp = np.asarray(param_exp).reshape(len(coeff), -1)
    state_exp = np.asarray(state_exp).reshape(len(coeff), n)
    steps = [(j, q, param_exp[:, j] > q) for j in range(param_exp.shape[1]) for q in range(int(param_exp[:, j].max(initial=0)))]
    xsteps = [(i, q, state_exp[:, i] > q) for i in range(n) for q in range(int(state_exp[:, i].max(initial=0)))]
    rows = [np.flatnonzero(coord == i) for i in range(n)]

    def fun(t, x):
        hi, lo = coeff.copy(), coeff_lo.copy()
        if steps:
            pv = np.where(param_kind == 0, np.exp(-param_rate * t), param_value)
            for j, _, mask in steps:
                h2, l2 = _mul_dd(hi, lo, pv[j])
                hi = np.where(mask, h2, hi)
                lo = np.where(mask, l2, lo)
        for i, _, mask in xsteps:
            h2, l2 = _mul_dd(hi, lo, x[i])
            hi = np.where(mask, h2, hi)
            lo = np.where(mask, l2, lo)
        return np.array([math.fsum(np.concatenate([hi[r], lo[r]])) for r in rows])

    return fun


def dopri5_poly(coeff, coeff_lo, coord, state_exp, param_exp, param_kind, param_rate, param_value, n,
                t0, x0, tf, rtol, atol, max_step, blowup, sample_times, record_steps, max_steps=MAX_STEPS):
    fun = poly_rhs(coeff, coeff_lo, coord, state_exp, param_exp, param_kind, param_rate, param_value, n)
    return dopri5(fun, t0, x0, tf, rtol, atol, max_step, blowup, sample_times, record_steps, max_steps)


def envelope_max(logn, d, tau, late, alpha, eps, split):
    """Maxima of ``logn + alpha*d - eps*tau`` over all samples and over ``late <= split``.

    Returns ``(max_all, argmax_all, max_early)``.
    """
    r = logn + alpha * d - eps * tau
    i = int(np.argmax(r))
    early = r[late <= split]
    return float(r[i]), i, float(early.max()) if early.size else -math.inf
