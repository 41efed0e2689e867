# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the hot loops in ``_pykernels``.

``dopri5_poly`` runs the whole adaptive Dormand-Prince loop over a compiled
polynomial vector field without touching Python per stage.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, sqrt, pow, fma, isfinite, INFINITY, nextafter, fmin, fmax

cnp.import_array()

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0
cdef double UNDERFLOW_GROWTH = 1e3
cdef int FLOOR_STALL = 100

cdef double[6] Cn = [0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0]
cdef double[6][5] An = [
    [0, 0, 0, 0, 0],
    [1.0 / 5, 0, 0, 0, 0],
    [3.0 / 40, 9.0 / 40, 0, 0, 0],
    [44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0],
    [19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0],
    [9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656],
]
cdef double[6] Bn = [35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84]
cdef double[7] En = [-71.0 / 57600, 0, 71.0 / 16695, -71.0 / 1920, 17253.0 / 339200, -22.0 / 525, 1.0 / 40]
cdef double[7][4] Pn = [
    [1, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608, -12715105075.0 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933, 87487479700.0 / 32700410799],
    [0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304, -10690763975.0 / 1880347072],
    [0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408, 701980252875.0 / 199316789632],
    [0, -282668133.0 / 205662961, 2019193451.0 / 616988883, -1453857185.0 / 822651844],
    [0, 40617522.0 / 29380423, -110615467.0 / 29380423, 69997945.0 / 29380423],
]


cdef inline void _mul_dd(double* hi, double* lo, double b) noexcept nogil:
    # (hi, lo) *= b in double-double
    cdef double p = hi[0] * b
    cdef double e = fma(hi[0], b, -p) + lo[0] * b
    hi[0] = p + e
    lo[0] = e - (hi[0] - p)


cdef inline void _add_dd(double* hi, double* lo, double bh, double bl) noexcept nogil:
    cdef double s = hi[0] + bh
    cdef double bb = s - hi[0]
    cdef double e = (hi[0] - (s - bb)) + (bh - bb)
    e += lo[0] + bl
    hi[0] = s + e
    lo[0] = e - (hi[0] - s)


cdef class _PolyField:
    """Compiled polynomial field evaluated in double-double.

    Expanded powers of sums cancel heavily when the state is large; forming
    and summing the terms in double-double keeps the small result accurate.
    """

    cdef double[::1] coeff
    cdef double[::1] coeff_lo
    cdef long[::1] coord
    cdef long[:, ::1] sexp
    cdef long[:, ::1] pexp
    cdef long[::1] pkind
    cdef double[::1] prate
    cdef double[::1] pval
    cdef double[::1] pv
    cdef double[::1] whi
    cdef double[::1] wlo
    cdef double[::1] acc_hi
    cdef double[::1] acc_lo
    cdef int n, T, m

    def __init__(self, coeff, coeff_lo, coord, sexp, pexp, pkind, prate, pval, int n):
        self.coeff = np.ascontiguousarray(coeff, dtype=np.float64)
        self.coeff_lo = np.ascontiguousarray(coeff_lo, dtype=np.float64)
        self.coord = np.ascontiguousarray(coord, dtype=np.int64)
        self.sexp = np.ascontiguousarray(sexp, dtype=np.int64).reshape(len(coeff), n)
        self.T = len(coeff)
        self.m = np.asarray(pexp).shape[1] if np.asarray(pexp).ndim == 2 else 0
        self.pexp = np.ascontiguousarray(pexp, dtype=np.int64).reshape(self.T, self.m)
        self.pkind = np.ascontiguousarray(pkind, dtype=np.int64)
        self.prate = np.ascontiguousarray(prate, dtype=np.float64)
        self.pval = np.ascontiguousarray(pval, dtype=np.float64)
        self.pv = np.empty(max(self.m, 1))
        self.whi = np.empty(max(self.T, 1))
        self.wlo = np.empty(max(self.T, 1))
        self.acc_hi = np.empty(max(n, 1))
        self.acc_lo = np.empty(max(n, 1))
        self.n = n

    cdef void weights(self, double t) noexcept nogil:
        cdef int j, k, e, q
        cdef double hi, lo
        for j in range(self.m):
            if self.pkind[j] == 0:
                self.pv[j] = exp(-self.prate[j] * t)
            else:
                self.pv[j] = self.pval[j]
        for k in range(self.T):
            hi = self.coeff[k]
            lo = self.coeff_lo[k]
            for j in range(self.m):
                e = self.pexp[k, j]
                for q in range(e):
                    _mul_dd(&hi, &lo, self.pv[j])
            self.whi[k] = hi
            self.wlo[k] = lo

    cdef void eval(self, double t, double* x, double* out) noexcept nogil:
        cdef int i, k, e, q
        cdef double hi, lo
        self.weights(t)
        for i in range(self.n):
            self.acc_hi[i] = 0.0
            self.acc_lo[i] = 0.0
        for k in range(self.T):
            hi = self.whi[k]
            lo = self.wlo[k]
            for i in range(self.n):
                e = self.sexp[k, i]
                for q in range(e):
                    _mul_dd(&hi, &lo, x[i])
            i = self.coord[k]
            _add_dd(&self.acc_hi[i], &self.acc_lo[i], hi, lo)
        for i in range(self.n):
            out[i] = self.acc_hi[i] + self.acc_lo[i]


cdef double _rms(double* v, int n) noexcept nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(n):
        s += v[i] * v[i]
    return sqrt(s / n)


cdef double _norm(double* v, int n) noexcept nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(n):
        s += v[i] * v[i]
    return sqrt(s)


def dopri5_poly(coeff, coeff_lo, coord, state_exp, param_exp, param_kind, param_rate, param_value, int n,
                double t0, x0, double tf, double rtol, double atol, double max_step, double blowup,
                sample_times, bint record_steps, long max_steps=1000000):
    """Same contract as ``_pykernels.dopri5_poly``."""
    cdef _PolyField F = _PolyField(coeff, coeff_lo, coord, state_exp, param_exp, param_kind, param_rate, param_value, n)
    cdef cnp.ndarray[double, ndim=1] y = np.array(x0, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] y_new = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] ytmp = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] f = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] f_new = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] f1 = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] errv = np.empty(n)
    cdef cnp.ndarray[double, ndim=2] K = np.empty((7, n))
    cdef cnp.ndarray[double, ndim=1] samples = np.array(
        [v for v in np.asarray(sample_times, dtype=float) if t0 < v <= tf], dtype=np.float64)
    cdef int ns = samples.shape[0]
    cdef int si = 0
    cdef int i, s, j, r
    cdef double norm0 = _norm(&y[0], n)
    cdef double t = t0, h, t_new, err, factor, min_step, sc, acc, th, d0, d1, d2, h0, h1, norm
    cdef double[4] thp
    cdef long n_steps = 0, n_rej = 0, stall = 0
    cdef bint clamped
    ts = [t]
    xs = [y.copy()]

    F.eval(t, &y[0], &f[0])
    # starting step (Hairer-Norsett-Wanner)
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + fabs(y[i]) * rtol
        d0 += (y[i] / sc) ** 2
        d1 += (f[i] / sc) ** 2
    d0 = sqrt(d0 / n)
    d1 = sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = fmin(h0, tf - t0)
    for i in range(n):
        ytmp[i] = y[i] + h0 * f[i]
    F.eval(t0 + h0, &ytmp[0], &f1[0])
    d2 = 0.0
    for i in range(n):
        sc = atol + fabs(y[i]) * rtol
        d2 += ((f1[i] - f[i]) / sc) ** 2
    d2 = sqrt(d2 / n) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = fmax(1e-6, h0 * 1e-3)
    else:
        h1 = pow(0.01 / fmax(d1, d2), 1.0 / 5)
    h = fmin(fmin(100 * h0, h1), tf - t0)
    h = fmin(h, max_step)

    while t < tf:
        if n_steps + n_rej >= max_steps:
            return 3, t, ts, xs, n_steps, n_rej, _norm(&y[0], n)
        min_step = 10 * (nextafter(t, INFINITY) - t)
        # a step below the floor is raised to it; failure is a rejected floor step
        # or a long run of accepted floor steps (no real progress)
        clamped = fmin(h, max_step) < min_step
        h = fmax(fmin(h, max_step), min_step)
        t_new = t + h
        if t_new >= tf or tf - t_new < min_step:
            t_new = tf
            h = tf - t
        for i in range(n):
            K[0, i] = f[i]
        for s in range(1, 6):
            for i in range(n):
                acc = 0.0
                for j in range(s):
                    acc += K[j, i] * An[s][j]
                ytmp[i] = y[i] + h * acc
            F.eval(t + Cn[s] * h, &ytmp[0], &K[s, 0])
        for i in range(n):
            acc = 0.0
            for j in range(6):
                acc += K[j, i] * Bn[j]
            y_new[i] = y[i] + h * acc
        F.eval(t_new, &y_new[0], &f_new[0])
        for i in range(n):
            K[6, i] = f_new[i]
        for i in range(n):
            acc = 0.0
            for j in range(7):
                acc += K[j, i] * En[j]
            sc = atol + fmax(fabs(y[i]), fabs(y_new[i])) * rtol
            errv[i] = acc * h / sc
        err = _rms(&errv[0], n)
        if not isfinite(err) or err > 1:
            n_rej += 1
            if h <= min_step:
                norm = _norm(&y[0], n)
                if norm >= UNDERFLOW_GROWTH * fmax(1.0, norm0):
                    return 1, t, ts, xs, n_steps, n_rej, norm
                return 2, t, ts, xs, n_steps, n_rej, norm
            if isfinite(err):
                h *= fmax(MIN_FACTOR, SAFETY * pow(err, -0.2))
            else:
                h *= MIN_FACTOR
            continue
        if err == 0:
            factor = MAX_FACTOR
        else:
            factor = fmin(MAX_FACTOR, SAFETY * pow(err, -0.2))
        n_steps += 1
        if record_steps:
            ts.append(t_new)
            xs.append(y_new.copy())
        else:
            while si < ns and samples[si] <= t_new:
                if samples[si] == t_new:
                    xs.append(y_new.copy())
                else:
                    th = (samples[si] - t) / h
                    thp[0] = th
                    thp[1] = th * th
                    thp[2] = thp[1] * th
                    thp[3] = thp[2] * th
                    out = np.empty(n)
                    for i in range(n):
                        acc = 0.0
                        for j in range(7):
                            for r in range(4):
                                acc += K[j, i] * Pn[j][r] * thp[r]
                        out[i] = y[i] + h * acc
                    xs.append(out)
                ts.append(samples[si])
                si += 1
        norm = _norm(&y_new[0], n)
        t = t_new
        for i in range(n):
            y[i] = y_new[i]
            f[i] = f_new[i]
        if norm > blowup:
            return 1, t, ts, xs, n_steps, n_rej, norm
        stall = stall + 1 if clamped else 0
        if stall >= FLOOR_STALL:
            if norm >= UNDERFLOW_GROWTH * fmax(1.0, norm0):
                return 1, t, ts, xs, n_steps, n_rej, norm
            return 2, t, ts, xs, n_steps, n_rej, norm
        h *= factor
    return 0, t, ts, xs, n_steps, n_rej, _norm(&y[0], n)


def envelope_max(double[::1] logn, double[::1] d, double[::1] tau, double[::1] late,
                 double alpha, double eps, double split):
    """Same contract as ``_pykernels.envelope_max``; one pass, no temporaries."""
    cdef Py_ssize_t k, N = logn.shape[0], best = 0
    cdef double r, mx = -INFINITY, me = -INFINITY
    with nogil:
        for k in range(N):
            r = logn[k] + alpha * d[k] - eps * tau[k]
            if r > mx:
                mx = r
                best = k
            if late[k] <= split and r > me:
                me = r
    return mx, best, me
