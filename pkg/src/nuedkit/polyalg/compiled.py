"""Floating-point evaluation of exact polynomial maps (vectorised with numpy)."""

from __future__ import annotations

import numpy as np
from gmpy2 import mpq

from .poly import _BITS, _MASK

__all__ = ["CompiledPolys"]


class CompiledPolys:
    """A list of polynomials flattened into term arrays.

    ``coord`` maps each term to its output slot; ``state_exp`` / ``param_exp``
    hold the exponents; ``coeff`` is float64 when every coefficient is real and
    complex128 otherwise, and ``coeff_lo`` holds the rounding residue of real
    coefficients. The same arrays feed the compiled integration kernel.
    """

    def __init__(self, polys, bindings):
        polys = list(polys)
        self.size = len(polys)
        self.nvars = polys[0].nvars if polys else 0
        self.params = polys[0].params if polys else ()
        by_symbol = {b.symbol: b for b in bindings}
        missing = [s for p in polys for s in p.used_params() if s not in by_symbol]
        if missing:
            from .maps import UnboundSymbol

            raise UnboundSymbol(f"no binding for parameter symbol(s) {sorted(set(missing))}")
        self.bindings = tuple(by_symbol.get(s) for s in self.params)
        rows, coeffs, lows, exps = [], [], [], []
        w = self.nvars + len(self.params)
        for i, p in enumerate(polys):
            for k, c in p.items():
                rows.append(i)
                coeffs.append(complex(c))
                # rounding residue of the real part, so kernels can work in double-double
                lows.append(float(c.re - mpq(float(c.re))))
                exps.append([(k >> (_BITS * j)) & _MASK for j in range(w)])
        self.coord = np.asarray(rows, dtype=np.int64)
        exps = np.asarray(exps, dtype=np.int64).reshape(len(rows), w)
        self.state_exp = np.ascontiguousarray(exps[:, : self.nvars])
        self.param_exp = np.ascontiguousarray(exps[:, self.nvars:])
        c = np.asarray(coeffs, dtype=np.complex128)
        self.is_real = bool(np.all(c.imag == 0))
        self.coeff = np.ascontiguousarray(c.real) if self.is_real else c
        self.coeff_lo = np.asarray(lows, dtype=np.float64) if self.is_real else np.zeros(len(rows))

        self._fast = None
        if self.params and all(b is not None and b.kind in ("exp_decay", "constant") for b in self.bindings):
            # s_k(t) = exp(-r_k t) or a constant c_k: fold constants into the coefficient
            rates = np.array([float(b.rate) if b.kind == "exp_decay" else 0.0 for b in self.bindings])
            consts = np.array([1.0 if b.kind == "exp_decay" else float(b.value) for b in self.bindings])
            scale = np.prod(consts[None, :] ** self.param_exp, axis=1)
            self._fast = (self.coeff * scale, self.param_exp @ rates)

    def param_values(self, t: float) -> np.ndarray:
        return np.array([b.evaluate(t) for b in self.bindings], dtype=float)

    def term_weights(self, t: float) -> np.ndarray:
        """Coefficient times parameter monomial, per term, at time ``t``."""
        if not self.params:
            return self.coeff
        if self._fast is not None:
            c, r = self._fast
            return c * np.exp(-t * r)
        pv = self.param_values(t)
        return self.coeff * np.prod(pv[None, :] ** self.param_exp, axis=1)

    def _weights_many(self, ts: np.ndarray) -> np.ndarray:
        if not self.params:
            return np.broadcast_to(self.coeff, (ts.size, self.coeff.size))
        if self._fast is not None:
            c, r = self._fast
            return c[None, :] * np.exp(-np.outer(ts, r))
        return np.stack([self.term_weights(float(t)) for t in ts])

    def _reduce(self, contrib: np.ndarray) -> np.ndarray:
        # sum term contributions into output slots along the last axis
        if contrib.ndim == 1:
            if np.iscomplexobj(contrib):
                return (np.bincount(self.coord, contrib.real, self.size)
                        + 1j * np.bincount(self.coord, contrib.imag, self.size))
            return np.bincount(self.coord, contrib, self.size)
        out = np.zeros((contrib.shape[0], self.size), dtype=contrib.dtype)
        np.add.at(out, (slice(None), self.coord), contrib)
        return out

    def _monomials(self, x: np.ndarray) -> np.ndarray:
        if x.ndim == 1:
            return np.prod(x[None, :] ** self.state_exp, axis=1) if self.nvars else np.ones(len(self.coord))
        return np.prod(x[:, None, :] ** self.state_exp[None, :, :], axis=2)

    def __call__(self, t: float, x) -> np.ndarray:
        """Values at time ``t`` for one state ``x`` or a batch of shape ``(N, nvars)``."""
        x = np.asarray(x)
        w = self.term_weights(t)
        dtype = np.result_type(w.dtype, x.dtype, np.float64)
        mon = self._monomials(x)
        return self._reduce((w * mon).astype(dtype, copy=False))

    def at_times(self, ts, xs) -> np.ndarray:
        """Values at paired times ``ts[k]`` and states ``xs[k]``; shape ``(N, size)``."""
        ts = np.asarray(ts, dtype=float).ravel()
        xs = np.asarray(xs).reshape(ts.size, self.nvars)
        return self._reduce(self._weights_many(ts) * self._monomials(xs))
