import math

import numpy as np
import pytest

from nuedkit import _kernels, catalog
from nuedkit.odeint import (HORIZON_CAP, Blowup, Completed, IntegratorConfig, PiecewiseSignal, StepFailure,
                            VectorField, bernoulli_reference, integrate, linearize_along, transition_matrix)
from nuedkit.mycheck import jh_norm


def _scalar(fn, name="scalar"):
    return VectorField.closed_form(lambda t, x: np.array([fn(t, x[0])]), 1, name)


DECAY = _scalar(lambda t, x: -x, "decay")


def test_exponential_decay():
    res = integrate(DECAY, 0.0, [1.0], 5.0)
    assert isinstance(res, Completed)
    assert res.trajectory.states[-1, 0] == pytest.approx(math.exp(-5), rel=1e-9)


def test_trajectory_invariants():
    tr = integrate(DECAY, 1.5, [2.0], 4.0).trajectory
    assert tr.times[0] == 1.5 and tr.states[0, 0] == 2.0
    assert np.all(np.diff(tr.times) > 0)
    assert tr.steps >= 1 and len(tr) == tr.steps + 1


def test_dense_output_at_sample_times():
    ts = np.linspace(0, 5, 11)
    tr = integrate(DECAY, 0.0, [1.0], 5.0, IntegratorConfig(sample_times=tuple(ts))).trajectory
    assert np.array_equal(tr.times, ts)
    assert np.allclose(tr.states[:, 0], np.exp(-ts), rtol=1e-8)


def test_example_3_4_closed_form_transition():
    field_ = catalog.example_3_4_field(-4.0, -1.0)
    grid = np.arange(0, 30.0 + 1e-9, 0.5)
    for s in (0.0, 3.5, 12.0):
        for t, phi in transition_matrix(field_, s, grid[grid >= s]):
            assert phi[0, 0] == pytest.approx(catalog.example_3_4_phi(t, s), rel=1e-7)


def test_transition_diag_and_identity_at_start():
    field_ = catalog.diag_constant([-1.0, 0.5])
    out = transition_matrix(field_, 2.0, [2.0, 3.0, 4.5])
    assert np.array_equal(out[0][1], np.eye(2))
    for t, phi in out:
        assert np.allclose(phi, np.diag(np.exp(np.array([-1.0, 0.5]) * (t - 2.0))), rtol=1e-9)


def test_transition_of_sec42_linearisation_at_zero():
    lin = linearize_along(catalog.sec42_map(-1), PiecewiseSignal.constant([0.0, 0.0, 0.0]))
    for t, phi in transition_matrix(lin, 1.0, [1.0, 2.0, 6.0]):
        assert np.allclose(phi, math.exp(-(t - 1.0)) * np.eye(3), rtol=1e-9, atol=1e-15)


@pytest.mark.parametrize("name,params", [("diag", {"values": [-1.0, -2.0]}), ("example_3_4", {}),
                                         ("perturbed_diag", {"delta": 0.5, "eps": 0.1})])
def test_cocycle(name, params):
    field_ = catalog.linear_builtin(name, **params)
    rng = np.random.default_rng(5)
    for _ in range(5):
        r, s, t = np.sort(rng.uniform(0, 15, 3))
        P_tr = transition_matrix(field_, r, [t])[0][1]
        P_sr = transition_matrix(field_, r, [s])[0][1]
        P_ts = transition_matrix(field_, s, [t])[0][1]
        assert np.linalg.norm(P_ts @ P_sr - P_tr) <= 1e-6 * max(1.0, np.linalg.norm(P_tr))


def test_linearize_along_matches_display():
    F = catalog.sec42_map(-1)
    omega = PiecewiseSignal.sinusoid([1.0, 0.5, -0.7])
    lin = linearize_along(F, omega)
    for t in (0.0, 0.8, 3.3):
        w1, w2, w3 = omega(t)
        q = (w1 + w3) ** 2
        expected = -np.eye(3) + 3 * math.exp(-t) * np.array([[0, w2 ** 2, 0], [q, 0, q], [0, -w2 ** 2, 0]])
        assert np.allclose(lin.matrix(t), expected, rtol=1e-14, atol=1e-15)
    zero = linearize_along(F, PiecewiseSignal.constant([0.0, 0.0, 0.0]))
    assert np.array_equal(zero.matrix(2.0), -np.eye(3))


def test_operator_norm_identity_random_samples():
    H = catalog.sec42_map(-1).nonlinear_part()
    rng = np.random.default_rng(2024)
    for _ in range(100):
        t = rng.uniform(0, 10)
        w = rng.normal(size=3) * rng.uniform(0.1, 5)
        expected = math.sqrt(18) * math.exp(-t) * max(w[1] ** 2, (w[0] + w[2]) ** 2)
        assert jh_norm(H, t, w) == pytest.approx(expected, rel=1e-10)


def test_switch_signal_restarts_at_breakpoints():
    omega = PiecewiseSignal.switch([2.0], [[1.0], [-1.0]])
    field_ = VectorField(1, lambda t, x: np.asarray(omega(t), dtype=float), "linear", breakpoints=omega.breakpoints)
    tr = integrate(field_, 0.0, [0.0], 4.0).trajectory
    assert 2.0 in tr.times.tolist()
    assert tr.states[-1, 0] == pytest.approx(0.0, abs=1e-12)


def test_signal_declared_bound_holds():
    omega = PiecewiseSignal.sinusoid([3.0, 4.0])
    assert omega.sampled_sup(horizon=50.0) <= omega.declared_bound + 1e-12


# ---------------------------------------------------------------------------
# blow-up and failure


def _cubic(lam, c):
    return _scalar(lambda t, v: lam * v + c * v ** 3, "bernoulli")


def test_blowup_matches_closed_form():
    res = integrate(_cubic(-1.0, 1.0), 0.0, [2.0], 1.0)
    assert isinstance(res, Blowup)
    assert res.t_star == pytest.approx(0.5 * math.log(4 / 3), rel=1e-3)
    assert 0.0 <= res.t_star <= 1.0


def test_bernoulli_reference_examples():
    zero = bernoulli_reference(-1.0, 1.0, 0.0)
    assert zero.blowup_time is None and zero(3.0) == 0.0
    half = bernoulli_reference(-1.0, 1.0, 0.5)
    assert half.global_solution
    for t in (0.0, 0.5, 2.0):
        assert half(t) == pytest.approx((3 * math.exp(2 * t) + 1) ** -0.5, rel=1e-14)
    two = bernoulli_reference(-1.0, 1.0, 2.0, t0=1.0)
    assert two.blowup_time == pytest.approx(1.0 + 0.5 * math.log(4 / 3), rel=1e-14)


def test_bernoulli_randomized_cases():
    rng = np.random.default_rng(7)
    for _ in range(20):
        lam, c, t0 = -rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0), rng.uniform(0, 5)
        crit = math.sqrt(-lam / c)
        # supercritical: blow-up time
        v0 = crit * rng.uniform(1.05, 3.0)
        ref = bernoulli_reference(lam, c, v0, t0)
        res = integrate(_cubic(lam, c), t0, [v0], ref.blowup_time + 5.0)
        assert isinstance(res, Blowup)
        assert res.t_star == pytest.approx(ref.blowup_time, rel=1e-3)
        # subcritical: the whole solution on [t0, t0 + 10]
        v0 = crit * rng.uniform(0.05, 0.95)
        ref = bernoulli_reference(lam, c, v0, t0)
        ts = tuple(t0 + np.linspace(0, 10, 41))
        tr = integrate(_cubic(lam, c), t0, [v0], t0 + 10, IntegratorConfig(sample_times=ts)).trajectory
        assert np.allclose(tr.states[:, 0], [ref(t) for t in tr.times], rtol=1e-6, atol=1e-12)


def test_step_failure_on_nan_field():
    res = integrate(_scalar(lambda t, x: math.sqrt(1 - t) if t <= 1 else math.nan), 0.0, [0.0], 2.0)
    assert isinstance(res, StepFailure)
    assert res.t == pytest.approx(1.0)
    assert "underflow" in res.diagnostics


def test_step_budget():
    chatter = _scalar(lambda t, x: -1e3 * math.copysign(1.0, x) if x else 0.0)
    res = integrate(chatter, 0.0, [1.0], 1.0, IntegratorConfig(max_steps=5000))
    assert isinstance(res, StepFailure) and "budget" in res.diagnostics


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rtol=0)
    with pytest.raises(ValueError):
        IntegratorConfig(blowup_threshold=-1)
    with pytest.raises(ValueError):
        integrate(DECAY, 1.0, [1.0], 1.0)
    with pytest.raises(ValueError):
        integrate(DECAY, 0.0, [1.0], HORIZON_CAP + 1)
    with pytest.raises(ValueError):
        integrate(DECAY, 0.0, [1.0, 2.0], 1.0)


# ---------------------------------------------------------------------------
# accuracy


def test_convergence_order_fixed_steps():
    # rtol = atol = 1 accepts every step, so max_step fixes the step size
    errs = []
    for h in (0.5, 0.25, 0.125):
        cfg = IntegratorConfig(rtol=1.0, atol=1.0, max_step=h)
        x = integrate(_scalar(lambda t, x: -x * (1 + math.sin(t))), 0.0, [1.0], 4.0, cfg).trajectory.states[-1, 0]
        errs.append(abs(x - math.exp(-(4.0 + 1 - math.cos(4.0)))))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 4.0


def test_tolerance_halving_reduces_error():
    exact = math.exp(-(4.0 + 1 - math.cos(4.0)))
    field_ = _scalar(lambda t, x: -x * (1 + math.sin(t)))
    errs = []
    for tol in (1e-5, 5e-6, 2.5e-6, 1.25e-6):
        x = integrate(field_, 0.0, [1.0], 4.0, IntegratorConfig(rtol=tol, atol=tol)).trajectory.states[-1, 0]
        errs.append(abs(x - exact))
    assert errs[-1] < errs[0]
    assert all(e <= 10 * tol for e, tol in zip(errs, (1e-5, 5e-6, 2.5e-6, 1.25e-6)))


def _rk4(f, t0, x0, t1, n):
    h = (t1 - t0) / n
    t, x = t0, np.array(x0, dtype=float)
    for _ in range(n):
        k1 = f(t, x)
        k2 = f(t + h / 2, x + h / 2 * k1)
        k3 = f(t + h / 2, x + h / 2 * k2)
        k4 = f(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return x


def test_sec42_against_fine_rk4():
    F = catalog.sec42_map(-1)
    field_ = VectorField.from_poly_map(F)
    x0 = [1.0, 1.0, 1.0]
    res = integrate(field_, 0.0, x0, 20.0, IntegratorConfig(sample_times=tuple(float(k) for k in range(21))))
    tr = res.trajectory
    # reference: fixed-step RK4 at ten times the resolution of the adaptive run
    full = integrate(field_, 0.0, x0, 20.0).trajectory
    n = 10 * full.steps
    x = np.array(x0)
    for k in range(20):
        x = _rk4(F, float(k), x, float(k + 1), max(1, n // 20))
        assert np.max(np.abs(tr.states[k + 1] - x)) <= 1e-6


def test_poly_field_agrees_with_evaluate_map():
    F = catalog.example_3_3_map()
    field_ = VectorField.from_poly_map(F)
    rng = np.random.default_rng(1)
    for t, x in zip(rng.uniform(0, 5, 20), rng.normal(size=(20, 3))):
        assert np.allclose(field_(t, x), F(t, x), rtol=1e-12, atol=1e-12)


def test_cancellation_free_rhs_at_large_state():
    # (x + z)^3 with x = -z = 1e5 must vanish exactly rather than leave rounding noise
    F = catalog.sec42_map(-1)
    field_ = VectorField.from_poly_map(F)
    x = np.array([1e5, 0.0, -1e5])
    args = __import__("nuedkit.odeint", fromlist=["_poly_kernel_args"])._poly_kernel_args(F)
    rhs = _kernels.load_backend("python").poly_rhs(*args)
    assert rhs(0.0, x)[1] == 0.0
    assert field_(0.0, x)[1] == pytest.approx(0.0, abs=1e-6)


# ---------------------------------------------------------------------------
# backends


def _backends():
    out = ["python"]
    try:
        _kernels.load_backend("cython")
        out.append("cython")
    except ImportError:
        pass
    return out


@pytest.mark.parametrize("backend", _backends())
def test_backend_parity_poly(backend, monkeypatch):
    # accepted-step grids may drift in the last bits, so compare dense samples
    F = catalog.sec42_map(-1)
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-30, blowup_threshold=1e12,
                           sample_times=tuple(5.0 + np.linspace(0, 40, 81)))
    ref = integrate(VectorField.from_poly_map(F), 5.0, [3.0, -4.0, 2.0], 45.0, cfg)
    monkeypatch.setattr(_kernels, "dopri5_poly", _kernels.load_backend(backend).dopri5_poly)
    res = integrate(VectorField.from_poly_map(F), 5.0, [3.0, -4.0, 2.0], 45.0, cfg)
    assert isinstance(res, Completed)
    assert abs(res.trajectory.steps - ref.trajectory.steps) <= 2
    assert np.allclose(res.trajectory.states, ref.trajectory.states, rtol=1e-8, atol=1e-12)


@pytest.mark.parametrize("backend", _backends())
def test_backend_blowup(backend):
    (x,), _ = __import__("nuedkit.polyalg", fromlist=["variables"]).variables(1)
    from nuedkit.polyalg import ParamPolyMap
    from nuedkit.odeint import _poly_kernel_args

    F = ParamPolyMap([-x + x ** 3])
    mod = _kernels.load_backend(backend)
    status, t_end, *_ = mod.dopri5_poly(*_poly_kernel_args(F), 0.0, np.array([2.0]), 1.0, 1e-9, 1e-12, math.inf,
                                        1e8, (), True)
    assert status == _kernels.BLOWUP
    assert t_end == pytest.approx(0.5 * math.log(4 / 3), rel=1e-3)
