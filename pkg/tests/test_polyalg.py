import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nuedkit import catalog
from nuedkit.polyalg import (NOT_HOMOGENEOUS, ZERO, DimensionMismatch, GaussianRational, NoStabilization,
                             NotHomogeneousError, ParamBinding, ParamPolyMap, Poly, PolyMatrix, UnboundSymbol,
                             compose, cubic_bound_constant, evaluate_map, formal_inverse, homogeneity_degree,
                             is_nilpotent, jacobian, parse_rational, realify, shift_conjugate, substitute_state,
                             variables)


# ---------------------------------------------------------------------------
# numbers


def test_parse_rational_accepts_fractions():
    assert parse_rational("3/6") == Fraction(1, 2)
    assert parse_rational("-7") == -7


@pytest.mark.parametrize("text,suggestion", [("0.5", "1/2"), ("1.25", "5/4"), ("2e1", "20")])
def test_parse_rational_rejects_decimals(text, suggestion):
    with pytest.raises(ValueError, match=suggestion):
        parse_rational(text)


def test_gaussian_rational_field_ops():
    a = GaussianRational(1, 2)
    b = GaussianRational(Fraction(1, 3), -1)
    assert (a * b) / b == a
    assert a * a.conjugate() == GaussianRational(5)
    assert complex(a + b) == pytest.approx(complex(1 + 1 / 3, 1))


# ---------------------------------------------------------------------------
# maps


def _sec42_H():
    return catalog.sec42_map(-1).nonlinear_part()


def test_evaluate_sec42_at_ones():
    assert np.allclose(catalog.sec42_map(-1)(0.0, [1, 1, 1]), [0.0, 7.0, -2.0], rtol=0, atol=1e-15)


def test_evaluate_far_time_close_to_linear_part():
    F = catalog.sec42_map(-1)
    rng = np.random.default_rng(3)
    C = cubic_bound_constant(_sec42_H()).C_coeff
    for x in rng.normal(size=(20, 3)) * 5:
        diff = np.linalg.norm(F(50.0, x) + x)
        assert diff <= C * math.exp(-50) * np.linalg.norm(x) ** 3 * (1 + 1e-12)
    assert math.exp(-50) * C < 8e-22


def test_jacobian_sec42_matches_display():
    J = jacobian(_sec42_H())
    t, (x, y, z) = 0.7, (0.3, -1.1, 2.0)
    s = math.exp(-t)
    expected = 3 * s * np.array([[0, y ** 2, 0], [(x + z) ** 2, 0, (x + z) ** 2], [0, -y ** 2, 0]])
    assert np.allclose(J.evaluate(t, [x, y, z]), expected, rtol=1e-14, atol=0)


def test_jacobian_of_linear_map_is_diagonal():
    J = jacobian(ParamPolyMap.linear(Fraction(-3, 2), 3))
    assert np.array_equal(J.evaluate(0.0, [1, 2, 3]), -1.5 * np.eye(3))


def test_jacobian_example_3_3_finite_differences():
    H = catalog.example_3_3_map().nonlinear_part()
    J = jacobian(H)
    rng = np.random.default_rng(0)
    for _ in range(10):
        t, x = rng.uniform(0, 3), rng.normal(size=3)
        h = 1e-6
        fd = np.column_stack([(H(t, x + h * e) - H(t, x - h * e)) / (2 * h) for e in np.eye(3)])
        Jx = J.evaluate(t, x)
        assert np.linalg.norm(fd - Jx) <= 1e-6 * max(1.0, np.linalg.norm(Jx))


def test_nilpotency_sec42_index_three():
    J = jacobian(_sec42_H())
    res = is_nilpotent(J)
    assert res.nilpotent and res.index == 3
    assert (J @ J @ J).is_zero and not (J @ J).is_zero


def test_nilpotency_square_matches_hand_computation():
    J = jacobian(_sec42_H())
    t, (x, y, z) = 0.4, (1.0, 2.0, -0.5)
    s = math.exp(-t)
    expected = 9 * s ** 2 * y ** 2 * (x + z) ** 2 * np.array([[1, 0, 1], [0, 0, 0], [-1, 0, -1]])
    assert np.allclose((J @ J).evaluate(t, [x, y, z]), expected, rtol=1e-13, atol=1e-13)


def test_nilpotency_trivial_cases():
    zero = jacobian(ParamPolyMap.constant_map([0, 0], 2))
    assert is_nilpotent(zero).index == 1
    diag = jacobian(ParamPolyMap.linear(2, 2))
    assert not is_nilpotent(diag).nilpotent


def test_formal_inverse_sec42_matches_printed():
    for lam in (-1, Fraction(-3, 2), -2):
        F = catalog.sec42_map(lam)
        G = formal_inverse(F)
        assert compose(F, G).is_identity() and compose(G, F).is_identity()
        assert G == catalog.sec42_printed_inverse(lam)


def test_formal_inverse_linear():
    G = formal_inverse(ParamPolyMap.linear(-4, 2))
    assert G == ParamPolyMap.linear(Fraction(-1, 4), 2).with_linear_coefficient(None)


def test_example_3_3_inverse_and_printed_candidate():
    F = catalog.example_3_3_map()
    G = formal_inverse(F)
    assert compose(F, G).is_identity()
    (u, v, w), ps = variables(3, ("s",))
    s = ps["s"]
    assert G.coordinates[0] == -u - s * (u + v + s * (u + w) ** 3) ** 3
    # the printed candidate is not an inverse
    assert not compose(F, catalog.example_3_3_printed_inverse()).is_identity()


def test_noninjective_map_has_no_inverse():
    with pytest.raises(NoStabilization):
        formal_inverse(catalog.noninjective_demo_map())


def test_shift_conjugate_examples():
    (x,), ps = variables(1, ("t",))
    F = ParamPolyMap([ps["t"] * x ** 2], [ParamBinding.constant("t", 2)])
    G = shift_conjugate(F, [1], [2]).map
    z = x
    assert G.coordinates[0] == ps["t"] * (z ** 2 + 2 * z)
    sc = shift_conjugate(catalog.noninjective_demo_map(), [0], [1])
    assert sc.map == catalog.noninjective_demo_map() and sc.z0 == (1,)
    assert np.allclose(sc.map(0.0, [1.0]), 0.0)


def test_shift_conjugate_of_linear_map_is_itself():
    F = ParamPolyMap.linear(-2, 2)
    assert shift_conjugate(F, [3, Fraction(1, 2)], [0, 0]).map == F


def test_realify_examples():
    (z,), _ = variables(1)
    I = GaussianRational(0, 1)
    (u, v), _ = variables(2)
    assert realify(ParamPolyMap([z.scale(I)])) == ParamPolyMap([-v, u])
    assert realify(ParamPolyMap([z ** 3])) == ParamPolyMap([u ** 3 - 3 * u * v ** 2, 3 * u ** 2 * v - v ** 3])
    # a real map restricted to v = 0: u-slots reproduce F, v-slots vanish
    F = catalog.sec42_map(-1)
    R = realify(F)
    x = np.array([0.3, -1.2, 0.8])
    out = R(0.5, np.column_stack([x, np.zeros(3)]).ravel())
    assert np.allclose(out[0::2], F(0.5, x), rtol=1e-14) and np.all(out[1::2] == 0)


def test_homogeneity():
    (x, y), _ = variables(2)
    assert homogeneity_degree((x + y) ** 3) == 3
    assert homogeneity_degree(x ** 2 + x ** 3) is NOT_HOMOGENEOUS
    assert homogeneity_degree(Poly.zero(2)) is ZERO
    assert all(homogeneity_degree(p) == 3 for p in _sec42_H().coordinates)


def test_cubic_bound_scalar_cube():
    (x,), _ = variables(1)
    b = cubic_bound_constant(ParamPolyMap([x ** 3]))
    assert b.C_coeff == pytest.approx(1.0) and b.C_empirical == pytest.approx(1.0)


def test_cubic_bound_sec42():
    H = _sec42_H()
    b = cubic_bound_constant(H, n_samples=100_000)
    assert b.C_empirical <= b.C_coeff
    rng = np.random.default_rng(11)
    for t, x in zip(rng.uniform(0, 10, 1000), rng.normal(size=(1000, 3)) * 3):
        assert np.linalg.norm(H(t, x)) <= b.C_coeff * math.exp(-t) * np.linalg.norm(x) ** 3 * (1 + 1e-12)


def test_cubic_bound_rejects_quadratic():
    (x, y), _ = variables(2)
    with pytest.raises(NotHomogeneousError):
        cubic_bound_constant(ParamPolyMap([x ** 2, y ** 3]))


def test_unbound_symbol_and_dimension_errors():
    (x,), ps = variables(1, ("s",))
    with pytest.raises(UnboundSymbol):
        ParamPolyMap([ps["s"] * x])
    with pytest.raises(DimensionMismatch):
        evaluate_map(catalog.sec42_map(-1), 0.0, [1.0, 2.0])


def test_compiled_evaluation_agrees_with_exact_substitution():
    F = catalog.example_3_3_map()
    x = [Fraction(1, 3), Fraction(-2, 5), Fraction(7, 4)]
    t = 0.0  # s = 1 is rational here
    exact = [float(sum((c for _, c in p.monomials()), GaussianRational(0)).re) for p in substitute_state(F, x)]
    assert np.allclose(F(t, [float(v) for v in x]), exact, rtol=1e-12, atol=1e-15)


# ---------------------------------------------------------------------------
# properties

_coef = st.fractions(min_value=-3, max_value=3, max_denominator=5)


@st.composite
def polys(draw, nvars=2, max_terms=4, max_deg=3):
    terms = []
    for _ in range(draw(st.integers(0, max_terms))):
        e = draw(st.lists(st.integers(0, max_deg), min_size=nvars, max_size=nvars))
        terms.append((draw(_coef), e, {}))
    return Poly.from_terms(nvars, (), terms)


@st.composite
def maps2(draw):
    return ParamPolyMap([draw(polys()), draw(polys())])


@settings(max_examples=25, deadline=None)
@given(maps2(), maps2(), maps2())
def test_compose_associative(a, b, c):
    assert compose(compose(a, b), c) == compose(a, compose(b, c))


@settings(max_examples=40, deadline=None)
@given(maps2(), maps2(), _coef, _coef)
def test_jacobian_linear(F, G, a, b):
    combo = ParamPolyMap([p.scale(GaussianRational(a)) + q.scale(GaussianRational(b))
                          for p, q in zip(F.coordinates, G.coordinates)])
    JF, JG = jacobian(F), jacobian(G)
    lhs = jacobian(combo)
    rhs = JF.scale(GaussianRational(a)) + JG.scale(GaussianRational(b))
    assert lhs.entries == rhs.entries


@settings(max_examples=40, deadline=None)
@given(maps2())
def test_canonical_form_has_no_zero_coefficients(F):
    assert all(c for p in F.coordinates for _, c in p.monomials())
    assert all(c for row in jacobian(F).entries for p in row for _, c in p.monomials())


@settings(max_examples=30, deadline=None)
@given(maps2())
def test_nilpotent_iff_nth_power_zero(F):
    J = jacobian(F)
    res = is_nilpotent(J, 2)
    assert res.nilpotent == (J @ J).is_zero
    if res.nilpotent:
        assert res.index <= 2


@st.composite
def triangular_maps(draw):
    # lam X + H with H strictly upper triangular in the variables: always invertible
    (x, y, z), _ = variables(3)
    lam = draw(st.sampled_from([-1, -2, Fraction(-1, 2), 3]))
    a, b = draw(_coef), draw(_coef)
    return ParamPolyMap([lam * x + a * y ** 2 * z, lam * y + b * z ** 3, lam * z], linear_coefficient=lam)


@settings(max_examples=15, deadline=None)
@given(triangular_maps())
def test_formal_inverse_two_sided(F):
    G = formal_inverse(F)
    assert compose(F, G).is_identity() and compose(G, F).is_identity()


@settings(max_examples=20, deadline=None)
@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2)), min_size=1, max_size=1),
       st.sampled_from(["cube", "mixed"]))
def test_realify_commutes_with_evaluation(pts, which):
    (z, w), _ = variables(2)
    I = GaussianRational(0, 1)
    F = ParamPolyMap([z ** 3 + w.scale(I), z * w ** 2]) if which == "cube" else ParamPolyMap(
        [z.scale(GaussianRational(1, 2)) * w + I.conjugate() * z ** 2, w ** 3])
    (re, im), = pts
    zc = np.array([complex(re, im), complex(im, -re)])
    R = realify(F)
    uv = np.array([zc[0].real, zc[0].imag, zc[1].real, zc[1].imag])
    out = R(0.0, uv)
    ref = F(0.0, zc)
    assert np.allclose(out, np.column_stack([ref.real, ref.imag]).ravel(), atol=1e-12, rtol=0)


def test_poly_matrix_multiplication_shape_error():
    J = jacobian(ParamPolyMap.linear(1, 2))
    K = PolyMatrix(tuple((p,) for p in J.entries[0]))
    with pytest.raises(DimensionMismatch):
        K @ K
