import math
from fractions import Fraction

import numpy as np
import pytest

from nuedkit import injectivity as inj
from nuedkit.injectivity import CollisionWitness, Inconclusive, InjectivityVerdict, SearchConfig

QUICK = SearchConfig(tau_grid=(0.0, 1.0, 2.0, 5.0), horizon=20.0, t_step=0.1, pairs=40)


def _verdicts(family, cfg=QUICK):
    return {n: inj.test_injectivity(family, n, cfg) for n in inj.NOTIONS}


def test_example_3_2_evaluator():
    fam = inj.builtin_family("example_3_2")
    assert fam(1.0, [2.0])[0] == 0.0
    assert fam(2.0, [1.0])[0] == 2.0


def test_example_3_2_collision_at_every_t():
    fam = inj.builtin_family("example_3_2")
    for t in (0.0, 0.5, 7.3):
        w = inj.injective_at(fam, t)
        assert isinstance(w, CollisionWitness)
        assert w.x[0] > t and w.y[0] > t and w.x != w.y
        assert fam(t, [float(w.x[0])])[0] == fam(t, [float(w.y[0])])[0] == 0.0


def test_example_3_2_verdicts():
    v = _verdicts(inj.builtin_family("example_3_2"))
    assert v["partial"].outcome == "Falsified"
    assert v["pseudo_partial"].outcome == "Holds"
    assert inj.verify_witness(inj.builtin_family("example_3_2"), v["partial"], QUICK)
    assert inj.implication_audit(v.values()).consistent


def test_example_3_4_injective_at():
    fam = inj.builtin_family("example_3_4", lambda0=-4.0, a=-1.0)
    assert inj.injective_at(fam, 1.0) is True
    # -4 - t sin t has a root in (4, 5)
    from scipy.optimize import brentq
    root = brentq(lambda t: -4 - t * math.sin(t), 4.0, 5.0, xtol=1e-15)
    assert isinstance(inj.injective_at(fam, root), CollisionWitness)
    assert fam.analytic_injective_at(2.0)


def test_example_3_4_verdicts():
    fam = inj.builtin_family("example_3_4", lambda0=-4.0, a=-1.0)
    v = _verdicts(fam)
    assert v["partial"].outcome == "Holds"
    ev = v["eventual"]
    assert ev.outcome == "Falsified"
    for entry in ev.witness["per_tau"]:
        t = entry["t"]
        assert t > entry["tau"]
        assert abs(-4 - t * math.sin(t)) <= 1e-12
    assert inj.verify_witness(fam, ev, QUICK)
    assert inj.implication_audit(v.values()).consistent


def test_example_3_4_parameter_check():
    with pytest.raises(ValueError):
        inj.builtin_family("example_3_4", lambda0=-1.0, a=-2.0)


def test_example_3_3_eventual_holds():
    fam = inj.builtin_family("example_3_3")
    assert fam.inverse is not None
    v = _verdicts(fam)
    assert v["eventual"].outcome == "Holds"
    assert inj.implication_audit(v.values()).consistent
    # the inverse composes back at sampled t
    G = fam.inverse
    for t in (0.0, 1.5, 4.0):
        x = np.array([0.3, -0.2, 0.7])
        assert np.allclose(G(t, fam(t, x)), x, atol=1e-12)


def test_example_4_2_injective_via_inverse():
    fam = inj.builtin_family("example_4_2", lam=-1)
    assert inj.injective_at(fam, 1.0) is True
    with pytest.raises(ValueError):
        inj.builtin_family("example_4_2", lam=1)


def test_noninjective_demo_exact_collision():
    fam = inj.builtin_family("noninjective_demo")
    w = inj.injective_at(fam, 0.0)
    assert isinstance(w, CollisionWitness) and w.exact
    assert fam.exact_equal(0.0, (Fraction(0),), (Fraction(1),)) is True
    v = _verdicts(fam)
    assert all(x.outcome == "Falsified" for x in v.values())
    assert all(inj.verify_witness(fam, x, QUICK) for x in v.values())


def test_exact_mode_has_no_false_collisions():
    # sec42 is injective: exact arithmetic must separate every sampled pair
    fam = inj.builtin_family("example_4_2")
    rng = np.random.default_rng(3)
    for x, y in inj._sample_pairs(3, SearchConfig(pairs=50), rng):
        assert fam.exact_equal(1.0, x, y) is False


def test_search_only_never_holds():
    # no analytic decider, no inverse: a plain polynomial family gets search support at best
    from nuedkit.polyalg import ParamPolyMap, variables
    (x,), _ = variables(1)
    fam = inj._poly_family("cubic", ParamPolyMap([x ** 3 + x]))
    v = inj.test_injectivity(fam, "pseudo_partial", QUICK)
    assert v.outcome == "SupportedBySearch"


def test_determinism():
    fam = inj.builtin_family("noninjective_demo")
    a = inj.test_injectivity(fam, "partial", QUICK).to_json()
    b = inj.test_injectivity(fam, "partial", QUICK).to_json()
    assert a == b


def test_audit_examples():
    def v(n, o):
        return InjectivityVerdict("f", n, o, "")

    bad = inj.implication_audit([v("partial", "Holds"), v("pseudo_partial", "Falsified")])
    assert not bad.consistent
    assert not inj.implication_audit([v("eventual", "Holds"), v("partial", "Falsified")]).consistent
    assert inj.implication_audit([v("eventual", "SupportedBySearch"), v("partial", "Falsified")]).consistent
    with pytest.raises(ValueError):
        inj.implication_audit([v("partial", "Holds")])


@pytest.mark.parametrize("name", inj.BUILTIN_FAMILIES)
def test_builtin_verdict_sets_pass_audit(name):
    fam = inj.builtin_family(name)
    assert inj.implication_audit(_verdicts(fam).values()).consistent


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(tau_grid=(0.0, 200.0))
    with pytest.raises(ValueError):
        SearchConfig(pairs=0)
    with pytest.raises(ValueError):
        SearchConfig(mode="fuzzy")
    with pytest.raises(ValueError):
        inj.test_injectivity(inj.builtin_family("example_3_2"), "total")
    assert not Inconclusive("x")
