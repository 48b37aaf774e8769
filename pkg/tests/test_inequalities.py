import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coercive import experiments as E
from coercive import functionals as F
from coercive import geometry as G
from coercive import inequalities as I
from coercive import measures as M

R1 = G.Space.euclidean(1)


@pytest.fixture(scope="module")
def gauss():
    m = M.normalize(M.gaussian_1d())
    return m, M.quadrature_rule_1d(m)


@pytest.fixture(scope="module")
def gauss_mc():
    m = M.normalize(M.gaussian_1d())
    ss = M.sample(m, 20_000, seed=5)
    suite, _ = E._suite_for(m, ss, 5)
    return m, ss, suite


# -- constants ---------------------------------------------------------------


def test_thm2_5_examples():
    c = I.constants_thm2_5(1.0, 2.0)
    assert (c.C, c.D, c.provenance) == (0.5, 2.5, "Thm2_5")
    assert I.constants_thm2_5(2.0, 2.0).C == 0.25
    c = I.constants_thm2_5(1.0, 3.0, K=2.0)
    assert c.C == pytest.approx(1 / 3) and c.D == pytest.approx(2 / 3 + 4 + 1 / 3)


def test_thm2_5_blows_up_monotonically():
    Cs = [I.constants_thm2_5(1.0, 2.0, 1.0, e).C for e in (0.0, 0.5, 0.9, 0.99, 0.999)]
    assert np.all(np.diff(Cs) > 0) and Cs[-1] > 400
    with pytest.raises(I.ConstantsDomainError):
        I.constants_thm2_5(1.0, 2.0, 1.0, 1.0)


def test_thm2_6_examples():
    c = I.constants_thm2_6(0.5, 2.5, 0.0, 0.0, 0.0)
    assert (c.C, c.D) == (0.5, 2.5)
    c = I.constants_thm2_6(0.5, 2.5, 1.0, 1.0, 0.0)
    assert (c.C, c.D) == pytest.approx((1.0, 7.0))
    c = I.constants_thm2_6(0.5, 2.5, 0.0, 0.0, math.log(2))
    assert (c.C, c.D) == pytest.approx((2.0, 10.0))
    with pytest.raises(I.ConstantsDomainError):
        I.constants_thm2_6(0.5, 2.5, 2.0, 0.0, 0.0)


def test_thm2_5p_q1_reduces():
    c = I.constants_thm2_5p(0.5, 2.5, 1.0, 2.0)
    assert (c.C, c.D) == pytest.approx((0.5, 3.0))


@pytest.mark.parametrize("q, p", [(2.0, 2.0), (1.5, 3.0), (3.0, 3.0), (4 / 3, 4.0)])
def test_thm2_5p_denominator_recomputed(q, p):
    C, D = 0.5, 2.5
    c = I.constants_thm2_5p(C, D, q, p)
    x = c.extras
    e = q / (q - 1)
    terms = [C * (q - 1) / x["alpha"] ** e, D * (q - 1) / (x["beta_free"] ** e * q)]
    if (q - 1) * (p - 1) > 1:
        ex = q * (p - 1) / ((q - 1) * (p - 1) - 1)
        terms.append(C * ((q - 1) ** 2 * (p - 1) - (q - 1)) / (q * x["gamma_free"] ** ex))
    assert all(t <= 1 / 6 + 1e-15 for t in terms)
    assert x["denominator"] == pytest.approx(1 - sum(terms))
    assert x["denominator"] >= 0.5
    assert c.C == pytest.approx(C * x["alpha"] ** q / x["denominator"])
    for k in ("alpha", "beta_free", "gamma_free"):
        assert math.log2(x[k]) == int(math.log2(x[k]))


def test_thm2_5p_monotone_in_C_and_D():
    base = I.constants_thm2_5p(0.5, 2.5, 2.0, 2.0)
    more = I.constants_thm2_5p(0.6, 3.0, 2.0, 2.0)
    assert more.C >= base.C and more.D >= base.D


def test_constants_validation():
    with pytest.raises(I.ConstantsDomainError):
        I.TheoremConstants(0.0, 1.0, "Manual")
    with pytest.raises(I.ConstantsDomainError):
        I.TheoremConstants(1.0, float("inf"), "Manual")


def test_w_cosine_gradient_bound_on_grid():
    for p in (2.0, 3.0, 4.0):
        delta, gamma = I.w_cosine_gradient_bound(0.1, p)
        d = np.linspace(0, 30, 30001)
        dW = 0.1 * ((p - 1) * d ** (p - 2) * np.cos(d) - d ** (p - 1) * np.sin(d))
        assert np.all(np.abs(dW) <= delta * d ** (p - 1) + gamma + 1e-12)


def test_slow_tail_c1():
    assert I.slow_tail_c1(40.0, 3) == pytest.approx(40 / 37)
    with pytest.raises(I.ConstantsDomainError):
        I.slow_tail_c1(3.0, 3)


# -- verdicts ------------------------------------------------------------------


def test_decide_thresholds():
    assert I.decide(1.0, 1.0, 0.1)[0] == I.HOLDS
    assert I.decide(1.09, 1.0, 0.1)[0] == I.HOLDS
    assert I.decide(1.2, 1.0, 0.1)[0] == I.INCONCLUSIVE
    assert I.decide(1.31, 1.0, 0.1)[0] == I.VIOLATED
    assert I.decide(0.0, 0.0, 0.0) == (I.HOLDS, 0.0)


def test_poincare_gaussian_sharp_gap(gauss):
    m, q = gauss
    x = [F.coordinate(R1, 0)]
    assert I.check_poincare(m, q, 2.0, 2.0, x)[0].verdict == I.HOLDS
    r = I.check_poincare(m, q, 2.0, 2.2, x)[0]
    assert r.verdict == I.VIOLATED
    assert r.lhs.value == pytest.approx(1.1) and r.rhs.value == pytest.approx(1.0)
    assert I.check_poincare(m, q, 2.0, 2.0, [F.constant(R1, 3.0)])[0].verdict == I.HOLDS


def test_poincare_gaussian_suite_holds_at_gap(gauss_mc):
    m, ss, suite = gauss_mc
    reps = I.check_poincare(m, ss, 2.0, 2.0, suite)
    assert all(r.verdict != I.VIOLATED for r in reps)


def test_lsq_gaussian_constant_one(gauss):
    m, q = gauss
    tilts = [F.exp_tilt(R1, [t]) for t in (0.3, 0.7, 1.0)]
    assert all(r.verdict == I.HOLDS for r in I.check_lsq(m, q, 2.0, 1.0, tilts))
    assert all(r.verdict == I.VIOLATED for r in I.check_lsq(m, q, 2.0, 0.9, tilts))


def test_ubound_gaussian_oracles(gauss):
    m, q = gauss
    c = I.constants_thm2_5(1.0, 2.0)
    r = I.check_ubound(m, q, 1.0, {"kind": "dp1"}, c, [F.constant(R1, 1.0)])[0]
    assert r.lhs.value == pytest.approx(1 / math.sqrt(math.pi), abs=1e-9)
    assert r.rhs.value == pytest.approx(c.D) and r.verdict == I.HOLDS
    c2 = I.constants_thm2_5p(c.C, c.D + 1.0, 2.0, 2.0)
    r = I.check_ubound(m, q, 2.0, {"kind": "dqp1"}, c2, [F.coordinate(R1, 0)])[0]
    assert r.lhs.value == pytest.approx(0.75, abs=1e-9)
    assert r.rhs.value == pytest.approx(c2.C + 0.5 * c2.D)
    assert r.verdict == I.HOLDS


def test_ubound_weight_pairing_errors(gauss):
    m, q = gauss
    with pytest.raises(ValueError):
        I.ubound_weight(m, q.points, {"kind": "dp1"}, 2.0)
    with pytest.raises(ValueError):
        I.ubound_weight(m, q.points, {"kind": "dp"}, 3.0)


def test_verdicts_invariant_under_scaling(gauss_mc):
    m, ss, suite = gauss_mc
    sub = suite[::7]
    a = I.check_poincare(m, ss, 2.0, 1.9, sub)
    for c in (-3.0, 0.2, 17.0):
        b = I.check_poincare(m, ss, 2.0, 1.9, [f.scaled(c) for f in sub])
        assert [r.verdict for r in a] == [r.verdict for r in b]


_MONO = {}


def _mono_setup():
    if not _MONO:
        m = M.normalize(M.power_measure(R1, 1.0, 2.0))
        _MONO["m"] = m
        _MONO["ss"] = M.sample(m, 4000, seed=1)
        _MONO["suite"] = F.default_suite(R1, seed=1, counts=(4, 4, 4, 2))
    return _MONO["m"], _MONO["ss"], _MONO["suite"]


@given(st.floats(1.0, 5.0), st.floats(1.0, 5.0))
def test_enlarging_constants_keeps_holds(kc, kd):
    m, ss, suite = _mono_setup()
    base = I.TheoremConstants(0.3, 0.8, "Manual")
    big = I.TheoremConstants(0.3 * kc, 0.8 * kd, "Manual")
    r0 = I.check_ubound(m, ss, 1.0, {"kind": "dp1"}, base, suite)
    r1 = I.check_ubound(m, ss, 1.0, {"kind": "dp1"}, big, suite)
    for a, b in zip(r0, r1):
        if a.verdict == I.HOLDS:
            assert b.verdict == I.HOLDS


def test_phi_entropy_theta_one_is_zero_and_theta_two_tracks_entropy(gauss):
    m, q = gauss
    fs = [F.TestFunction(R1, "fourier", {"weights": np.array([1.0, 0.5]),
                                         "freqs": np.array([[0.7], [1.9]]),
                                         "phases": np.array([0.1 * k, 1.0])}) for k in range(5)]
    fs += [F.exp_tilt(R1, [t]) for t in (0.2, 0.6)]
    assert all(r.lhs.value == 0.0 for r in I.check_phi_entropy(m, q, 1.0, 1.0, fs))
    two = I.check_phi_entropy(m, q, 2.0, 1.0, fs)
    ent = [F.entropy_q(m, q, f, 2.0).value for f in fs]
    ratios = np.array([r.lhs.value for r in two]) / np.array(ent)
    assert np.all((ratios > 0.1) & (ratios < 10.0))
    with pytest.raises(I.ConstantsDomainError):
        I.check_phi_entropy(m, q, 2.5, 1.0, fs)


def test_weighted_bracket_unit_function_floor():
    m = M.normalize(M.power_measure(R1, 1.0, 4.0))
    q = M.quadrature_rule_1d(m)
    # mu d^4 = Gamma(5/4) / Gamma(1/4) = 1/4 under e^{-x^4}/Z
    too_small = I.TheoremConstants(1.0, 0.2, "Manual")
    enough = I.TheoremConstants(1.0, 0.26, "Manual")
    one = [F.constant(R1, 1.0)]
    assert I.check_weighted(m, q, "bracket", 2.0, too_small, one)[0].verdict == I.VIOLATED
    r = I.check_weighted(m, q, "bracket", 2.0, enough, one)[0]
    assert r.lhs.value == pytest.approx(0.25, abs=1e-9) and r.verdict == I.HOLDS


def test_slow_tail_domain_error():
    # beta <= N: the tail bound has no positive c1 (and the measure is not normalizable)
    R3 = G.Space.euclidean(3)
    m = M.MeasureSpec(R3, M.PotentialSpec(slow_tail_beta=3.0))
    ss = M.SampleSet(points=np.ones((10, 3)))
    with pytest.raises(I.ConstantsDomainError):
        I.check_weighted(m, ss, "slow_tail", 1.0, I.TheoremConstants(1.0, 1.0, "Manual"),
                         [F.constant(R3, 1.0)])


# -- converse and exponential bound ----------------------------------------------


def test_preflight_and_exponential_moment(gauss_mc):
    m, ss, _ = gauss_mc
    I.preflight_potential(m, ss, 2.0, 4.0, 0.0)
    with pytest.raises(I.AssumptionViolatedError):
        I.preflight_potential(m, ss, 2.0, 3.0, 0.0)
    eps, lm = I.converse_epsilon(m)
    assert eps == 0.5
    assert math.exp(lm) == pytest.approx(math.sqrt(2.0), abs=1e-8)


def test_converse_ubound_gaussian(gauss_mc):
    m, ss, suite = gauss_mc
    consts, reps = I.check_converse_ubound(m, ss, 2.0, 4.0, 0.0, 1.0, suite)
    assert consts.C == 2.0 and consts.D == pytest.approx(math.log(2.0))
    assert all(r.verdict != I.VIOLATED for r in reps)


def test_exp_bound_parameters_domain():
    d, C = I.exp_bound_parameters(1.0, 0.0, 1.0, 2.0, 0.5, 3.0)
    assert d == 0.0 and C == pytest.approx(0.5)
    with pytest.raises(I.ConstantsDomainError):
        I.exp_bound_parameters(1.0, 4.0, 0.0, 2.0, 0.5, 1.0)
    with pytest.raises(I.ConstantsDomainError):
        I.exp_bound_parameters(1.0, 0.0, 1.0, 2.0, 1.0, 1.0)


def test_exp_bound_gaussian_closed_form(gauss):
    m, q = gauss
    ts = [0.5, 1.0, 2.0]
    reps = I.check_exp_bound(m, q, F.coordinate(R1, 0), 0.0, 1.0, 1.0, 2.0, 0.5, ts)
    for t, r in zip(ts, reps):
        # mu e^{tx} = e^{t^2/4}; delta = 0 and C = 1/2 here
        assert r.lhs.value == pytest.approx(t * t / 4, abs=1e-9)
        assert r.rhs.value == pytest.approx(0.5 * t * t, abs=1e-9)
        assert r.verdict == I.HOLDS
    const = I.check_exp_bound(m, q, F.constant(R1, 2.0), 0.0, 1.0, 1.0, 2.0, 0.5, ts)
    assert all(r.verdict == I.HOLDS for r in const)


def test_exp_bound_rejects_bad_gradient_bound(gauss):
    m, q = gauss
    with pytest.raises(I.AssumptionViolatedError):
        I.check_exp_bound(m, q, F.coordinate(R1, 0, scale=2.0), 0.0, 1.0, 1.0, 2.0, 0.5, [1.0])


# -- search ------------------------------------------------------------------------


def test_search_on_constants_gives_zero(gauss):
    m, q = gauss
    consts = [F.constant(R1, c) for c in (1.0, 2.0)]
    for kind in ("poincare", "lsq"):
        res = I.best_constant_search(m, q, kind, "suite", candidates=consts)
        assert res.ratio.value == 0.0 and res.witness is None


def test_quadratic_span_search_gaussian(gauss):
    m, q = gauss
    res = I.best_constant_search(m, q, "poincare", "quadratic")
    assert res.ratio.value == pytest.approx(0.5, rel=1e-8)
    b = res.witness.params["b"]
    assert abs(b[0]) > 0 and np.allclose(res.witness.params["A"], 0.0, atol=1e-6 * abs(b[0]))


def test_fourier_search_gaussian_poincare(gauss):
    m, q = gauss
    res = I.best_constant_search(m, q, "poincare", "fourier", budget=150, seed=0)
    assert 0.45 <= res.ratio.value <= 0.5 + 1e-9


def test_search_is_deterministic(gauss_mc):
    m, ss, _ = gauss_mc
    a = I.best_constant_search(m, ss, "lsq", "exp_tilt", budget=40, seed=3)
    b = I.best_constant_search(m, ss, "lsq", "exp_tilt", budget=40, seed=3)
    assert a.ratio.value == b.ratio.value and np.array_equal(a.params, b.params)


def test_reports_csv_and_summary(gauss):
    m, q = gauss
    reps = I.check_poincare(m, q, 2.0, 2.2, [F.coordinate(R1, 0), F.constant(R1, 1.0)])
    text = I.reports_to_csv(reps)
    assert text.splitlines()[0] == ("kind,function_id,lhs,lhs_se,rhs,rhs_se,margin,margin_se,"
                                    "margin_sigmas,verdict")
    s = I.summarize(reps)
    assert s["n_violated"] == 1 and s["n_holds"] == 1 and s["kind"] == "poincare"
