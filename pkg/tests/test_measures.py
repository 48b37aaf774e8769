import math

import numpy as np
import pytest
from scipy import integrate, stats

from coercive import geometry as G
from coercive import measures as M

R1 = G.Space.euclidean(1)
H1 = G.Space.heisenberg(1)


def test_log_density_examples():
    g = M.gaussian_1d()
    assert M.log_density_unnormalized(g, np.array([[0.0]]))[0] == 0.0
    w = M.power_measure(R1, 1.0, 2.0, W={"family": "cosine", "theta": 0.1})
    val = M.log_density_unnormalized(w, np.array([[math.pi]]))[0]
    assert val == pytest.approx(-math.pi ** 2 + 0.1 * math.pi, rel=1e-14)
    s = M.surrogate_measure()
    assert M.log_density_unnormalized(s, np.zeros((1, 3)))[0] == 0.0


@pytest.mark.parametrize("p, logZ", [(2.0, 0.5 * math.log(math.pi)), (1.0, math.log(2.0)),
                                     (4.0, math.log(2 * math.gamma(1.25)))])
def test_normalize_r1_closed_forms(p, logZ):
    m = M.normalize(M.power_measure(R1, 1.0, p))
    assert m.logZ == pytest.approx(logZ, abs=1e-8)


def test_normalize_r3_gaussian():
    m = M.normalize(M.power_measure(G.Space.euclidean(3), 1.0, 2.0))
    assert m.logZ == pytest.approx(1.5 * math.log(math.pi), abs=1e-8)


def test_normalize_h1_gaussian_against_ball_volume():
    # int e^{-d^2} = |B_1| Q int r^{Q-1} e^{-r^2} dr with Q = 4, i.e. 2 |B_1|;
    # |B_1| is integrated here from the geodesic boundary parametrisation
    def integrand(a):
        rho = 2 * math.sin(a / 2) / a
        drho = (math.cos(a / 2) * a - 2 * math.sin(a / 2)) / a ** 2
        z = (a - math.sin(a)) / (2 * a * a)
        return 4 * math.pi * rho * z * abs(drho)

    vol, _ = integrate.quad(integrand, 1e-12, 2 * math.pi, epsabs=1e-14, epsrel=1e-13, limit=200)
    m = M.normalize(M.power_measure(H1, 1.0, 2.0))
    assert m.logZ == pytest.approx(math.log(2 * vol), abs=1e-6)


def test_h1_normalization_stable_under_tolerance():
    a = M.normalize(M.power_measure(H1, 1.0, 2.0), tol=1e-6).logZ
    b = M.normalize(M.power_measure(H1, 1.0, 2.0), tol=1e-9).logZ
    assert a == pytest.approx(b, abs=1e-6)


def test_slow_tail_requires_beta_above_Q():
    with pytest.raises(M.MeasureError):
        M.normalize(M.MeasureSpec(G.Space.euclidean(3), M.PotentialSpec(slow_tail_beta=3.0)))
    m = M.normalize(M.MeasureSpec(G.Space.euclidean(1), M.PotentialSpec(slow_tail_beta=3.0)))
    # 2 int_0^inf (1+r)^-3 dr = 1
    assert m.logZ == pytest.approx(0.0, abs=1e-12)


def test_potential_spec_validation():
    with pytest.raises(M.MeasureError):
        M.PotentialSpec(beta=-1.0)
    with pytest.raises(M.MeasureError):
        M.PotentialSpec(W={"family": "nope"})
    with pytest.raises(M.MeasureError):
        M.PotentialSpec(norm="l7")


def test_gaussian_second_moment_and_determinism():
    m = M.normalize(M.gaussian_1d())
    ss = M.sample(m, 100_000, seed=0)
    x2 = ss.points[:, 0] ** 2
    se = x2.std() / math.sqrt(ss.ess)
    assert abs(x2.mean() - 0.5) <= 3 * se
    assert 0.2 <= ss.acceptance <= 0.45 and ss.ess > 0
    again = M.sample(m, 100_000, seed=0)
    assert np.array_equal(ss.points, again.points)


def test_p4_first_moment_against_quadrature():
    m = M.normalize(M.power_measure(R1, 1.0, 4.0))
    ss = M.sample(m, 100_000, seed=1)
    d = np.abs(ss.points[:, 0])
    num, _ = integrate.quad(lambda x: x * math.exp(-x ** 4), 0, np.inf)
    den, _ = integrate.quad(lambda x: math.exp(-x ** 4), 0, np.inf)
    se = d.std() / math.sqrt(ss.ess)
    assert abs(d.mean() - num / den) <= 3 * se


def test_mcmc_matches_exact_radial_sampler():
    m = M.normalize(M.power_measure(G.Space.euclidean(3), 1.0, 2.0))
    a = np.linalg.norm(M.sample(m, 10_000, seed=2).points, axis=1)
    b = np.linalg.norm(M.radial_exact_sample(m, 10_000, seed=3).points, axis=1)
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_exact_radial_sampler_gaussian_moments():
    m = M.normalize(M.gaussian_1d())
    x = M.radial_exact_sample(m, 200_000, seed=0).points[:, 0]
    assert abs(np.mean(x ** 2) - 0.5) < 0.01


def test_bounded_perturbation_sandwich():
    base = M.power_measure(R1, 1.0, 2.0)
    pert = M.power_measure(R1, 1.0, 2.0, V={"family": "bump", "c": 0.7})
    x = np.linspace(-6, 6, 1001)[:, None]
    ratio = np.exp(M.log_density_unnormalized(pert, x) - M.log_density_unnormalized(base, x))
    osc = pert.potential.osc_V
    assert np.all(ratio >= math.exp(-osc) - 1e-15) and np.all(ratio <= math.exp(osc) + 1e-15)


def test_surrogate_ratio_by_construction():
    rng = np.random.default_rng(0)
    g = G.random_points(H1, 500, rng)
    s = M.surrogate_measure()
    d = G.cc_distance(H1, g)
    x = np.linalg.norm(g[:, :2], axis=1)
    ratio = np.exp(M.log_density_unnormalized(s, g) + d * d / 4)
    assert np.allclose(ratio, (1 + x * d) ** -0.5, rtol=1e-12)


def test_quadrature_rule_moments():
    m = M.normalize(M.gaussian_1d())
    q = M.quadrature_rule_1d(m)
    x = q.points[:, 0]
    assert np.sum(q.weights * x ** 2) == pytest.approx(0.5, abs=1e-10)
    assert np.sum(q.weights * x ** 4) == pytest.approx(0.75, abs=1e-10)


def test_log_integral_known_exponential_moment():
    m = M.normalize(M.gaussian_1d())
    lv, _ = M.log_integral(m, extra=lambda p: 0.5 * p[:, 0] ** 2)
    assert lv - m.logZ == pytest.approx(0.5 * math.log(2.0), abs=1e-8)


def test_sample_csv_header():
    m = M.normalize(M.surrogate_measure())
    ss = M.sample(m, 50, seed=0)
    text = ss.to_csv(H1)
    assert text.splitlines()[1] == "x1,x2,z"
