import math

import numpy as np
import pytest

from coercive import counterexamples as CX
from coercive import geometry as G
from coercive import inequalities as I

H1 = G.Space.heisenberg(1)


def test_unit_ball_volume_against_monte_carlo():
    # the box |x| <= 1, |z| <= 0.2 has volume 0.4 pi and contains the unit ball
    rng = np.random.default_rng(0)
    n = 400_000
    r = np.sqrt(rng.random(n))
    a = rng.uniform(0, 2 * np.pi, n)
    z = rng.uniform(-0.2, 0.2, n)
    pts = np.column_stack([r * np.cos(a), r * np.sin(a), z])
    inside = G.cc_distance(H1, pts) <= 1.0
    est = 0.4 * np.pi * inside.mean()
    se = 0.4 * np.pi * inside.std() / math.sqrt(n)
    assert abs(CX.cc_unit_ball_volume() - est) <= 4 * se
    assert np.max(np.abs(z[inside])) == pytest.approx(1 / (2 * np.pi), abs=2e-3)


def test_uniform_ball_is_uniform_in_the_ball():
    rng = np.random.default_rng(1)
    pts = CX.uniform_ball(H1, 0.5, 50_000, rng)
    d = G.cc_distance(H1, pts)
    assert pts.shape == (50_000, 3) and np.all(d <= 0.5 + 1e-12)
    # |B(s)| = s^4 |B(1)|: the fraction inside radius 0.25 is 1/16
    assert np.mean(d <= 0.25) == pytest.approx(1 / 16, abs=0.005)


def test_base_points():
    x0 = CX.base_point("kaplan")
    assert np.allclose(x0, [0, 0, 0.25])
    assert np.linalg.norm(G.kaplan_gradient(H1, x0)) < 1e-12
    assert G.kaplan_norm(H1, x0) == pytest.approx(1.0)
    assert G.cc_distance(H1, CX.base_point("cc")) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        CX.base_point("taxicab")


def test_experiment_validation_and_radius():
    e = CX.NoLSExperiment()
    assert e.radius(16.0) == pytest.approx(0.25)
    assert e.valid(4.0) and not CX.NoLSExperiment(p_exp=1.0).valid(0.5)
    with pytest.raises(ValueError):
        CX.NoLSExperiment(q=3.0)


@pytest.fixture(scope="module")
def small_series():
    e = CX.NoLSExperiment(t_grid=(4.0, 16.0, 64.0), n_samples=20_000, seed=2)
    return e, CX.no_ls_contrast(e, cc_control=True)


def test_kaplan_ratio_grows_and_cc_stays_bounded(small_series):
    _, tab = small_series
    k = [r.ratio.value for r in tab.kaplan]
    c = [r.ratio.value for r in tab.cc]
    assert np.all(np.diff(k) > 0) and k[-1] / k[0] > 5
    assert max(c) / min(c) < 5


def test_records_are_self_consistent(small_series):
    e, tab = small_series
    for r in tab.kaplan + tab.cc:
        assert r.ess >= CX.MIN_ESS and r.valid
        assert r.ratio.value == pytest.approx(r.entropy.value / r.energy.value, rel=1e-12)
        assert r.r == pytest.approx(e.radius(r.t))
        # the Gibbs factor varies over the support; the ESS floor is what
        # keeps the importance estimate usable
        assert np.isfinite(r.weight_spread) and r.weight_spread >= 1.0


def test_lsq_checker_falsifies_every_candidate(small_series):
    """For any c, the f_t family eventually gives a VIOLATED LS_2 verdict."""
    _, tab = small_series
    first, last = tab.kaplan[0], tab.kaplan[-1]
    for c in (first.ratio.value, 2 * first.ratio.value, 4 * first.ratio.value):
        verdict, _ = I.decide(last.ratio.value, c, last.ratio.std_error)
        assert verdict == I.VIOLATED


def test_series_checks_and_csv(small_series):
    e, tab = small_series
    chk = CX.series_checks(e, tab.kaplan)
    assert chk["strictly_increasing"] and chk["n_excluded"] == 0
    assert 0.8 <= chk["entropy_slope"] <= 1.2
    text = CX.records_to_csv(tab.kaplan)
    lines = text.splitlines()
    assert lines[0].split(",") == CX.CSV_COLUMNS and len(lines) == 4


def test_reproducible_records():
    e = CX.NoLSExperiment(t_grid=(8.0,), n_samples=5000, seed=1)
    a = CX.records_to_csv(CX.no_ls_series(e))
    b = CX.records_to_csv(CX.no_ls_series(e))
    assert a == b


def test_loglog_slope():
    x = np.array([1.0, 2.0, 4.0])
    assert CX.loglog_slope(x, 3 * x ** 1.5) == pytest.approx(1.5)


def test_cc_control_requires_p_at_least_two():
    e = CX.NoLSExperiment(p_exp=1.5, t_grid=(4.0,), n_samples=2000)
    with pytest.raises(ValueError):
        CX.no_ls_contrast(e, cc_control=True)
