import math

import numpy as np
import pytest
from scipy import special

from coercive import muckenhoupt as MK

GAUSS = MK.power_potential(1.0, 2.0)
OSC = MK.oscillating_potential(1.0, 2.0, 0.5)


def gaussian_logB_closed_form(r):
    # B_+(r)^2 = int_r^inf e^{-x^2} dx * int_0^r e^{x^2} dx for q = 2
    tail = 0.5 * math.sqrt(math.pi) * special.erfc(r)
    inner = 0.5 * math.sqrt(math.pi) * special.erfi(r)
    return 0.5 * math.log(tail) + 0.5 * math.log(inner)


@pytest.mark.parametrize("r", [0.1, 1.0, 3.0, 8.0])
def test_gaussian_b_plus_closed_form(r):
    assert MK.b_plus(GAUSS, r) == pytest.approx(gaussian_logB_closed_form(r), abs=1e-9)


def test_exponential_b_plus_closed_form_q3():
    # U = |x|, q = 3, q' = 3/2: B^3 = e^{-r} * (int_0^r e^{x/2} dx)^2
    m = MK.power_potential(1.0, 1.0)
    r = 4.0
    expected = (-r) / 3.0 + (2.0 / 3.0) * math.log(2.0 * (math.exp(r / 2) - 1.0))
    assert MK.b_plus(m, r, q=3.0) == pytest.approx(expected, abs=1e-9)


def test_b_plus_stable_under_tolerance_halving():
    a = MK.b_plus(GAUSS, 1.0, tol=1e-10)
    b = MK.b_plus(GAUSS, 1.0, tol=5e-11)
    assert abs(a - b) <= 1e-6


def test_b_plus_decreases_to_minus_infinity_at_zero():
    rs = [1.0, 0.3, 0.1, 0.03, 0.01, 1e-3]
    vals = [MK.b_plus(GAUSS, r) for r in rs]
    assert np.all(np.diff(vals) < 0)
    assert vals[-1] < -3.0


def test_b_minus_mirrors_b_plus():
    for r in (0.5, 2.0, 7.0):
        assert MK.b_minus(OSC, r) == MK.b_plus(OSC, r)
        assert MK.b_minus(OSC, -r) == MK.b_plus(OSC, r)


def test_input_validation():
    with pytest.raises(ValueError):
        MK.b_plus(GAUSS, 0.0)
    with pytest.raises(ValueError):
        MK.b_plus(GAUSS, 1.0, q=1.0)
    with pytest.raises(ValueError):
        MK.OneDimMeasure("oscillating", 1.0, 2.0, 1.5)
    with pytest.raises(ValueError):
        MK.counterexample_series(n_max=7)


def test_series_grows_and_beats_lower_bounds():
    rows = MK.counterexample_series(1.0, 2.0, 0.5, 2.0, 3)
    logB = [r.logB for r in rows]
    assert np.all(np.diff(logB) > 0)
    for r in rows:
        assert r.logB >= r.log_lower_bound
        assert r.log_lower_bound >= r.log_lower_endpoint - 1e-9
        assert r.log_lower_endpoint == pytest.approx(r.log_lower_closed, abs=1e-9)


def test_series_reproducible_at_higher_precision():
    a = MK.counterexample_series(1.0, 2.0, 0.5, 2.0, 2, dps=30)
    b = MK.counterexample_series(1.0, 2.0, 0.5, 2.0, 2, tol=1e-14, dps=60)
    for x, y in zip(a, b):
        assert x.logB == pytest.approx(y.logB, rel=1e-4)


def test_series_bounded_without_oscillation():
    rows = MK.counterexample_series(1.0, 2.0, 0.0, 2.0, 4)
    logB = np.array([r.logB for r in rows])
    # B_+(r)^2 ~ 1/(4 r^2) for the Gaussian: bounded above, slowly decreasing
    assert np.all(logB < 0) and np.all(np.diff(logB) < 0)
    r = np.array([row.r_n for row in rows])
    assert np.allclose(logB, -np.log(2 * r), atol=0.05)


def test_growth_slope_of_exact_quadratic():
    rows = [MK.SeriesRow(n, 0.0, 0.3 * (2 * n * math.pi) ** 2 + 1.0, 0, 0, 0) for n in range(1, 5)]
    assert MK.growth_slope(rows) == pytest.approx(0.3, rel=1e-12)


def test_series_csv_columns():
    rows = [MK.SeriesRow(1, 7.85, 11.3, 0.1, -1.0, -1.0)]
    head = MK.series_to_csv(rows).splitlines()[0]
    assert head == "n,r_n,logB,log_lower_bound,log_lower_endpoint,log_lower_closed"


def test_fd_gap_gaussian_and_uniform():
    assert MK.fd_spectral_gap(GAUSS, 8.0, 2048) == pytest.approx(2.0, abs=0.01)
    R = 3.0
    gap = MK.fd_spectral_gap(MK.uniform_density(), R, 1024)
    assert gap == pytest.approx((math.pi / (2 * R)) ** 2, rel=0.01)


def test_fd_gap_min_grid():
    with pytest.raises(ValueError):
        MK.fd_spectral_gap(GAUSS, 8.0, 32)


def test_fd_gap_matches_dense_solver_at_small_size():
    from scipy.linalg import eigh_tridiagonal

    R, n = 4 * math.pi, 256
    x = np.linspace(-R, R, n)
    h = x[1] - x[0]
    U = OSC.U_array(x)
    w = np.exp(-(U - U.min()))
    wm = np.exp(-(OSC.U_array(0.5 * (x[1:] + x[:-1])) - U.min()))
    # symmetric form of the generalized problem K f = lam W f
    diag = np.zeros(n)
    diag[:-1] += wm
    diag[1:] += wm
    diag /= h * h
    off = -wm / (h * h)
    s = 1.0 / np.sqrt(w)
    lam = eigh_tridiagonal(diag * s * s, off * s[:-1] * s[1:], select="i", select_range=(0, 1))[0]
    assert MK.fd_spectral_gap(OSC, R, n) == pytest.approx(lam[1], rel=1e-3)


def test_muckenhoupt_and_spectral_verdicts_agree():
    """Bounded B_+ over r <= 50 iff the FD gap stays positive under R doubling."""
    cases = {
        "gauss": (GAUSS, (6.0, 12.0), True),
        "exponential": (MK.power_potential(1.0, 1.0), (16.0, 32.0), True),
        "osc_p2": (OSC, (4 * math.pi, 8 * math.pi), False),
        "osc_p1": (MK.oscillating_potential(1.0, 1.0, 0.5), (8 * math.pi, 16 * math.pi), False),
    }
    for name, (m, Rs, gapped) in cases.items():
        logB = [MK.b_plus(m, r) for r in (12.5, 25.0, 50.0)]
        bounded = max(logB) < 1.0 and logB[-1] - logB[0] < 1.0
        g1, g2 = (MK.fd_spectral_gap(m, R, 1024) for R in Rs)
        stable = g2 > 0.5 * g1 and g2 > 1e-3
        assert bounded == stable == gapped, name


def test_muckenhoupt_sup_gaussian_is_finite():
    val, arg = MK.muckenhoupt_sup(GAUSS, 2.0, 50.0, 10)
    # the closed form peaks near r = 0.9
    assert val < 0.0 and 0 < arg <= 50.0
