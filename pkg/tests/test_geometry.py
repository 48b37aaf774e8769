import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coercive import geometry as G

H1 = G.Space.heisenberg(1)
H2 = G.Space.heisenberg(2)

coord = st.floats(-3.0, 3.0, allow_nan=False)
h1_point = st.tuples(coord, coord, coord).map(np.array)


@given(h1_point, h1_point, h1_point)
def test_group_associativity(a, b, c):
    left = G.group_mul(H1, G.group_mul(H1, a, b), c)
    right = G.group_mul(H1, a, G.group_mul(H1, b, c))
    assert np.allclose(left, right, atol=1e-12, rtol=0)


@given(h1_point)
def test_inverse_is_two_sided(g):
    e = G.identity(H1)
    assert np.allclose(G.group_mul(H1, g, G.inverse(H1, g)), e, atol=1e-12)
    assert np.allclose(G.group_mul(H1, G.inverse(H1, g), g), e, atol=1e-12)
    assert np.allclose(G.inverse(H1, g), -g)


@given(h1_point, h1_point, st.floats(0.01, 20.0))
def test_dilation_is_automorphism(a, b, s):
    lhs = G.dilate(H1, s, G.group_mul(H1, a, b))
    rhs = G.group_mul(H1, G.dilate(H1, s, a), G.dilate(H1, s, b))
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * max(1.0, s * s))


@given(h1_point, st.floats(0.05, 20.0))
def test_homogeneity_of_both_norms(g, s):
    gs = G.dilate(H1, s, g)
    assert G.kaplan_norm(H1, gs) == pytest.approx(s * G.kaplan_norm(H1, g), rel=1e-12, abs=1e-300)
    d, ds = G.cc_distance(H1, g), G.cc_distance(H1, gs)
    assert ds == pytest.approx(s * d, rel=1e-6, abs=1e-12)


@given(h1_point)
def test_cc_symmetry(g):
    assert G.cc_distance(H1, G.inverse(H1, g)) == pytest.approx(G.cc_distance(H1, g), rel=1e-12)


@given(h1_point, h1_point, h1_point)
def test_triangle_inequality(a, b, c):
    dab = G.pair_distance(H1, a, b)
    dbc = G.pair_distance(H1, b, c)
    dac = G.pair_distance(H1, a, c)
    assert dac <= dab + dbc + 1e-9


def test_horizontal_axis_and_center_axis_closed_forms():
    # straight horizontal segments are geodesics
    assert G.cc_distance(H1, [1.7, 0.0, 0.0]) == pytest.approx(1.7, rel=1e-12)
    # a circle of length L encloses area L^2/(4 pi), which is the z it reaches
    for z in (0.1, 1.0, 7.0):
        assert G.cc_distance(H1, [0.0, 0.0, z]) == pytest.approx(math.sqrt(4 * math.pi * z), rel=1e-9)


def test_cc_is_bounded_by_kaplan_equivalence_and_euclid():
    rng = np.random.default_rng(3)
    g = G.random_points(H1, 2000, rng)
    d = G.cc_distance(H1, g)
    k = G.kaplan_norm(H1, g)
    x = np.linalg.norm(g[:, :2], axis=1)
    assert np.all(d >= x - 1e-12)
    # the ratio of two homogeneous norms is bounded above and below
    ratio = d / k
    assert 0.3 < ratio.min() and ratio.max() < 3.0


def test_eikonal_fd_and_analytic():
    rng = np.random.default_rng(7)
    g = G.random_points(H1, 100, rng)
    g = g[np.linalg.norm(g[:, :2], axis=1) > 0.05]
    _, grad = G.distance_gradient(H1, g)
    assert np.allclose(np.linalg.norm(grad, axis=1), 1.0, atol=1e-9)
    fd = G.horizontal_gradient(H1, lambda p: G.cc_distance(H1, p), g)
    assert np.allclose(np.linalg.norm(fd, axis=1), 1.0, atol=1e-3)
    assert np.allclose(fd, grad, atol=1e-3)


def test_gradient_flagged_on_axis():
    _, grad = G.distance_gradient(H1, np.array([[0.0, 0.0, 0.5]]))
    assert np.all(np.isnan(grad))


def test_distance_gradient_with_center_matches_fd():
    rng = np.random.default_rng(11)
    c = np.array([0.4, -0.3, 0.2])
    g = G.random_points(H1, 30, rng)
    _, ga = G.distance_gradient(H1, g, center=c)
    fd = G.horizontal_gradient(H1, lambda p: G.pair_distance(H1, p, c), g)
    ok = np.all(np.isfinite(ga), axis=1)
    assert np.allclose(ga[ok], fd[ok], atol=1e-4)


def test_kaplan_gradient_examples_and_scan():
    assert np.linalg.norm(G.kaplan_gradient(H1, [1.0, 0.0, 0.0])) == pytest.approx(1.0, abs=1e-12)
    _, g = G.distance_gradient(H1, np.array([[1.0, 0.0, 0.0]]))
    assert np.linalg.norm(g) == pytest.approx(1.0, abs=1e-3)
    pt, gmin = G.gradient_vanishing_scan(H1, "kaplan")
    assert gmin < 1e-6
    assert np.linalg.norm(pt[:2]) < math.pi / 200
    assert G.kaplan_norm(H1, pt) == pytest.approx(1.0, abs=1e-12)


def test_kaplan_gradient_matches_fd():
    rng = np.random.default_rng(5)
    g = G.random_points(H1, 50, rng)
    fd = G.horizontal_gradient(H1, lambda p: G.kaplan_norm(H1, p), g)
    assert np.allclose(G.kaplan_gradient(H1, g), fd, atol=1e-6)


def test_kohn_laplacian_polynomial_oracles():
    rng = np.random.default_rng(2)
    g = G.random_points(H1, 20, rng)
    x2 = np.sum(g[:, :2] ** 2, axis=1)
    # X1 = d1 + x2/2 dz, X2 = d2 - x1/2 dz, so sum X_i^2 (z^2) = |x|^2 / 2
    lap = G.kohn_laplacian(H1, lambda p: p[..., 2] ** 2, g)
    assert np.allclose(lap, x2 / 2.0, rtol=1e-4, atol=1e-5)
    lap_z = G.kohn_laplacian(H1, lambda p: p[..., 2], g)
    assert np.allclose(lap_z, 0.0, atol=1e-5)


def test_euclidean_laplacian_of_distance():
    R3 = G.Space.euclidean(3)
    rng = np.random.default_rng(4)
    g = rng.standard_normal((20, 3)) + 2.0
    lap = G.kohn_laplacian(R3, lambda p: np.linalg.norm(p, axis=-1), g)
    assert np.allclose(lap, 2.0 / np.linalg.norm(g, axis=1), rtol=1e-3)


def test_kohn_laplacian_of_d_negative_near_axis():
    g = np.array([[1e-3, 0.0, 0.5], [0.0, 2e-3, 1.0]])
    lap = G.kohn_laplacian(H1, lambda p: G.cc_distance(H1, p), g, h=1e-5)
    assert np.all(lap < -10.0)


def test_hom_taylor_quadratic_contact():
    """phi - phi(x0) = O(d(x, x0)^2) at a point where grad phi vanishes."""
    x0 = np.array([0.0, 0.0, 0.25])
    rng = np.random.default_rng(9)
    dirs = G.random_points(H1, 400, rng)
    dirs = dirs / G.cc_distance(H1, dirs)[:, None] ** np.array([1, 1, 2])
    rs, devs = [], []
    for s in np.geomspace(1e-3, 1e-1, 8):
        pts = G.group_mul(H1, G.dilate(H1, s, dirs), x0)
        rs.append(s)
        devs.append(np.max(np.abs(G.kaplan_norm(H1, pts) - 1.0)))
    slope = np.polyfit(np.log(rs), np.log(devs), 1)[0]
    assert slope >= 1.9


def test_oracle_agrees_with_closed_form_on_a_few_points():
    for g in ([1.0, 0.5, 0.3], [0.0, 0.0, 1.0]):
        o = G.cc_distance_oracle(H1, g, seed=1)
        assert o == pytest.approx(float(G.cc_distance(H1, g)), rel=1e-3)


def test_h2_reduces_to_h1_form():
    g2 = np.array([0.6, 0.0, 0.8, 0.0, 0.4])
    g1 = np.array([1.0, 0.0, 0.4])
    assert G.cc_distance(H2, g2) == pytest.approx(float(G.cc_distance(H1, g1)), rel=1e-12)


def test_group_point_roundtrip_and_validation():
    p = G.GroupPoint((1.0, 2.0), 3.0)
    a = p.to_array(H1)
    assert G.GroupPoint.from_array(H1, a) == p
    with pytest.raises(G.GeometryError):
        G.GroupPoint((float("nan"), 0.0), 0.0)
    with pytest.raises(G.GeometryError):
        p.to_array(H2)
