"""Geodesics, the cc distance, ball geometry, moments, measure contraction."""
import numpy as np
import pytest

from heislab.ccmetric import (
    KAPPA_CENTRAL,
    GeodesicParams,
    ball_box_constants,
    ball_moments,
    ball_volume,
    ball_volume_mc,
    cc_distance,
    cc_distance_vec,
    geodesic_point,
    geodesic_velocity,
    horizontality_residual,
    jacobian_det,
    jacobian_profile,
    mcp_check,
    metric_ball_inside,
    sample_ball_uniform,
    solve_endpoint,
    solve_endpoint_vec,
)
from heislab.heisenberg import GroupPoint, dilate_vec, inv_vec, mul_vec, unit_box


def random_params(seed, count):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        theta = rng.uniform(0.0, 2.0 * np.pi)
        psi = rng.uniform(-2.0 * np.pi + 0.3, 2.0 * np.pi - 0.3)
        rho0 = rng.uniform(0.3, 2.0)
        out.append(
            GeodesicParams(
                direction=np.array([np.cos(theta), np.sin(theta)]),
                phase=psi,
                length=rho0,
            )
        )
    return out


def random_endpoints(seed, count):
    rng = np.random.default_rng(seed)
    w = rng.uniform(-1.0, 1.0, size=(count, 3))
    w[:, 2] *= 0.5
    return w


class TestGeodesicParams:
    def test_direction_must_be_unit(self):
        with pytest.raises(ValueError):
            GeodesicParams(direction=np.array([1.0, 1.0]), phase=0.0, length=1.0)

    def test_phase_window(self):
        with pytest.raises(ValueError):
            GeodesicParams(direction=np.array([1.0, 0.0]), phase=7.0, length=1.0)

    def test_length_nonnegative(self):
        with pytest.raises(ValueError):
            GeodesicParams(direction=np.array([1.0, 0.0]), phase=0.0, length=-0.1)


class TestGeodesicPoint:
    def test_starts_at_origin(self):
        for g in random_params(21, 5):
            assert np.allclose(geodesic_point(g, 0.0), np.zeros(3), atol=1e-15)

    def test_zero_phase_straight_segment(self):
        g = GeodesicParams(direction=np.array([0.0, 1.0]), phase=0.0, length=1.0)
        assert np.allclose(geodesic_point(g, 1.0), [1.0, 0.0, 0.0], atol=1e-14)
        assert np.allclose(geodesic_point(g, 0.5), [0.5, 0.0, 0.0], atol=1e-14)

    def test_arc_length_matches_length_parameter(self):
        # quadrature of the finite-difference planar speed along the curve
        s = np.linspace(0.0, 1.0, 201)
        delta = 1e-5
        for g in random_params(22, 20):
            fwd = np.array([geodesic_point(g, si + delta) for si in s])
            bwd = np.array([geodesic_point(g, si - delta) for si in s])
            speed = np.linalg.norm((fwd - bwd)[:, :2] / (2 * delta), axis=1)
            arc = np.trapezoid(speed, s)
            assert abs(arc - g.length) <= 1e-6

    def test_constant_speed(self):
        for g in random_params(23, 10):
            v = np.array([geodesic_velocity(g, si) for si in np.linspace(0, 1, 17)])
            speeds = np.linalg.norm(v[:, :2], axis=1)
            assert np.max(np.abs(speeds - g.length)) <= 1e-9


class TestHorizontality:
    def test_trivial_geodesic(self):
        g = GeodesicParams(direction=np.array([1.0, 0.0]), phase=1.0, length=0.0)
        assert horizontality_residual(g, 0.3) == 0.0

    def test_residual_small_on_random_params(self):
        s = np.linspace(0.0, 1.0, 100)
        for g in random_params(24, 30):
            res = np.array([horizontality_residual(g, si) for si in s])
            assert np.max(np.abs(res)) <= 1e-9

    def test_finite_difference_cross_check(self):
        delta = 1e-6
        for g in random_params(25, 5):
            for si in (0.2, 0.7):
                p0 = geodesic_point(g, si - delta)
                p1 = geodesic_point(g, si + delta)
                vel = (p1 - p0) / (2 * delta)
                x, y, _ = geodesic_point(g, si)
                res = vel[2] - 0.5 * (x * vel[1] - y * vel[0])
                assert abs(res) <= 1e-6 * max(1.0, g.length**2)

    def test_corrupted_central_component_detected(self):
        g = GeodesicParams(direction=np.array([1.0, 0.0]), phase=2.0, length=1.0)
        bad = np.abs(horizontality_residual(g, np.linspace(0.1, 1.0, 25), t_scale=1.1))
        assert np.max(bad) > 1e-3


class TestSolveEndpoint:
    def test_planar_radial_case(self):
        g = solve_endpoint(np.array([1.0, 0.0, 0.0]))
        assert abs(g.phase) <= 1e-9
        assert g.length == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(geodesic_point(g, 1.0), [1.0, 0.0, 0.0], atol=1e-10)

    def test_central_axis_distance(self):
        for tau in (0.25, 1.0):
            g = solve_endpoint(np.array([0.0, 0.0, tau]))
            assert g.length == pytest.approx(2.0 * np.sqrt(np.pi * tau), rel=1e-12)
            assert abs(g.phase) == pytest.approx(2.0 * np.pi, abs=1e-12)
            assert np.allclose(geodesic_point(g, 1.0), [0.0, 0.0, tau], atol=1e-8)

    def test_round_trip_fuzz(self):
        for w in random_endpoints(26, 200):
            g = solve_endpoint(w)
            assert np.max(np.abs(geodesic_point(g, 1.0) - w)) <= 1e-8

    def test_origin_rejected(self):
        with pytest.raises(ValueError):
            solve_endpoint(np.zeros(3))

    def test_vectorized_agrees_with_scalar(self):
        w = random_endpoints(27, 64)
        psi, rho0 = solve_endpoint_vec(w)
        for i in range(w.shape[0]):
            g = solve_endpoint(w[i])
            assert abs(psi[i] - g.phase) <= 1e-10
            assert abs(rho0[i] - g.length) <= 1e-10


class TestDistance:
    def test_coincident_points(self):
        p = GroupPoint(np.array([0.3]), np.array([-0.1]), 0.2)
        assert cc_distance(p, p) == 0.0

    def test_homogeneity_example(self):
        w = random_endpoints(28, 50)
        v = np.roll(w, 1, axis=0)
        base = cc_distance_vec(mul_vec(inv_vec(w), v))
        for eps in (0.5, 2.0):
            scaled = cc_distance_vec(
                mul_vec(inv_vec(dilate_vec(eps, w)), dilate_vec(eps, v))
            )
            assert np.max(np.abs(scaled - eps * base)) <= 1e-9 * max(1.0, eps)

    def test_planar_projection_lower_bound(self):
        w = random_endpoints(29, 2000)
        d = cc_distance_vec(w)
        planar = np.hypot(w[:, 0], w[:, 1])
        assert np.min(d - planar) >= -1e-12

    def test_symmetry(self):
        w = random_endpoints(30, 500)
        assert np.max(np.abs(cc_distance_vec(w) - cc_distance_vec(-w))) <= 1e-12


class TestJacobian:
    def test_profile_positive_inside_phase_window(self):
        psi = np.linspace(1e-3, 2.0 * np.pi - 1e-3, 500)
        assert np.all(jacobian_profile(1, psi, 1.0) > 0.0)

    def test_small_phase_limit_matches_series(self):
        # the removable value at zero phase continues the profile smoothly
        lim = jacobian_profile(1, 0.0, 1.0)
        near = jacobian_profile(1, np.array([1e-4, -1e-4]), 1.0)
        assert np.max(np.abs(near - lim)) <= 1e-7
        assert lim == pytest.approx(1.0 / 12.0, rel=1e-12)

    def test_finite_difference_determinant(self):
        # |det d(endpoint)/d(angle, phase, length)| against the closed form
        rng = np.random.default_rng(31)
        delta = 1e-5
        for _ in range(40):
            theta = rng.uniform(0.0, 2.0 * np.pi)
            psi = rng.uniform(-5.9, 5.9)
            rho0 = rng.uniform(0.3, 2.0)

            def endpoint(th, ps, rh):
                g = GeodesicParams(
                    direction=np.array([np.cos(th), np.sin(th)]),
                    phase=ps,
                    length=rh,
                )
                return geodesic_point(g, 1.0)

            cols = []
            for k in range(3):
                args = np.array([theta, psi, rho0])
                hi, lo = args.copy(), args.copy()
                hi[k] += delta
                lo[k] -= delta
                cols.append((endpoint(*hi) - endpoint(*lo)) / (2 * delta))
            det = abs(np.linalg.det(np.stack(cols, axis=1)))
            closed = jacobian_profile(1, psi, rho0)
            assert det == pytest.approx(closed, rel=1e-4)

    def test_jacobian_det_wraps_profile(self):
        g = GeodesicParams(direction=np.array([0.6, 0.8]), phase=1.3, length=0.7)
        assert jacobian_det(g) == pytest.approx(
            float(jacobian_profile(1, 1.3, 0.7)), rel=1e-14
        )


def section_volume_oracle(r, phi_nodes=401):
    """Ball volume by planar-radial slicing, independent of the jacobian.

    Rotations about the central axis and the central reflection are
    isometries, so the ball is a solid of revolution with a symmetric
    central section; the volume is 2 pi * integral of rp * 2 * t_max(rp)
    with t_max found by bisecting the distance along the central slot.
    The substitution rp = r sin(phi) removes the square-root edge.
    """
    phi = np.linspace(0.0, 0.5 * np.pi, phi_nodes)
    rp = r * np.sin(phi)
    lo = np.zeros_like(rp)
    hi = np.full_like(rp, 0.25 * r * r)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        pts = np.stack([rp, np.zeros_like(rp), mid], axis=1)
        inside = cc_distance_vec(pts) <= r
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    t_max = 0.5 * (lo + hi)
    t_max[-1] = 0.0
    integrand = 2.0 * np.pi * rp * (2.0 * t_max) * r * np.cos(phi)
    weights = np.ones(phi_nodes)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    step = phi[1] - phi[0]
    return float(np.sum(weights * integrand) * step / 3.0)


class TestBallVolume:
    def test_against_section_oracle(self):
        for r in (1.0, 0.5):
            vol = ball_volume(r)
            oracle = section_volume_oracle(r)
            assert abs(vol - oracle) <= 3e-3 * oracle

    def test_doubling_ratio(self):
        ratio = ball_volume(2.0) / ball_volume(1.0)
        assert abs(ratio - 16.0) <= 0.01 * 16.0

    def test_homogeneous_profile_constant(self):
        vals = [ball_volume(r) / r**4 for r in (1.0, 0.5, 0.25)]
        assert max(vals) - min(vals) <= 0.01 * vals[0]

    def test_monte_carlo_agrees(self):
        vol = ball_volume(1.0)
        est, se = ball_volume_mc(1.0, 400_000, seed=32)
        assert abs(est - vol) <= max(3.0 * se, 0.01 * vol)


class TestBallSampling:
    def test_samples_inside_ball(self):
        pts = sample_ball_uniform(None, 0.8, seed=33, count=2000)
        assert pts.shape == (2000, 3)
        assert np.max(cc_distance_vec(pts)) <= 0.8 * (1 + 1e-12)

    def test_shifted_center(self):
        center = np.array([0.4, -0.2, 0.1])
        pts = sample_ball_uniform(center, 0.5, seed=34, count=500)
        offs = mul_vec(inv_vec(center), pts)
        assert np.max(cc_distance_vec(offs)) <= 0.5 * (1 + 1e-12)

    def test_deterministic(self):
        a = sample_ball_uniform(None, 1.0, seed=35, count=300)
        b = sample_ball_uniform(None, 1.0, seed=35, count=300)
        assert np.array_equal(a, b)


class TestBallBoxConstants:
    def test_ordering_and_stability(self):
        c1, C1 = ball_box_constants(1.0, samples=20_000)
        c2, C2 = ball_box_constants(0.5, samples=20_000, seed=20260103)
        assert 0.0 < c1 <= C1
        assert abs(c2 - c1) <= 0.05 * c1
        assert abs(C2 - C1) <= 0.05 * C1

    def test_ball_points_inside_outer_box(self):
        c, C = ball_box_constants(1.0, samples=20_000)
        pts = sample_ball_uniform(None, 1.0, seed=36, count=4000)
        eps = C * 1.0
        ok = (
            (np.abs(pts[:, 0]) <= eps * (1 + 1e-9))
            & (np.abs(pts[:, 1]) <= eps * (1 + 1e-9))
            & (np.abs(pts[:, 2]) <= eps * eps * (1 + 1e-9))
        )
        assert np.all(ok)

    def test_inner_box_points_inside_ball(self):
        c, _ = ball_box_constants(1.0, samples=20_000)
        rng = np.random.default_rng(37)
        eps = c * 1.0
        pts = rng.uniform(-1.0, 1.0, size=(4000, 3))
        pts[:, :2] *= eps
        pts[:, 2] *= eps * eps
        # sampled extremes set c, so allow a hair of slack outside
        assert np.max(cc_distance_vec(pts)) <= 1.0 + 1e-6


class TestBallMoments:
    def test_symmetry_structure(self):
        count = 200_000
        m, se = ball_moments(1.0, count, seed=38)
        assert m.shape == (3, 3) and se.shape == (3, 3)
        assert abs(m[0, 1]) <= 3.0 * se[0, 1]
        # the diagonal gap uses the standard error of the paired difference
        # (both entries come from the same sample batch)
        pts = sample_ball_uniform(None, 1.0, seed=38, count=count)
        diff = pts[:, 0] ** 2 - pts[:, 1] ** 2
        se_diff = ball_volume(1.0) * float(diff.std(ddof=1)) / np.sqrt(count)
        assert abs(m[0, 0] - m[1, 1]) <= 3.0 * se_diff

    def test_scaling_exponent(self):
        m1, se1 = ball_moments(1.0, 150_000, seed=39)
        mh, seh = ball_moments(0.5, 150_000, seed=40)
        scale = 0.5**6
        for i in (0, 1):
            gap = abs(m1[i, i] * scale - mh[i, i])
            assert gap <= 3.0 * (seh[i, i] + se1[i, i] * scale)


class TestMcp:
    def test_identity_contraction(self):
        # the tau = 1 contraction rebuilds the height through the phase
        # solve (~1e-15), which the 1e-6 central-difference steps amplify
        # to ~1e-9 per jacobian entry; 1e-7 is the honest FD floor here
        rep = mcp_check(np.zeros(3), 0.5, 1.0, samples=4000, seed=41)
        assert rep["theta"] == pytest.approx(1.0, abs=1e-7)

    def test_euclidean_control(self):
        rep = mcp_check(np.zeros(3), 0.5, 0.5, samples=20_000, seed=42, metric="euclidean")
        assert rep["exponent"] == 3
        assert abs(rep["theta"] - 1.0) <= 0.05

    def test_group_contraction_stable(self):
        a = mcp_check(np.zeros(3), 0.5, 0.5, samples=20_000, seed=43)
        b = mcp_check(np.zeros(3), 0.5, 0.5, samples=40_000, seed=43)
        assert np.isfinite(a["theta"]) and a["theta"] >= 1.0 - 1e-9
        assert abs(b["theta"] - a["theta"]) <= 0.10 * a["theta"]

    def test_bad_tau_rejected(self):
        with pytest.raises(ValueError):
            mcp_check(np.zeros(3), 0.5, 0.0, samples=100)


class TestMetricBallInside:
    def test_central_extent_constant(self):
        assert KAPPA_CENTRAL == pytest.approx(1.0 / (2.0 * np.pi), rel=1e-15)

    def test_deep_center_accepted_shallow_rejected(self):
        box = unit_box(1)
        assert metric_ball_inside(box, np.array([0.5, 0.5, 0.5]), 0.25)
        assert not metric_ball_inside(box, np.array([0.05, 0.5, 0.5]), 0.25)
