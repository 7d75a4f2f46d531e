"""Approximate energies, directional quotients, interpolation residuals."""
import numpy as np
import pytest

from heislab.ccmetric import ball_moments, ball_volume
from heislab.energy import (
    DiscreteMap,
    approx_energy_density,
    default_ladder,
    directional_energy_density,
    directional_pointwise_limit,
    energy_functional,
    interpolation_inequality_check,
    smooth_map,
    subpartition_diagnostic,
)
from heislab.fields import ScalarField, cos_window
from heislab.heisenberg import Box, unit_box
from heislab.targets import Euclidean, Spider

EU1 = Euclidean(1)
DOMAIN = Box(np.array([-1.0, -1.0, -0.5]), np.array([1.0, 1.0, 0.5]))


def scalar_map(fn):
    return smooth_map(EU1, lambda w: fn(w)[..., None], DOMAIN)


def const_map(c=0.7):
    return scalar_map(lambda w: np.full(w.shape[:-1], c))


def x_map():
    return scalar_map(lambda w: w[..., 0])


def t_map():
    return scalar_map(lambda w: w[..., 2])


def spider_map(seed, space):
    """Smooth radius with piecewise-constant leg labels, canonically encoded."""
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(0.7, 2.0, size=2)
    c = rng.uniform(1.0, 3.0)
    ph = rng.uniform(0.0, 2 * np.pi, size=2)

    def fn(w):
        w = np.asarray(w, dtype=float)
        r = 0.8 * np.abs(np.sin(a * w[..., 0] + ph[0]) * np.cos(b * w[..., 1] + ph[1]))
        leg = 1 + (np.floor(c * (w[..., 0] + w[..., 1]) + w[..., 2]).astype(int) % space.legs)
        out = np.stack([np.where(r > 0, leg, 0).astype(float), r], axis=-1)
        return out

    return smooth_map(space, fn, DOMAIN)


class TestApproxEnergyDensity:
    def test_constant_map_is_exactly_zero(self):
        est = approx_energy_density(const_map(), np.zeros(3), 0.3, 500, seed=71)
        assert est.value == 0.0
        assert est.standard_error == 0.0

    def test_linear_map_density_is_scale_and_position_free(self):
        u = x_map()
        vals = []
        for x in (np.zeros(3), np.array([0.3, -0.2, 0.1])):
            for eps in (0.2, 0.1):
                est = approx_energy_density(u, x, eps, 40_000, seed=72)
                vals.append((est.value, est.standard_error))
        ref = vals[0][0]
        for v, se in vals[1:]:
            assert abs(v - ref) <= 3.0 * (se + vals[0][1])
        # the limiting constant is the planar second moment of the unit ball
        m, mse = ball_moments(1.0, 200_000, seed=73)
        vol = ball_volume(1.0)
        expect = m[0, 0] / vol
        assert abs(ref - expect) <= 3.0 * (vals[0][1] + mse[0, 0] / vol)

    def test_central_map_density_vanishes_at_origin_quadratically(self):
        u = t_map()
        # shared offsets make the ratio between scales exact
        e1 = approx_energy_density(u, np.zeros(3), 0.2, 20_000, seed=74)
        e2 = approx_energy_density(u, np.zeros(3), 0.1, 20_000, seed=74)
        assert e2.value == pytest.approx(0.25 * e1.value, rel=1e-12)

    def test_central_map_density_bounded_off_origin(self):
        u = t_map()
        x = np.array([0.4, 0.1, 0.0])
        vals = [
            approx_energy_density(u, x, eps, 20_000, seed=75).value
            for eps in (0.2, 0.1, 0.05)
        ]
        assert max(vals) <= 2.0 * min(vals) + 1e-12

    def test_ball_escape_rejected(self):
        with pytest.raises(ValueError):
            approx_energy_density(x_map(), np.array([0.95, 0.0, 0.0]), 0.2, 100, seed=76)


class TestDirectionalDensity:
    def test_constant_map(self):
        assert directional_energy_density(const_map(), np.zeros(3), 1, 0.1) == 0.0

    def test_linear_map_along_its_own_flow(self):
        u = x_map()
        for eps in (0.4, 0.05):
            assert directional_energy_density(u, np.zeros(3), 1, eps) == pytest.approx(
                1.0, abs=1e-12
            )

    def test_linear_map_along_transverse_flow(self):
        assert directional_energy_density(x_map(), np.zeros(3), 2, 0.2) == 0.0

    def test_pointwise_limit_constant_sequence(self):
        table = directional_pointwise_limit(x_map(), np.zeros(3), 1, [0.4, 0.2, 0.1])
        assert np.allclose(table["root_density"], 1.0, atol=1e-12)

    def test_pointwise_limit_smooth_increments_shrink(self):
        u = scalar_map(lambda w: np.sin(w[..., 0]))
        table = directional_pointwise_limit(
            u, np.zeros(3), 1, [0.4, 0.2, 0.1, 0.05]
        )
        incs = table["increment"][1:]
        assert np.all(incs[1:] <= incs[:-1] / 2.0)

    def test_pointwise_limit_constant_map(self):
        table = directional_pointwise_limit(const_map(), np.zeros(3), 1, [0.2, 0.1])
        assert np.array_equal(table["root_density"], [0.0, 0.0])

    def test_ladder_must_decrease(self):
        with pytest.raises(ValueError):
            directional_pointwise_limit(x_map(), np.zeros(3), 1, [0.1, 0.2])


def smooth_eta(scale=0.24):
    def val(w):
        w = np.asarray(w, dtype=float)
        return scale * (1.0 + np.sin(1.3 * w[..., 0] - 0.7 * w[..., 1] + w[..., 2]))

    return ScalarField("eta", val)


class TestInterpolationInequality:
    def test_zero_weight_gives_zero_residual(self):
        u0 = spider_map(81, Spider(3))
        u1 = spider_map(82, Spider(3))
        rep = interpolation_inequality_check(
            u0, u1, ScalarField("zero", lambda w: np.zeros(w.shape[:-1])),
            0.15, 2000, seed=83,
        )
        assert rep["violations"] == 0.0
        assert rep["max_residual"] <= 1e-12

    def test_equal_maps_reduce_to_plain_comparison(self):
        u0 = spider_map(84, Spider(3))
        rep = interpolation_inequality_check(u0, u0, smooth_eta(), 0.15, 2000, seed=85)
        assert rep["violations"] == 0.0

    def test_spider_fuzz(self):
        u0 = spider_map(86, Spider(3))
        u1 = spider_map(87, Spider(3))
        rep = interpolation_inequality_check(u0, u1, smooth_eta(), 0.12, 10_000, seed=88)
        assert rep["violations"] == 0.0

    def test_euclidean_fuzz(self):
        eu = Euclidean(2)

        def mk(seed):
            rng = np.random.default_rng(seed)
            a = rng.normal(size=(2, 3))

            def fn(w):
                w = np.asarray(w, dtype=float)
                base = np.stack(
                    [
                        np.sin(a[0, 0] * w[..., 0]) + a[0, 1] * w[..., 1],
                        np.cos(a[1, 0] * w[..., 1]) + a[1, 2] * w[..., 2],
                    ],
                    axis=-1,
                )
                return base

            return smooth_map(eu, fn, DOMAIN)

        rep = interpolation_inequality_check(mk(89), mk(90), smooth_eta(), 0.1, 10_000, seed=91)
        assert rep["violations"] == 0.0

    def test_weight_range_enforced(self):
        u0 = spider_map(92, Spider(3))
        bad = ScalarField("big", lambda w: np.full(w.shape[:-1], 0.6))
        with pytest.raises(ValueError):
            interpolation_inequality_check(u0, u0, bad, 0.1, 100, seed=93)


class TestSubpartition:
    def test_constant_map(self):
        rep = subpartition_diagnostic(
            const_map(), cos_window(np.zeros(3), np.array([0.5, 0.5, 0.25])),
            0.1, [0.5, 0.5], samples=500, seed=94,
        )
        assert rep["C"] == 0.0

    def test_identity_partition(self):
        rep = subpartition_diagnostic(
            x_map(), cos_window(np.zeros(3), np.array([0.5, 0.5, 0.25])),
            0.1, [1.0], samples=1000, seed=95,
        )
        assert rep["C"] == 0.0

    def test_sample_doubling_stability(self):
        window = cos_window(np.zeros(3), np.array([0.5, 0.5, 0.25]))
        a = subpartition_diagnostic(
            x_map(), window, 0.1, [0.5, 0.5], samples=4000, seed=96
        )
        b = subpartition_diagnostic(
            x_map(), window, 0.1, [0.5, 0.5], samples=8000, seed=96
        )
        assert abs(b["C"] - a["C"]) <= 0.2 * max(a["C"], 1e-6)

    def test_weights_validated(self):
        with pytest.raises(ValueError):
            subpartition_diagnostic(x_map(), smooth_eta(), 0.1, [0.5, 0.4], samples=10)


class TestEnergyFunctional:
    WINDOW = cos_window(np.zeros(3), np.array([0.55, 0.55, 0.3]))

    def test_constant_map_all_zero(self):
        out = energy_functional(const_map(), self.WINDOW, [0.2, 0.1], samples=300)
        assert all(e.value == 0.0 for e in out)

    def test_linear_map_converges(self):
        out = energy_functional(
            x_map(), self.WINDOW, default_ladder(DOMAIN, rungs=5), samples=3000
        )
        vals = np.array([e.value for e in out])
        rel = np.abs(np.diff(vals)) / vals[:-1]
        assert rel[-1] <= 0.10

    def test_quadratic_homogeneity_exact(self):
        out1 = energy_functional(x_map(), self.WINDOW, [0.2, 0.1], samples=2000, seed=97)
        u2 = scalar_map(lambda w: 2.0 * w[..., 0])
        out2 = energy_functional(u2, self.WINDOW, [0.2, 0.1], samples=2000, seed=97)
        for a, b in zip(out1, out2):
            assert b.value == pytest.approx(4.0 * a.value, rel=1e-13)

    def test_support_escape_rejected(self):
        wide = cos_window(np.zeros(3), np.array([1.0, 1.0, 0.5]))
        with pytest.raises(ValueError):
            energy_functional(x_map(), wide, [0.3], samples=100)


class TestCompositionBound:
    def test_distance_composition_is_nonexpansive_samplewise(self):
        space = Spider(3)
        u = spider_map(98, space)
        y0 = space.point(2, 0.6)

        def fn(w):
            vals = u.evaluate(np.asarray(w, dtype=float))
            return space.distance_many(vals, np.broadcast_to(y0, vals.shape))[..., None]

        f = smooth_map(EU1, fn, DOMAIN)
        rng = np.random.default_rng(99)
        xs = rng.uniform(-0.6, 0.6, size=(300, 3))
        xs[:, 2] *= 0.5
        for g in (1, 2):
            for eps in (0.2, 0.05):
                for x in xs[:40]:
                    df = directional_energy_density(f, x, g, eps)
                    du = directional_energy_density(u, x, g, eps)
                    assert df <= du + 1e-12


class TestLowerSemicontinuity:
    def test_pointwise_limit_energy_bound(self):
        window = cos_window(np.zeros(3), np.array([0.55, 0.55, 0.3]))
        limit = energy_functional(x_map(), window, [0.1], samples=3000, seed=100)[0]
        ests = []
        for k in (2, 4, 8, 16):
            uk = scalar_map(lambda w, k=k: w[..., 0] * (1.0 - 1.0 / k))
            ests.append(
                energy_functional(uk, window, [0.1], samples=3000, seed=100)[0]
            )
        liminf = min(e.value for e in ests[-2:])
        assert liminf >= limit.value * (1.0 - 1.0 / 8.0) ** 2 - 1e-12
        assert liminf >= limit.value - 3.0 * limit.standard_error - 0.25 * limit.value


class TestDiscreteMapType:
    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            DiscreteMap(np.zeros((3, 3)), np.zeros((2, 1)), EU1)

    def test_no_evaluator_rejected_on_resample(self):
        m = DiscreteMap(np.zeros((2, 3)), np.zeros((2, 1)), EU1)
        with pytest.raises(ValueError):
            m.evaluate(np.zeros(3))
