"""Guidance field tests: feasibility, field geometry, polar radial map."""

import numpy as np
import pytest

from loitersim import guidance
from loitersim.uav import ActuatorLimits

SPEC = guidance.LoiterSpec(radius=200.0, speed=10.0)


class TestFeasibility:
    def test_reference_parameters_feasible(self):
        spec = guidance.LoiterSpec(200.0, 20.0)
        assert guidance.check_feasibility(spec, 0.04, ActuatorLimits(0.2))

    def test_orbit_rate_boundary_is_infeasible(self):
        spec = guidance.LoiterSpec(100.0, 20.0)  # v/r == 0.2 exactly
        assert not guidance.check_feasibility(spec, 0.04, ActuatorLimits(0.2))

    def test_slow_sampling_infeasible(self):
        assert not guidance.check_feasibility(SPEC, 10.0, ActuatorLimits(0.2))

    def test_nonpositive_tau_rejected(self):
        with pytest.raises(ValueError):
            guidance.check_feasibility(SPEC, 0.0, ActuatorLimits(0.2))


class TestField:
    def test_on_orbit_tangential(self):
        out = guidance.lyapunov_field(np.array([SPEC.radius, 0.0]), SPEC)
        np.testing.assert_allclose(out, [0.0, SPEC.speed], atol=1e-12)

    def test_double_radius_hand_value(self):
        # Hand substitution: prefix -v/(10 r^3), components (6 r^3, -8 r^3).
        out = guidance.lyapunov_field(np.array([2.0 * SPEC.radius, 0.0]), SPEC)
        np.testing.assert_allclose(out, [-0.6 * SPEC.speed, 0.8 * SPEC.speed], atol=1e-12)

    def test_magnitude_invariance(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(-5 * SPEC.radius, 5 * SPEC.radius, size=(10_000, 2))
        pts = pts[np.linalg.norm(pts, axis=1) > guidance.ORIGIN_EPS]
        speeds = np.linalg.norm(guidance.lyapunov_field(pts, SPEC), axis=1)
        np.testing.assert_allclose(speeds, SPEC.speed, atol=1e-9)

    def test_origin_escape_policy(self):
        out = guidance.lyapunov_field(np.zeros(2), SPEC)
        np.testing.assert_allclose(out, [SPEC.speed, 0.0])

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            p = rng.uniform(-400.0, 400.0, size=2)
            if np.linalg.norm(p) < 1.0:
                continue
            phi = rng.uniform(-np.pi, np.pi)
            c, s = np.cos(phi), np.sin(phi)
            rot = np.array([[c, -s], [s, c]])
            np.testing.assert_allclose(
                guidance.lyapunov_field(rot @ p, SPEC),
                rot @ guidance.lyapunov_field(p, SPEC),
                atol=1e-9,
            )

    def test_sign_structure(self):
        inner = guidance.lyapunov_field(np.array([50.0, 0.0]), SPEC)
        outer = guidance.lyapunov_field(np.array([500.0, 0.0]), SPEC)
        assert guidance.cos_alpha(np.array([50.0, 0.0]), inner) > 0.0
        assert guidance.cos_alpha(np.array([500.0, 0.0]), outer) < 0.0

    def test_batch_matches_pointwise(self):
        rng = np.random.default_rng(9)
        pts = rng.uniform(-300.0, 300.0, size=(64, 2))
        batch = guidance.lyapunov_field(pts, SPEC)
        for p, row in zip(pts, batch):
            np.testing.assert_allclose(guidance.lyapunov_field(p, SPEC), row, atol=1e-12)


class TestCosAlpha:
    def test_on_orbit_orthogonal(self):
        rel = np.array([SPEC.radius, 0.0])
        assert guidance.cos_alpha(rel, guidance.lyapunov_field(rel, SPEC)) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_double_radius_value(self):
        rel = np.array([2.0 * SPEC.radius, 0.0])
        got = guidance.cos_alpha(rel, guidance.lyapunov_field(rel, SPEC))
        assert got == pytest.approx(-3.0 / 5.0, abs=1e-12)

    def test_parallel_vectors(self):
        assert guidance.cos_alpha(np.array([1.0, 2.0]), np.array([2.0, 4.0])) == pytest.approx(1.0)

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError):
            guidance.cos_alpha(np.zeros(2), np.array([1.0, 0.0]))

    def test_cosine_law_random_points(self):
        # cos(angle(p, field(p))) must equal -(r^2 - rd^2)/(r^2 + rd^2).
        rng = np.random.default_rng(12)
        for _ in range(200):
            p = rng.uniform(-600.0, 600.0, size=2)
            r = np.linalg.norm(p)
            if r < 1.0:
                continue
            got = guidance.cos_alpha(p, guidance.lyapunov_field(p, SPEC))
            want = -(r**2 - SPEC.radius**2) / (r**2 + SPEC.radius**2)
            assert got == pytest.approx(want, abs=1e-9)


class TestDesiredCommand:
    def test_pure_field(self):
        cmd = guidance.desired_command(np.array([0.0, SPEC.speed]), np.zeros(2))
        assert cmd.speed == pytest.approx(SPEC.speed)
        assert cmd.heading == pytest.approx(np.pi / 2.0)

    def test_pure_target_velocity(self):
        cmd = guidance.desired_command(np.zeros(2), np.array([5.0, 0.0]))
        assert cmd.speed == pytest.approx(5.0)
        assert cmd.heading == pytest.approx(0.0)

    def test_vector_sum(self):
        cmd = guidance.desired_command(np.array([1.0, -2.0]), np.array([3.0, 4.0]))
        assert cmd.speed == pytest.approx(np.sqrt(20.0))
        assert cmd.heading == pytest.approx(np.arctan2(2.0, 4.0))

    def test_zero_sum_keeps_fallback(self):
        cmd = guidance.desired_command(np.array([1.0, 0.0]), np.array([-1.0, 0.0]),
                                       fallback_heading=0.4)
        assert cmd.speed == 0.0
        assert cmd.heading == pytest.approx(0.4)


class TestRadialIterate:
    def test_fixed_point(self):
        assert guidance.radial_iterate(SPEC.radius, SPEC, 0.04) == SPEC.radius

    def test_hand_value(self):
        got = guidance.radial_iterate(300.0, SPEC, 0.04)
        assert got == pytest.approx(300.0 - 0.4 * (50_000.0 / 130_000.0), abs=1e-12)

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            guidance.radial_iterate(-1.0, SPEC, 0.04)

    def test_convergence_from_anywhere(self):
        for r0 in (1.0, 150.0, 1999.0):
            r = r0
            for _ in range(200_000):
                r = guidance.radial_iterate(r, SPEC, 0.04)
                if abs(r - SPEC.radius) < 0.1:
                    break
            assert abs(r - SPEC.radius) < 0.1

    def test_lyapunov_decrease_on_grid(self):
        # V(r) = 0.5 (r^2 - rd^2)^2 never increases under the radial map
        # when the feasibility condition holds.
        assert guidance.check_feasibility(SPEC, 0.04, ActuatorLimits(0.2))
        grid = np.linspace(1e-3, 10.0 * SPEC.radius, 5000)
        v = 0.5 * (grid**2 - SPEC.radius**2) ** 2
        nxt = np.array([guidance.radial_iterate(r, SPEC, 0.04) for r in grid])
        v_next = 0.5 * (nxt**2 - SPEC.radius**2) ** 2
        assert np.all(v_next <= v + 1e-9)
        away = np.abs(grid - SPEC.radius) > 1e-6
        assert np.all(v_next[away] < v[away])
