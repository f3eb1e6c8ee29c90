import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tunable_oracle.fgm import (
    BoundTracker,
    FgmConfig,
    FgmError,
    bound_value,
    fgm_run,
    line_search_validate,
    project_simplex,
)


def quadratic_oracle(center, scale=1.0):
    """Exact oracle for F(x) = scale/2 * ||x - center||^2."""
    c = np.asarray(center, dtype=float)

    def oracle(x, delta):
        diff = x - c
        return SimpleNamespace(value=0.5 * scale * float(diff @ diff),
                               gradient=scale * diff,
                               delta=float(delta),
                               inner_work=1.0)
    return oracle


def constant_schedule(delta):
    return lambda k, A_next: delta


class TestProjectSimplex:
    def test_uniform_shift(self):
        out = project_simplex(np.array([0.4, 0.2, 0.1]))
        np.testing.assert_allclose(out, [0.5, 0.3, 0.2])

    def test_dominant_coordinate_gives_vertex(self):
        out = project_simplex(np.array([10.0, 0.0, 0.0]))
        np.testing.assert_allclose(out, [1.0, 0.0, 0.0])

    def test_feasible_point_unchanged(self):
        x = np.array([0.2, 0.5, 0.3])
        np.testing.assert_allclose(project_simplex(x), x, atol=1e-15)

    def test_rejects_nonfinite(self):
        with pytest.raises(FgmError):
            project_simplex(np.array([1.0, math.nan]))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(min_value=-50.0, max_value=50.0),
                    min_size=1, max_size=12))
    def test_output_feasible_and_optimal(self, values):
        v = np.array(values)
        out = project_simplex(v)
        assert abs(out.sum() - 1.0) <= 1e-9
        assert np.all(out >= 0.0)
        # projection is no farther than any other simplex point we can name
        for probe in (np.full(v.size, 1.0 / v.size), np.eye(v.size)[0]):
            assert np.sum((v - out) ** 2) <= np.sum((v - probe) ** 2) + 1e-9


class TestLineSearchValidate:
    def test_same_point_always_passes(self):
        y = np.array([0.5, 0.5])
        assert line_search_validate(3.0, np.array([1.0, -1.0]), 3.0, y, y,
                                    1e-6, 0.0)

    def test_exact_quadratic_at_true_curvature(self):
        L0 = 4.0
        y = np.zeros(2)
        x = np.array([0.3, -0.2])
        f = lambda p: 0.5 * L0 * float(p @ p)
        assert line_search_validate(f(y), L0 * y, f(x), x, y, L0, 0.0)

    def test_exact_quadratic_rejects_small_curvature(self):
        L0 = 4.0
        y = np.zeros(2)
        x = np.array([0.3, -0.2])
        f = lambda p: 0.5 * L0 * float(p @ p)
        assert not line_search_validate(f(y), L0 * y, f(x), x, y, L0 / 4.0, 0.0)

    def test_inexactness_slack_rescues(self):
        L0 = 4.0
        y = np.zeros(2)
        x = np.array([0.3, -0.2])
        f = lambda p: 0.5 * L0 * float(p @ p)
        slack = f(x)  # 2 * delta with delta = f(x) / 2 covers the whole gap
        assert line_search_validate(f(y), L0 * y, f(x), x, y, L0 / 4.0,
                                    slack / 2.0)


class TestBoundValue:
    def test_formula(self):
        tracker = BoundTracker(R2_estimate=2.0)
        tracker.add(1.0, 1.0)
        tracker.add(4.0, 0.5)
        assert bound_value(tracker, 4.0) == pytest.approx((2.0 + 2.0 * 3.0) / 4.0)

    def test_rejects_zero_certificate(self):
        with pytest.raises(FgmError):
            bound_value(BoundTracker(), 0.0)


class TestFgmRun:
    def test_zero_iterations_returns_start(self):
        cfg = FgmConfig(mode="fixed_step", L_init=1.0)
        x0 = np.array([0.25, 0.75])
        x, traj, certs = fgm_run(cfg, quadratic_oracle([0.0, 0.0]),
                                 constant_schedule(0.0), 0, x0)
        np.testing.assert_array_equal(x, x0)
        assert traj == []
        assert len(certs) == 0

    def test_rejects_infeasible_start(self):
        cfg = FgmConfig(mode="fixed_step", L_init=1.0)
        with pytest.raises(FgmError):
            fgm_run(cfg, quadratic_oracle([0.0, 0.0]), constant_schedule(0.0),
                    1, np.array([0.7, 0.7]))

    def test_noise_free_worst_case_bound(self):
        # F(x) = ||x||^2 / 2 on the simplex: minimizer (1/2, 1/2), F* = 1/4
        oracle = quadratic_oracle([0.0, 0.0])
        x0 = np.array([1.0, 0.0])
        r2 = 0.5  # ||x0 - x*||^2
        cfg = FgmConfig(mode="fixed_step", L_init=1.0)
        for N in (1, 5, 20, 100):
            x, traj, certs = fgm_run(cfg, oracle, constant_schedule(0.0), N,
                                     x0, r2_estimate=r2)
            gap = 0.5 * float(x @ x) - 0.25
            assert -1e-12 <= gap <= r2 / certs.A[-1] + 1e-12
            assert traj[-1].bound == pytest.approx(r2 / certs.A[-1])

    def test_constant_delta_tracker_identity(self):
        delta = 1e-3
        cfg = FgmConfig(mode="fixed_step", L_init=2.0)
        _, traj, certs = fgm_run(cfg, quadratic_oracle([0.2, 0.2], scale=2.0),
                                 constant_schedule(delta), 30,
                                 np.array([0.5, 0.5]), r2_estimate=1.0)
        expected = (1.0 + 2.0 * delta * certs.A[1:].sum()) / certs.A[-1]
        assert traj[-1].bound == pytest.approx(expected, rel=1e-12)

    def test_iterates_stay_on_simplex(self):
        seen = []
        cfg = FgmConfig(mode="fixed_step", L_init=1.0, mu=0.5)
        fgm_run(cfg, quadratic_oracle([2.0, -1.0, 0.0]),
                constant_schedule(1e-4), 50, np.array([1.0, 0.0, 0.0]),
                observer=lambda k, x: seen.append(x.copy()))
        assert len(seen) == 50
        for x in seen:
            assert abs(x.sum() - 1.0) <= 1e-12
            assert np.all(x >= -1e-12)

    def test_error_accumulation_constant_floor(self):
        # a constant request keeps the bound pinned at >= 2 * delta
        delta = 1e-2
        cfg = FgmConfig(mode="fixed_step", L_init=1.0)
        _, traj, _ = fgm_run(cfg, quadratic_oracle([0.0, 0.0]),
                             constant_schedule(delta), 200,
                             np.array([1.0, 0.0]), r2_estimate=0.5)
        assert traj[-1].bound >= 2.0 * delta

    def test_error_accumulation_decaying_vanishes(self):
        cfg = FgmConfig(mode="fixed_step", L_init=1.0)
        schedule = lambda k, A_next: 1e-2 / (k + 1.0) ** 3
        _, traj, _ = fgm_run(cfg, quadratic_oracle([0.0, 0.0]), schedule,
                             10_000, np.array([1.0, 0.0]), r2_estimate=0.5)
        assert traj[-1].bound <= 1e-4
        assert traj[-1].bound < traj[99].bound


class TestAdaptive:
    def test_settles_near_true_curvature(self):
        cfg = FgmConfig(mode="adaptive", L_init=64.0, mu=0.0)
        _, traj, certs = fgm_run(cfg, quadratic_oracle([0.0, 0.0], scale=3.0),
                                 constant_schedule(0.0), 40,
                                 np.array([1.0, 0.0]))
        # shrink from 64 toward the true curvature 3, never far below it
        assert traj[-1].L <= 3.0 * 2.0
        assert np.all(certs.L >= 3.0 / 1.5 / 2.0)

    def test_cap_terminates_search(self):
        # curvature 10 but cap at 2: validation fails, the cap must accept
        cfg = FgmConfig(mode="adaptive", L_init=2.0, L_cap=2.0)
        _, traj, _ = fgm_run(cfg, quadratic_oracle([0.0, 0.0], scale=10.0),
                             constant_schedule(0.0), 10, np.array([1.0, 0.0]))
        assert all(rec.L == 2.0 for rec in traj)

    def test_adaptive_beats_pessimistic_fixed_step(self):
        oracle = quadratic_oracle([0.0, 0.0], scale=1.0)
        x0 = np.array([1.0, 0.0])
        fixed = FgmConfig(mode="fixed_step", L_init=50.0)
        adaptive = FgmConfig(mode="adaptive", L_init=50.0)
        _, _, certs_f = fgm_run(fixed, oracle, constant_schedule(0.0), 30, x0)
        _, _, certs_a = fgm_run(adaptive, oracle, constant_schedule(0.0), 30, x0)
        assert certs_a.A[-1] > 5.0 * certs_f.A[-1]

    def test_charges_both_oracle_calls(self):
        cfg = FgmConfig(mode="adaptive", L_init=1.0)
        _, traj, _ = fgm_run(cfg, quadratic_oracle([0.0, 0.0]),
                             constant_schedule(0.0), 5, np.array([0.5, 0.5]))
        for rec in traj:
            assert rec.omega == pytest.approx(2.0 * (1 + rec.retries))

    def test_config_validation(self):
        with pytest.raises(FgmError):
            FgmConfig(mode="magic")
        with pytest.raises(FgmError):
            FgmConfig(L_init=0.0)
        with pytest.raises(FgmError):
            FgmConfig(L_init=4.0, L_cap=2.0)
        with pytest.raises(FgmError):
            FgmConfig(increase_factor=1.0)
