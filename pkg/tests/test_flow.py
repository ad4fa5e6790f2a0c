import math

import numpy as np
import pytest

from hypothesis import given, strategies as st

from loewner import (
    AutomorphismField,
    BallDiagonalField,
    DomainSpec,
    FieldFlow,
    IntegrationMethod,
    IntegratorConfig,
    PointOutsideDomain,
    RadialField,
    SpecValidationError,
    StepFailure,
    TrajectoryEscaped,
    check_evolution_property,
    check_univalence,
    dump_trajectory,
    estimate_regularity,
    integrate_batch,
    integrate_flow,
)


class TestIntegratorConfig:
    def test_defaults(self):
        cfg = IntegratorConfig()
        assert cfg.method is IntegrationMethod.RK45_ADAPTIVE
        assert cfg.abs_tol == cfg.rel_tol == 1e-9

    def test_setters_validate(self):
        with pytest.raises(ValueError):
            IntegratorConfig(step_h=0)
        with pytest.raises(ValueError):
            IntegratorConfig().boundary_margin = -1

    def test_replace_keeps_the_original(self):
        cfg = IntegratorConfig()
        changed = cfg.replace(method='rk4', step_h=1e-2)
        assert changed.method is IntegrationMethod.RK4_FIXED
        assert cfg.method is IntegrationMethod.RK45_ADAPTIVE

    def test_from_raw_rejects_unknown_keys(self):
        with pytest.raises(SpecValidationError) as info:
            IntegratorConfig.from_raw({'atol': 1e-3})
        assert info.value.path == 'config.atol'


class TestIntegrateFlow:
    @given(st.floats(0.0, 2.0), st.floats(0.0, 2.0))
    def test_radial_closed_form(self, s, duration):
        cfg = IntegratorConfig(abs_tol=1e-11, rel_tol=1e-11)
        result = integrate_flow(RadialField([[-1]]), [0.5 + 0.2j], s, s + duration, cfg)
        assert result.endpoint[0] == pytest.approx((0.5 + 0.2j) * math.exp(-duration), abs=1e-9)
        assert result.jacobian[0, 0] == pytest.approx(math.exp(-duration), abs=1e-9)

    def test_fixed_step_scheme(self):
        cfg = IntegratorConfig(method=IntegrationMethod.RK4_FIXED, step_h=1e-2)
        result = integrate_flow(RadialField([[1j]]), [0.5], 0.0, 1.0, cfg)
        assert result.endpoint[0] == pytest.approx(0.5 * np.exp(1j), abs=1e-9)
        assert result.max_local_error_estimate is None
        assert result.steps_taken == 100

    def test_fixed_step_scheme_is_fourth_order(self):
        spec = RadialField([[-1 + 1j]])
        exact = 0.5 * np.exp(2 * (-1 + 1j))
        errors = []
        for h in (0.2, 0.1):
            cfg = IntegratorConfig(method=IntegrationMethod.RK4_FIXED, step_h=h)
            errors.append(abs(integrate_flow(spec, [0.5], 0.0, 2.0, cfg).endpoint[0] - exact))

        # halving the step cuts a fourth order error by about 16
        assert errors[0] / errors[1] >= 12

    def test_piecewise_field_matches_closed_form(self, tight):
        spec = BallDiagonalField([[-1, 1j], [-2, 0.5j]], breakpoints=[0.7])
        z = [0.3, -0.4j]
        result = integrate_flow(spec, z, 0.2, 1.5, tight)
        assert np.allclose(result.endpoint, spec.closed_form(z, 0.2, 1.5), atol=1e-9)
        assert np.allclose(result.jacobian, np.diag(np.exp(spec.integral(0.2, 1.5))), atol=1e-9)

    def test_same_time_is_identity(self):
        result = integrate_flow(RadialField([[-1]]), [0.5], 1.0, 1.0)
        assert result.endpoint[0] == 0.5
        assert result.steps_taken == 0

    def test_escape_time(self):
        with pytest.raises(TrajectoryEscaped) as info:
            integrate_flow(RadialField([[1.0]]), [0.5], 0.0, 2.0)
        assert info.value.t_escape == pytest.approx(math.log(2), abs=1e-3)

    def test_start_on_boundary(self):
        with pytest.raises(PointOutsideDomain):
            integrate_flow(RadialField([[-1.0]]), [1.0], 0.0, 1.0)

    def test_backward_integration(self):
        with pytest.raises(ValueError):
            integrate_flow(RadialField([[-1.0]]), [0.5], 1.0, 0.5)

    def test_step_budget(self):
        with pytest.raises(StepFailure):
            integrate_flow(RadialField([[-1.0]]), [0.5], 0.0, 10.0, IntegratorConfig(max_steps=3))

    def test_full_space_does_not_escape(self):
        spec = RadialField(np.eye(2), DomainSpec.full_space(2))
        result = integrate_flow(spec, [1.0, 2.0], 0.0, 3.0)
        assert np.allclose(result.endpoint, np.exp(3.0) * np.array([1.0, 2.0]), rtol=1e-7)

    def test_recorded_trajectory(self, tmp_path):
        result = integrate_flow(RadialField([[-1]]), [0.5], 0.0, 1.0, record=True)
        assert result.trajectory[0][0] == 0.0
        assert result.trajectory[-1][0] == pytest.approx(1.0)

        path = tmp_path / 'trajectory.csv'
        dump_trajectory(str(path), result)
        lines = path.read_text().splitlines()
        assert lines[0] == 't,re_z1,im_z1'
        assert len(lines) == len(result.trajectory) + 1


class TestBatch:
    def test_checkpoints_are_sampled(self, tight):
        points = np.array([[0.1], [0.5j]])
        batch = integrate_batch(RadialField([[-1]]), points, 0.0, 2.0, tight, checkpoints=[0.5, 1.0])
        assert np.allclose(batch.samples[1.0][0], points * math.exp(-1), atol=1e-9)
        assert np.allclose(batch.endpoints, points * math.exp(-2), atol=1e-9)

    def test_batch_without_jacobians(self):
        batch = integrate_batch(RadialField([[-1]]), [[0.1]], 0.0, 1.0, jacobian=False)
        assert batch.jacobians is None


class TestFamilies:
    def test_evolution_property(self, tight, rng):
        spec = BallDiagonalField([[-1, 1j], [-0.5, -1]], breakpoints=[0.5])
        points = [[0.1, 0.2], [0.3j, -0.4]]
        report = check_evolution_property(spec, points, [(0.0, 0.3, 1.0), (0.2, 0.5, 1.5)], tight, tol=1e-9)
        assert report.passed

    def test_evolution_property_rejects_unordered_times(self):
        with pytest.raises(ValueError):
            check_evolution_property(RadialField([[-1]]), [[0.1]], [(1.0, 0.5, 2.0)])

    def test_automorphism_flow_stays_in_ball(self):
        spec = AutomorphismField([0.5, 0.0])
        images, jacobians = FieldFlow(spec).evaluate_many(0.0, 1.0, [[0.2, 0.1], [-0.3, 0.4j]])
        assert np.all(np.linalg.norm(images, axis=1) < 1)

    def test_univalence(self):
        report = check_univalence(RadialField([[-1]]), 0.0, 1.0, [([0.1], [0.2]), ([0.3j], [-0.3j])])
        assert report.passed
        assert report.min_abs_det == pytest.approx(math.exp(-1), rel=1e-6)

    def test_univalence_needs_distinct_pairs(self):
        with pytest.raises(ValueError):
            check_univalence(RadialField([[-1]]), 0.0, 1.0, [([0.1], [0.1])])

    def test_regularity_density(self):
        report = estimate_regularity(RadialField([[-1]]), [[0.5]], 1.0, [0.0, 0.5, 1.0])
        assert len(report.cells) == 2
        assert 0 < report.linf <= 0.5 / 0.75 + 1e-6
