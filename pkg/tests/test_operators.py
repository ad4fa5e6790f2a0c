import math

import numpy as np
import pytest

from hypothesis import given, strategies as st

from loewner import (
    ArgAuditReport,
    AutomorphismField,
    BallDiagonalField,
    BerksonPortaField,
    BranchContinuationFailure,
    FieldFlow,
    KoebeMap,
    LiftedChain,
    LiftedField,
    LoewnerChain,
    RadialField,
    RoperSuffridgeMap,
    SpecValidationError,
    Verdict,
    continue_sqrt,
    field_from_raw,
    integrate_batch,
    lifted_evolution_eval,
    lifted_herglotz_eval,
    map_from_raw,
    normalize_to_origin,
    numerical_jacobian,
    random_points,
    roper_suffridge_eval,
)


@pytest.fixture
def radial_lift(tight) -> LiftedChain:
    return LiftedChain(LoewnerChain(RadialField([[-1]]), 2.0, tight), 2)


@pytest.fixture
def spiral_lift(tight) -> LiftedChain:
    return LiftedChain(LoewnerChain(RadialField([[-1 + 0.5j]]), 1.0, tight), 3)


class TestContinueSqrt:
    def test_follows_the_branch_around_the_circle(self):
        angles = np.linspace(0, 2 * np.pi, 400)
        roots = continue_sqrt(np.exp(1j * angles)[None, :], 1.0)
        assert roots[0, -1] == pytest.approx(-1.0, abs=1e-9)

    def test_start_picks_the_nearest_root(self):
        roots = continue_sqrt(np.array([[4.0, 4.0]]), -1.0)
        assert np.allclose(roots, -2.0)

    def test_vanishing_radicand(self):
        with pytest.raises(BranchContinuationFailure):
            continue_sqrt(np.array([[1.0, 0.0]]), 1.0)


class TestLiftedField:
    def test_lift_of_the_radial_field(self):
        assert np.allclose(lifted_herglotz_eval(RadialField([[-1]]), [0.3, 0.4], 0.0), [-0.3, -0.4])

    def test_lift_of_the_rotation(self):
        value = lifted_herglotz_eval(RadialField([[1j]]), [0.5, 0.2], 0.0)
        assert np.allclose(value, [0.5j, 0.2 * (-1 + 1j) / 2])

    @given(st.floats(0.0, 0.5), st.floats(0.0, 0.5))
    def test_analytic_jacobian(self, x, y):
        spec = LiftedField(BerksonPortaField(tau=0.1, numerator=[1, 0.2j]), 3)
        z = np.array([x + 0.1j, y, -0.1j])
        expected = numerical_jacobian(lambda w: spec.evaluate(w, 0.0), z)
        assert np.allclose(spec.jacobian(z, 0.0), expected, atol=1e-6)

    def test_from_raw(self):
        document = {
            'domain': {'kind': 'ball', 'dimension': 2},
            'kind': 'lifted',
            'params': {'field': {'domain': {'kind': 'disc'}, 'kind': 'radial', 'params': {'A': -1}}},
        }
        spec = field_from_raw(document)
        assert isinstance(spec, LiftedField)
        assert np.allclose(spec.evaluate([0.3, 0.4], 0.0), [-0.3, -0.4])

    @pytest.mark.parametrize(('changes', 'path'), [
        ({'breakpoints': [1.0]}, 'breakpoints'),
        ({'domain': {'kind': 'polydisc', 'dimension': 2}}, 'domain.kind'),
        ({'params': {'field': {'domain': {'kind': 'ball', 'dimension': 2}, 'kind': 'radial', 'params': {'A': -1}}}},
         'params.field.domain'),
    ])
    def test_from_raw_errors(self, changes, path):
        document = {
            'domain': {'kind': 'ball', 'dimension': 2},
            'kind': 'lifted',
            'params': {'field': {'domain': {'kind': 'disc'}, 'kind': 'radial', 'params': {'A': -1}}},
            **changes,
        }
        with pytest.raises(SpecValidationError) as info:
            field_from_raw(document)
        assert info.value.path == path


class TestLiftedChain:
    def test_radial_evolution(self, radial_lift):
        value = lifted_evolution_eval(radial_lift, 0.0, 2 * math.log(2), [0.5, 0.5])
        assert np.allclose(value, [0.125, 0.125], atol=1e-9)

    def test_radial_chain(self, radial_lift):
        t = 0.5
        value = roper_suffridge_eval(radial_lift, t, [0.4, 0.3j])
        expected = [0.4 * math.exp(t - 2.0), 0.3j * math.exp(t - 1.0)]
        assert np.allclose(value, expected, atol=1e-9)

    def test_association(self, spiral_lift, rng):
        points = random_points(3, 4, rng, radius=0.7)
        s, t = 0.2, 0.7
        images = spiral_lift.evolve_many(s, t, points)
        assert np.allclose(spiral_lift.evaluate_many(s, points), spiral_lift.evaluate_many(t, images), atol=1e-8)

    def test_evolution_solves_the_lifted_field(self, spiral_lift, tight, rng):
        points = random_points(3, 4, rng, radius=0.7)
        flowed = integrate_batch(spiral_lift.lifted_field, points, 0.1, 0.9, tight, jacobian=False).endpoints
        assert np.allclose(flowed, spiral_lift.evolve_many(0.1, 0.9, points), atol=1e-8)

    def test_evolution_stays_in_the_ball(self, spiral_lift, rng):
        images = spiral_lift.evolve_many(0.0, 1.0, random_points(3, 20, rng, radius=0.95))
        assert np.all(np.linalg.norm(images, axis=1) < 1)

    def test_family_jacobian(self, spiral_lift):
        family = spiral_lift.family()
        z = np.array([0.2 + 0.1j, 0.3, -0.2j])
        _, jacobians = family.evaluate_many(0.0, 0.5, z[None, :])
        expected = numerical_jacobian(lambda w: family.evaluate(0.0, 0.5, w), z)
        assert np.allclose(jacobians[0], expected, atol=1e-5)

    def test_explicit_anchor_flips_the_branch(self, tight):
        chain = LoewnerChain(RadialField([[-1]]), 1.0, tight)
        flipped = LiftedChain(chain, 2, sqrt_branch_anchor=-1.0)
        value = flipped.evaluate_many(0.0, [[0.1, 0.2]])[0]
        assert value[1] == pytest.approx(-0.2 * math.exp(-0.5), abs=1e-9)

    def test_arg_audit(self, radial_lift, tight):
        assert radial_lift.audit_arg_hypotheses([0.0, 1.0, 2.0]).verdict is Verdict.PASS

        twisted = LiftedChain(LoewnerChain(RadialField([[-1 + 2j]]), 1.0, tight), 2)
        report = twisted.audit_arg_hypotheses([0.0, 1.0])
        assert isinstance(report, ArgAuditReport)
        assert report.violations > 0
        assert report.verdict is Verdict.MARGINAL and report.passed

    def test_raw_round_trip(self, spiral_lift):
        rebuilt = LiftedChain.from_raw(spiral_lift.to_raw())
        assert rebuilt.dimension == 3
        assert rebuilt.horizon == 1.0

    def test_from_raw_errors(self):
        with pytest.raises(SpecValidationError) as info:
            LiftedChain.from_raw({
                'field': {'domain': {'kind': 'disc'}, 'kind': 'radial', 'params': {'A': -1}},
                'horizon': -1,
            })
        assert info.value.path == 'horizon'


class TestRoperSuffridgeMap:
    def test_koebe_extension(self):
        f = RoperSuffridgeMap(KoebeMap(), 2)
        value = f([0.1, 0.2])
        assert value[0] == pytest.approx(0.1 / 0.81)
        assert value[1] == pytest.approx(0.2 * math.sqrt(1.1 / 0.729))

    def test_analytic_jacobian(self):
        f = RoperSuffridgeMap(KoebeMap(), 3)
        z = np.array([0.2 - 0.1j, 0.1, 0.3j])
        assert np.allclose(f.jacobian(z), numerical_jacobian(f, z), atol=1e-6)

    def test_from_raw(self):
        f = map_from_raw({'kind': 'roper_suffridge', 'params': {'map': {'kind': 'koebe'}, 'dimension': 3}})
        assert isinstance(f, RoperSuffridgeMap) and f.dimension == 3
        assert map_from_raw(f.to_raw()).dimension == 3

    def test_from_raw_rejects_higher_dimensional_maps(self):
        document = {'kind': 'roper_suffridge', 'params': {'map': {'kind': 'identity', 'params': {'dimension': 2}}}}
        with pytest.raises(SpecValidationError) as info:
            map_from_raw(document)
        assert info.value.path == 'map.params.map'


class TestNormalization:
    def test_origin_preserving_family_is_unchanged(self, tight):
        spec = BallDiagonalField([[-1, -0.5]])
        family = normalize_to_origin(spec, 1.0, tight)
        points = [[0.3, 0.1j], [-0.2, 0.4]]
        values, _ = family.evaluate_many(0.2, 0.9, points)
        expected, _ = FieldFlow(spec, tight).evaluate_many(0.2, 0.9, points)
        assert np.allclose(values, expected, atol=1e-9)

    def test_automorphism_family_fixes_the_origin(self, tight):
        family = normalize_to_origin(AutomorphismField([0.3, 0.0]), 1.0, tight)
        assert np.allclose(family.evaluate(0.0, 1.0, [0.0, 0.0]), 0.0, atol=1e-9)
        assert np.allclose(family.evaluate(0.4, 0.8, [0.0, 0.0]), 0.0, atol=1e-9)

    def test_normalized_jacobian(self, tight):
        family = normalize_to_origin(AutomorphismField([0.3, 0.1j]), 1.0, tight)
        z = np.array([0.2, -0.1])
        _, jacobians = family.evaluate_many(0.0, 0.6, z[None, :])
        expected = numerical_jacobian(lambda w: family.evaluate(0.0, 0.6, w), z)
        assert np.allclose(jacobians[0], expected, atol=1e-5)

    def test_horizon(self):
        family = normalize_to_origin(RadialField([[-1]]), 1.0)
        with pytest.raises(ValueError):
            family.evaluate(0.0, 2.0, [0.1])
