import numpy as np
import pytest

from hypothesis import given, strategies as st

from loewner import (
    AutomorphismField,
    BallDiagonalField,
    BerksonPortaField,
    CallbackFailure,
    ConjugatedField,
    CustomField,
    DegeneratePair,
    DomainSpec,
    FieldKind,
    LinearOperator,
    PointOutsideDomain,
    RadialField,
    SpecValidationError,
    Verdict,
    check_dissipativity,
    check_weak_bound,
    evaluate_field,
    field_from_raw,
    holomorphy_residual,
    min_real_quadratic,
    numerical_jacobian,
    register_callback,
)


@register_callback('test_fields.shift')
def shift(z, t):
    return -z + 0.1 * z ** 2


@register_callback('test_fields.broken')
def broken(z, t):
    raise ZeroDivisionError('boom')


@register_callback('test_fields.antiholomorphic')
def antiholomorphic(z, t):
    return np.conj(z)


small_disc = st.builds(complex, st.floats(-0.6, 0.6), st.floats(-0.6, 0.6))


class TestLinearOperator:
    @pytest.mark.parametrize(('matrix', 'expected'), [
        (np.eye(2), 1.0),
        (np.diag([1.0, 2.0]), 1.0),
        ([[0.0, 1.0], [0.0, 0.0]], -0.5),
    ])
    def test_min_real_quadratic(self, matrix, expected):
        assert min_real_quadratic(matrix) == pytest.approx(expected)

    def test_scalar_from_raw(self):
        operator = LinearOperator.from_raw(2, 'A', 3)
        assert np.allclose(operator.matrix, 2 * np.eye(3))

    def test_from_raw_checks_shape(self):
        with pytest.raises(SpecValidationError) as info:
            LinearOperator.from_raw([[1, 0], [0, 1]], 'A', 3)
        assert info.value.path == 'A'


class TestFields:
    def test_radial_field(self):
        spec = RadialField(-np.eye(2))
        assert spec.kind is FieldKind.RADIAL
        assert np.allclose(spec.evaluate([0.1, 0.2j], 0.0), [-0.1, -0.2j])
        assert np.allclose(spec.jacobian([0.1, 0.2j], 0.0), -np.eye(2))

    def test_berkson_porta_reduces_to_radial(self):
        spec = BerksonPortaField()
        assert np.allclose(spec.evaluate([0.3 + 0.1j], 1.0), [-(0.3 + 0.1j)])

    @given(small_disc)
    def test_berkson_porta_jacobian(self, z):
        spec = BerksonPortaField(tau=0.2j, numerator=[1, 0.3], denominator=[2, 0.5])
        expected = numerical_jacobian(lambda w: spec.evaluate(w, 0.0), [z])
        assert np.allclose(spec.jacobian([z], 0.0), expected, atol=1e-7)

    def test_boundary_tau_is_not_integrable(self):
        assert not BerksonPortaField(tau=1.0).integrable

    def test_denominator_zero_inside_disc(self):
        with pytest.raises(ValueError):
            BerksonPortaField(denominator=[0.5, 1.0])

        with pytest.raises(SpecValidationError) as info:
            field_from_raw({
                'domain': {'kind': 'disc'},
                'kind': 'berkson_porta',
                'params': {'denominator': [0.5, 1.0]},
            })
        assert info.value.path == 'params.denominator'

    def test_ball_diagonal_switches_at_breakpoints(self):
        spec = BallDiagonalField([[-1, 1j], [-2, 0]], breakpoints=[1.0])
        assert np.allclose(spec.evaluate([0.1, 0.1], 0.5), [-0.1, 0.1j])
        assert np.allclose(spec.evaluate([0.1, 0.1], 1.0), [-0.2, 0.0])
        assert np.allclose(spec.closed_form([0.5, 0.5], 0.0, 2.0), [0.5 * np.exp(-3), 0.5 * np.exp(1j)])

    def test_automorphism_requires_skew_hermitian(self):
        with pytest.raises(ValueError):
            AutomorphismField([0.1, 0.0], np.eye(2))

    def test_conjugated_field_vanishes_at_image_of_origin(self):
        a = [0.3, -0.2j]
        spec = ConjugatedField(RadialField(-np.eye(2)), a)
        assert np.allclose(spec.evaluate(a, 0.0), 0.0, atol=1e-12)

    def test_custom_field_by_name(self):
        spec = CustomField('test_fields.shift', DomainSpec.disc())
        assert np.allclose(spec.evaluate([0.5], 0.0), [-0.475])
        assert field_from_raw(spec.to_raw()).evaluate([0.5], 0.0) == pytest.approx(spec.evaluate([0.5], 0.0))

    def test_callback_failure_is_wrapped(self):
        spec = CustomField('test_fields.broken', DomainSpec.disc())
        with pytest.raises(CallbackFailure) as info:
            spec.evaluate([0.1], 0.0)
        assert isinstance(info.value.original, ZeroDivisionError)

    def test_evaluate_field_checks_domain(self):
        with pytest.raises(PointOutsideDomain):
            evaluate_field(RadialField([[-1]]), [1.5], 0.0)


class TestFromRaw:
    def test_round_trip(self):
        spec = BallDiagonalField([[-1, 1j], [-2, 0]], breakpoints=[1.0])
        rebuilt = field_from_raw(spec.to_raw())
        assert rebuilt.breakpoints == (1.0,)
        assert np.allclose(rebuilt.evaluate([0.2, 0.3], 1.5), spec.evaluate([0.2, 0.3], 1.5))

    @pytest.mark.parametrize(('document', 'path'), [
        ({'domain': {'kind': 'disc'}, 'kind': 'spiral'}, 'kind'),
        ({'domain': {'kind': 'disc'}, 'kind': 'radial', 'params': {}}, 'params.A'),
        ({'domain': {'kind': 'disc'}, 'kind': 'radial', 'params': {'A': -1}, 'breakpoints': [2, 1]}, 'breakpoints'),
        ({'domain': {'kind': 'disc'}, 'kind': 'custom', 'params': {'callback': 'missing'}}, 'params.callback'),
        ({'domain': {'kind': 'ball', 'dimension': 2}, 'kind': 'automorphism', 'params': {'a': [0.1]}}, 'params.a'),
        ({'domain': {'kind': 'ball', 'dimension': 2}, 'kind': 'conjugated',
          'params': {'a': [0.1, 0.0], 'field': {'domain': {'kind': 'ball', 'dimension': 2}, 'kind': 'radial'}}},
         'params.field.params.A'),
    ])
    def test_errors_name_the_offending_entry(self, document, path):
        with pytest.raises(SpecValidationError) as info:
            field_from_raw(document)
        assert info.value.path == path

    def test_error_is_not_a_value_error(self):
        assert not issubclass(SpecValidationError, ValueError)


class TestChecks:
    def test_weak_bound_of_radial_field(self):
        K = [[0.5], [0.3j]]
        report = check_weak_bound(RadialField([[-1]]), K, 2.0)
        assert report.linf == pytest.approx(0.5)
        assert report.l1 == pytest.approx(1.0)
        assert report.verdict is Verdict.PASS

    def test_weak_bound_cap(self):
        report = check_weak_bound(RadialField([[-1]]), [[0.5]], 1.0, cap=0.1)
        assert report.unbounded and not report.passed

    def test_weak_bound_samples_breakpoints(self):
        spec = BallDiagonalField([[-1], [-3]], breakpoints=[0.5])
        report = check_weak_bound(spec, [[0.5]], 1.0, time_nodes=5)
        assert 0.5 in report.times and 0.5 - 1e-9 in report.times

    def test_contracting_field_is_dissipative(self, rng):
        spec = RadialField(-np.eye(2))
        pairs = [([0.1, 0.2], [0.4j, -0.3]), ([0.5, 0.0], [0.0, 0.5])]
        report = check_dissipativity(spec, pairs, [0.0, 1.0])
        assert report.passed
        assert report.samples == 4

    def test_rotation_preserves_distances(self):
        report = check_dissipativity(RadialField([[1j]]), [([0.3], [-0.5j])], [0.0])
        assert abs(report.max_derivative) < 1e-7

    def test_automorphism_field_is_dissipative(self):
        spec = AutomorphismField([0.2, 0.1j], [[0, 1], [-1, 0]])
        report = check_dissipativity(spec, [([0.1, 0.2], [-0.3, 0.1j])], [0.0])
        assert report.passed

    def test_expanding_field_fails(self):
        report = check_dissipativity(RadialField([[1.0]]), [([0.1], [0.5])], [0.0])
        assert report.verdict is Verdict.FAIL
        assert report.worst_pair is not None

    def test_degenerate_pair(self):
        with pytest.raises(DegeneratePair):
            check_dissipativity(RadialField([[-1.0]]), [([0.3], [0.3])], [0.0])

    def test_holomorphy_residual(self):
        points = [[0.1], [0.2 + 0.3j]]
        assert holomorphy_residual(RadialField([[-1]]), points) < 1e-8

        spec = CustomField('test_fields.antiholomorphic', DomainSpec.disc())
        assert holomorphy_residual(spec, points) > 1.0
