import numpy as np
import pytest

from hypothesis import given, strategies as st

from loewner import (
    CallbackMap,
    HalfPlaneMap,
    HolomorphicMap,
    IdentityMap,
    KoebeMap,
    MapKind,
    PolynomialMap,
    ScaledMap,
    SpecValidationError,
    disc_derivatives,
    disc_values,
    map_from_raw,
    register_map_callback,
)

from loewner.maps import get_cls


@register_map_callback('test_maps.swap')
def swap(z):
    return np.array([z[1], z[0] + z[1] ** 2])


disc = st.builds(complex, st.floats(-0.6, 0.6), st.floats(-0.6, 0.6))


@pytest.mark.parametrize('f', [KoebeMap(), HalfPlaneMap(), PolynomialMap([0, 1, 0.3, -0.1j])])
@given(w=disc)
def test_derivatives_match_differences(f, w):
    h = 1e-6
    value = lambda x: complex(f.value(np.array([x]))[0])
    derivative = lambda x: complex(f.derivative(np.array([x]))[0])

    assert derivative(w) == pytest.approx((value(w + h) - value(w - h)) / (2 * h), abs=1e-6)
    assert complex(f.second_derivative(np.array([w]))[0]) == pytest.approx(
        (derivative(w + h) - derivative(w - h)) / (2 * h), abs=1e-5,
    )


def test_koebe_values():
    f = KoebeMap()
    assert f([0.5])[0] == pytest.approx(2.0)
    assert f.jacobian([0.0])[0, 0] == pytest.approx(1.0)


def test_identity_in_higher_dimension():
    f = IdentityMap(3)
    assert np.array_equal(f([1, 2, 3]), [1, 2, 3])
    assert np.array_equal(f.jacobian([0.1, 0.2, 0.3]), np.eye(3))


def test_scaled_map():
    f = ScaledMap(KoebeMap(), 0.5)
    assert f.value(np.array(0.5)) == pytest.approx(1.0)
    assert f.kind is MapKind.KOEBE
    with pytest.raises(TypeError):
        f.to_raw()


def test_callback_map_jacobian():
    f = CallbackMap('test_maps.swap', 2)
    assert np.allclose(f.jacobian([0.1, 0.2]), [[0, 1], [1, 0.4]], atol=1e-8)


def test_disc_helpers_accept_plain_callables():
    w = np.array([0.1, 0.2j])
    assert np.allclose(disc_values(lambda z: z ** 2, w), w ** 2)
    assert np.allclose(disc_derivatives(lambda z: z ** 2, w), 2 * w, atol=1e-8)


def test_polynomial_round_trip():
    f = PolynomialMap([0, 1, 2])
    rebuilt = map_from_raw(f.to_raw())
    assert isinstance(rebuilt, PolynomialMap)
    assert np.allclose(rebuilt.coefficients, [0, 1, 2])


@pytest.mark.parametrize('kind', list(MapKind))
def test_every_kind_dispatches_to_a_map_class(kind):
    cls = get_cls(kind)
    assert issubclass(cls, HolomorphicMap)
    assert hasattr(cls, '_from_params')


@pytest.mark.parametrize(('document', 'expected'), [
    ({'kind': 'koebe'}, KoebeMap),
    ({'kind': 'half_plane', 'params': {}}, HalfPlaneMap),
    ({'kind': 'identity', 'params': {'dimension': 3}}, IdentityMap),
    ({'kind': 'callback', 'params': {'callback': 'test_maps.swap', 'dimension': 2}}, CallbackMap),
])
def test_documents_build_their_kind(document, expected):
    f = map_from_raw(document)
    assert type(f) is expected
    assert f.kind.value == document['kind']


@pytest.mark.parametrize(('document', 'path'), [
    (None, 'map'),
    ({'kind': 'mystery'}, 'map.kind'),
    ({'kind': 'polynomial', 'params': {}}, 'map.params.coefficients'),
    ({'kind': 'callback', 'params': {'callback': 'nope'}}, 'map.params.callback'),
    ({'kind': 'identity', 'params': {'dimension': 0}}, 'map.params.dimension'),
])
def test_map_errors_name_the_offending_entry(document, path):
    with pytest.raises(SpecValidationError) as info:
        map_from_raw(document)
    assert info.value.path == path
