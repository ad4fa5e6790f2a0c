from __future__ import annotations

from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np

from numpy.polynomial import polynomial as P

from .enums import MapKind
from .errors import SpecValidationError
from .geometry import DomainSpec, as_vector
from .reports import decode_vector, encode


__all__: tuple = (
    'HolomorphicMap',
    'DiscMap',
    'IdentityMap',
    'KoebeMap',
    'HalfPlaneMap',
    'PolynomialMap',
    'ScaledMap',
    'CallbackMap',
    'register_map_callback',
    'map_from_raw',
    'disc_values',
    'disc_derivatives',
)

_MAP_CALLBACKS: Dict[str, Callable[..., Any]] = {}

FD_STEP: float = 1e-6


def register_map_callback(name: str) -> Callable[[Callable[..., Any]], Callable[..., Any]]:
    """A decorator that registers a map callback ``f(z) -> w`` under ``name``."""

    def decorator(func: Callable[..., Any]) -> Callable[..., Any]:
        _MAP_CALLBACKS[name] = func
        return func

    return decorator


class HolomorphicMap(object):
    """The base class of holomorphic maps ``f: B^n -> C^n`` with a Jacobian evaluator."""

    __slots__: tuple = ('_dimension',)

    def __init__(self, dimension: int = 1) -> None:
        if dimension < 1:
            raise ValueError('dimension must be at least 1.')

        self._dimension: int = int(dimension)

    def __repr__(self) -> str:
        return f'<{self.__class__.__name__} dimension={self._dimension}>'

    @property
    def kind(self) -> MapKind:
        raise NotImplementedError

    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def domain(self) -> DomainSpec:
        return DomainSpec.for_dimension(self._dimension)

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian_many(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=complex).reshape(-1, self._dimension)
        m, n = points.shape
        jacobians = np.empty((m, n, n), dtype=complex)

        for j in range(n):
            step = np.zeros(n, dtype=complex)
            step[j] = FD_STEP
            jacobians[:, :, j] = (self.evaluate_many(points + step) - self.evaluate_many(points - step)) / (2 * FD_STEP)

        return jacobians

    def __call__(self, z: Any) -> np.ndarray:
        return self.evaluate_many(as_vector(z, self._dimension)[None, :])[0]

    def jacobian(self, z: Any) -> np.ndarray:
        return self.jacobian_many(as_vector(z, self._dimension)[None, :])[0]

    def _params_raw(self) -> Dict[str, Any]:
        return {}

    def to_raw(self) -> Dict[str, Any]:
        return {'kind': self.kind.value, 'params': self._params_raw()}

    @classmethod
    def from_raw(cls, data: Any, path: str = 'map') -> HolomorphicMap:
        return map_from_raw(data, path)

    @classmethod
    def _from_params(cls, params: Dict[str, Any], path: str) -> HolomorphicMap:
        return cls()


class DiscMap(HolomorphicMap):
    """A holomorphic function on the disc given by ``f``, ``f'`` and ``f''`` on complex arrays."""

    __slots__: tuple = ()

    def __init__(self) -> None:
        super().__init__(1)

    def value(self, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, w: np.ndarray) -> np.ndarray:
        return (self.value(w + FD_STEP) - self.value(w - FD_STEP)) / (2 * FD_STEP)

    def second_derivative(self, w: np.ndarray) -> np.ndarray:
        return (self.derivative(w + FD_STEP) - self.derivative(w - FD_STEP)) / (2 * FD_STEP)

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        w = np.asarray(points, dtype=complex).reshape(-1)
        return self.value(w)[:, None]

    def jacobian_many(self, points: np.ndarray) -> np.ndarray:
        w = np.asarray(points, dtype=complex).reshape(-1)
        return self.derivative(w)[:, None, None]


class IdentityMap(DiscMap):
    """The identity of C^n."""

    __slots__: tuple = ()

    def __init__(self, dimension: int = 1) -> None:
        HolomorphicMap.__init__(self, dimension)

    @property
    def kind(self) -> MapKind:
        return MapKind.IDENTITY

    def value(self, w: np.ndarray) -> np.ndarray:
        return np.asarray(w, dtype=complex)

    def derivative(self, w: np.ndarray) -> np.ndarray:
        return np.ones_like(np.asarray(w, dtype=complex))

    def second_derivative(self, w: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(w, dtype=complex))

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=complex).reshape(-1, self._dimension).copy()

    def jacobian_many(self, points: np.ndarray) -> np.ndarray:
        count = np.asarray(points).reshape(-1, self._dimension).shape[0]
        return np.tile(np.eye(self._dimension, dtype=complex), (count, 1, 1))

    def _params_raw(self) -> Dict[str, Any]:
        return {'dimension': self._dimension}

    @classmethod
    def _from_params(cls, params: Dict[str, Any], path: str) -> IdentityMap:
        return cls(params.get('dimension', 1))


class KoebeMap(DiscMap):
    """The Koebe function ``z / (1 - z)^2``."""

    __slots__: tuple = ()

    @property
    def kind(self) -> MapKind:
        return MapKind.KOEBE

    def value(self, w: np.ndarray) -> np.ndarray:
        return w / (1 - w) ** 2

    def derivative(self, w: np.ndarray) -> np.ndarray:
        return (1 + w) / (1 - w) ** 3

    def second_derivative(self, w: np.ndarray) -> np.ndarray:
        return (4 + 2 * w) / (1 - w) ** 4


class HalfPlaneMap(DiscMap):
    """``z / (1 - z)``, mapping the disc onto the half-plane ``Re w > -1/2``."""

    __slots__: tuple = ()

    @property
    def kind(self) -> MapKind:
        return MapKind.HALF_PLANE

    def value(self, w: np.ndarray) -> np.ndarray:
        return w / (1 - w)

    def derivative(self, w: np.ndarray) -> np.ndarray:
        return 1 / (1 - w) ** 2

    def second_derivative(self, w: np.ndarray) -> np.ndarray:
        return 2 / (1 - w) ** 3


class PolynomialMap(DiscMap):
    """A polynomial with ascending coefficients ``c_0 + c_1 z + ...``."""

    __slots__: tuple = ('_coefficients',)

    def __init__(self, coefficients: Sequence[complex]) -> None:
        super().__init__()

        coefficients = np.asarray(coefficients, dtype=complex)
        if coefficients.ndim != 1 or coefficients.size == 0 or not np.all(np.isfinite(coefficients)):
            raise ValueError('coefficients must be a non-empty list of finite numbers.')

        self._coefficients: np.ndarray = coefficients

    @property
    def kind(self) -> MapKind:
        return MapKind.POLYNOMIAL

    @property
    def coefficients(self) -> np.ndarray:
        return self._coefficients

    def value(self, w: np.ndarray) -> np.ndarray:
        return P.polyval(w, self._coefficients)

    def derivative(self, w: np.ndarray) -> np.ndarray:
        return P.polyval(w, P.polyder(self._coefficients))

    def second_derivative(self, w: np.ndarray) -> np.ndarray:
        return P.polyval(w, P.polyder(self._coefficients, 2))

    def _params_raw(self) -> Dict[str, Any]:
        return {'coefficients': encode(self._coefficients)}

    @classmethod
    def _from_params(cls, params: Dict[str, Any], path: str) -> PolynomialMap:
        return cls(decode_vector(params.get('coefficients'), f'{path}.coefficients'))


class ScaledMap(DiscMap):
    """``c f`` for a disc map ``f`` and a complex constant ``c``."""

    __slots__: tuple = ('_inner', '_factor')

    def __init__(self, inner: DiscMap, factor: complex) -> None:
        super().__init__()
        self._inner: DiscMap = inner
        self._factor: complex = complex(factor)

    @property
    def kind(self) -> MapKind:
        return self._inner.kind

    @property
    def factor(self) -> complex:
        return self._factor

    def value(self, w: np.ndarray) -> np.ndarray:
        return self._factor * self._inner.value(w)

    def derivative(self, w: np.ndarray) -> np.ndarray:
        return self._factor * self._inner.derivative(w)

    def second_derivative(self, w: np.ndarray) -> np.ndarray:
        return self._factor * self._inner.second_derivative(w)

    def to_raw(self) -> Dict[str, Any]:
        raise TypeError('scaled maps are not serializable.')


class CallbackMap(HolomorphicMap):
    """A map backed by a callback ``f(z) -> w`` on vectors of shape ``(n,)``."""

    __slots__: tuple = ('_callback', '_name')

    def __init__(self, callback: Any, dimension: int = 1) -> None:
        super().__init__(dimension)

        if isinstance(callback, str):
            if callback not in _MAP_CALLBACKS:
                raise KeyError(f'no map callback registered under {callback!r}')
            self._name: Optional[str] = callback
            self._callback: Callable[..., Any] = _MAP_CALLBACKS[callback]
        else:
            self._name = getattr(callback, '__name__', None)
            self._callback = callback

    @property
    def kind(self) -> MapKind:
        return MapKind.CALLBACK

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=complex).reshape(-1, self._dimension)
        return np.stack([np.asarray(self._callback(z), dtype=complex).reshape(self._dimension) for z in points])

    def _params_raw(self) -> Dict[str, Any]:
        if self._name is None or _MAP_CALLBACKS.get(self._name) is not self._callback:
            raise ValueError('only registered callbacks can be serialized.')
        return {'callback': self._name, 'dimension': self._dimension}

    @classmethod
    def _from_params(cls, params: Dict[str, Any], path: str) -> CallbackMap:
        name = params.get('callback')
        if name not in _MAP_CALLBACKS:
            raise SpecValidationError(f'{path}.callback', f'no map callback registered under {name!r}')
        return cls(name, params.get('dimension', 1))


def disc_values(f: Any, w: np.ndarray) -> np.ndarray:
    """Evaluates a one dimensional map (or plain callable) on an array of complex numbers."""

    w = np.asarray(w, dtype=complex)
    if isinstance(f, DiscMap) and f.dimension == 1:
        return np.asarray(f.value(w), dtype=complex)
    if isinstance(f, HolomorphicMap):
        return f.evaluate_many(w.reshape(-1, 1)).reshape(w.shape)
    return np.array([complex(np.ravel(f(value))[0]) for value in w.ravel()]).reshape(w.shape)


def disc_derivatives(f: Any, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    if isinstance(f, DiscMap) and f.dimension == 1:
        return np.asarray(f.derivative(w), dtype=complex)
    if isinstance(f, HolomorphicMap):
        return f.jacobian_many(w.reshape(-1, 1)).reshape(w.shape)
    return (disc_values(f, w + FD_STEP) - disc_values(f, w - FD_STEP)) / (2 * FD_STEP)


__mapping__: Dict[MapKind, type] = {
    MapKind.IDENTITY: IdentityMap,
    MapKind.KOEBE: KoebeMap,
    MapKind.HALF_PLANE: HalfPlaneMap,
    MapKind.POLYNOMIAL: PolynomialMap,
    MapKind.CALLBACK: CallbackMap,
}


def get_cls(kind: MapKind, /) -> type:
    if kind is MapKind.ROPER_SUFFRIDGE:
        from .operators import RoperSuffridgeMap
        return RoperSuffridgeMap

    return __mapping__[kind]


def map_from_raw(data: Any, path: str = 'map') -> HolomorphicMap:
    """Builds a test map from ``{"kind": ..., "params": {...}}``."""

    if not isinstance(data, dict):
        raise SpecValidationError(path, 'expected an object with "kind" and "params"')

    try:
        kind = MapKind(data.get('kind'))
    except ValueError:
        choices = ', '.join(repr(kind.value) for kind in MapKind)
        raise SpecValidationError(f'{path}.kind', f'expected one of {choices}') from None

    params = data.get('params', {})
    if not isinstance(params, dict):
        raise SpecValidationError(f'{path}.params', 'expected an object')

    dimension = params.get('dimension', 1)
    if isinstance(dimension, bool) or not isinstance(dimension, int) or dimension < 1:
        raise SpecValidationError(f'{path}.params.dimension', 'expected a positive integer')

    return get_cls(kind)._from_params(params, f'{path}.params')
