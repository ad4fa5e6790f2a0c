from __future__ import annotations

import logging
import math
import threading

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from numpy.polynomial import polynomial as P
from scipy import linalg

from .enums import DomainKind, FieldKind, Verdict
from .errors import CallbackFailure, DegeneratePair, SpecValidationError
from .geometry import (
    DomainSpec,
    MobiusParams,
    as_vector,
    kobayashi_distance,
    polydisc_switching_gap,
)
from .reports import Report, decode_complex, decode_matrix, decode_vector, encode


__all__: tuple = (
    'LinearOperator',
    'BaseField',
    'RadialField',
    'BerksonPortaField',
    'BallDiagonalField',
    'AutomorphismField',
    'ConjugatedField',
    'CustomField',
    'WeakBoundReport',
    'DissipativityReport',
    'register_callback',
    'get_callback',
    'get_cls',
    'field_from_raw',
    'nested_field',
    'evaluate_field',
    'check_weak_bound',
    'check_dissipativity',
    'min_real_quadratic',
    'holomorphy_residual',
)

__log__: logging.Logger = logging.getLogger('loewner.fields')

_CALLBACKS: Dict[str, Callable[..., Any]] = {}

FD_STEP: float = 1e-6


def register_callback(name: str) -> Callable[[Callable[..., Any]], Callable[..., Any]]:
    """A decorator that registers a field callback under ``name``.

    Registered callbacks can be referenced from serialized custom fields.

    Example
    -------
    .. code:: py

        @register_callback('inverse_shift')
        def inverse_shift(z, t):
            return 1 / (1 - z)
    """

    def decorator(func: Callable[..., Any]) -> Callable[..., Any]:
        if name in _CALLBACKS and _CALLBACKS[name] is not func:
            raise ValueError(f'callback {name!r} is already registered.')

        _CALLBACKS[name] = func
        return func

    return decorator


def get_callback(name: str) -> Callable[..., Any]:
    try:
        return _CALLBACKS[name]
    except KeyError:
        raise KeyError(f'no callback registered under {name!r}') from None


class LinearOperator(object):
    """Represents a complex linear operator on C^n given by its matrix.

    Parameters
    ----------
    matrix
        A square array of finite complex entries.
    """

    __slots__: tuple = ('_matrix',)

    def __init__(self, matrix: Any) -> None:
        matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))

        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f'operator matrix must be square, got shape {matrix.shape}')

        if not np.all(np.isfinite(matrix)):
            raise ValueError('operator matrix entries must be finite')

        self._matrix: np.ndarray = matrix

    @classmethod
    def identity(cls, dimension: int = 1) -> LinearOperator:
        return cls(np.eye(dimension))

    @classmethod
    def scalar(cls, value: complex, dimension: int = 1) -> LinearOperator:
        return cls(value * np.eye(dimension))

    @classmethod
    def diagonal(cls, values: Sequence[complex]) -> LinearOperator:
        return cls(np.diag(np.asarray(values, dtype=complex)))

    def __repr__(self) -> str:
        return f'<LinearOperator dimension={self.dimension}>'

    def __mul__(self, other: complex) -> LinearOperator:
        return LinearOperator(other * self._matrix)

    __rmul__ = __mul__

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def dimension(self) -> int:
        return self._matrix.shape[0]

    @property
    def hermitian_part(self) -> np.ndarray:
        """The hermitian part ``(A + A^*) / 2``."""
        return (self._matrix + self._matrix.conj().T) / 2

    @property
    def m(self) -> float:
        """float: ``min Re <A z, z>`` over the unit sphere."""
        return min_real_quadratic(self)

    def __call__(self, z: Any) -> np.ndarray:
        return self._matrix @ as_vector(z, self.dimension)

    def apply_many(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=complex).reshape(-1, self.dimension) @ self._matrix.T

    def to_raw(self) -> Any:
        return encode(self._matrix)

    @classmethod
    def from_raw(cls, raw: Any, path: str = 'A', dimension: Optional[int] = None) -> LinearOperator:
        if isinstance(raw, (int, float)) and not isinstance(raw, bool):
            return cls.scalar(decode_complex(raw, path), dimension or 1)

        matrix = decode_matrix(raw, path)
        if dimension is not None and matrix.shape[0] != dimension:
            raise SpecValidationError(path, f'expected a {dimension}x{dimension} matrix')
        return cls(matrix)


def min_real_quadratic(A: Any) -> float:
    """``m(A) = min {Re <A z, z> : |z| = 1}``.

    This is the smallest eigenvalue of the hermitian part of ``A``.
    """

    operator = A if isinstance(A, LinearOperator) else LinearOperator(A)
    return float(linalg.eigh(operator.hermitian_part, eigvals_only=True)[0])


class BaseField(object):
    """The base class that every time-dependent vector field ``G(z, t)`` inherits from.

    Time dependence is piecewise continuous with declared breakpoints. On a
    breakpoint the field takes its right-limit value.

    Parameters
    ----------
    domain: :class:`.DomainSpec`
        The domain the field lives on.
    breakpoints: Sequence[float]
        Strictly increasing nonnegative times where the t-dependence may jump.
    order: float
        The integrability order ``d`` of the field, ``math.inf`` for ``L^inf``.
    reentrant: bool
        Whether evaluation may run from several threads at once.
    """

    __slots__: tuple = ('_domain', '_breakpoints', '_order', '_reentrant', '_lock')

    def __init__(
            self,
            domain: DomainSpec,
            *,
            breakpoints: Sequence[float] = (),
            order: float = math.inf,
            reentrant: bool = True
    ) -> None:
        breakpoints = tuple(float(b) for b in breakpoints)

        if any(b < 0 or not math.isfinite(b) for b in breakpoints):
            raise ValueError('breakpoints must be finite and nonnegative.')

        if any(a >= b for a, b in zip(breakpoints, breakpoints[1:])):
            raise ValueError('breakpoints must be strictly increasing.')

        if not order >= 1:
            raise ValueError('order must be at least 1.')

        self._domain: DomainSpec = domain
        self._breakpoints: Tuple[float, ...] = breakpoints
        self._order: float = float(order)
        self._reentrant: bool = reentrant
        self._lock: Optional[threading.Lock] = None if reentrant else threading.Lock()

    def __repr__(self) -> str:
        return f'<{self.__class__.__name__} domain={self._domain!r} breakpoints={list(self._breakpoints)}>'

    @property
    def kind(self) -> FieldKind:
        raise NotImplementedError

    @property
    def domain(self) -> DomainSpec:
        return self._domain

    @property
    def dimension(self) -> int:
        return self._domain.dimension

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return self._breakpoints

    @property
    def order(self) -> float:
        return self._order

    @property
    def reentrant(self) -> bool:
        return self._reentrant

    @property
    def integrable(self) -> bool:
        """bool: Whether the flow of this field may be integrated."""
        return True

    def piece_index(self, t: float) -> int:
        """Index of the time piece containing ``t``; a breakpoint belongs to the piece it starts."""
        return bisect_right(self._breakpoints, t)

    def _evaluate(self, points: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    def _jacobian(self, points: np.ndarray, t: float) -> np.ndarray:
        # holomorphic central differences, one coordinate at a time
        m, n = points.shape
        jacobians = np.empty((m, n, n), dtype=complex)

        for j in range(n):
            step = np.zeros(n, dtype=complex)
            step[j] = FD_STEP
            forward = self._evaluate(points + step, t)
            backward = self._evaluate(points - step, t)
            jacobians[:, :, j] = (forward - backward) / (2 * FD_STEP)

        return jacobians

    def _prepare(self, points: Any) -> np.ndarray:
        return np.asarray(points, dtype=complex).reshape(-1, self.dimension)

    def evaluate_many(self, points: Any, t: float) -> np.ndarray:
        """Evaluates the field on a batch of points of shape ``(m, n)``. No domain checks are made."""
        return self._evaluate(self._prepare(points), float(t))

    def jacobian_many(self, points: Any, t: float) -> np.ndarray:
        """The complex Jacobians ``d_z G`` on a batch of points, shape ``(m, n, n)``."""
        return self._jacobian(self._prepare(points), float(t))

    def evaluate(self, z: Any, t: float) -> np.ndarray:
        z = self._domain.check_interior(z) if self._domain.hyperbolic else as_vector(z, self.dimension)
        return self.evaluate_many(z[None, :], t)[0]

    def jacobian(self, z: Any, t: float) -> np.ndarray:
        z = self._domain.check_interior(z) if self._domain.hyperbolic else as_vector(z, self.dimension)
        return self.jacobian_many(z[None, :], t)[0]

    def second_derivative_many(self, values: np.ndarray, t: float) -> np.ndarray:
        """``g''(z, t)`` for a field on the disc, evaluated on an array of complex numbers."""

        if self.dimension != 1:
            raise TypeError('second derivatives are only available for one dimensional fields.')

        values = np.asarray(values, dtype=complex).reshape(-1, 1)
        forward = self._jacobian(values + FD_STEP, t)[:, 0, 0]
        backward = self._jacobian(values - FD_STEP, t)[:, 0, 0]
        return (forward - backward) / (2 * FD_STEP)

    def _params_raw(self) -> Dict[str, Any]:
        raise NotImplementedError

    def to_raw(self) -> Dict[str, Any]:
        return {
            'domain': self._domain.to_raw(),
            'kind': self.kind.value,
            'params': self._params_raw(),
            'breakpoints': list(self._breakpoints),
            'order': 'inf' if math.isinf(self._order) else self._order,
        }

    @classmethod
    def _from_params(cls, params: Dict[str, Any], domain: DomainSpec, **options: Any) -> BaseField:
        raise NotImplementedError

    @classmethod
    def from_raw(cls, data: Any) -> BaseField:
        return field_from_raw(data)


class RadialField(BaseField):
    """The autonomous linear field ``G(z, t) = A z``.

    ``A = -I`` gives the radial contraction, ``A = i`` the rotation of the disc.
    """

    __slots__: tuple = ('_operator',)

    def __init__(self, A: Any, domain: Optional[DomainSpec] = None, **options: Any) -> None:
        operator = A if isinstance(A, LinearOperator) else LinearOperator(A)
        domain = domain or DomainSpec.for_dimension(operator.dimension)

        if domain.dimension != operator.dimension:
            raise ValueError('operator dimension does not match the domain.')

        super().__init__(domain, **options)
        self._operator: LinearOperator = operator

    @property
    def kind(self) -> FieldKind:
        return FieldKind.RADIAL

    @property
    def operator(self) -> LinearOperator:
        return self._operator

    def _evaluate(self, points: np.ndarray, t: float) -> np.ndarray:
        return points @ self._operator.matrix.T

    def _jacobian(self, points: np.ndarray, t: float) -> np.ndarray:
        return np.broadcast_to(self._operator.matrix, (points.shape[0],) + self._operator.matrix.shape).copy()

    def second_derivative_many(self, values: np.ndarray, t: float) -> np.ndarray:
        return np.zeros(np.asarray(values).size, dtype=complex)

    def _params_raw(self) -> Dict[str, Any]:
        return {'A': self._operator.to_raw()}

    @classmethod
    def _from_params(cls, params: Dict[str, Any], domain: DomainSpec, **options: Any) -> RadialField:
        if 'A' not in params:
            raise SpecValidationError('params.A', 'missing operator')

        operator = LinearOperator.from_raw(params['A'], 'params.A', domain.dimension)
        return cls(operator, domain, **options)


class BerksonPortaField(BaseField):
    """A disc field in Berkson-Porta form ``G(z) = (z - tau)(conj(tau) z - 1) p(z)``.

    ``p = P / Q`` is a rational function given by ascending coefficient lists.
    The field is a Herglotz field when ``Re p >= 0`` on the disc, which is only
    checked by sampling (see :meth:`sampled_min_real_part`).

    Parameters
    ----------
    tau: complex
        The Denjoy-Wolff point, ``|tau| <= 1``. Only ``|tau| < 1`` can be integrated.
    numerator: Sequence[complex]
        Ascending coefficients of ``P``.
    denominator: Sequence[complex]
        Ascending coefficients of ``Q``. ``Q`` may not vanish in the open disc.
    """

    __slots__: tuple = ('_tau', '_numerator', '_denominator')

    def __init__(
            self,
            tau: complex = 0,
            numerator: Sequence[complex] = (1,),
            denominator: Sequence[complex] = (1,),
            **options: Any
    ) -> None:
        super().__init__(DomainSpec.disc(), **options)

        tau = complex(tau)
        if abs(tau) > 1:
            raise ValueError(f'tau must satisfy |tau| <= 1, got {tau!r}')

        numerator = np.trim_zeros(np.asarray(numerator, dtype=complex), 'b')
        denominator = np.trim_zeros(np.asarray(denominator, dtype=complex), 'b')

        if denominator.size == 0:
            raise ValueError('denominator of p may not vanish identically.')

        if numerator.size == 0:
            numerator = np.zeros(1, dtype=complex)

        if denominator.size > 1 and np.any(np.abs(P.polyroots(denominator)) < 1):
            raise ValueError('denominator of p vanishes inside the disc.')

        self._tau: complex = tau
        self._numerator: np.ndarray = numerator
        self._denominator: np.ndarray = denominator

    @property
    def kind(self) -> FieldKind:
        return FieldKind.BERKSON_PORTA

    @property
    def tau(self) -> complex:
        return self._tau

    @property
    def integrable(self) -> bool:
        return abs(self._tau) < 1

    def p(self, values: np.ndarray) -> np.ndarray:
        return P.polyval(values, self._numerator) / P.polyval(values, self._denominator)

    def dp(self, values: np.ndarray) -> np.ndarray:
        top = P.polyval(values, self._numerator)
        bottom = P.polyval(values, self._denominator)
        d_top = P.polyval(values, P.polyder(self._numerator))
        d_bottom = P.polyval(values, P.polyder(self._denominator))
        return (d_top * bottom - top * d_bottom) / bottom ** 2

    def sampled_min_real_part(self, radius: float = 0.999, nodes: int = 2048) -> float:
        """The smallest ``Re p`` over a circle of the given radius and a few interior circles."""

        angles = np.exp(2j * np.pi * np.arange(nodes) / nodes)
        values = np.concatenate([r * angles for r in np.linspace(0.0, radius, 11)])
        return float(np.min(self.p(values).real))

    def _evaluate(self, points: np.ndarray, t: float) -> np.ndarray:
        z = points[:, 0]
        tau = self._tau
        return ((z - tau) * (tau.conjugate() * z - 1) * self.p(z))[:, None]

    def _jacobian(self, points: np.ndarray, t: float) -> np.ndarray:
        z = points[:, 0]
        tau = self._tau
        left = z - tau
        right = tau.conjugate() * z - 1
        derivative = (right + tau.conjugate() * left) * self.p(z) + left * right * self.dp(z)
        return derivative[:, None, None]

    def _params_raw(self) -> Dict[str, Any]:
        return {
            'tau': encode(self._tau),
            'numerator': encode(self._numerator),
            'denominator': encode(self._denominator),
        }

    @classmethod
    def _from_params(cls, params: Dict[str, Any], domain: DomainSpec, **options: Any) -> BerksonPortaField:
        if domain.kind is not DomainKind.UNIT_DISC:
            raise SpecValidationError('domain.kind', 'Berkson-Porta fields live on the disc')

        tau = decode_complex(params.get('tau', 0), 'params.tau')
        if abs(tau) > 1:
            raise SpecValidationError('params.tau', 'expected |tau| <= 1')

        numerator = decode_vector(params.get('numerator', [1]), 'params.numerator')
        denominator = decode_vector(params.get('denominator', [1]), 'params.denominator')

        try:
            return cls(tau, numerator, denominator, **options)
        except ValueError as exc:
            raise SpecValidationError('params.denominator', str(exc)) from None


class BallDiagonalField(BaseField):
    """The diagonal linear field ``G(z, t) = diag(lambda_j(t)) z`` with piecewise constant eigenvalues.

    Parameters
    ----------
    lambdas: Sequence[Sequence[complex]]
        One row of ``n`` eigenvalues per time piece; there is one piece more
        than there are breakpoints.
    breakpoints: Sequence[float]
        The times where the eigenvalues jump.
    domain: Optional[:class:`.DomainSpec`]
        Defaults to the unit ball (the disc when ``n = 1``).
    """

    __slots__: tuple = ('_lambdas',)

    def __init__(
            self,
            lambdas: Any,
            breakpoints: Sequence[float] = (),
            domain: Optional[DomainSpec] = None,
            **options: Any
    ) -> None:
        lambdas = np.asarray(lambdas, dtype=complex)
        if lambdas.ndim == 1:
            lambdas = lambdas[None, :]

        if lambdas.shape[0] != len(breakpoints) + 1:
            raise ValueError(f'expected {len(breakpoints) + 1} eigenvalue rows, got {lambdas.shape[0]}')

        if not np.all(np.isfinite(lambdas)):
            raise ValueError('eigenvalues must be finite.')

        domain = domain or DomainSpec.for_dimension(lambdas.shape[1])
        if domain.dimension != lambdas.shape[1]:
            raise ValueError('eigenvalue rows do not match the domain dimension.')

        super().__init__(domain, breakpoints=breakpoints, **options)
        self._lambdas: np.ndarray = lambdas

    @property
    def kind(self) -> FieldKind:
        return FieldKind.BALL_DIAGONAL

    @property
    def lambdas(self) -> np.ndarray:
        return self._lambdas

    def eigenvalues(self, t: float) -> np.ndarray:
        return self._lambdas[self.piece_index(t)]

    def integral(self, s: float, t: float) -> np.ndarray:
        """``int_s^t lambda_j``, per coordinate."""

        edges = [s] + [b for b in self.breakpoints if s < b < t] + [t]
        total = np.zeros(self.dimension, dtype=complex)
        for start, stop in zip(edges, edges[1:]):
            total += (stop - start) * self.eigenvalues(start)
        return total

    def closed_form(self, z: Any, s: float, t: float) -> np.ndarray:
        """The exact flow ``exp(int_s^t lambda_j) z_j``."""
        return np.exp(self.integral(s, t)) * as_vector(z, self.dimension)

    def integral_lower_bound(self, horizon: float) -> np.ndarray:
        """``min_{0 <= t <= horizon} int_0^t Re lambda_j`` per coordinate.

        The integral is piecewise linear, so the minimum sits on a breakpoint or an end point.
        """

        times = [0.0] + [b for b in self.breakpoints if b < horizon] + [horizon]
        values = np.array([self.integral(0.0, t).real for t in times])
        return values.min(axis=0)

    def _evaluate(self, points: np.ndarray, t: float) -> np.ndarray:
        return points * self.eigenvalues(t)[None, :]

    def _jacobian(self, points: np.ndarray, t: float) -> np.ndarray:
        return np.broadcast_to(np.diag(self.eigenvalues(t)), (points.shape[0], self.dimension, self.dimension)).copy()

    def second_derivative_many(self, values: np.ndarray, t: float) -> np.ndarray:
        return np.zeros(np.asarray(values).size, dtype=complex)

    def _params_raw(self) -> Dict[str, Any]:
        return {'lambdas': encode(self._lambdas)}

    @classmethod
    def _from_params(cls, params: Dict[str, Any], domain: DomainSpec, **options: Any) -> BallDiagonalField:
        raw = params.get('lambdas')
        if not isinstance(raw, list) or not raw:
            raise SpecValidationError('params.lambdas', 'expected a list of eigenvalue rows')

        rows = [decode_vector(row, f'params.lambdas[{i}]') for i, row in enumerate(raw)]
        if any(len(row) != domain.dimension for row in rows):
            raise SpecValidationError('params.lambdas', f'each row needs {domain.dimension} eigenvalues')

        breakpoints = options.pop('breakpoints', ())
        if len(rows) != len(breakpoints) + 1:
            raise SpecValidationError('params.lambdas', f'expected {len(breakpoints) + 1} rows, one per time piece')

        return cls(np.array(rows), breakpoints, domain, **options)


class AutomorphismField(BaseField):
    """The complete field ``G(z) = a - <z, a> z + B z`` generating automorphisms of the ball.

    ``B`` must be skew-hermitian. The flow does not fix the origin unless ``a = 0``.
    """

    __slots__: tuple = ('_a', '_b')

    def __init__(self, a: Any, B: Any = None, **options: Any) -> None:
        a = as_vector(a)
        n = a.shape[0]

        B = np.zeros((n, n), dtype=complex) if B is None else np.atleast_2d(np.asarray(B, dtype=complex))
        if B.shape != (n, n):
            raise ValueError('B must be a square matrix matching a.')

        if not np.allclose(B.conj().T, -B, atol=1e-12):
            raise ValueError('B must be skew-hermitian.')

        super().__init__(DomainSpec.for_dimension(n), **options)
        self._a: np.ndarray = a
        self._b: np.ndarray = B

    @property
    def kind(self) -> FieldKind:
        return FieldKind.AUTOMORPHISM

    @property
    def a(self) -> np.ndarray:
        return self._a

    @property
    def B(self) -> np.ndarray:
        return self._b

    def _evaluate(self, points: np.ndarray, t: float) -> np.ndarray:
        inner = points @ self._a.conj()
        return self._a[None, :] - inner[:, None] * points + points @ self._b.T

    def _jacobian(self, points: np.ndarray, t: float) -> np.ndarray:
        inner = points @ self._a.conj()
        n = self.dimension
        return (
            -inner[:, None, None] * np.eye(n)[None, :, :]
            - points[:, :, None] * self._a.conj()[None, None, :]
            + self._b[None, :, :]
        )

    def _params_raw(self) -> Dict[str, Any]:
        return {'a': encode(self._a), 'B': encode(self._b)}

    @classmethod
    def _from_params(cls, params: Dict[str, Any], domain: DomainSpec, **options: Any) -> AutomorphismField:
        a = decode_vector(params.get('a'), 'params.a')
        if a.shape[0] != domain.dimension:
            raise SpecValidationError('params.a', f'expected {domain.dimension} entries')

        B = decode_matrix(params['B'], 'params.B') if 'B' in params else None
        try:
            return cls(a, B, **options)
        except ValueError as exc:
            raise SpecValidationError('params.B', str(exc)) from None


class ConjugatedField(BaseField):
    """The field ``phi_a^* G`` whose flow is ``phi_a o psi_{s,t} o phi_a``.

    ``G~(y, t) = (d phi_a)_{phi_a(y)} G(phi_a(y), t)``; this uses that ``phi_a`` is an involution.
    """

    __slots__: tuple = ('_inner', '_mobius')

    def __init__(self, inner: BaseField, a: Any) -> None:
        if inner.domain.kind not in (DomainKind.UNIT_DISC, DomainKind.UNIT_BALL):
            raise ValueError('only fields on the disc or the ball can be conjugated.')

        mobius = a if isinstance(a, MobiusParams) else MobiusParams(a)
        if mobius.dimension != inner.dimension:
            raise ValueError('Moebius parameter does not match the field dimension.')

        super().__init__(inner.domain, breakpoints=inner.breakpoints, order=inner.order, reentrant=inner.reentrant)
        self._inner: BaseField = inner
        self._mobius: MobiusParams = mobius

    @property
    def kind(self) -> FieldKind:
        return FieldKind.CONJUGATED

    @property
    def inner(self) -> BaseField:
        return self._inner

    @property
    def mobius(self) -> MobiusParams:
        return self._mobius

    @property
    def integrable(self) -> bool:
        return self._inner.integrable

    def piece_index(self, t: float) -> int:
        return self._inner.piece_index(t)

    def _evaluate(self, points: np.ndarray, t: float) -> np.ndarray:
        preimages = self._mobius.apply_many(points)
        values = self._inner.evaluate_many(preimages, t)
        return np.stack([self._mobius.differential(x) @ g for x, g in zip(preimages, values)])

    def _params_raw(self) -> Dict[str, Any]:
        return {'field': self._inner.to_raw(), 'a': encode(self._mobius.a)}

    @classmethod
    def _from_params(cls, params: Dict[str, Any], domain: DomainSpec, **options: Any) -> ConjugatedField:
        if options.get('breakpoints'):
            raise SpecValidationError('breakpoints', 'conjugated fields take the breakpoints of their inner field')

        a = MobiusParams.from_raw(params.get('a'), 'params.a')
        if a.dimension != domain.dimension:
            raise SpecValidationError('params.a', f'expected {domain.dimension} entries')

        inner = nested_field(params.get('field'), 'params.field')
        if inner.domain != domain:
            raise SpecValidationError('params.field.domain', 'inner field must live on the same domain')

        return cls(inner, a)


class CustomField(BaseField):
    """A field backed by a user callback ``callback(z, t) -> G(z, t)``.

    Parameters
    ----------
    callback: Callable
        Maps a point (a vector of shape ``(n,)``) and a time to a vector.
        If a string is passed, the callback is looked up in the registry.
    domain: :class:`.DomainSpec`
        The domain of the field.
    jacobian: Optional[Callable]
        ``jacobian(z, t) -> (n, n)``. Defaults to central differences.
    reentrant: bool
        If ``False`` (the default), calls into the callback are serialized.
    """

    __slots__: tuple = ('_callback', '_name', '_jacobian_callback', '_jacobian_name')

    def __init__(
            self,
            callback: Any,
            domain: DomainSpec,
            *,
            jacobian: Any = None,
            reentrant: bool = False,
            **options: Any
    ) -> None:
        super().__init__(domain, reentrant=reentrant, **options)

        self._name: Optional[str] = callback if isinstance(callback, str) else getattr(callback, '__name__', None)
        self._callback: Callable[..., Any] = get_callback(callback) if isinstance(callback, str) else callback

        self._jacobian_name: Optional[str] = jacobian if isinstance(jacobian, str) else None
        self._jacobian_callback: Optional[Callable[..., Any]] = (
            get_callback(jacobian) if isinstance(jacobian, str) else jacobian
        )

    @property
    def kind(self) -> FieldKind:
        return FieldKind.CUSTOM

    @property
    def name(self) -> Optional[str]:
        return self._name

    def _call(self, func: Callable[..., Any], name: Optional[str], z: np.ndarray, t: float) -> np.ndarray:
        try:
            if self._lock is None:
                return np.asarray(func(z, t), dtype=complex)
            with self._lock:
                return np.asarray(func(z, t), dtype=complex)
        except Exception as exc:
            raise CallbackFailure(name or '<anonymous>', exc) from exc

    def _evaluate(self, points: np.ndarray, t: float) -> np.ndarray:
        n = self.dimension
        return np.stack([self._call(self._callback, self._name, z, t).reshape(n) for z in points])

    def _jacobian(self, points: np.ndarray, t: float) -> np.ndarray:
        if self._jacobian_callback is None:
            return super()._jacobian(points, t)

        n = self.dimension
        return np.stack([
            self._call(self._jacobian_callback, self._jacobian_name, z, t).reshape(n, n) for z in points
        ])

    def _params_raw(self) -> Dict[str, Any]:
        if self._name is None or _CALLBACKS.get(self._name) is not self._callback:
            raise ValueError('only registered callbacks can be serialized.')

        raw = {'callback': self._name, 'reentrant': self._reentrant}
        if self._jacobian_name is not None:
            raw['jacobian'] = self._jacobian_name
        return raw

    @classmethod
    def _from_params(cls, params: Dict[str, Any], domain: DomainSpec, **options: Any) -> CustomField:
        name = params.get('callback')
        if not isinstance(name, str) or name not in _CALLBACKS:
            raise SpecValidationError('params.callback', f'no callback registered under {name!r}')

        jacobian = params.get('jacobian')
        if jacobian is not None and jacobian not in _CALLBACKS:
            raise SpecValidationError('params.jacobian', f'no callback registered under {jacobian!r}')

        options.setdefault('reentrant', bool(params.get('reentrant', False)))
        return cls(name, domain, jacobian=jacobian, **options)


__mapping__: Dict[FieldKind, type] = {
    FieldKind.RADIAL: RadialField,
    FieldKind.BERKSON_PORTA: BerksonPortaField,
    FieldKind.BALL_DIAGONAL: BallDiagonalField,
    FieldKind.AUTOMORPHISM: AutomorphismField,
    FieldKind.CONJUGATED: ConjugatedField,
    FieldKind.CUSTOM: CustomField,
}


def get_cls(kind: FieldKind, /) -> type:
    if kind is FieldKind.LIFTED:
        from .operators import LiftedField
        return LiftedField

    return __mapping__[kind]


def nested_field(data: Any, path: str) -> BaseField:
    try:
        return field_from_raw(data)
    except SpecValidationError as exc:
        inner = exc.path
        raise SpecValidationError(f'{path}.{inner}' if inner else path, str(exc).split(': ', 1)[-1]) from None


def field_from_raw(data: Any) -> BaseField:
    """Builds a field from its JSON envelope.

    Raises
    ------
    :exc:`.SpecValidationError`
        The document is malformed. The error's ``path`` names the offending entry.
    """

    if not isinstance(data, dict):
        raise SpecValidationError('', 'expected a field specification object')

    domain = DomainSpec.from_raw(data.get('domain'), 'domain')

    try:
        kind = FieldKind(data.get('kind'))
    except ValueError:
        choices = ', '.join(repr(kind.value) for kind in FieldKind)
        raise SpecValidationError('kind', f'expected one of {choices}') from None

    breakpoints = data.get('breakpoints', [])
    if not isinstance(breakpoints, list) or not all(
        isinstance(b, (int, float)) and not isinstance(b, bool) and math.isfinite(b) and b >= 0 for b in breakpoints
    ):
        raise SpecValidationError('breakpoints', 'expected a list of nonnegative numbers')

    if any(a >= b for a, b in zip(breakpoints, breakpoints[1:])):
        raise SpecValidationError('breakpoints', 'breakpoints must be strictly increasing')

    order = data.get('order', 'inf')
    if order == 'inf':
        order = math.inf
    elif isinstance(order, bool) or not isinstance(order, (int, float)) or order < 1:
        raise SpecValidationError('order', 'expected "inf" or a number >= 1')

    params = data.get('params', {})
    if not isinstance(params, dict):
        raise SpecValidationError('params', 'expected an object')

    try:
        return get_cls(kind)._from_params(params, domain, breakpoints=breakpoints, order=float(order))
    except ValueError as exc:
        raise SpecValidationError('params', str(exc)) from None


def evaluate_field(spec: BaseField, z: Any, t: float) -> np.ndarray:
    """Evaluates ``G(z, t)``. On a breakpoint the right-limit value is returned.

    Raises
    ------
    :exc:`.PointOutsideDomain`
        ``z`` is not interior.
    :exc:`.CallbackFailure`
        A custom callback raised.
    """

    if t < 0:
        raise ValueError('time must be nonnegative.')

    return spec.evaluate(z, t)


@dataclass(repr=False)
class WeakBoundReport(Report):
    """Sampled ``sup_K |G(., t)|`` on a time grid with its aggregates over ``[0, T]``."""

    horizon: float
    cap: float
    times: List[float] = field(default_factory=list)
    sups: List[float] = field(default_factory=list)
    linf: float = 0.0
    l1: float = 0.0
    unbounded: bool = False

    @property
    def verdict(self) -> Verdict:
        return Verdict.FAIL if self.unbounded else Verdict.PASS


def check_weak_bound(
        spec: BaseField,
        K: Any,
        T: float,
        *,
        time_nodes: int = 101,
        cap: float = 1e6
) -> WeakBoundReport:
    """Samples the local bound ``|G(z, t)| <= C_{K,T}(t)`` of a weak holomorphic field.

    The time grid contains every breakpoint in ``[0, T]`` and the instant just before it,
    so a jump shows up as two neighbouring samples.
    """

    if T <= 0:
        raise ValueError('horizon must be positive.')

    points = np.asarray(K, dtype=complex).reshape(-1, spec.dimension)
    if spec.domain.hyperbolic:
        for z in points:
            spec.domain.check_interior(z)

    times = set(np.linspace(0.0, T, time_nodes).tolist())
    for b in spec.breakpoints:
        if b <= T:
            times.add(b)
            if b > 0:
                times.add(b - 1e-9)

    report = WeakBoundReport(horizon=T, cap=cap)
    report.times = sorted(times)
    report.sups = [float(np.max(np.linalg.norm(spec.evaluate_many(points, t), axis=1))) for t in report.times]

    sups = np.asarray(report.sups)
    report.linf = float(np.max(sups))
    report.l1 = float(np.sum((sups[1:] + sups[:-1]) * np.diff(report.times)) / 2)
    report.unbounded = bool(not np.all(np.isfinite(sups)) or report.linf > cap)

    if report.unbounded:
        __log__.warning(f'FIELD | sampled bound {report.linf:.6g} exceeds the cap {cap:.6g}')

    return report


@dataclass(repr=False)
class DissipativityReport(Report):
    """The largest sampled derivative of ``k_M`` along pairs of trajectories."""

    tolerance: float
    step: float
    max_derivative: float = -math.inf
    worst_pair: Optional[Tuple[Any, Any, float]] = None
    samples: int = 0
    skipped: int = 0

    @property
    def verdict(self) -> Verdict:
        return Verdict.PASS if self.max_derivative <= self.tolerance else Verdict.FAIL


def _distance_derivative(
        domain: DomainSpec,
        z: np.ndarray,
        w: np.ndarray,
        gz: np.ndarray,
        gw: np.ndarray,
        h: float
) -> float:
    scale = math.sqrt(float(np.vdot(gz, gz).real + np.vdot(gw, gw).real))
    if scale == 0:
        return 0.0

    # step along the unit direction in R^{4n}, then rescale
    step = h / scale
    forward = kobayashi_distance(domain, z + step * gz, w + step * gw, margin=0.0)
    backward = kobayashi_distance(domain, z - step * gz, w - step * gw, margin=0.0)
    return (forward - backward) / (2 * step)


def check_dissipativity(
        spec: BaseField,
        pairs: Sequence[Tuple[Any, Any]],
        times: Sequence[float],
        *,
        h: float = FD_STEP,
        tol: float = 1e-7,
        switching_gap: float = 1e-6
) -> DissipativityReport:
    """Checks ``(dk_M)_{(z,w)}(G(z, t), G(w, t)) <= 0`` by central differences.

    Pairs within ``switching_gap`` of a polydisc switching locus are skipped and counted.

    Raises
    ------
    :exc:`.DegeneratePair`
        A pair has ``k_M(z, w) < 1e-9``.
    """

    domain = spec.domain
    report = DissipativityReport(tolerance=tol, step=h)

    for z, w in pairs:
        z = domain.check_interior(z)
        w = domain.check_interior(w)

        distance = kobayashi_distance(domain, z, w)
        if distance < 1e-9:
            raise DegeneratePair(z, w, distance)

        if domain.kind is DomainKind.POLYDISC and polydisc_switching_gap(z, w) < switching_gap:
            report.skipped += 1
            continue

        for t in times:
            gz, gw = spec.evaluate_many(np.stack([z, w]), t)
            value = _distance_derivative(domain, z, w, gz, gw, h)
            report.samples += 1

            if value > report.max_derivative:
                report.max_derivative = value
                report.worst_pair = (z, w, float(t))

    log = __log__.info if report.passed else __log__.warning
    log(f'FIELD | dissipativity on {report.samples} samples: max derivative {report.max_derivative:.3e} '
        f'({report.verdict.value})')
    return report


def holomorphy_residual(spec: BaseField, points: Any, t: float = 0.0, *, h: float = FD_STEP) -> float:
    """Largest Cauchy-Riemann residual ``|dG/dy_j - i dG/dx_j|`` over a batch of points."""

    points = np.asarray(points, dtype=complex).reshape(-1, spec.dimension)
    residual = 0.0

    for j in range(spec.dimension):
        step = np.zeros(spec.dimension, dtype=complex)
        step[j] = h
        dx = (spec.evaluate_many(points + step, t) - spec.evaluate_many(points - step, t)) / (2 * h)
        dy = (spec.evaluate_many(points + 1j * step, t) - spec.evaluate_many(points - 1j * step, t)) / (2 * h)
        residual = max(residual, float(np.max(np.linalg.norm(dy - 1j * dx, axis=1))))

    return residual
