"""The Roper-Suffridge extension of disc chains to the ball and normalization of evolution families."""

from __future__ import annotations

import logging
import math

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .chains import LoewnerChain
from .enums import DomainKind, FieldKind, MapKind, Verdict
from .errors import BranchContinuationFailure, HorizonExceeded, OperatorError, SchwarzPickViolation, SpecValidationError
from .fields import BaseField, nested_field
from .flow import EvolutionFamily, IntegratorConfig, as_family, integrate_batch
from .geometry import DomainSpec, MobiusParams, as_vector
from .maps import FD_STEP, DiscMap, HolomorphicMap, disc_derivatives, disc_values, map_from_raw
from .reports import Report, decode_complex, encode


__all__: tuple = (
    'LiftedField',
    'LiftedChain',
    'LiftedFamily',
    'RoperSuffridgeMap',
    'NormalizedFamily',
    'ArgAuditReport',
    'continue_sqrt',
    'lifted_herglotz_eval',
    'roper_suffridge_eval',
    'lifted_evolution_eval',
    'normalize_to_origin',
)

__log__: logging.Logger = logging.getLogger('loewner.operators')

BRANCH_FLOOR: float = 1e-12

CONTINUATION_STEPS: int = 256


def _nearest_root(values: np.ndarray, reference: np.ndarray) -> np.ndarray:
    root = np.sqrt(values)
    return np.where(np.abs(root - reference) <= np.abs(root + reference), root, -root)


def continue_sqrt(values: Any, start: Any, points: Optional[Any] = None) -> np.ndarray:
    """Continues ``sqrt`` along sampled paths.

    Parameters
    ----------
    values
        The radicands along each path, shape ``(m, k)``.
    start
        For each path, the root of ``values[:, 0]`` to start from is the one
        closest to this reference.
    points
        The path points, used for error reporting only.

    Returns
    -------
    numpy.ndarray
        The continued roots, shape ``(m, k)``.

    Raises
    ------
    :exc:`.BranchContinuationFailure`
        A radicand is smaller than 1e-12 in modulus.
    """

    values = np.atleast_2d(np.asarray(values, dtype=complex))
    small = np.abs(values) < BRANCH_FLOOR

    if np.any(small):
        i, j = np.argwhere(small)[0]
        where = complex(np.asarray(points)[i, j]) if points is not None else complex(j)
        raise BranchContinuationFailure(where, complex(values[i, j]))

    roots = np.empty_like(values)
    roots[:, 0] = _nearest_root(values[:, 0], np.broadcast_to(np.asarray(start, dtype=complex), values[:, 0].shape))

    for k in range(1, values.shape[1]):
        roots[:, k] = _nearest_root(values[:, k], roots[:, k - 1])

    return roots


class LiftedField(BaseField):
    """The Roper-Suffridge lift of a disc field to the ball of C^n.

    ``G(z, t) = (g(z_1, t), z~ / 2 (-1 + g'(z_1, t)))`` where ``z~ = (z_2, ..., z_n)``.

    Parameters
    ----------
    inner: :class:`.BaseField`
        A Herglotz field on the disc.
    dimension: int
        The dimension ``n >= 2`` of the target ball.
    """

    __slots__: tuple = ('_inner',)

    def __init__(self, inner: BaseField, dimension: int = 2) -> None:
        if inner.dimension != 1:
            raise ValueError('only disc fields can be lifted.')

        if dimension < 2:
            raise ValueError('the target ball must have dimension at least 2.')

        super().__init__(
            DomainSpec.ball(dimension),
            breakpoints=inner.breakpoints,
            order=inner.order,
            reentrant=inner.reentrant,
        )
        self._inner: BaseField = inner

    @property
    def kind(self) -> FieldKind:
        return FieldKind.LIFTED

    @property
    def inner(self) -> BaseField:
        return self._inner

    @property
    def integrable(self) -> bool:
        return self._inner.integrable

    def piece_index(self, t: float) -> int:
        return self._inner.piece_index(t)

    def _evaluate(self, points: np.ndarray, t: float) -> np.ndarray:
        first = points[:, :1]
        values = self._inner.evaluate_many(first, t)
        slopes = self._inner.jacobian_many(first, t)[:, 0, 0]
        return np.concatenate([values, points[:, 1:] * ((slopes - 1) / 2)[:, None]], axis=1)

    def _jacobian(self, points: np.ndarray, t: float) -> np.ndarray:
        m, n = points.shape
        first = points[:, :1]
        slopes = self._inner.jacobian_many(first, t)[:, 0, 0]
        curvatures = self._inner.second_derivative_many(first[:, 0], t)

        jacobians = np.zeros((m, n, n), dtype=complex)
        jacobians[:, 0, 0] = slopes
        jacobians[:, 1:, 0] = points[:, 1:] * (curvatures / 2)[:, None]

        diagonal = np.arange(1, n)
        jacobians[:, diagonal, diagonal] = ((slopes - 1) / 2)[:, None]
        return jacobians

    def _params_raw(self) -> Dict[str, Any]:
        return {'field': self._inner.to_raw(), 'dimension': self.dimension}

    @classmethod
    def _from_params(cls, params: Dict[str, Any], domain: DomainSpec, **options: Any) -> LiftedField:
        if options.get('breakpoints'):
            raise SpecValidationError('breakpoints', 'lifted fields take the breakpoints of their disc field')

        if domain.kind is not DomainKind.UNIT_BALL:
            raise SpecValidationError('domain.kind', 'lifted fields live on the ball')

        dimension = params.get('dimension', domain.dimension)
        if dimension != domain.dimension:
            raise SpecValidationError('params.dimension', 'must match the domain dimension')

        inner = nested_field(params.get('field'), 'params.field')
        if inner.domain.kind is not DomainKind.UNIT_DISC:
            raise SpecValidationError('params.field.domain', 'the lifted field must live on the disc')

        return cls(inner, domain.dimension)


def lifted_herglotz_eval(g: BaseField, z: Any, t: float) -> np.ndarray:
    """Evaluates the lifted Herglotz field ``(g(z_1, t), z~ / 2 (-1 + g'(z_1, t)))``.

    Raises
    ------
    :exc:`.PointOutsideDomain`
        ``z`` is not interior to the ball.
    """

    z = as_vector(z)
    return LiftedField(g, z.shape[0]).evaluate(z, t)


@dataclass(repr=False)
class ArgAuditReport(Report):
    """Sampled arguments ``arg f_t'(0)`` and ``arg phi'_{s,t}(0)`` of a lifted chain.

    Violations of ``|arg| < pi/2`` downgrade the verdict to marginal; the
    lifting formulas remain evaluable.
    """

    derivative_args: List[Dict[str, float]] = field(default_factory=list)
    transition_args: List[Dict[str, float]] = field(default_factory=list)
    violations: int = 0

    @property
    def verdict(self) -> Verdict:
        return Verdict.MARGINAL if self.violations else Verdict.PASS


class LiftedChain(object):
    """The Roper-Suffridge extension ``F_t(z) = (f_t(z_1), z~ e^{t/2} sqrt(f_t'(z_1)))`` of a disc chain.

    The square root is continued along the segment ``[0, z_1]`` from its value
    at the origin. By default that value is ``sqrt(phi'_{t,tau}(0))`` continued
    in ``tau`` from ``1`` at ``tau = t`` up to ``tau = T``, where it is a root of
    ``f_t'(0)``; an explicit anchor selects the root of ``f_t'(0)`` closest to
    it instead.

    Parameters
    ----------
    chain: :class:`.LoewnerChain`
        A Loewner chain on the disc.
    dimension: int
        The dimension ``n >= 2`` of the target ball.
    sqrt_branch_anchor: Optional[complex]
        A reference value for ``sqrt(f_t'(0))``.
    steps: int
        Number of continuation steps along each path.
    """

    __slots__: tuple = ('_chain', '_dimension', '_anchor', '_steps')

    def __init__(
            self,
            chain: LoewnerChain,
            dimension: int = 2,
            sqrt_branch_anchor: Optional[complex] = None,
            *,
            steps: int = CONTINUATION_STEPS
    ) -> None:
        if chain.dimension != 1:
            raise ValueError('only chains on the disc can be lifted.')

        if dimension < 2:
            raise ValueError('the target ball must have dimension at least 2.')

        if sqrt_branch_anchor is not None and abs(sqrt_branch_anchor) == 0:
            raise ValueError('the branch anchor must be nonzero.')

        self._chain: LoewnerChain = chain
        self._dimension: int = int(dimension)
        self._anchor: Optional[complex] = None if sqrt_branch_anchor is None else complex(sqrt_branch_anchor)
        self._steps: int = int(steps)

    def __repr__(self) -> str:
        return f'<LiftedChain dimension={self._dimension} chain={self._chain!r}>'

    @property
    def chain(self) -> LoewnerChain:
        return self._chain

    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def horizon(self) -> float:
        return self._chain.horizon

    @property
    def sqrt_branch_anchor(self) -> Optional[complex]:
        return self._anchor

    @property
    def lifted_field(self) -> LiftedField:
        """:class:`LiftedField`: The lifted Herglotz field generating :meth:`evolve_many`."""
        return LiftedField(self._chain.spec, self._dimension)

    def _time_continued(self, first: np.ndarray, s: float, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        # phi_{s,t}(z_1), phi'_{s,t}(z_1) and sqrt(phi'_{s,tau}(z_1)) continued in tau from 1 at tau = s
        first = np.asarray(first, dtype=complex).reshape(-1)
        if t == s:
            ones = np.ones_like(first)
            return first.copy(), ones, ones

        grid = np.linspace(s, t, self._steps + 1)
        batch = integrate_batch(self._chain.spec, first[:, None], s, t, self._chain.config, checkpoints=grid)

        derivatives = np.stack([batch.samples[float(tau)][1][:, 0, 0] for tau in grid], axis=1)
        roots = continue_sqrt(derivatives, 1.0, np.repeat(first[:, None], grid.shape[0], axis=1))
        return batch.endpoints[:, 0], derivatives[:, -1], roots[:, -1]

    def anchor(self, t: float) -> complex:
        """The value of ``sqrt(f_t'(0))`` the spatial continuation starts from."""

        if t > self.horizon:
            raise HorizonExceeded(t, self.horizon)

        _, derivative, root = self._time_continued(np.zeros(1), t, self.horizon)
        if abs(np.angle(derivative[0])) >= math.pi / 2:
            __log__.warning(f'OPERATORS | |arg f_t\'(0)| >= pi/2 at t={t:.6g}; the lift hypotheses fail')

        if self._anchor is None:
            return complex(root[0])
        return complex(_nearest_root(derivative, np.array([self._anchor]))[0])

    def evaluate_many(self, t: float, points: Any) -> np.ndarray:
        """Evaluates ``F_t`` on a batch of points of the ball, shape ``(m, n)``."""

        points = np.asarray(points, dtype=complex).reshape(-1, self._dimension)
        start = self.anchor(t)

        paths = points[:, :1] * np.linspace(0, 1, self._steps + 1)[None, :]
        values, jacobians = self._chain.evaluate_many(t, paths.reshape(-1, 1))
        values = values.reshape(paths.shape)
        derivatives = jacobians.reshape(paths.shape)

        roots = continue_sqrt(derivatives, start, paths)
        tail = points[:, 1:] * (math.exp(t / 2) * roots[:, -1])[:, None]
        return np.concatenate([values[:, -1:], tail], axis=1)

    def _evolve(self, s: float, t: float, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if not 0 <= s <= t:
            raise ValueError(f'expected 0 <= s <= t, got {(s, t)!r}')

        if t > self.horizon:
            raise HorizonExceeded(t, self.horizon)

        images, _, roots = self._time_continued(points[:, 0], s, t)
        scale = math.exp((s - t) / 2) * roots
        values = np.concatenate([images[:, None], points[:, 1:] * scale[:, None]], axis=1)

        norms = np.linalg.norm(values, axis=1)
        if np.any(norms >= 1 + 1e-9):
            raise SchwarzPickViolation(float(np.max(norms)))

        return values, scale

    def evolve_many(self, s: float, t: float, points: Any) -> np.ndarray:
        """The lifted evolution family ``Phi_{s,t}(z) = (phi_{s,t}(z_1), z~ e^{(s-t)/2} sqrt(phi'_{s,t}(z_1)))``.

        Raises
        ------
        :exc:`.SchwarzPickViolation`
            An image has norm at least ``1 + 1e-9``.
        """

        points = np.asarray(points, dtype=complex).reshape(-1, self._dimension)
        return self._evolve(s, t, points)[0]

    def family(self) -> LiftedFamily:
        """The lifted evolution family as an :class:`.EvolutionFamily`."""
        return LiftedFamily(self)

    def audit_arg_hypotheses(self, grid: Sequence[float]) -> ArgAuditReport:
        """Samples ``arg f_t'(0)`` and ``arg phi'_{s,t}(0)`` over a time grid.

        ``phi'_{s,t}(0)`` equals ``f_s'(0) / f_t'(f_t^{-1}(f_s(0)))`` by the chain rule.
        """

        grid = sorted(float(t) for t in grid)
        report = ArgAuditReport()
        origin = np.zeros((1, 1), dtype=complex)

        for t in grid:
            _, jacobians = self._chain.evaluate_many(t, origin)
            argument = float(np.angle(jacobians[0, 0, 0]))
            report.derivative_args.append({'t': t, 'arg': argument})
            report.violations += abs(argument) >= math.pi / 2

        for i, s in enumerate(grid):
            for t in grid[i + 1:]:
                _, jacobians = self._chain.transition_many(s, t, origin)
                argument = float(np.angle(jacobians[0, 0, 0]))
                report.transition_args.append({'s': s, 't': t, 'arg': argument})
                report.violations += abs(argument) >= math.pi / 2

        if report.violations:
            __log__.warning(f'OPERATORS | {report.violations} sampled argument(s) reach pi/2')

        return report

    def to_raw(self) -> Dict[str, Any]:
        return {
            'field': self._chain.spec.to_raw(),
            'horizon': self.horizon,
            'dimension': self._dimension,
            'sqrt_branch_anchor': encode(self._anchor),
        }

    @classmethod
    def from_raw(cls, data: Any, cfg: Optional[IntegratorConfig] = None) -> LiftedChain:
        if not isinstance(data, dict):
            raise SpecValidationError('', 'expected a lifted chain object')

        spec = nested_field(data.get('field'), 'field')
        if spec.domain.kind is not DomainKind.UNIT_DISC:
            raise SpecValidationError('field.domain', 'lifted chains are built on the disc')

        horizon = data.get('horizon')
        if isinstance(horizon, bool) or not isinstance(horizon, (int, float)) or not horizon > 0:
            raise SpecValidationError('horizon', 'expected a positive number')

        dimension = data.get('dimension', 2)
        if isinstance(dimension, bool) or not isinstance(dimension, int) or dimension < 2:
            raise SpecValidationError('dimension', 'expected an integer >= 2')

        anchor = data.get('sqrt_branch_anchor')
        if anchor is not None:
            anchor = decode_complex(anchor, 'sqrt_branch_anchor')

        return cls(LoewnerChain(spec, horizon, cfg), dimension, anchor)


class LiftedFamily(EvolutionFamily):
    """The lifted evolution family ``Phi_{s,t}`` of a :class:`LiftedChain`."""

    __slots__: tuple = ('_lift',)

    def __init__(self, lift: LiftedChain) -> None:
        self._lift: LiftedChain = lift

    @property
    def domain(self) -> DomainSpec:
        return DomainSpec.ball(self._lift.dimension)

    def evaluate_many(self, s: float, t: float, points: Any) -> Tuple[np.ndarray, np.ndarray]:
        points = np.asarray(points, dtype=complex).reshape(-1, self.dimension)
        values, scale = self._lift._evolve(s, t, points)

        step = np.zeros(self.dimension, dtype=complex)
        step[0] = FD_STEP
        forward, _ = self._lift._evolve(s, t, points + step)
        backward, _ = self._lift._evolve(s, t, points - step)

        m, n = points.shape
        jacobians = np.zeros((m, n, n), dtype=complex)
        jacobians[:, :, 0] = (forward - backward) / (2 * FD_STEP)

        diagonal = np.arange(1, n)
        jacobians[:, diagonal, diagonal] = scale[:, None]
        return values, jacobians


def roper_suffridge_eval(lift: LiftedChain, t: float, z: Any) -> np.ndarray:
    """Evaluates ``F_t(z) = (f_t(z_1), z~ e^{t/2} sqrt(f_t'(z_1)))``.

    Raises
    ------
    :exc:`.BranchContinuationFailure`
        ``|f_t'|`` drops below 1e-12 on the segment ``[0, z_1]``.
    """

    z = DomainSpec.ball(lift.dimension).check_interior(z)
    return lift.evaluate_many(t, z[None, :])[0]


def lifted_evolution_eval(lift: LiftedChain, s: float, t: float, z: Any) -> np.ndarray:
    """Evaluates the lifted evolution family ``Phi_{s,t}(z)``; the image always lies in the ball."""

    z = DomainSpec.ball(lift.dimension).check_interior(z)
    return lift.evolve_many(s, t, z[None, :])[0]


class RoperSuffridgeMap(HolomorphicMap):
    """The Roper-Suffridge operator ``Phi_n(f)(z) = (f(z_1), c z~ sqrt(f'(z_1)))`` applied to a disc map.

    Parameters
    ----------
    f
        A disc map (or plain callable) to extend.
    dimension: int
        The dimension ``n >= 2`` of the ball.
    scale: complex
        The factor ``c``; ``e^{t/2}`` reproduces a lifted chain at time ``t``.
    anchor: Optional[complex]
        A reference for ``sqrt(f'(0))``; the principal root when omitted.
    """

    __slots__: tuple = ('_inner', '_scale', '_anchor', '_steps')

    def __init__(
            self,
            f: Any,
            dimension: int = 2,
            scale: complex = 1.0,
            anchor: Optional[complex] = None,
            *,
            steps: int = CONTINUATION_STEPS
    ) -> None:
        if dimension < 2:
            raise ValueError('the target ball must have dimension at least 2.')

        super().__init__(dimension)
        self._inner: Any = f
        self._scale: complex = complex(scale)
        self._anchor: Optional[complex] = None if anchor is None else complex(anchor)
        self._steps: int = int(steps)

    def __repr__(self) -> str:
        return f'<RoperSuffridgeMap dimension={self._dimension} inner={self._inner!r}>'

    @property
    def kind(self) -> MapKind:
        return MapKind.ROPER_SUFFRIDGE

    @property
    def inner(self) -> Any:
        return self._inner

    def _roots(self, first: np.ndarray) -> np.ndarray:
        paths = first[:, None] * np.linspace(0, 1, self._steps + 1)[None, :]
        derivatives = disc_derivatives(self._inner, paths)

        start = np.sqrt(derivatives[:, 0]) if self._anchor is None else self._anchor
        return continue_sqrt(derivatives, start, paths)[:, -1]

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=complex).reshape(-1, self._dimension)
        first = points[:, 0]

        values = disc_values(self._inner, first)
        tail = points[:, 1:] * (self._scale * self._roots(first))[:, None]
        return np.concatenate([values[:, None], tail], axis=1)

    def _second_derivative(self, first: np.ndarray) -> np.ndarray:
        if isinstance(self._inner, DiscMap):
            return np.asarray(self._inner.second_derivative(first), dtype=complex)
        return (disc_derivatives(self._inner, first + FD_STEP) - disc_derivatives(self._inner, first - FD_STEP)) / (2 * FD_STEP)

    def jacobian_many(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=complex).reshape(-1, self._dimension)
        m, n = points.shape
        first = points[:, 0]

        roots = self._roots(first)
        jacobians = np.zeros((m, n, n), dtype=complex)
        jacobians[:, 0, 0] = disc_derivatives(self._inner, first)
        jacobians[:, 1:, 0] = points[:, 1:] * (self._scale * self._second_derivative(first) / (2 * roots))[:, None]

        diagonal = np.arange(1, n)
        jacobians[:, diagonal, diagonal] = (self._scale * roots)[:, None]
        return jacobians

    def _params_raw(self) -> Dict[str, Any]:
        if not isinstance(self._inner, HolomorphicMap):
            raise ValueError('only extensions of test maps can be serialized.')

        raw = {'map': self._inner.to_raw(), 'dimension': self._dimension}
        if self._scale != 1:
            raw['scale'] = encode(self._scale)
        if self._anchor is not None:
            raw['anchor'] = encode(self._anchor)
        return raw

    @classmethod
    def _from_params(cls, params: Dict[str, Any], path: str = 'map.params') -> RoperSuffridgeMap:
        inner = map_from_raw(params.get('map'), f'{path}.map')
        if inner.dimension != 1:
            raise SpecValidationError(f'{path}.map', 'only disc maps can be extended')

        dimension = params.get('dimension', 2)
        if isinstance(dimension, bool) or not isinstance(dimension, int) or dimension < 2:
            raise SpecValidationError(f'{path}.dimension', 'expected an integer >= 2')

        scale = decode_complex(params['scale'], f'{path}.scale') if 'scale' in params else 1.0
        anchor = decode_complex(params['anchor'], f'{path}.anchor') if 'anchor' in params else None
        return cls(inner, dimension, scale, anchor)


class NormalizedFamily(EvolutionFamily):
    """The conjugated family ``phi_{s,t} = phi_{a(t)} o psi_{s,t} o phi_{a(s)}`` with ``a(t) = psi_{0,t}(0)``.

    Every ``phi_{s,t}`` fixes the origin. The inverse of ``phi_a`` is ``phi_a``
    itself; this is verified on every evaluation.
    """

    __slots__: tuple = ('_source', '_horizon')

    def __init__(self, source: EvolutionFamily, horizon: float) -> None:
        if source.domain.kind not in (DomainKind.UNIT_DISC, DomainKind.UNIT_BALL):
            raise ValueError('only families on the disc or the ball can be normalized.')

        if not horizon > 0:
            raise ValueError('horizon must be positive.')

        self._source: EvolutionFamily = source
        self._horizon: float = float(horizon)

    def __repr__(self) -> str:
        return f'<NormalizedFamily source={self._source!r} horizon={self._horizon}>'

    @property
    def source(self) -> EvolutionFamily:
        return self._source

    @property
    def horizon(self) -> float:
        return self._horizon

    @property
    def domain(self) -> DomainSpec:
        return self._source.domain

    def base_point(self, t: float) -> np.ndarray:
        """``a(t) = psi_{0,t}(0)``."""

        if not 0 <= t <= self._horizon:
            raise ValueError(f'time {t!r} lies outside [0, {self._horizon!r}].')

        origin = np.zeros((1, self.dimension), dtype=complex)
        return self._source.evaluate_many(0.0, t, origin)[0][0]

    def _mobius(self, t: float, points: np.ndarray) -> MobiusParams:
        mobius = MobiusParams(self.base_point(t))
        residual = mobius.involution_residual(points)
        if residual > 1e-10:
            raise OperatorError(f'phi_a is not an involution here (residual {residual:.3e}).')
        return mobius

    def evaluate_many(self, s: float, t: float, points: Any) -> Tuple[np.ndarray, np.ndarray]:
        if not 0 <= s <= t:
            raise ValueError(f'expected 0 <= s <= t, got {(s, t)!r}')

        if t > self._horizon:
            raise ValueError(f'time {t!r} exceeds the horizon {self._horizon!r}.')

        points = np.asarray(points, dtype=complex).reshape(-1, self.dimension)
        if s == t:
            return points.copy(), np.tile(np.eye(self.dimension, dtype=complex), (points.shape[0], 1, 1))

        before = self._mobius(s, points)
        moved = before.apply_many(points)
        images, jacobians = self._source.evaluate_many(s, t, moved)

        after = self._mobius(t, images)
        values = after.apply_many(images)

        chained = np.stack([
            after.differential(y) @ J @ before.differential(z)
            for z, y, J in zip(points, images, jacobians)
        ])
        return values, chained


def normalize_to_origin(
        source: Union[BaseField, EvolutionFamily],
        horizon: float,
        cfg: Optional[IntegratorConfig] = None
) -> NormalizedFamily:
    """Conjugates an evolution family on the disc or ball into one fixing the origin on ``[0, T]``."""

    return NormalizedFamily(as_family(source, cfg), horizon)
