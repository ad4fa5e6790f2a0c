"""Integration of the Loewner-Kufarev ODE ``d phi_{s,t} / dt = G(phi_{s,t}, t)``."""

from __future__ import annotations

import logging
import math

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .enums import IntegrationMethod, Verdict
from .errors import PointOutsideDomain, SpecValidationError, StepFailure, TrajectoryEscaped
from .fields import BaseField
from .geometry import DomainSpec, as_vector, kobayashi_distance
from .reports import Report, write_csv


__all__: tuple = (
    'IntegratorConfig',
    'FlowResult',
    'BatchFlow',
    'EvolutionFamily',
    'FieldFlow',
    'EvolutionReport',
    'UnivalenceReport',
    'RegularityReport',
    'as_family',
    'integrate_batch',
    'integrate_flow',
    'check_evolution_property',
    'check_univalence',
    'estimate_regularity',
    'dump_trajectory',
    'domain_distance',
)

__log__: logging.Logger = logging.getLogger('loewner.flow')

# Cash-Karp 5(4) embedded pair
_CK_C = np.array([0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8])
_CK_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (3 / 10, -9 / 10, 6 / 5),
    (-11 / 54, 5 / 2, -70 / 27, 35 / 27),
    (1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096),
)
_CK_B = np.array([37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771])
_CK_E = np.array([-277 / 64512, 0.0, 6925 / 370944, -6925 / 202752, -277 / 14336, 277 / 7084])

_RK4_C = np.array([0.0, 1 / 2, 1 / 2, 1.0])
_RK4_A = ((), (1 / 2,), (0.0, 1 / 2), (0.0, 0.0, 1.0))
_RK4_B = np.array([1 / 6, 1 / 3, 1 / 3, 1 / 6])


class IntegratorConfig(object):
    """Represents the knobs of the flow integrator.

    Parameters
    ----------
    step_h: float
        The fixed step of :attr:`.IntegrationMethod.RK4_FIXED`, and the initial
        step of the adaptive scheme.
    method: :class:`.IntegrationMethod`
        The Runge-Kutta scheme to use.
    abs_tol: float
        Absolute tolerance of the adaptive scheme.
    rel_tol: float
        Relative tolerance of the adaptive scheme.
    boundary_margin: float
        Trajectories closer than this to the boundary are considered escaped.
    max_steps: int
        Upper bound on the number of attempted steps of a single integration.
    h_min: float
        Smallest step the integrator may take before giving up.
    """

    __slots__: tuple = ('_step_h', '_method', '_abs_tol', '_rel_tol', '_boundary_margin', '_max_steps', '_h_min')

    def __init__(
            self,
            step_h: float = 1e-3,
            method: IntegrationMethod = IntegrationMethod.RK45_ADAPTIVE,
            abs_tol: float = 1e-9,
            rel_tol: float = 1e-9,
            boundary_margin: float = 1e-9,
            max_steps: int = 1_000_000,
            h_min: float = 1e-14
    ) -> None:
        # Let the setters validate
        self.step_h = step_h
        self.method = method
        self.abs_tol = abs_tol
        self.rel_tol = rel_tol
        self.boundary_margin = boundary_margin
        self.max_steps = max_steps
        self.h_min = h_min

    def __repr__(self) -> str:
        return (
            f'<IntegratorConfig method={self._method.value!r} step_h={self._step_h} '
            f'abs_tol={self._abs_tol} rel_tol={self._rel_tol}>'
        )

    @property
    def step_h(self) -> float:
        return self._step_h

    @step_h.setter
    def step_h(self, new: float) -> None:
        if not new > 0:
            raise ValueError('step_h must be positive')
        self._step_h = float(new)

    @property
    def method(self) -> IntegrationMethod:
        return self._method

    @method.setter
    def method(self, new: Union[IntegrationMethod, str]) -> None:
        self._method = IntegrationMethod(new)

    @property
    def abs_tol(self) -> float:
        return self._abs_tol

    @abs_tol.setter
    def abs_tol(self, new: float) -> None:
        if not new > 0:
            raise ValueError('abs_tol must be positive')
        self._abs_tol = float(new)

    @property
    def rel_tol(self) -> float:
        return self._rel_tol

    @rel_tol.setter
    def rel_tol(self, new: float) -> None:
        if not new > 0:
            raise ValueError('rel_tol must be positive')
        self._rel_tol = float(new)

    @property
    def boundary_margin(self) -> float:
        return self._boundary_margin

    @boundary_margin.setter
    def boundary_margin(self, new: float) -> None:
        if new < 0:
            raise ValueError('boundary_margin must be nonnegative')
        self._boundary_margin = float(new)

    @property
    def max_steps(self) -> int:
        return self._max_steps

    @max_steps.setter
    def max_steps(self, new: int) -> None:
        if new < 1:
            raise ValueError('max_steps must be at least 1')
        self._max_steps = int(new)

    @property
    def h_min(self) -> float:
        return self._h_min

    @h_min.setter
    def h_min(self, new: float) -> None:
        if not new > 0:
            raise ValueError('h_min must be positive')
        self._h_min = float(new)

    def replace(self, **changes: Any) -> IntegratorConfig:
        """Returns a copy of this config with the given fields changed."""

        raw = self.to_raw()
        raw.update(changes)
        return IntegratorConfig(**raw)

    def to_raw(self) -> Dict[str, Any]:
        return {
            'step_h': self._step_h,
            'method': self._method.value,
            'abs_tol': self._abs_tol,
            'rel_tol': self._rel_tol,
            'boundary_margin': self._boundary_margin,
            'max_steps': self._max_steps,
            'h_min': self._h_min,
        }

    @classmethod
    def from_raw(cls, data: Any, path: str = 'config') -> IntegratorConfig:
        if not isinstance(data, dict):
            raise SpecValidationError(path, 'expected an object')

        unknown = set(data) - set(cls().to_raw())
        if unknown:
            raise SpecValidationError(f'{path}.{sorted(unknown)[0]}', 'unknown integrator option')

        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise SpecValidationError(path, str(exc)) from None


@dataclass(repr=False)
class BatchFlow:
    """Endpoints and Jacobians of a batch of trajectories sharing their steps."""

    s: float
    t: float
    endpoints: np.ndarray
    jacobians: Optional[np.ndarray]
    steps: int = 0
    rejected: int = 0
    max_error: Optional[float] = None
    samples: Dict[float, Tuple[np.ndarray, Optional[np.ndarray]]] = field(default_factory=dict)
    trajectory: List[Tuple[float, np.ndarray]] = field(default_factory=list)

    def __repr__(self) -> str:
        return f'<BatchFlow s={self.s} t={self.t} points={self.endpoints.shape[0]} steps={self.steps}>'


@dataclass(repr=False)
class FlowResult(Report):
    """The value ``phi_{s,t}(z)`` with its Jacobian and integration diagnostics."""

    endpoint: np.ndarray
    jacobian: np.ndarray
    s: float
    t: float
    steps_taken: int = 0
    rejected_steps: int = 0
    max_local_error_estimate: Optional[float] = None
    trajectory: List[Tuple[float, np.ndarray]] = field(default_factory=list)

    @property
    def determinant(self) -> complex:
        return complex(np.linalg.det(self.jacobian))

    def to_raw(self) -> Dict[str, Any]:
        raw = super().to_raw()
        del raw['trajectory']
        return raw

    def __repr__(self) -> str:
        return f'<FlowResult s={self.s} t={self.t} endpoint={self.endpoint!r}>'


class _Stats(object):
    __slots__ = ('steps', 'rejected', 'max_error')

    def __init__(self) -> None:
        self.steps: int = 0
        self.rejected: int = 0
        self.max_error: float = 0.0


class _Integrator(object):
    """One integration of a batch of points through a list of segments."""

    def __init__(self, spec: BaseField, cfg: IntegratorConfig, with_jacobian: bool, record: bool) -> None:
        self.spec: BaseField = spec
        self.cfg: IntegratorConfig = cfg
        self.n: int = spec.dimension
        self.with_jacobian: bool = with_jacobian
        self.record: bool = record
        self.stats: _Stats = _Stats()
        self.trajectory: List[Tuple[float, np.ndarray]] = []

    def rhs(self, tau: float, y: np.ndarray) -> np.ndarray:
        n = self.n
        z = y[:, :n]
        dz = self.spec.evaluate_many(z, tau)

        if not self.with_jacobian:
            return dz

        J = y[:, n:].reshape(-1, n, n)
        dJ = self.spec.jacobian_many(z, tau) @ J
        return np.concatenate([dz, dJ.reshape(-1, n * n)], axis=1)

    def inside(self, y: np.ndarray) -> bool:
        z = y[:, :self.n]
        if not np.all(np.isfinite(z)):
            return False
        return bool(np.all(self.spec.domain.boundary_distance(z) > 0))

    def escaped(self, y: np.ndarray) -> bool:
        if not self.spec.domain.hyperbolic:
            return False
        return bool(np.any(self.spec.domain.boundary_distance(y[:, :self.n]) <= self.cfg.boundary_margin))

    def stages(
            self,
            tableau_a: Sequence[Sequence[float]],
            tableau_c: np.ndarray,
            tau: float,
            y: np.ndarray,
            h: float,
            clamp: float
    ) -> Optional[np.ndarray]:
        slopes = []

        for a_row, c in zip(tableau_a, tableau_c):
            stage = y
            if a_row:
                stage = y + h * sum(coefficient * k for coefficient, k in zip(a_row, slopes) if coefficient)
                if not self.inside(stage):
                    return None

            slopes.append(self.rhs(min(tau + c * h, clamp), stage))

        return np.stack(slopes)

    def accept(self, tau: float, y: np.ndarray) -> None:
        self.stats.steps += 1

        if self.escaped(y):
            __log__.debug(f'FLOW | trajectory reached the boundary margin at t={tau:.6g}')
            raise TrajectoryEscaped(tau)

        if self.record:
            self.trajectory.append((tau, y[:, :self.n].copy()))

    def check_budget(self, tau: float, h: float) -> None:
        if self.stats.steps + self.stats.rejected >= self.cfg.max_steps:
            raise StepFailure(tau, h)

    def adaptive(self, a: float, b: float, y: np.ndarray, h: float, clamp: float) -> Tuple[np.ndarray, float]:
        cfg = self.cfg
        tau = a

        while tau < b:
            self.check_budget(tau, h)

            proposal = h
            final = h >= b - tau or (b - tau - h) <= 1e-12 * max(1.0, abs(b))
            if final:
                h = b - tau

            slopes = self.stages(_CK_A, _CK_C, tau, y, h, clamp)
            if slopes is None:
                self.stats.rejected += 1
                h /= 2
                if h < cfg.h_min:
                    raise TrajectoryEscaped(tau, f'Stage points left the domain near t={tau:.6g}.')
                continue

            y_new = y + h * np.tensordot(_CK_B, slopes, axes=1)
            error = np.abs(h * np.tensordot(_CK_E, slopes, axes=1))
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            ratio = float(np.max(error / scale))

            if not math.isfinite(ratio):
                self.stats.rejected += 1
                h /= 2
                if h < cfg.h_min:
                    raise StepFailure(tau, h)
                continue

            if ratio > 1.0:
                self.stats.rejected += 1
                h *= max(0.2, 0.9 * ratio ** -0.2)
                if h < cfg.h_min:
                    raise StepFailure(tau, h)
                continue

            tau = b if final else tau + h
            y = y_new
            self.stats.max_error = max(self.stats.max_error, float(np.max(error)))
            self.accept(tau, y)

            factor = 5.0 if ratio == 0 else min(5.0, max(0.2, 0.9 * ratio ** -0.2))
            h = max(h * factor, proposal) if final else h * factor

        return y, h

    def fixed(self, tau: float, y: np.ndarray, h: float, clamp: float) -> np.ndarray:
        self.check_budget(tau, h)

        slopes = self.stages(_RK4_A, _RK4_C, tau, y, h, clamp)
        if slopes is None:
            self.stats.rejected += 1
            if h / 2 < self.cfg.h_min:
                raise TrajectoryEscaped(tau, f'Stage points left the domain near t={tau:.6g}.')

            y = self.fixed(tau, y, h / 2, clamp)
            return self.fixed(tau + h / 2, y, h / 2, clamp)

        y = y + h * np.tensordot(_RK4_B, slopes, axes=1)
        self.accept(tau + h, y)
        return y

    def segment(self, a: float, b: float, y: np.ndarray, h: float, clamp: float) -> Tuple[np.ndarray, float]:
        if self.cfg.method is IntegrationMethod.RK45_ADAPTIVE:
            return self.adaptive(a, b, y, h, clamp)

        count = max(1, math.ceil((b - a) / self.cfg.step_h - 1e-9))
        step = (b - a) / count
        for i in range(count):
            y = self.fixed(a + i * step, y, step, clamp)
        return y, h


def integrate_batch(
        spec: BaseField,
        points: Any,
        s: float,
        t: float,
        cfg: Optional[IntegratorConfig] = None,
        *,
        checkpoints: Sequence[float] = (),
        jacobian: bool = True,
        record: bool = False
) -> BatchFlow:
    """Integrates a batch of initial points of shape ``(m, n)`` from ``s`` to ``t`` with shared steps.

    The time interval is split at every field breakpoint and every checkpoint;
    no step crosses a breakpoint, and the piece on the left of a breakpoint is
    used up to it. States at the checkpoints are kept in :attr:`BatchFlow.samples`.

    Raises
    ------
    ValueError
        ``t < s``, ``s < 0`` or the field cannot be integrated.
    :exc:`.PointOutsideDomain`
        An initial point is within the boundary margin.
    :exc:`.TrajectoryEscaped`
        A trajectory reached the boundary margin.
    :exc:`.StepFailure`
        The adaptive control could not meet the tolerances.
    """

    cfg = cfg or IntegratorConfig()

    if s < 0:
        raise ValueError('initial time must be nonnegative.')

    if t < s:
        raise ValueError(f'backward integration is not supported (s={s!r} > t={t!r}).')

    if not spec.integrable:
        raise ValueError(f'{spec!r} cannot be integrated.')

    n = spec.dimension
    Z = np.asarray(points, dtype=complex).reshape(-1, n)

    if spec.domain.hyperbolic:
        distances = spec.domain.boundary_distance(Z)
        if np.any(distances <= cfg.boundary_margin):
            raise PointOutsideDomain(Z[int(np.argmin(distances))], spec.domain)

    if jacobian:
        y = np.concatenate([Z, np.tile(np.eye(n, dtype=complex).ravel(), (Z.shape[0], 1))], axis=1)
    else:
        y = Z.copy()

    def split(state: np.ndarray) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        if not jacobian:
            return state[:, :n].copy(), None
        return state[:, :n].copy(), state[:, n:].reshape(-1, n, n).copy()

    stops = {float(c) for c in checkpoints if s <= c <= t}
    jumps = {b for b in spec.breakpoints if s < b < t}
    edges = sorted({float(s), float(t)} | stops | jumps)

    integrator = _Integrator(spec, cfg, jacobian, record)
    samples: Dict[float, Tuple[np.ndarray, Optional[np.ndarray]]] = {}

    if record:
        integrator.trajectory.append((float(s), Z.copy()))

    if s in stops:
        samples[float(s)] = split(y)

    h = cfg.step_h
    for a, b in zip(edges, edges[1:]):
        clamp = float(np.nextafter(b, -np.inf)) if b in jumps else b
        y, h = integrator.segment(a, b, y, h, clamp)

        if b in stops:
            samples[b] = split(y)

    endpoints, jacobians = split(y)
    stats = integrator.stats

    __log__.debug(f'FLOW | {Z.shape[0]} point(s) from s={s:.6g} to t={t:.6g}: '
                  f'{stats.steps} steps, {stats.rejected} rejected')

    return BatchFlow(
        s=float(s),
        t=float(t),
        endpoints=endpoints,
        jacobians=jacobians,
        steps=stats.steps,
        rejected=stats.rejected,
        max_error=stats.max_error if cfg.method is IntegrationMethod.RK45_ADAPTIVE else None,
        samples=samples,
        trajectory=integrator.trajectory,
    )


def integrate_flow(
        spec: BaseField,
        z: Any,
        s: float,
        t: float,
        cfg: Optional[IntegratorConfig] = None,
        *,
        record: bool = False
) -> FlowResult:
    """Integrates ``phi_{s,t}(z)`` together with its Jacobian ``d(phi_{s,t})_z``.

    The Jacobian solves the variational equation ``dJ/dt = (d_z G)(phi, t) J`` with ``J(s) = I``.

    Parameters
    ----------
    spec: :class:`.BaseField`
        The Herglotz field.
    z
        The initial point.
    s: float
        The initial time.
    t: float
        The final time, ``t >= s``.
    cfg: Optional[:class:`IntegratorConfig`]
        Integrator knobs; the defaults when omitted.
    record: bool
        Whether to keep every accepted step in :attr:`FlowResult.trajectory`.

    Returns
    -------
    :class:`FlowResult`
    """

    cfg = cfg or IntegratorConfig()
    z = as_vector(z, spec.dimension)

    if spec.domain.hyperbolic:
        spec.domain.check_interior(z, cfg.boundary_margin)

    if t == s and s >= 0:
        return FlowResult(
            endpoint=z.copy(),
            jacobian=np.eye(spec.dimension, dtype=complex),
            s=float(s),
            t=float(t),
            trajectory=[(float(s), z[None, :].copy())] if record else [],
        )

    batch = integrate_batch(spec, z[None, :], s, t, cfg, record=record)
    return FlowResult(
        endpoint=batch.endpoints[0],
        jacobian=batch.jacobians[0],
        s=float(s),
        t=float(t),
        steps_taken=batch.steps,
        rejected_steps=batch.rejected,
        max_local_error_estimate=batch.max_error,
        trajectory=[(tau, Z[0]) for tau, Z in batch.trajectory],
    )


def dump_trajectory(path: str, result: FlowResult) -> None:
    """Writes a recorded trajectory as CSV: ``t, Re z_1..Re z_n, Im z_1..Im z_n``."""

    if not result.trajectory:
        raise ValueError('the flow result carries no trajectory; integrate with record=True.')

    n = result.endpoint.shape[0]
    header = ['t'] + [f're_z{j + 1}' for j in range(n)] + [f'im_z{j + 1}' for j in range(n)]
    rows = [[tau] + list(z.real) + list(z.imag) for tau, z in result.trajectory]
    write_csv(path, header, rows)


class EvolutionFamily(object):
    """The base class of two-parameter families ``phi_{s,t}`` of self-maps of a domain."""

    @property
    def domain(self) -> DomainSpec:
        raise NotImplementedError

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def evaluate_many(self, s: float, t: float, points: Any) -> Tuple[np.ndarray, np.ndarray]:
        """Returns ``phi_{s,t}`` and its Jacobians on a batch of points."""
        raise NotImplementedError

    def evaluate(self, s: float, t: float, z: Any) -> np.ndarray:
        endpoints, _ = self.evaluate_many(s, t, as_vector(z, self.dimension)[None, :])
        return endpoints[0]

    __call__ = evaluate


class FieldFlow(EvolutionFamily):
    """The evolution family generated by a Herglotz field."""

    __slots__: tuple = ('_spec', '_config')

    def __init__(self, spec: BaseField, cfg: Optional[IntegratorConfig] = None) -> None:
        self._spec: BaseField = spec
        self._config: IntegratorConfig = cfg or IntegratorConfig()

    def __repr__(self) -> str:
        return f'<FieldFlow spec={self._spec!r}>'

    @property
    def spec(self) -> BaseField:
        return self._spec

    @property
    def config(self) -> IntegratorConfig:
        return self._config

    @property
    def domain(self) -> DomainSpec:
        return self._spec.domain

    def evaluate_many(self, s: float, t: float, points: Any) -> Tuple[np.ndarray, np.ndarray]:
        points = np.asarray(points, dtype=complex).reshape(-1, self.dimension)
        if s == t:
            return points.copy(), np.tile(np.eye(self.dimension, dtype=complex), (points.shape[0], 1, 1))

        batch = integrate_batch(self._spec, points, s, t, self._config)
        return batch.endpoints, batch.jacobians


def as_family(source: Union[BaseField, EvolutionFamily], cfg: Optional[IntegratorConfig] = None) -> EvolutionFamily:
    if isinstance(source, EvolutionFamily):
        return source
    return FieldFlow(source, cfg)


@dataclass(repr=False)
class EvolutionReport(Report):
    """Residuals of the evolution property ``phi_{s,t} = phi_{u,t} o phi_{s,u}``."""

    tolerance: float
    residuals: List[float] = field(default_factory=list)
    max_residual: float = 0.0
    worst: Optional[Tuple[Any, Tuple[float, float, float]]] = None

    @property
    def verdict(self) -> Verdict:
        return Verdict.PASS if self.max_residual <= self.tolerance else Verdict.FAIL


def check_evolution_property(
        source: Union[BaseField, EvolutionFamily],
        z_set: Any,
        triples: Sequence[Tuple[float, float, float]],
        cfg: Optional[IntegratorConfig] = None,
        *,
        tol: float = 1e-7
) -> EvolutionReport:
    """Measures ``|phi_{u,t}(phi_{s,u}(z)) - phi_{s,t}(z)|`` over points and time triples."""

    family = as_family(source, cfg)
    points = np.asarray(z_set, dtype=complex).reshape(-1, family.dimension)
    report = EvolutionReport(tolerance=tol)

    for s, u, t in triples:
        if not 0 <= s <= u <= t:
            raise ValueError(f'expected 0 <= s <= u <= t, got {(s, u, t)!r}')

        middle, _ = family.evaluate_many(s, u, points)
        composed, _ = family.evaluate_many(u, t, middle)
        direct, _ = family.evaluate_many(s, t, points)

        residuals = np.linalg.norm(composed - direct, axis=1)
        worst = int(np.argmax(residuals))
        report.residuals.append(float(residuals[worst]))

        if report.worst is None or residuals[worst] > report.max_residual:
            report.max_residual = float(residuals[worst])
            report.worst = (points[worst], (s, u, t))

    __log__.info(f'FLOW | evolution property over {len(triples)} triple(s): '
                 f'max residual {report.max_residual:.3e} ({report.verdict.value})')
    return report


@dataclass(repr=False)
class UnivalenceReport(Report):
    """Collisions of ``phi_{s,t}`` on probe pairs and the smallest Jacobian determinant."""

    collision_tol: float
    pairs: int = 0
    violations: List[Tuple[Any, Any, float]] = field(default_factory=list)
    min_separation: float = math.inf
    min_abs_det: float = math.inf

    @property
    def verdict(self) -> Verdict:
        return Verdict.FAIL if self.violations else Verdict.PASS


def check_univalence(
        spec: BaseField,
        s: float,
        t: float,
        probe_pairs: Sequence[Tuple[Any, Any]],
        cfg: Optional[IntegratorConfig] = None,
        *,
        collision_tol: float = 1e-9
) -> UnivalenceReport:
    """Flags distinct probe pairs whose images under ``phi_{s,t}`` collide."""

    n = spec.dimension
    firsts = np.array([as_vector(z, n) for z, _ in probe_pairs])
    seconds = np.array([as_vector(w, n) for _, w in probe_pairs])

    if np.any(np.linalg.norm(firsts - seconds, axis=1) == 0):
        raise ValueError('probe pairs must be distinct.')

    family = FieldFlow(spec, cfg)
    images, jacobians = family.evaluate_many(s, t, np.concatenate([firsts, seconds]))
    count = firsts.shape[0]

    report = UnivalenceReport(collision_tol=collision_tol, pairs=count)
    separations = np.linalg.norm(images[:count] - images[count:], axis=1)
    report.min_separation = float(np.min(separations))
    report.min_abs_det = float(np.min(np.abs(np.linalg.det(jacobians))))

    for z, w, gap in zip(firsts, seconds, separations):
        if gap < collision_tol:
            report.violations.append((z, w, float(gap)))

    if report.violations:
        __log__.warning(f'FLOW | phi_{{{s},{t}}} collides on {len(report.violations)} pair(s)')

    return report


@dataclass(repr=False)
class RegularityReport(Report):
    """Empirical density of ``c_{T,K}`` on a time grid.

    This is a diagnostic; a finite grid cannot certify the almost-everywhere bound.
    """

    horizon: float
    cells: List[Dict[str, float]] = field(default_factory=list)
    linf: float = 0.0


def domain_distance(domain: DomainSpec, first: np.ndarray, second: np.ndarray) -> np.ndarray:
    if not domain.hyperbolic:
        return np.linalg.norm(first - second, axis=1)
    return np.array([kobayashi_distance(domain, a, b, margin=0.0) for a, b in zip(first, second)])


def estimate_regularity(
        spec: BaseField,
        K: Any,
        T: float,
        time_grid: Sequence[float],
        cfg: Optional[IntegratorConfig] = None
) -> RegularityReport:
    """Tabulates ``sup_{z in K, s <= u} d_M(phi_{s,t}(z), phi_{s,u}(z)) / (t - u)`` per grid cell ``[u, t]``.

    ``d_M`` is the Kobayashi distance, or the euclidean distance on C^n.
    """

    grid = sorted(float(g) for g in time_grid)
    if T <= 0 or not grid or grid[0] < 0 or grid[-1] > T or len(grid) < 2:
        raise ValueError('time grid must contain at least two times inside [0, T].')

    points = np.asarray(K, dtype=complex).reshape(-1, spec.dimension)
    densities = np.zeros(len(grid) - 1)

    for i, s in enumerate(grid[:-1]):
        batch = integrate_batch(spec, points, s, grid[-1], cfg, checkpoints=grid[i:], jacobian=False)

        for j in range(i, len(grid) - 1):
            u, t = grid[j], grid[j + 1]
            gaps = domain_distance(spec.domain, batch.samples[t][0], batch.samples[u][0])
            densities[j] = max(densities[j], float(np.max(gaps)) / (t - u))

    report = RegularityReport(horizon=T)
    report.cells = [{'u': u, 't': t, 'density': float(d)} for u, t, d in zip(grid, grid[1:], densities)]
    report.linf = float(np.max(densities))
    return report
