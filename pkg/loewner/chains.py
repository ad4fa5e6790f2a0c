"""Finite-horizon Loewner chains ``f_s = phi_{s,T}`` and the checks built on them."""

from __future__ import annotations

import logging

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .enums import IntegrationMethod, Verdict
from .errors import (
    BreakpointTooClose,
    CurveTooClose,
    HorizonExceeded,
    NewtonDivergence,
    NonIntegerWinding,
)
from .fields import BaseField
from .flow import FieldFlow, IntegratorConfig, domain_distance
from .geometry import DomainSpec, as_vector
from .maps import HolomorphicMap, disc_derivatives, disc_values
from .reports import Report, encode, write_json


__all__: tuple = (
    'LoewnerChain',
    'ChainMap',
    'CircleTrace',
    'AssociationReport',
    'PdeReport',
    'InverseConvergenceReport',
    'MonotonicityReport',
    'DensityReport',
    'chain_eval',
    'check_association',
    'check_lk_pde',
    'circle_trace',
    'rouche_membership',
    'newton_inverse',
    'check_inverse_convergence',
    'check_image_monotonicity',
    'chain_density',
)

__log__: logging.Logger = logging.getLogger('loewner.chains')

MIN_TRACE_NODES: int = 512


class LoewnerChain(object):
    """Represents the finite-horizon Loewner chain ``f_s := phi_{s,T}`` on ``[0, T]``.

    The family satisfies ``f_s = f_t o phi_{s,t}`` exactly, with range inside
    the domain of the field.

    Parameters
    ----------
    spec: :class:`.BaseField`
        The Herglotz field generating the evolution family.
    horizon: float
        The horizon ``T > 0``.
    cfg: Optional[:class:`.IntegratorConfig`]
        Integrator knobs used for every evaluation.
    """

    __slots__: tuple = ('_spec', '_horizon', '_config')

    def __init__(self, spec: BaseField, horizon: float, cfg: Optional[IntegratorConfig] = None) -> None:
        if not horizon > 0:
            raise ValueError('horizon must be positive.')

        self._spec: BaseField = spec
        self._horizon: float = float(horizon)
        self._config: IntegratorConfig = cfg or IntegratorConfig()

    def __repr__(self) -> str:
        return f'<LoewnerChain spec={self._spec!r} horizon={self._horizon}>'

    @property
    def spec(self) -> BaseField:
        return self._spec

    @property
    def horizon(self) -> float:
        return self._horizon

    @property
    def config(self) -> IntegratorConfig:
        return self._config

    @property
    def domain(self) -> DomainSpec:
        return self._spec.domain

    @property
    def dimension(self) -> int:
        return self._spec.dimension

    def _check_time(self, s: float) -> None:
        if s < 0:
            raise ValueError('chain times must be nonnegative.')
        if s > self._horizon:
            raise HorizonExceeded(s, self._horizon)

    def evaluate_many(
            self,
            s: float,
            points: Any,
            cfg: Optional[IntegratorConfig] = None
    ) -> Tuple[np.ndarray, np.ndarray]:
        """``f_s`` and ``(df_s)`` on a batch of points of shape ``(m, n)``."""

        self._check_time(s)
        return FieldFlow(self._spec, cfg or self._config).evaluate_many(s, self._horizon, points)

    def evaluate(self, s: float, z: Any) -> np.ndarray:
        endpoints, _ = self.evaluate_many(s, as_vector(z, self.dimension)[None, :])
        return endpoints[0]

    __call__ = evaluate

    def transition_many(self, s: float, t: float, points: Any) -> Tuple[np.ndarray, np.ndarray]:
        """``phi_{s,t}`` on a batch of points, for ``s <= t <= T``."""

        self._check_time(t)
        return FieldFlow(self._spec, self._config).evaluate_many(s, t, points)

    def at(self, s: float) -> ChainMap:
        """The map ``f_s`` as a :class:`.HolomorphicMap`."""

        self._check_time(s)
        return ChainMap(self, s)

    def records(self, s_values: Sequence[float], points: Any) -> List[Dict[str, Any]]:
        """Evaluation records ``{s, z, f}`` for every time and point."""

        points = np.asarray(points, dtype=complex).reshape(-1, self.dimension)
        records = []

        for s in s_values:
            images, _ = self.evaluate_many(s, points)
            records.extend({'s': float(s), 'z': encode(z), 'f': encode(f)} for z, f in zip(points, images))

        return records

    def dump(self, path: str, s_values: Sequence[float], points: Any) -> None:
        """Writes the evaluation records as a JSON array."""
        write_json(path, self.records(s_values, points))


class ChainMap(HolomorphicMap):
    """The chain map ``f_s`` of a :class:`LoewnerChain`, evaluated through the flow."""

    __slots__: tuple = ('_chain', '_s')

    def __init__(self, chain: LoewnerChain, s: float) -> None:
        super().__init__(chain.dimension)
        self._chain: LoewnerChain = chain
        self._s: float = float(s)

    def __repr__(self) -> str:
        return f'<ChainMap s={self._s} chain={self._chain!r}>'

    @property
    def s(self) -> float:
        return self._s

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        return self._chain.evaluate_many(self._s, points)[0]

    def jacobian_many(self, points: np.ndarray) -> np.ndarray:
        return self._chain.evaluate_many(self._s, points)[1]


def chain_eval(chain: LoewnerChain, s: float, z: Any) -> np.ndarray:
    """Evaluates ``f_s(z) = phi_{s,T}(z)``.

    Raises
    ------
    :exc:`.HorizonExceeded`
        ``s > T``.
    """

    return chain.evaluate(s, z)


@dataclass(repr=False)
class AssociationReport(Report):
    """Residuals of ``f_s = f_t o phi_{s,t}``."""

    tolerance: float
    residuals: List[float] = field(default_factory=list)
    max_residual: float = 0.0
    worst: Optional[Tuple[Any, float, float]] = None

    @property
    def verdict(self) -> Verdict:
        return Verdict.PASS if self.max_residual <= self.tolerance else Verdict.FAIL


def check_association(
        chain: LoewnerChain,
        pairs: Sequence[Tuple[float, float]],
        z_set: Any,
        *,
        tol: float = 1e-7
) -> AssociationReport:
    """Measures ``|f_s(z) - f_t(phi_{s,t}(z))|`` over times ``s <= t <= T`` and points."""

    points = np.asarray(z_set, dtype=complex).reshape(-1, chain.dimension)
    report = AssociationReport(tolerance=tol)

    for s, t in pairs:
        if not 0 <= s <= t:
            raise ValueError(f'expected 0 <= s <= t, got {(s, t)!r}')

        direct, _ = chain.evaluate_many(s, points)
        middle, _ = chain.transition_many(s, t, points)
        composed, _ = chain.evaluate_many(t, middle)

        residuals = np.linalg.norm(direct - composed, axis=1)
        worst = int(np.argmax(residuals))
        report.residuals.append(float(residuals[worst]))

        if report.worst is None or residuals[worst] > report.max_residual:
            report.max_residual = float(residuals[worst])
            report.worst = (points[worst], float(s), float(t))

    __log__.info(f'CHAIN | association over {len(pairs)} pair(s): max residual {report.max_residual:.3e}')
    return report


@dataclass(repr=False)
class PdeReport(Report):
    """Residuals of ``df_s/ds + (df_s) G(., s) = 0``."""

    h_s: float
    tolerance: float
    residuals: List[float] = field(default_factory=list)
    max_residual: float = 0.0
    worst: Optional[Tuple[Any, float]] = None

    @property
    def verdict(self) -> Verdict:
        return Verdict.PASS if self.max_residual <= self.tolerance else Verdict.FAIL


def check_lk_pde(
        chain: LoewnerChain,
        s_grid: Sequence[float],
        z_set: Any,
        *,
        h_s: float = 1e-4,
        tol: float = 1e-5
) -> PdeReport:
    """Verifies the Loewner-Kufarev PDE ``df_s/ds (z) = -(df_s)_z G(z, s)``.

    ``df_s/ds`` is a central difference with step ``h_s``; ``(df_s)_z`` is the
    variational Jacobian. Chain values are integrated with tightened tolerances
    so the difference quotient is not dominated by integration error.

    Raises
    ------
    :exc:`.BreakpointTooClose`
        A sample time is within ``h_s`` of a field breakpoint.
    """

    points = np.asarray(z_set, dtype=complex).reshape(-1, chain.dimension)
    base = chain.config
    tight = base.replace(
        method=IntegrationMethod.RK45_ADAPTIVE,
        abs_tol=min(base.abs_tol, 1e-12),
        rel_tol=min(base.rel_tol, 1e-12),
    )

    for s in s_grid:
        for b in chain.spec.breakpoints:
            if abs(s - b) < h_s:
                raise BreakpointTooClose(s, b)

        if s - h_s < 0 or s + h_s > chain.horizon:
            raise ValueError(f'sample time {s!r} must lie in [h_s, T - h_s].')

    report = PdeReport(h_s=h_s, tolerance=tol)

    for s in s_grid:
        forward, _ = chain.evaluate_many(s + h_s, points, tight)
        backward, _ = chain.evaluate_many(s - h_s, points, tight)
        _, jacobians = chain.evaluate_many(s, points, tight)

        derivative = (forward - backward) / (2 * h_s)
        transport = np.einsum('mij,mj->mi', jacobians, chain.spec.evaluate_many(points, s))

        residuals = np.linalg.norm(derivative + transport, axis=1)
        worst = int(np.argmax(residuals))
        report.residuals.append(float(residuals[worst]))

        if report.worst is None or residuals[worst] > report.max_residual:
            report.max_residual = float(residuals[worst])
            report.worst = (points[worst], float(s))

    __log__.info(f'CHAIN | Loewner-Kufarev PDE on {len(s_grid)} time(s): max residual {report.max_residual:.3e}')
    return report


@dataclass(repr=False)
class CircleTrace:
    """Values of a disc map on equally spaced nodes of the circle ``|z - center| = radius``."""

    center: complex
    radius: float
    values: np.ndarray

    @property
    def nodes(self) -> int:
        return self.values.shape[0]

    def __repr__(self) -> str:
        return f'<CircleTrace center={self.center} radius={self.radius} nodes={self.nodes}>'


def circle_trace(f: Any, center: complex = 0j, radius: float = 0.5, nodes: int = 1024) -> CircleTrace:
    """Samples ``f(center + radius e^{i theta_k})`` at ``theta_k = 2 pi k / nodes``."""

    if nodes < MIN_TRACE_NODES:
        raise ValueError(f'a trace needs at least {MIN_TRACE_NODES} nodes.')

    if abs(center) + radius >= 1:
        raise ValueError('the traced circle must lie inside the disc.')

    circle = center + radius * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    return CircleTrace(center=complex(center), radius=float(radius), values=disc_values(f, circle))


def rouche_membership(trace: Any, u0: Any) -> Any:
    """Counts the solutions of ``f(z) = u0`` inside a traced circle.

    Computes ``(1 / 2 pi i) oint f' / (f - u0) dz`` with the trapezoid rule, using
    the spectral derivative of the trace, and rounds it. ``u0`` may be an array,
    in which case an array of counts is returned.

    Raises
    ------
    :exc:`.CurveTooClose`
        ``u0`` is within 1e-9 of the traced curve.
    :exc:`.NonIntegerWinding`
        The integral is further than 0.2 from an integer.
    """

    values = trace.values if isinstance(trace, CircleTrace) else np.asarray(trace, dtype=complex).ravel()
    count = values.shape[0]

    if count < MIN_TRACE_NODES:
        raise ValueError(f'a trace needs at least {MIN_TRACE_NODES} nodes.')

    wavenumbers = np.fft.fftfreq(count, d=1.0 / count)
    if count % 2 == 0:
        wavenumbers[count // 2] = 0
    tangent = np.fft.ifft(1j * wavenumbers * np.fft.fft(values))

    targets = np.atleast_1d(np.asarray(u0, dtype=complex)).ravel()
    windings = np.empty(targets.shape[0], dtype=int)

    for start in range(0, targets.shape[0], 256):
        block = targets[start:start + 256]
        gaps = values[None, :] - block[:, None]

        closest = float(np.min(np.abs(gaps)))
        if closest < 1e-9:
            raise CurveTooClose(closest)

        integrals = np.mean(tangent[None, :] / gaps, axis=1) / 1j
        rounded = np.rint(integrals.real)
        drift = np.abs(integrals - rounded)

        if np.max(drift) > 0.2:
            raise NonIntegerWinding(complex(integrals[int(np.argmax(drift))]))

        windings[start:start + 256] = rounded.astype(int)

    if np.ndim(u0) == 0:
        return int(windings[0])
    return windings


def newton_inverse(
        f: Any,
        targets: Any,
        seeds: Any,
        *,
        max_iter: int = 100,
        tol: float = 1e-13,
        index: Optional[int] = None
) -> np.ndarray:
    """Solves ``f(z) = w`` on the disc by damped Newton iteration, one seed per target.

    Raises
    ------
    :exc:`.NewtonDivergence`
        Some target has no root after ``max_iter`` iterations.
    """

    w = np.atleast_1d(np.asarray(targets, dtype=complex)).ravel()
    z = np.broadcast_to(np.asarray(seeds, dtype=complex), w.shape).astype(complex)

    residual = disc_values(f, z) - w
    for _ in range(max_iter):
        done = np.abs(residual) <= tol * (1 + np.abs(w))
        if np.all(done):
            return z

        step = np.where(done, 0, residual / disc_derivatives(f, z))
        damping = np.ones_like(z.real)

        for _ in range(30):
            candidate = z - damping * step
            # leaving the disc counts as no progress
            inside = np.abs(candidate) < 1
            trial = np.where(inside, candidate, 0)
            new_residual = np.where(inside, disc_values(f, trial) - w, np.inf)

            worse = ~done & (np.abs(new_residual) >= np.abs(residual)) & (damping > 2.0 ** -20)
            if not np.any(worse):
                break
            damping = np.where(worse, damping / 2, damping)

        # a step that never lowered the residual is rejected
        improved = ~done & (np.abs(new_residual) < np.abs(residual))
        z = np.where(improved, candidate, z)
        residual = np.where(improved, new_residual, residual)

        if not np.any(improved):
            break
        if np.all(done | (np.abs(damping * step) <= 1e-16 * (1 + np.abs(z)))):
            break

    failed = np.abs(residual) > 1e-10 * (1 + np.abs(w))
    if np.any(failed):
        worst = int(np.argmax(np.where(failed, np.abs(residual), -1)))
        raise NewtonDivergence(complex(w[worst]), index, float(np.abs(residual[worst])))

    return z


@dataclass(repr=False)
class InverseConvergenceReport(Report):
    """``sup_K |f_k^{-1}(w) - f^{-1}(w)|`` along a sequence of disc maps."""

    labels: List[Any] = field(default_factory=list)
    errors: List[float] = field(default_factory=list)
    decayed: bool = False

    @property
    def verdict(self) -> Verdict:
        return Verdict.PASS if self.decayed else Verdict.FAIL


def check_inverse_convergence(
        f_seq: Sequence[Any],
        f_limit: Any,
        K: Any,
        *,
        labels: Optional[Sequence[Any]] = None,
        max_iter: int = 100
) -> InverseConvergenceReport:
    """Tracks the convergence of inverses ``f_k^{-1} -> f^{-1}`` on a compact sample ``K`` of ``f(D)``.

    Each ``f_k^{-1}(w)`` is found by damped Newton seeded at ``f^{-1}(w)``,
    which is itself found by Newton seeded at ``0``. The sequence has decayed
    when its last error is below a tenth of its first (or both vanish).
    """

    targets = np.asarray(K, dtype=complex).ravel()
    limit = newton_inverse(f_limit, targets, np.zeros_like(targets), max_iter=max_iter)

    report = InverseConvergenceReport(labels=list(labels) if labels is not None else list(range(1, len(f_seq) + 1)))
    for label, f in zip(report.labels, f_seq):
        inverse = newton_inverse(f, targets, limit, max_iter=max_iter, index=label)
        report.errors.append(float(np.max(np.abs(inverse - limit))))

    first, last = report.errors[0], report.errors[-1]
    report.decayed = (first == 0 and last == 0) or last < first / 10

    __log__.info(f'CHAIN | inverse convergence errors {report.errors[0]:.3e} -> {report.errors[-1]:.3e}')
    return report


@dataclass(repr=False)
class MonotonicityReport(Report):
    """Rouche certificates of ``f_s(z) in f_t(D_r)`` for ``s <= t``."""

    radius: float
    certified: int = 0
    failures: List[Tuple[Any, float, float]] = field(default_factory=list)

    @property
    def verdict(self) -> Verdict:
        return Verdict.FAIL if self.failures else Verdict.PASS


def check_image_monotonicity(
        chain: LoewnerChain,
        pairs: Sequence[Tuple[float, float]],
        probes: Any,
        *,
        radius: float = 0.99,
        nodes: int = 2048
) -> MonotonicityReport:
    """Certifies ``f_s(D) subset f_t(D)`` on probes by winding numbers of traces of ``f_t``.

    Only available for chains on the disc.
    """

    if chain.dimension != 1:
        raise ValueError('image monotonicity is only checked on the disc.')

    probes = np.asarray(probes, dtype=complex).ravel()
    if np.any(np.abs(probes) >= radius):
        raise ValueError('probes must lie inside the traced circle.')

    report = MonotonicityReport(radius=radius)
    for s, t in pairs:
        if not 0 <= s <= t:
            raise ValueError(f'expected 0 <= s <= t, got {(s, t)!r}')

        trace = circle_trace(chain.at(t), 0j, radius, nodes)
        values, _ = chain.evaluate_many(s, probes[:, None])
        windings = rouche_membership(trace, values[:, 0])

        for z, winding in zip(probes, windings):
            if winding >= 1:
                report.certified += 1
            else:
                report.failures.append((z, float(s), float(t)))

    return report


@dataclass(repr=False)
class DensityReport(Report):
    """Empirical density ``sup_K d(f_s(z), f_t(z)) / (t - s)`` of a chain on a time grid."""

    cells: List[Dict[str, float]] = field(default_factory=list)
    linf: float = 0.0


def chain_density(chain: LoewnerChain, K: Any, s_grid: Sequence[float]) -> DensityReport:
    """Tabulates the order-``d`` chain bound ``d(f_s(z), f_t(z)) <= int_s^t k(xi) d xi`` on grid cells."""

    grid = sorted(float(s) for s in s_grid)
    if len(grid) < 2:
        raise ValueError('time grid needs at least two times.')

    points = np.asarray(K, dtype=complex).reshape(-1, chain.dimension)
    images = [chain.evaluate_many(s, points)[0] for s in grid]

    report = DensityReport()
    for (s, first), (t, second) in zip(zip(grid, images), zip(grid[1:], images[1:])):
        density = float(np.max(domain_distance(chain.domain, first, second))) / (t - s)
        report.cells.append({'s': s, 't': t, 'density': density})

    report.linf = max(cell['density'] for cell in report.cells)
    return report
