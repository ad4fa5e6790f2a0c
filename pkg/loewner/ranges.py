"""Limits ``beta^s_v(z)`` of the pushed-forward Kobayashi metric and Loewner range classification."""

from __future__ import annotations

import logging

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from scipy import linalg

from .enums import DomainKind, RangeClassification, Verdict
from .errors import Inconclusive
from .fields import BaseField
from .flow import IntegratorConfig, integrate_batch
from .geometry import DomainSpec, as_vector, kobayashi_metric, kobayashi_metric_tensor
from .reports import Report, encode, write_csv


__all__: tuple = (
    'BETA_INTEGRATOR',
    'BetaProbe',
    'CorankReport',
    'RangeReport',
    'beta_times',
    'compute_beta',
    'beta_zero_corank',
    'classify_range',
    'dump_probes',
)

__log__: logging.Logger = logging.getLogger('loewner.ranges')

_DISC_TABLE: Dict[int, RangeClassification] = {
    0: RangeClassification.DISC,
    1: RangeClassification.PLANE,
}

_BALL_TABLE: Dict[int, RangeClassification] = {
    0: RangeClassification.BALL_BIHOLOMORPHIC,
    1: RangeClassification.CYLINDER_BUNDLE,
}

# drift along isometric flows must stay below the monotonicity slack of the probes
BETA_INTEGRATOR: IntegratorConfig = IntegratorConfig(abs_tol=1e-12, rel_tol=1e-12)


@dataclass(repr=False)
class BetaProbe(Report):
    """The sequence ``kappa_M(phi_{s,t_k}(z); d(phi_{s,t_k})_z v)`` on a geometric time grid.

    By contraction of the Kobayashi metric the sequence is nonincreasing, so
    :attr:`beta_estimate` is an upper bound on the limit ``beta^s_v(z)``.
    """

    z: np.ndarray
    v: np.ndarray
    s: float
    times: List[float] = field(default_factory=list)
    values: List[float] = field(default_factory=list)
    beta_estimate: float = 0.0
    converged: bool = False
    slack: float = 1e-8

    @property
    def monotone(self) -> bool:
        """bool: Whether the values are nonincreasing up to :attr:`slack`."""
        return bool(np.all(np.diff(self.values) <= self.slack))

    def to_raw(self) -> Dict[str, Any]:
        return {
            'z': encode(self.z),
            'v': encode(self.v),
            's': self.s,
            'beta': self.beta_estimate,
            'converged': self.converged,
            'monotone': self.monotone,
        }

    def __repr__(self) -> str:
        return f'<BetaProbe s={self.s} beta={self.beta_estimate:.6g} converged={self.converged}>'


def beta_times(s: float, t_max: float, levels: int = 12) -> List[float]:
    """The geometric grid ``t_k = s + (t_max - s)(2^k - 1) / (2^K - 1)`` for ``k = 0..K``."""

    if levels < 2:
        raise ValueError('the time grid needs at least two levels.')

    k = np.arange(levels + 1)
    times = [float(t) for t in s + (t_max - s) * (2.0 ** k - 1) / (2.0 ** levels - 1)]
    times[0], times[-1] = float(s), float(t_max)
    return times


def _integrate_samples(
        spec: BaseField,
        points: np.ndarray,
        s: float,
        t_max: float,
        cfg: Optional[IntegratorConfig],
        levels: int
) -> Tuple[List[float], Dict[float, Tuple[np.ndarray, np.ndarray]]]:
    if not t_max > s:
        raise ValueError('t_max must exceed the initial time.')

    times = beta_times(s, t_max, levels)
    batch = integrate_batch(spec, points, s, t_max, BETA_INTEGRATOR if cfg is None else cfg, checkpoints=times)
    return times, batch.samples


def _probe(
        domain: DomainSpec,
        index: int,
        z: np.ndarray,
        v: np.ndarray,
        s: float,
        times: List[float],
        samples: Dict[float, Tuple[np.ndarray, np.ndarray]],
        tol_beta: float,
        slack: float
) -> BetaProbe:
    values = []
    for t in times:
        images, jacobians = samples[t]
        values.append(kobayashi_metric(domain, images[index], jacobians[index] @ v, margin=0.0))

    last = values[-1]
    converged = abs(values[-1] - values[-2]) < tol_beta * (1 + last)
    probe = BetaProbe(
        z=z, v=v, s=float(s), times=list(times), values=values,
        beta_estimate=float(last), converged=bool(converged), slack=slack,
    )

    if not converged:
        __log__.warning(f'RANGE | beta probe at z={z!r}, v={v!r} did not converge by t={times[-1]:.6g}')
    if not probe.monotone:
        __log__.warning(f'RANGE | beta probe at z={z!r}, v={v!r} is not monotone; integration is too coarse')

    return probe


def compute_beta(
        spec: BaseField,
        z: Any,
        v: Any,
        s: float = 0.0,
        t_max: float = 40.0,
        cfg: Optional[IntegratorConfig] = None,
        *,
        levels: int = 12,
        tol_beta: float = 1e-4,
        slack: float = 1e-8
) -> BetaProbe:
    """Estimates ``beta^s_v(z) = lim_t kappa_M(phi_{s,t}(z); (d phi_{s,t})_z v)``.

    The flow and its Jacobian are integrated once, sampling the geometric grid
    of :func:`beta_times`. Without ``cfg`` the flow runs with
    :data:`BETA_INTEGRATOR`. The probe has converged when its last two values
    differ by less than ``tol_beta (1 + last)``; a probe that did not converge
    is still returned, with ``converged=False``.

    Raises
    ------
    :exc:`.TrajectoryEscaped`
        The trajectory of ``z`` reached the boundary margin.
    """

    z = spec.domain.check_interior(z) if spec.domain.hyperbolic else as_vector(z, spec.dimension)
    v = as_vector(v, spec.dimension)

    if not np.any(v):
        raise ValueError('direction must be nonzero.')

    times, samples = _integrate_samples(spec, z[None, :], s, t_max, cfg, levels)
    return _probe(spec.domain, 0, z, v, s, times, samples, tol_beta, slack)


@dataclass(repr=False)
class CorankReport(Report):
    """Dimension of ``{v : beta^s_v(z) = 0}`` with the probes it was decided on."""

    z: np.ndarray
    s: float
    corank: int
    zero_threshold: float
    t_max: float
    singular_values: List[float] = field(default_factory=list)
    basis_probes: List[BetaProbe] = field(default_factory=list)
    random_probes: List[BetaProbe] = field(default_factory=list)

    def __repr__(self) -> str:
        return f'<CorankReport z={self.z!r} s={self.s} corank={self.corank}>'


def _metric_factor(domain: DomainSpec, z: np.ndarray) -> np.ndarray:
    # kappa(z; w) vanishes exactly on the kernel of the returned matrix
    if domain.kind is DomainKind.POLYDISC:
        return np.diag(1.0 / (1.0 - np.abs(z) ** 2))

    lower = linalg.cholesky(kobayashi_metric_tensor(domain, z), lower=True)
    return lower.conj().T


def _orthonormal_basis(basis: Optional[Sequence[Any]], dimension: int) -> np.ndarray:
    if basis is None:
        return np.eye(dimension, dtype=complex)

    vectors = np.array([as_vector(v, dimension) for v in basis]).T
    q, r = np.linalg.qr(vectors)

    if vectors.shape[1] < dimension or np.min(np.abs(np.diag(r))) < 1e-12:
        raise ValueError('basis probes must span C^n.')

    return q.T


def _corank(
        spec: BaseField,
        index: int,
        z: np.ndarray,
        s: float,
        times: List[float],
        samples: Dict[float, Tuple[np.ndarray, np.ndarray]],
        basis: np.ndarray,
        rng: np.random.Generator,
        *,
        t_max: float,
        zero_threshold: float,
        tol_beta: float,
        slack: float
) -> CorankReport:
    domain = spec.domain
    n = spec.dimension

    basis_probes = [_probe(domain, index, z, v, s, times, samples, tol_beta, slack) for v in basis]
    stalled = [probe for probe in basis_probes if not probe.converged]
    if stalled:
        raise Inconclusive(f'{len(stalled)} basis probe(s) at z={z!r} did not converge by t={t_max:.6g}')

    images, jacobians = samples[times[-1]]
    _, singular, rows = linalg.svd(_metric_factor(domain, images[index]) @ jacobians[index])

    ties = singular[(singular > zero_threshold / 10) & (singular < zero_threshold * 10)]
    if ties.size:
        raise Inconclusive(f'singular value {ties[0]:.3e} at z={z!r} is within a decade of the zero threshold')

    zero_space = rows[singular < zero_threshold].conj().T
    corank = zero_space.shape[1]

    random_probes = []
    for _ in range(2 * n):
        u = rng.normal(size=n) + 1j * rng.normal(size=n)
        if corank:
            u = zero_space @ (zero_space.conj().T @ u)
        u = u / np.linalg.norm(u)
        random_probes.append(_probe(domain, index, z, u, s, times, samples, tol_beta, slack))

    if corank and any(probe.beta_estimate >= zero_threshold for probe in random_probes):
        raise Inconclusive(f'a perturbed direction at z={z!r} left the candidate zero subspace')

    return CorankReport(
        z=z,
        s=float(s),
        corank=corank,
        zero_threshold=zero_threshold,
        t_max=float(t_max),
        singular_values=[float(value) for value in singular],
        basis_probes=basis_probes,
        random_probes=random_probes,
    )


def _check_classifiable(domain: DomainSpec) -> None:
    if domain.kind is DomainKind.FULL_SPACE:
        raise Inconclusive('the Kobayashi metric of C^n vanishes identically.')


def beta_zero_corank(
        spec: BaseField,
        z: Any,
        s: float = 0.0,
        basis: Optional[Sequence[Any]] = None,
        *,
        t_max: float = 40.0,
        cfg: Optional[IntegratorConfig] = None,
        zero_threshold: float = 1e-3,
        tol_beta: float = 1e-4,
        levels: int = 12,
        seed: int = 0
) -> CorankReport:
    """Estimates ``dim {v : beta^s_v(z) = 0}``.

    Probes are taken along an orthonormal basis (the standard one by default)
    plus ``2n`` random unit vectors. The zero subspace comes from the singular
    values of the pushed-forward metric at ``t_max``; a candidate zero direction
    is only accepted when random vectors inside the candidate subspace also
    stay below ``zero_threshold``.

    Raises
    ------
    :exc:`.Inconclusive`
        A basis probe did not converge, a singular value sits within a decade
        of ``zero_threshold``, or a perturbed probe left the zero subspace.
    """

    _check_classifiable(spec.domain)

    z = spec.domain.check_interior(z) if spec.domain.hyperbolic else as_vector(z, spec.dimension)
    vectors = _orthonormal_basis(basis, spec.dimension)
    times, samples = _integrate_samples(spec, z[None, :], s, t_max, cfg, levels)

    return _corank(
        spec, 0, z, s, times, samples, vectors, np.random.default_rng(seed),
        t_max=t_max, zero_threshold=zero_threshold, tol_beta=tol_beta, slack=1e-8,
    )


@dataclass(repr=False)
class RangeReport(Report):
    """The biholomorphism class of a Loewner range with the probes behind it."""

    domain: DomainSpec
    classification: RangeClassification
    corank: Optional[int]
    thresholds: Dict[str, float]
    probes: List[BetaProbe] = field(default_factory=list)
    coranks: List[Dict[str, Any]] = field(default_factory=list)
    reason: Optional[str] = None

    @property
    def verdict(self) -> Verdict:
        if self.classification is RangeClassification.INCONCLUSIVE:
            return Verdict.FAIL
        return Verdict.PASS

    @property
    def monotone(self) -> bool:
        return all(probe.monotone for probe in self.probes)

    def to_raw(self) -> Dict[str, Any]:
        return {
            'domain': self.domain.to_raw(),
            'classification': self.classification.value,
            'corank': self.corank,
            'probes': [probe.to_raw() for probe in self.probes],
            'coranks': encode(self.coranks),
            'thresholds': encode(self.thresholds),
            'monotone': self.monotone,
            'reason': self.reason,
            'verdict': self.verdict.value,
        }

    def __repr__(self) -> str:
        return f'<RangeReport classification={self.classification.value!r} corank={self.corank}>'


def _default_base_points(domain: DomainSpec) -> np.ndarray:
    if domain.dimension == 1:
        return np.array([[0.0], [0.3], [-0.2 + 0.4j], [0.5j], [-0.6]], dtype=complex)

    n = domain.dimension
    points = np.zeros((3, n), dtype=complex)
    points[1, 0] = 0.3
    points[2, -1] = 0.4j
    return points


def classify_range(
        spec: BaseField,
        s_values: Sequence[float] = (0.0,),
        base_points: Optional[Any] = None,
        cfg: Optional[IntegratorConfig] = None,
        *,
        t_max: float = 40.0,
        zero_threshold: float = 1e-3,
        tol_beta: float = 1e-4,
        levels: int = 12,
        seed: int = 0
) -> RangeReport:
    """Classifies the Loewner range of the flow of ``spec``.

    On the disc, corank 0 means the range is the disc and corank 1 the plane;
    the corank must agree over every base point and initial time. On the ball,
    corank 0 gives a range biholomorphic to the ball and corank 1 a range
    biholomorphic to ``B^{n-1} x C``; larger coranks are reported inconclusive.
    Without ``cfg`` the flows run with :data:`BETA_INTEGRATOR`.

    Raises
    ------
    :exc:`.Inconclusive`
        The domain is neither the disc nor the ball.
    """

    domain = spec.domain
    if domain.kind not in (DomainKind.UNIT_DISC, DomainKind.UNIT_BALL):
        raise Inconclusive(f'range classification is only available on the disc and the ball, not {domain!r}')

    points = _default_base_points(domain) if base_points is None else np.asarray(base_points, dtype=complex)
    points = points.reshape(-1, spec.dimension)
    for z in points:
        domain.check_interior(z)

    thresholds = {'zero_threshold': zero_threshold, 'tol_beta': tol_beta, 't_max': t_max, 'levels': levels}
    report = RangeReport(
        domain=domain, classification=RangeClassification.INCONCLUSIVE, corank=None, thresholds=thresholds,
    )

    rng = np.random.default_rng(seed)
    basis = np.eye(spec.dimension, dtype=complex)

    for s in s_values:
        times, samples = _integrate_samples(spec, points, s, t_max, cfg, levels)

        for index, z in enumerate(points):
            try:
                corank = _corank(
                    spec, index, z, s, times, samples, basis, rng,
                    t_max=t_max, zero_threshold=zero_threshold, tol_beta=tol_beta, slack=1e-8,
                )
            except Inconclusive as exc:
                report.reason = exc.reason
                __log__.warning(f'RANGE | {exc.reason}')
                return report

            report.probes.extend(corank.basis_probes)
            report.coranks.append({'z': z, 's': float(s), 'corank': corank.corank})

    found = sorted({entry['corank'] for entry in report.coranks})
    if len(found) > 1:
        report.reason = f'corank varies over base points and times: {found}'
        __log__.warning(f'RANGE | {report.reason}')
        return report

    report.corank = found[0]
    table = _DISC_TABLE if domain.kind is DomainKind.UNIT_DISC else _BALL_TABLE

    if report.corank not in table:
        report.reason = f'corank {report.corank} >= 2; the range structure is not determined'
        return report

    report.classification = table[report.corank]
    __log__.info(f'RANGE | classified as {report.classification.value} (corank {report.corank})')
    return report


def dump_probes(path: str, probes: Sequence[BetaProbe]) -> None:
    """Writes the ``(t, kappa)`` curves of beta probes as CSV."""

    rows = [
        [i, t, value]
        for i, probe in enumerate(probes)
        for t, value in zip(probe.times, probe.values)
    ]
    write_csv(path, ['probe', 't', 'kappa'], rows)
