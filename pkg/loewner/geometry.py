"""Domains, their Kobayashi metrics and distances, and ball automorphisms."""

from __future__ import annotations

import logging

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from scipy.stats import norm, qmc

from .enums import DomainKind, Verdict
from .errors import PointOutsideDomain, SpecValidationError
from .reports import Report, decode_vector, encode


__all__: tuple = (
    'ComplexVector',
    'DEFAULT_BOUNDARY_MARGIN',
    'as_vector',
    'DomainSpec',
    'MobiusParams',
    'ConsistencyReport',
    'hermitian',
    'kobayashi_metric',
    'kobayashi_distance',
    'kobayashi_metric_tensor',
    'polydisc_switching_gap',
    'mobius_map',
    'metric_distance_consistency',
    'numerical_jacobian',
    'random_points',
    'sphere_points',
    'concentric_samples',
)

__log__: logging.Logger = logging.getLogger('loewner.geometry')

ComplexVector = np.ndarray

DEFAULT_BOUNDARY_MARGIN: float = 1e-9


def as_vector(values: Any, dimension: Optional[int] = None) -> ComplexVector:
    """Builds a finite complex vector from a scalar or a sequence.

    Raises
    ------
    ValueError
        The entries are not finite or the length does not match ``dimension``.
    """

    vector = np.atleast_1d(np.asarray(values, dtype=complex)).ravel()

    if not np.all(np.isfinite(vector)):
        raise ValueError(f'vector entries must be finite, got {vector!r}')

    if dimension is not None and vector.shape[0] != dimension:
        raise ValueError(f'expected a vector of dimension {dimension}, got {vector.shape[0]}')

    return vector


def hermitian(z: ComplexVector, w: ComplexVector) -> complex:
    """The hermitian product ``<z, w> = sum z_j conj(w_j)``."""
    return complex(np.vdot(w, z))


class DomainSpec:
    """Represents one of the model domains: the disc, the ball, the polydisc or C^n.

    Parameters
    ----------
    kind: :class:`.DomainKind`
        The kind of domain.
    dimension: int
        The complex dimension. Must be 1 for the unit disc.
    """

    __slots__: tuple = ('_kind', '_dimension')

    def __init__(self, kind: DomainKind, dimension: int = 1) -> None:
        kind = DomainKind(kind)
        dimension = int(dimension)

        if dimension < 1:
            raise ValueError('dimension must be at least 1.')

        if kind is DomainKind.UNIT_DISC and dimension != 1:
            raise ValueError('the unit disc has dimension 1.')

        self._kind: DomainKind = kind
        self._dimension: int = dimension

    @classmethod
    def disc(cls) -> DomainSpec:
        return cls(DomainKind.UNIT_DISC, 1)

    @classmethod
    def ball(cls, dimension: int) -> DomainSpec:
        return cls(DomainKind.UNIT_BALL, dimension)

    @classmethod
    def polydisc(cls, dimension: int) -> DomainSpec:
        return cls(DomainKind.POLYDISC, dimension)

    @classmethod
    def full_space(cls, dimension: int) -> DomainSpec:
        return cls(DomainKind.FULL_SPACE, dimension)

    @classmethod
    def for_dimension(cls, dimension: int) -> DomainSpec:
        """The disc in dimension 1, otherwise the unit ball."""
        return cls.disc() if dimension == 1 else cls.ball(dimension)

    def __repr__(self) -> str:
        return f'<DomainSpec kind={self._kind.value!r} dimension={self._dimension}>'

    def __eq__(self, other: Any) -> bool:
        return isinstance(other, DomainSpec) and (self._kind, self._dimension) == (other._kind, other._dimension)

    def __hash__(self) -> int:
        return hash((self._kind, self._dimension))

    @property
    def kind(self) -> DomainKind:
        """:class:`.DomainKind`: The kind of this domain."""
        return self._kind

    @property
    def dimension(self) -> int:
        """int: The complex dimension of this domain."""
        return self._dimension

    @property
    def hyperbolic(self) -> bool:
        """bool: Whether the Kobayashi distance of this domain is a genuine distance."""
        return self._kind is not DomainKind.FULL_SPACE

    @property
    def is_disc_like(self) -> bool:
        """bool: Whether this is the unit disc, or the unit ball of dimension 1."""
        return self._dimension == 1 and self._kind in (DomainKind.UNIT_DISC, DomainKind.UNIT_BALL)

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        """Euclidean distance to the boundary for a batch of points of shape ``(m, n)``.

        Returns ``inf`` for C^n.
        """

        points = np.asarray(points, dtype=complex).reshape(-1, self._dimension)

        if self._kind is DomainKind.FULL_SPACE:
            return np.full(points.shape[0], np.inf)

        if self._kind is DomainKind.POLYDISC:
            return 1.0 - np.max(np.abs(points), axis=1)

        return 1.0 - np.linalg.norm(points, axis=1)

    def contains(self, z: Any, margin: float = DEFAULT_BOUNDARY_MARGIN) -> bool:
        z = as_vector(z, self._dimension)
        return bool(self.boundary_distance(z)[0] > margin)

    def check_interior(self, z: Any, margin: float = DEFAULT_BOUNDARY_MARGIN) -> ComplexVector:
        """Returns ``z`` as a vector, raising if it is not interior with the given margin.

        Raises
        ------
        :exc:`.PointOutsideDomain`
            The point is within ``margin`` of the boundary, or outside.
        """

        z = as_vector(z, self._dimension)
        if self.boundary_distance(z)[0] <= margin:
            raise PointOutsideDomain(z, self)
        return z

    @classmethod
    def from_raw(cls, data: Any, path: str = 'domain') -> DomainSpec:
        if not isinstance(data, dict):
            raise SpecValidationError(path, 'expected an object with "kind" and "dimension"')

        try:
            kind = DomainKind(data.get('kind'))
        except ValueError:
            choices = ', '.join(repr(kind.value) for kind in DomainKind)
            raise SpecValidationError(f'{path}.kind', f'expected one of {choices}') from None

        dimension = data.get('dimension', 1)
        if not isinstance(dimension, int) or isinstance(dimension, bool) or dimension < 1:
            raise SpecValidationError(f'{path}.dimension', 'expected a positive integer')

        if kind is DomainKind.UNIT_DISC and dimension != 1:
            raise SpecValidationError(f'{path}.dimension', 'the unit disc has dimension 1')

        return cls(kind, dimension)

    def to_raw(self) -> Dict[str, Any]:
        return {'kind': self._kind.value, 'dimension': self._dimension}


class MobiusParams:
    """The data of the ball automorphism ``phi_a`` exchanging ``0`` and ``a``.

    ``phi_a(z) = (a - P_a(z) - s_a Q_a(z)) / (1 - <z, a>)`` where ``P_a`` is
    the orthogonal projection onto ``C a`` (``P_0 = 0``), ``Q_a = id - P_a``
    and ``s_a = sqrt(1 - |a|^2)``.

    Parameters
    ----------
    a: ComplexVector
        A point of the unit ball.
    """

    __slots__: tuple = ('_a', '_s_a', '_linear')

    def __init__(self, a: Any) -> None:
        a = as_vector(a)
        norm_a = float(np.linalg.norm(a))

        if norm_a >= 1:
            raise ValueError(f'Moebius parameter must lie in the unit ball, got |a| = {norm_a!r}')

        self._a: ComplexVector = a
        self._s_a: float = float(np.sqrt(1.0 - norm_a ** 2))

        n = a.shape[0]
        if norm_a == 0:
            projection = np.zeros((n, n), dtype=complex)
        else:
            unit = a / norm_a
            projection = np.outer(unit, unit.conj())

        # P_a + s_a Q_a
        self._linear: np.ndarray = projection + self._s_a * (np.eye(n) - projection)

    def __repr__(self) -> str:
        return f'<MobiusParams a={self._a!r}>'

    @property
    def a(self) -> ComplexVector:
        return self._a

    @property
    def s_a(self) -> float:
        return self._s_a

    @property
    def dimension(self) -> int:
        return self._a.shape[0]

    def __call__(self, z: Any) -> ComplexVector:
        return mobius_map(self, z)

    def apply_many(self, points: np.ndarray) -> np.ndarray:
        """Applies ``phi_a`` to a batch of points of shape ``(m, n)`` without domain checks."""

        points = np.asarray(points, dtype=complex).reshape(-1, self.dimension)
        numerator = self._a[None, :] - points @ self._linear.T
        denominator = 1.0 - points @ self._a.conj()
        return numerator / denominator[:, None]

    def differential(self, z: Any) -> np.ndarray:
        """The complex Jacobian of ``phi_a`` at ``z``."""

        z = as_vector(z, self.dimension)
        denominator = 1.0 - hermitian(z, self._a)
        numerator = self._a - self._linear @ z
        return -self._linear / denominator + np.outer(numerator, self._a.conj()) / denominator ** 2

    def involution_residual(self, points: np.ndarray) -> float:
        """Largest ``|phi_a(phi_a(z)) - z|`` over a batch of points."""

        points = np.asarray(points, dtype=complex).reshape(-1, self.dimension)
        back = self.apply_many(self.apply_many(points))
        return float(np.max(np.linalg.norm(back - points, axis=1)))

    def to_raw(self) -> Dict[str, Any]:
        return {'a': encode(self._a)}

    @classmethod
    def from_raw(cls, data: Any, path: str = 'a') -> MobiusParams:
        a = decode_vector(data, path)
        if np.linalg.norm(a) >= 1:
            raise SpecValidationError(path, 'Moebius parameter must satisfy |a| < 1')
        return cls(a)


def _check(domain: DomainSpec, z: Any, margin: float) -> ComplexVector:
    if domain.kind is DomainKind.FULL_SPACE:
        return as_vector(z, domain.dimension)
    return domain.check_interior(z, margin)


def kobayashi_metric(
        domain: DomainSpec,
        z: Any,
        v: Any,
        *,
        margin: float = DEFAULT_BOUNDARY_MARGIN
) -> float:
    """The infinitesimal Kobayashi metric ``kappa_M(z; v)``.

    Parameters
    ----------
    domain: :class:`DomainSpec`
        The domain M.
    z
        An interior point.
    v
        A tangent vector at ``z``.

    Raises
    ------
    :exc:`.PointOutsideDomain`
        ``z`` is not interior.
    """

    z = _check(domain, z, margin)
    v = as_vector(v, domain.dimension)

    if domain.kind is DomainKind.FULL_SPACE:
        return 0.0

    if domain.kind is DomainKind.POLYDISC:
        return float(np.max(np.abs(v) / (1.0 - np.abs(z) ** 2)))

    # the disc is the one dimensional ball
    defect = 1.0 - float(np.vdot(z, z).real)
    quadratic = defect * float(np.vdot(v, v).real) + abs(hermitian(v, z)) ** 2
    return float(np.sqrt(quadratic) / defect)


def kobayashi_metric_tensor(domain: DomainSpec, z: Any) -> np.ndarray:
    """The hermitian matrix ``H`` with ``kappa(z; v)^2 = v^* H v`` on the disc and ball."""

    z = as_vector(z, domain.dimension)
    defect = 1.0 - float(np.vdot(z, z).real)
    return (defect * np.eye(domain.dimension) + np.outer(z, z.conj())) / defect ** 2


def kobayashi_distance(
        domain: DomainSpec,
        z: Any,
        w: Any,
        *,
        margin: float = DEFAULT_BOUNDARY_MARGIN
) -> float:
    """The Kobayashi distance ``k_M(z, w)``.

    On the ball this is ``artanh |phi_z(w)|``; on the polydisc the maximum of
    the coordinate Poincare distances; on C^n it vanishes.
    """

    z = _check(domain, z, margin)
    w = _check(domain, w, margin)

    if domain.kind is DomainKind.FULL_SPACE:
        return 0.0

    if domain.kind is DomainKind.POLYDISC:
        return float(np.max(_disc_distances(z, w)))

    if domain.kind is DomainKind.UNIT_DISC:
        return float(_disc_distances(z, w)[0])

    pseudo = float(np.linalg.norm(mobius_map(MobiusParams(z), w, margin=margin)))
    return float(np.arctanh(min(pseudo, 1.0)))


def _disc_distances(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    pseudo = np.abs(z - w) / np.abs(1.0 - z.conj() * w)
    return np.arctanh(np.minimum(pseudo, 1.0))


def polydisc_switching_gap(z: Any, w: Any) -> float:
    """Gap between the two largest coordinate distances on the polydisc.

    The polydisc distance is not differentiable where the gap vanishes.
    """

    distances = np.sort(_disc_distances(as_vector(z), as_vector(w)))
    if distances.shape[0] < 2:
        return np.inf
    return float(distances[-1] - distances[-2])


def mobius_map(params: MobiusParams, z: Any, *, margin: float = DEFAULT_BOUNDARY_MARGIN) -> ComplexVector:
    """Evaluates the ball automorphism ``phi_a`` at ``z``.

    Raises
    ------
    :exc:`.PointOutsideDomain`
        ``z`` is not interior to the ball.
    """

    z = DomainSpec.for_dimension(params.dimension).check_interior(z, margin)
    return params.apply_many(z[None, :])[0]


@dataclass(repr=False)
class ConsistencyReport(Report):
    """Distance versus metric line integral along straight segments."""

    domain: DomainSpec
    nodes: int
    tolerance: float
    distances: List[float] = field(default_factory=list)
    integrals: List[float] = field(default_factory=list)
    max_violation: float = 0.0
    worst_pair: Optional[Tuple[Any, Any]] = None

    @property
    def verdict(self) -> Verdict:
        return Verdict.PASS if self.max_violation <= self.tolerance else Verdict.FAIL

    def to_raw(self) -> Dict[str, Any]:
        raw = super().to_raw()
        raw['verdict'] = self.verdict.value
        return raw


def metric_distance_consistency(
        domain: DomainSpec,
        samples: Sequence[Tuple[Any, Any]],
        *,
        nodes: int = 10_000,
        tolerance: float = 1e-6
) -> ConsistencyReport:
    """Checks ``k_M(z, w) <= int_0^1 kappa_M(z + tau (w - z); w - z) dtau`` on each pair.

    The integral is the trapezoid rule with ``nodes`` nodes. The report
    lists the largest amount by which a distance exceeds its integral.
    """

    report = ConsistencyReport(domain=domain, nodes=nodes, tolerance=tolerance)
    taus = np.linspace(0.0, 1.0, nodes)

    for z, w in samples:
        z = _check(domain, z, DEFAULT_BOUNDARY_MARGIN)
        w = _check(domain, w, DEFAULT_BOUNDARY_MARGIN)
        direction = w - z

        weights = np.array([kobayashi_metric(domain, z + tau * direction, direction) for tau in taus])
        integral = float(np.sum((weights[1:] + weights[:-1]) * np.diff(taus)) / 2.0)
        distance = kobayashi_distance(domain, z, w)

        report.distances.append(distance)
        report.integrals.append(integral)

        violation = max(distance - integral, 0.0)
        if report.worst_pair is None or violation > report.max_violation:
            report.max_violation = violation
            report.worst_pair = (z, w)

    __log__.debug(f'GEOMETRY | metric/distance consistency on {len(report.distances)} pairs: '
                  f'max violation {report.max_violation:.3e}')
    return report


def numerical_jacobian(
        func: Callable[[ComplexVector], ComplexVector],
        z: Any,
        h: float = 1e-6
) -> np.ndarray:
    """Complex Jacobian of a holomorphic map by central differences along each coordinate."""

    z = as_vector(z)
    columns = []
    for j in range(z.shape[0]):
        step = np.zeros_like(z)
        step[j] = h
        columns.append((as_vector(func(z + step)) - as_vector(func(z - step))) / (2 * h))
    return np.stack(columns, axis=1)


def random_points(
        dimension: int,
        count: int,
        rng: np.random.Generator,
        *,
        radius: float = 0.9,
        kind: DomainKind = DomainKind.UNIT_BALL
) -> np.ndarray:
    """Uniform random points of the ball (or polydisc) of the given radius, shape ``(count, dimension)``."""

    if kind is DomainKind.POLYDISC:
        moduli = radius * np.sqrt(rng.uniform(size=(count, dimension)))
        angles = rng.uniform(0.0, 2 * np.pi, size=(count, dimension))
        return moduli * np.exp(1j * angles)

    gaussian = rng.normal(size=(count, dimension)) + 1j * rng.normal(size=(count, dimension))
    directions = gaussian / np.linalg.norm(gaussian, axis=1)[:, None]
    moduli = radius * rng.uniform(size=count) ** (1.0 / (2 * dimension))
    return directions * moduli[:, None]


def sphere_points(dimension: int, count: int, *, seed: int = 0) -> np.ndarray:
    """Low discrepancy points on the unit sphere of C^n, shape ``(count, dimension)``.

    In dimension one these are equally spaced angles starting at ``1``.
    """

    if dimension == 1:
        return np.exp(2j * np.pi * np.arange(count) / count)[:, None]

    sampler = qmc.Halton(d=2 * dimension, scramble=True, seed=seed)
    uniform = np.clip(sampler.random(count), 1e-12, 1 - 1e-12)
    gaussian = norm.ppf(uniform)
    points = gaussian[:, :dimension] + 1j * gaussian[:, dimension:]
    return points / np.linalg.norm(points, axis=1)[:, None]


def concentric_samples(
        dimension: int,
        radii: Sequence[float],
        per_sphere: int,
        *,
        seed: int = 0
) -> np.ndarray:
    """Points on concentric spheres of the given radii, shape ``(len(radii) * per_sphere, dimension)``."""

    directions = sphere_points(dimension, per_sphere, seed=seed)
    return np.concatenate([radius * directions for radius in radii], axis=0)
