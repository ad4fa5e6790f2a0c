"""Spiral-shapedness and star-shapedness certificates for locally univalent maps of the ball."""

from __future__ import annotations

import logging

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from scipy import linalg
from scipy.spatial import KDTree

from .chains import circle_trace, rouche_membership
from .enums import Verdict
from .errors import ChainError, NonPositiveOperator, PointOutsideDomain, SingularJacobian
from .fields import LinearOperator, min_real_quadratic
from .geometry import DomainSpec, concentric_samples
from .maps import CallbackMap, HolomorphicMap, disc_values
from .reports import Report, encode, write_csv


__all__: tuple = (
    'MapUnderTest',
    'ShapeReport',
    'ChainResidualReport',
    'OracleReport',
    'InjectivityReport',
    'DEFAULT_RADII',
    'shape_probes',
    'spiral_criterion',
    'star_criterion',
    'spiral_chain_residual',
    'image_membership_oracle',
    'injectivity_spot_check',
    'dump_margins',
)

__log__: logging.Logger = logging.getLogger('loewner.shapes')

DEFAULT_RADII: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99)

DET_FLOOR: float = 1e-12


class MapUnderTest(object):
    """A holomorphic map ``f: B^n -> C^n`` paired with the operator ``A`` of the spiral criterion.

    Parameters
    ----------
    f: :class:`.HolomorphicMap`
        The map. A plain callable is wrapped as a one dimensional map.
    A
        The operator; a scalar means a multiple of the identity. Defaults to the identity.
    name: Optional[str]
        A label used in reports.
    """

    __slots__: tuple = ('_map', '_operator', '_name')

    def __init__(self, f: Any, A: Any = None, name: Optional[str] = None) -> None:
        self._map: HolomorphicMap = f if isinstance(f, HolomorphicMap) else CallbackMap(f, 1)

        n = self._map.dimension
        if A is None:
            operator = LinearOperator.identity(n)
        elif isinstance(A, LinearOperator):
            operator = A
        elif np.ndim(A) == 0:
            operator = LinearOperator.scalar(complex(A), n)
        else:
            operator = LinearOperator(A)

        if operator.dimension != n:
            raise ValueError('operator dimension does not match the map.')

        self._operator: LinearOperator = operator
        self._name: str = name or self._map.__class__.__name__

    def __repr__(self) -> str:
        return f'<MapUnderTest name={self._name!r} dimension={self.dimension}>'

    @property
    def f(self) -> HolomorphicMap:
        return self._map

    @property
    def A(self) -> LinearOperator:
        return self._operator

    @property
    def name(self) -> str:
        return self._name

    @property
    def dimension(self) -> int:
        return self._map.dimension

    def to_raw(self) -> Dict[str, Any]:
        return {'name': self._name, 'map': self._map.to_raw(), 'A': self._operator.to_raw()}


def shape_probes(
        dimension: int,
        radii: Sequence[float] = DEFAULT_RADII,
        per_sphere: int = 1000,
        *,
        seed: int = 0
) -> np.ndarray:
    """Probe points on concentric spheres, ``per_sphere`` low discrepancy directions per radius."""
    return concentric_samples(dimension, radii, per_sphere, seed=seed)


@dataclass(repr=False)
class ShapeReport(Report):
    """The margins ``Re <(df_z)^{-1} A f(z), z> - (1 - |z|^2) Re <(df_0)^{-1} A f(0), z>`` over probes.

    ``MARGINAL`` means the smallest margin lies in ``[-tol, 0)``.
    """

    name: str
    verdict: Verdict
    min_margin: float
    witness_point: np.ndarray
    probes_used: int
    thresholds: Dict[str, float]
    m_A: float
    margins_by_radius: Dict[str, float] = field(default_factory=dict)
    min_image_norm: float = 0.0
    origin_warning: bool = False

    def __repr__(self) -> str:
        return f'<ShapeReport name={self.name!r} verdict={self.verdict.value} min_margin={self.min_margin:.3e}>'


def _check_probes(probes: np.ndarray, dimension: int) -> np.ndarray:
    probes = np.asarray(probes, dtype=complex).reshape(-1, dimension)
    norms = np.linalg.norm(probes, axis=1)

    if np.any(norms >= 1):
        raise PointOutsideDomain(probes[int(np.argmax(norms))], DomainSpec.for_dimension(dimension))

    return probes


def _solve_operator(mut: MapUnderTest, points: np.ndarray) -> np.ndarray:
    # (df_z)^{-1} A f(z) for every point
    values = mut.f.evaluate_many(points)
    jacobians = mut.f.jacobian_many(points)

    determinants = np.linalg.det(jacobians)
    singular = np.abs(determinants) < DET_FLOOR
    if np.any(singular):
        index = int(np.argmax(singular))
        raise SingularJacobian(points[index], complex(determinants[index]))

    return np.linalg.solve(jacobians, mut.A.apply_many(values)[..., None])[..., 0]


def spiral_criterion(
        mut: MapUnderTest,
        probes: Optional[Any] = None,
        *,
        tol: float = 1e-9,
        warn_distance: float = 0.05
) -> ShapeReport:
    """Evaluates the spiral-shapedness inequality of ``f`` with respect to ``A`` on probes.

    ``Re <(df_z)^{-1} A f(z), z> >= (1 - |z|^2) Re <(df_0)^{-1} A f(0), z>``.

    The verdict is ``PASS`` when every margin is nonnegative, ``MARGINAL`` when
    the smallest lies in ``[-tol, 0)`` and ``FAIL`` otherwise. The hypothesis
    ``0 in closure(f(B^n))`` is screened by the smallest ``|f|`` over the
    probes and the origin; above ``warn_distance`` a warning is logged.

    Raises
    ------
    :exc:`.NonPositiveOperator`
        ``m(A) <= 0``.
    :exc:`.SingularJacobian`
        ``|det df_z| < 1e-12`` at a probe or at the origin.
    """

    m = min_real_quadratic(mut.A.matrix)
    if m <= 0:
        raise NonPositiveOperator(m)

    n = mut.dimension
    probes = shape_probes(n) if probes is None else _check_probes(probes, n)

    solved = _solve_operator(mut, probes)
    at_origin = _solve_operator(mut, np.zeros((1, n), dtype=complex))[0]

    norms = np.linalg.norm(probes, axis=1)
    left = np.real(np.sum(solved * probes.conj(), axis=1))
    right = (1 - norms ** 2) * np.real(probes.conj() @ at_origin)
    margins = left - right

    worst = int(np.argmin(margins))
    min_margin = float(margins[worst])

    if min_margin >= 0:
        verdict = Verdict.PASS
    elif min_margin >= -tol:
        verdict = Verdict.MARGINAL
    else:
        verdict = Verdict.FAIL

    by_radius: Dict[str, float] = {}
    for radius in np.unique(np.round(norms, 9)):
        by_radius[repr(float(radius))] = float(np.min(margins[np.round(norms, 9) == radius]))

    screened = np.concatenate([np.zeros((1, n), dtype=complex), probes])
    image_norm = float(np.min(np.linalg.norm(mut.f.evaluate_many(screened), axis=1)))
    warned = image_norm > warn_distance
    if warned:
        __log__.warning(f'SHAPES | min |f| over probes is {image_norm:.3e}; 0 may not lie in the closure of the image')

    report = ShapeReport(
        name=mut.name,
        verdict=verdict,
        min_margin=min_margin,
        witness_point=probes[worst],
        probes_used=probes.shape[0],
        thresholds={'tol': tol, 'det_floor': DET_FLOOR, 'warn_distance': warn_distance},
        m_A=m,
        margins_by_radius=by_radius,
        min_image_norm=image_norm,
        origin_warning=warned,
    )

    __log__.info(f'SHAPES | {mut.name}: {verdict.value} with min margin {min_margin:.3e} on {probes.shape[0]} probes')
    return report


def star_criterion(f: Any, probes: Optional[Any] = None, **options: Any) -> ShapeReport:
    """The spiral criterion with ``A = I``: star-shapedness with respect to the origin."""

    mut = f if isinstance(f, MapUnderTest) else MapUnderTest(f)
    return spiral_criterion(MapUnderTest(mut.f, None, mut.name), probes, **options)


def dump_margins(path: str, report: ShapeReport) -> None:
    """Writes the smallest margin per probe radius as CSV."""
    write_csv(path, ['radius', 'min_margin'], [[float(r), m] for r, m in report.margins_by_radius.items()])


@dataclass(repr=False)
class ChainResidualReport(Report):
    """Residuals of the spiral chain ``f_t = e^{tA} f`` and membership of ``e^{-hA} w`` in the image."""

    tolerance: float
    residuals: List[float] = field(default_factory=list)
    max_residual: float = 0.0
    membership: Optional[Dict[str, int]] = None
    membership_failures: List[Any] = field(default_factory=list)

    @property
    def verdict(self) -> Verdict:
        if self.max_residual > self.tolerance or self.membership_failures:
            return Verdict.FAIL
        return Verdict.PASS


def _disc_samples(count: int, radius: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    moduli = radius * np.sqrt(rng.uniform(size=count))
    return moduli * np.exp(2j * np.pi * rng.uniform(size=count))


def spiral_chain_residual(
        mut: MapUnderTest,
        t_grid: Sequence[float],
        probes: Optional[Any] = None,
        *,
        h_values: Sequence[float] = (0.1, 0.5, 1.0),
        membership_probes: int = 50,
        sample_radius: float = 0.9,
        radius: float = 0.99,
        nodes: int = 4096,
        tol: float = 1e-8,
        seed: int = 0
) -> ChainResidualReport:
    """Verifies that ``f_t = e^{tA} f`` solves ``df_t/dt = (df_t)(df)^{-1} A f``.

    The relative residual ``|A e^{tA} f - e^{tA} df (df)^{-1} A f| / (1 + |A e^{tA} f|)``
    is a cross-check of the map's Jacobian evaluator. For disc maps, each
    ``e^{-hA} w`` with ``w = f(z)``, ``|z| <= sample_radius``, is also
    certified to lie in ``f(D_radius)`` by its winding number.
    """

    n = mut.dimension
    probes = shape_probes(n, per_sphere=100) if probes is None else _check_probes(probes, n)

    values = mut.f.evaluate_many(probes)
    jacobians = mut.f.jacobian_many(probes)
    solved = _solve_operator(mut, probes)
    back = np.einsum('mij,mj->mi', jacobians, solved)
    A = mut.A.matrix

    report = ChainResidualReport(tolerance=tol)
    for t in t_grid:
        flow = linalg.expm(t * A)
        velocity = values @ (A @ flow).T
        transported = back @ flow.T
        relative = np.linalg.norm(velocity - transported, axis=1) / (1 + np.linalg.norm(velocity, axis=1))
        report.residuals.append(float(np.max(relative)))

    report.max_residual = max(report.residuals, default=0.0)

    if n == 1:
        trace = circle_trace(mut.f, 0j, radius, nodes)
        images = disc_values(mut.f, _disc_samples(membership_probes, sample_radius, seed))
        report.membership = {}

        for h in h_values:
            targets = complex(linalg.expm(-h * A)[0, 0]) * images
            windings = rouche_membership(trace, targets)
            report.membership[repr(float(h))] = int(np.sum(windings >= 1))
            report.membership_failures.extend(
                {'h': float(h), 'w': w} for w, winding in zip(targets, windings) if winding < 1
            )

    __log__.info(f'SHAPES | spiral chain residual {report.max_residual:.3e} for {mut.name}')
    return report


@dataclass(repr=False)
class OracleReport(Report):
    """Brute-force image-membership check of ``lambda^A w in f(D)`` on a lambda grid."""

    tested: int = 0
    failures: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def verdict(self) -> Verdict:
        return Verdict.FAIL if self.failures else Verdict.PASS


def _windings(trace: Any, targets: np.ndarray) -> List[Optional[int]]:
    try:
        return [int(w) for w in rouche_membership(trace, targets)]
    except ChainError:
        pass

    # the batch touched the curve, so retry one target at a time
    counts: List[Optional[int]] = []
    for target in targets:
        try:
            counts.append(int(rouche_membership(trace, target)))
        except ChainError:
            counts.append(None)
    return counts


def image_membership_oracle(
        f: Any,
        A: complex = 1.0,
        *,
        lambdas: Optional[Sequence[float]] = None,
        points: int = 50,
        sample_radius: float = 0.9,
        radius: float = 0.99,
        nodes: int = 4096,
        seed: int = 0
) -> OracleReport:
    """Checks that ``lambda^A w`` has exactly one preimage in ``D_radius`` for image points ``w``.

    ``w = f(z)`` for random ``|z| <= sample_radius`` and ``lambda`` on a grid of
    ``(0, 1]`` (20 values by default). For ``A = 1`` this is the star-shapedness
    test ``lambda w in f(D)``; a count other than one also exposes maps that are
    not univalent.
    """

    grid = np.linspace(0.05, 1.0, 20) if lambdas is None else np.asarray(lambdas, dtype=float)
    if np.any(grid <= 0) or np.any(grid > 1):
        raise ValueError('lambda grid must lie in (0, 1].')

    trace = circle_trace(f, 0j, radius, nodes)
    images = disc_values(f, _disc_samples(points, sample_radius, seed))

    report = OracleReport()
    for lam in grid:
        targets = np.exp(complex(A) * np.log(lam)) * images
        for w, count in zip(targets, _windings(trace, targets)):
            report.tested += 1
            if count != 1:
                report.failures.append({'lambda': float(lam), 'w': w, 'count': count})

    return report


@dataclass(repr=False)
class InjectivityReport(Report):
    """Collisions among probe images and winding counts around them."""

    collision_tol: float
    pairs_within_tol: int = 0
    min_separation: float = 0.0
    windings_checked: int = 0
    winding_failures: List[Any] = field(default_factory=list)

    @property
    def verdict(self) -> Verdict:
        return Verdict.FAIL if self.pairs_within_tol or self.winding_failures else Verdict.PASS


def injectivity_spot_check(
        f: Any,
        probes: Any,
        *,
        collision_tol: float = 1e-9,
        winding_probes: int = 200,
        radius: float = 0.99,
        nodes: int = 4096
) -> InjectivityReport:
    """Spot-checks univalence of ``f``; this cannot decide global univalence.

    Distinct probes whose images lie within ``collision_tol`` are counted. For
    disc maps the winding of ``f(|z| = radius)`` around ``f(z)`` must be one for
    the first ``winding_probes`` probes inside the traced circle.
    """

    f = f.f if isinstance(f, MapUnderTest) else f
    f = f if isinstance(f, HolomorphicMap) else CallbackMap(f, 1)

    probes = np.unique(_check_probes(probes, f.dimension), axis=0)
    images = f.evaluate_many(probes)
    real = np.concatenate([images.real, images.imag], axis=1)

    tree = KDTree(real)
    report = InjectivityReport(collision_tol=collision_tol)
    report.pairs_within_tol = len(tree.query_pairs(collision_tol))

    if probes.shape[0] > 1:
        distances, _ = tree.query(real, k=2)
        report.min_separation = float(np.min(distances[:, 1]))

    if f.dimension == 1:
        inside = probes[np.abs(probes[:, 0]) < radius][:winding_probes, 0]
        trace = circle_trace(f, 0j, radius, nodes)
        counts = _windings(trace, disc_values(f, inside))

        report.windings_checked = len(counts)
        report.winding_failures = [encode(z) for z, count in zip(inside, counts) if count != 1]

    return report
