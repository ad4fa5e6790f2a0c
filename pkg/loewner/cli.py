"""The batch command line front-end.

Every analysis command reads a JSON document and writes a single JSON report::

    loewner flow --input radial.json --output report.json
    loewner validate --input radial.json

Field documents are field specifications with an optional ``"run"`` block of
command parameters; the ``shape`` and ``kernel`` commands read
``{"map": {...}, "A": ..., "run": {...}}`` instead.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import logging
import math
import time

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .chains import LoewnerChain, chain_density, check_association, check_inverse_convergence, check_lk_pde
from .enums import Command, DomainKind
from .errors import LoewnerException, SpecValidationError, TrajectoryEscaped
from .fields import (
    BaseField,
    LinearOperator,
    check_dissipativity,
    check_weak_bound,
    field_from_raw,
    holomorphy_residual,
)
from .flow import IntegratorConfig, dump_trajectory, integrate_batch, integrate_flow
from .geometry import random_points, sphere_points
from .maps import DiscMap, HolomorphicMap, ScaledMap, map_from_raw
from .operators import LiftedChain
from .ranges import BETA_INTEGRATOR, classify_range, dump_probes
from .reports import decode_complex, decode_vector, encode, write_csv, write_json
from .shapes import (
    DEFAULT_RADII,
    MapUnderTest,
    dump_margins,
    image_membership_oracle,
    injectivity_spot_check,
    shape_probes,
    spiral_criterion,
)


__all__: tuple = (
    'SCHEMA_VERSION',
    'RunManifest',
    'run',
    'validate_spec',
    'main',
)

__log__: logging.Logger = logging.getLogger('loewner.cli')

SCHEMA_VERSION: int = 1

EXIT_OK: int = 0
EXIT_FAIL: int = 2
EXIT_ERROR: int = 3
EXIT_INVALID: int = 4
EXIT_ESCAPED: int = 5

_CONFIG_KEYS: frozenset = frozenset(IntegratorConfig().to_raw())


@dataclass
class RunManifest:
    """One invocation of an analysis command."""

    command: Command
    input_path: str
    output_path: str
    overrides: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    t_max: Optional[float] = None
    step: Optional[float] = None
    tol: Optional[float] = None
    horizon: Optional[float] = None
    dump_csv: Optional[str] = None

    def __post_init__(self) -> None:
        self.command = Command(self.command)

        if not self.input_path or not self.output_path:
            raise ValueError('input and output paths must be nonempty.')

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> RunManifest:
        return cls(
            command=Command(args.command),
            input_path=args.input,
            output_path=args.output,
            overrides=dict(args.overrides or ()),
            seed=args.seed,
            t_max=args.t_max,
            step=args.step,
            tol=args.tol,
            horizon=args.horizon,
            dump_csv=args.dump_csv,
        )


class _Run(object):
    """Typed access to the ``run`` block; every value read is echoed in the report."""

    __slots__: tuple = ('_raw', 'effective')

    def __init__(self, raw: Any, overrides: Optional[Dict[str, Any]] = None) -> None:
        if raw is None:
            raw = {}
        elif not isinstance(raw, dict):
            raise SpecValidationError('run', 'expected an object')

        self._raw: Dict[str, Any] = {**raw, **(overrides or {})}
        self.effective: Dict[str, Any] = {}

    def get(self, key: str, default: Any = None) -> Any:
        return self._raw.get(key, default)

    def number(self, key: str, default: Optional[float] = None, *, positive: bool = False) -> float:
        value = self._raw.get(key, default)
        if value is None:
            raise SpecValidationError(f'run.{key}', 'missing value')

        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise SpecValidationError(f'run.{key}', 'expected a finite number')

        if positive and value <= 0:
            raise SpecValidationError(f'run.{key}', 'expected a positive number')

        self.effective[key] = float(value)
        return float(value)

    def integer(self, key: str, default: int, *, minimum: int = 1) -> int:
        value = self._raw.get(key, default)
        if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
            raise SpecValidationError(f'run.{key}', f'expected an integer >= {minimum}')

        self.effective[key] = value
        return value

    def numbers(self, key: str, default: Sequence[float]) -> List[float]:
        value = self._raw.get(key, list(default))
        if not isinstance(value, list) or not value or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in value
        ):
            raise SpecValidationError(f'run.{key}', 'expected a non-empty list of numbers')

        self.effective[key] = [float(v) for v in value]
        return self.effective[key]

    def vector(self, key: str, dimension: int) -> np.ndarray:
        if key not in self._raw:
            raise SpecValidationError(f'run.{key}', 'missing value')

        vector = _vector(self._raw[key], f'run.{key}', dimension)
        self.effective[key] = encode(vector)
        return vector

    def points(self, key: str, dimension: int, default: np.ndarray) -> np.ndarray:
        raw = self._raw.get(key)
        if raw is None:
            points = default
        elif not isinstance(raw, list) or not raw:
            raise SpecValidationError(f'run.{key}', 'expected a non-empty list of points')
        else:
            points = np.array([_vector(item, f'run.{key}[{i}]', dimension) for i, item in enumerate(raw)])

        self.effective[key] = encode(points)
        return points


def _vector(raw: Any, path: str, dimension: int) -> np.ndarray:
    if dimension == 1 and isinstance(raw, (int, float)) and not isinstance(raw, bool):
        raw = [raw]

    vector = decode_vector(raw, path)
    if vector.shape[0] != dimension:
        raise SpecValidationError(path, f'expected {dimension} entries')
    return vector


def _parse_override(text: str) -> Tuple[str, Any]:
    key, sep, value = text.partition('=')
    if not sep or not key:
        raise argparse.ArgumentTypeError(f'expected key=value, got {text!r}')

    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _integrator_config(run_block: _Run, manifest: RunManifest) -> IntegratorConfig:
    raw = run_block.get('config') or {}
    if not isinstance(raw, dict):
        raise SpecValidationError('run.config', 'expected an object')

    # range probes start from the tighter beta integrator
    base = BETA_INTEGRATOR.to_raw() if manifest.command is Command.RANGE else {}
    raw = {**base, **raw}
    raw.update({key: value for key, value in manifest.overrides.items() if key in _CONFIG_KEYS})

    if manifest.step is not None:
        raw['step_h'] = manifest.step
    if manifest.tol is not None:
        raw['abs_tol'] = raw['rel_tol'] = manifest.tol

    return IntegratorConfig.from_raw(raw, 'run.config')


def _sample_points(spec: BaseField, count: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    kind = DomainKind.POLYDISC if spec.domain.kind is DomainKind.POLYDISC else DomainKind.UNIT_BALL
    return random_points(spec.dimension, count, rng, radius=radius, kind=kind)


_Handler = Callable[[Dict[str, Any], _Run, IntegratorConfig, RunManifest], Tuple[Dict[str, Any], bool]]


def _run_flow(document: Dict[str, Any], run_block: _Run, cfg: IntegratorConfig, manifest: RunManifest):
    spec = field_from_raw(document)
    z = run_block.vector('z', spec.dimension)
    s = run_block.number('s', 0.0)
    t = run_block.number('t', manifest.t_max)

    result = integrate_flow(spec, z, s, t, cfg, record=manifest.dump_csv is not None)
    if manifest.dump_csv:
        dump_trajectory(manifest.dump_csv, result)

    return result.to_raw(), True


def _run_chain(document: Dict[str, Any], run_block: _Run, cfg: IntegratorConfig, manifest: RunManifest):
    spec = field_from_raw(document)
    rng = np.random.default_rng(manifest.seed)

    horizon = run_block.number('horizon', manifest.horizon, positive=True)
    points = run_block.points('points', spec.dimension, _sample_points(spec, 5, 0.5, rng))
    s_values = sorted(set(run_block.numbers('s_values', [0.0, horizon / 2, horizon])))
    tol = run_block.number('tol', 1e-7, positive=True)
    h_s = run_block.number('h_s', 1e-4, positive=True)

    default_pde = [s for s in (horizon / 4, horizon / 2, 3 * horizon / 4) if all(abs(s - b) >= h_s for b in spec.breakpoints)]
    pde_times = run_block.numbers('pde_times', default_pde) if default_pde or run_block.get('pde_times') else []
    tol_pde = run_block.number('tol_pde', 1e-5, positive=True)

    chain = LoewnerChain(spec, horizon, cfg)
    records = chain.records(s_values, points)
    association = check_association(chain, list(itertools.combinations(s_values, 2)), points, tol=tol)
    pde = check_lk_pde(chain, pde_times, points, h_s=h_s, tol=tol_pde) if pde_times else None
    density = chain_density(chain, points, s_values) if len(s_values) > 1 else None

    if manifest.dump_csv:
        n = spec.dimension
        header = ['s'] + [f're_z{j + 1}' for j in range(n)] + [f'im_z{j + 1}' for j in range(n)]
        header += [f're_f{j + 1}' for j in range(n)] + [f'im_f{j + 1}' for j in range(n)]
        rows = []
        for s in s_values:
            images, _ = chain.evaluate_many(s, points)
            rows.extend([s, *z.real, *z.imag, *f.real, *f.imag] for z, f in zip(points, images))
        write_csv(manifest.dump_csv, header, rows)

    results = {
        'records': records,
        'association': association.to_raw(),
        'pde': pde.to_raw() if pde is not None else None,
        'density': density.to_raw() if density is not None else None,
        'verdict': 'PASS' if association.passed and (pde is None or pde.passed) else 'FAIL',
    }
    return results, results['verdict'] == 'PASS'


def _run_range(document: Dict[str, Any], run_block: _Run, cfg: IntegratorConfig, manifest: RunManifest):
    spec = field_from_raw(document)

    base_points = None
    if run_block.get('base_points') is not None:
        base_points = run_block.points('base_points', spec.dimension, None)

    report = classify_range(
        spec,
        run_block.numbers('s_values', [0.0]),
        base_points,
        cfg,
        t_max=run_block.number('t_max', manifest.t_max if manifest.t_max is not None else 40.0, positive=True),
        zero_threshold=run_block.number('zero_threshold', 1e-3, positive=True),
        tol_beta=run_block.number('tol_beta', 1e-4, positive=True),
        levels=run_block.integer('levels', 12, minimum=2),
        seed=manifest.seed,
    )

    if manifest.dump_csv:
        dump_probes(manifest.dump_csv, report.probes)

    return report.to_raw(), report.passed


def _run_check_field(document: Dict[str, Any], run_block: _Run, cfg: IntegratorConfig, manifest: RunManifest):
    spec = field_from_raw(document)
    rng = np.random.default_rng(manifest.seed)

    horizon = run_block.number('T', manifest.horizon if manifest.horizon is not None else 1.0, positive=True)
    K = run_block.points('K', spec.dimension, _sample_points(spec, 20, 0.9, rng))
    weak = check_weak_bound(spec, K, horizon, time_nodes=run_block.integer('time_nodes', 101, minimum=2))

    results: Dict[str, Any] = {
        'weak_bound': weak.to_raw(),
        'holomorphy_residual': holomorphy_residual(spec, K),
        'dissipativity': None,
    }

    passed = weak.passed
    if spec.domain.hyperbolic:
        count = run_block.integer('pairs', 100)
        firsts = _sample_points(spec, count, 0.9, rng)
        seconds = _sample_points(spec, count, 0.9, rng)
        times = run_block.numbers('times', np.linspace(0.0, horizon, 10).tolist())

        dissipativity = check_dissipativity(
            spec, list(zip(firsts, seconds)), times, tol=run_block.number('tol', 1e-7, positive=True),
        )
        results['dissipativity'] = dissipativity.to_raw()
        passed = passed and dissipativity.passed

    results['verdict'] = 'PASS' if passed else 'FAIL'
    return results, passed


def _run_extend(document: Dict[str, Any], run_block: _Run, cfg: IntegratorConfig, manifest: RunManifest):
    spec = field_from_raw(document)
    if spec.domain.kind is not DomainKind.UNIT_DISC:
        raise SpecValidationError('domain.kind', 'the extend command lifts fields on the disc')

    rng = np.random.default_rng(manifest.seed)
    horizon = run_block.number('horizon', manifest.horizon, positive=True)
    dimension = run_block.integer('dimension', 2, minimum=2)

    anchor = run_block.get('sqrt_branch_anchor')
    if anchor is not None:
        anchor = decode_complex(anchor, 'run.sqrt_branch_anchor')

    lift = LiftedChain(LoewnerChain(spec, horizon, cfg), dimension, anchor)
    points = run_block.points('points', dimension, random_points(dimension, 5, rng, radius=0.7))
    times = sorted(set(run_block.numbers('times', [0.0, horizon / 2, horizon])))
    tol = run_block.number('tol', 1e-6, positive=True)

    chain_values = {repr(t): lift.evaluate_many(t, points) for t in times}

    association = 0.0
    consistency = 0.0
    evolutions = []
    for s, t in itertools.combinations(times, 2):
        images = lift.evolve_many(s, t, points)
        association = max(association, float(np.max(np.linalg.norm(
            chain_values[repr(s)] - lift.evaluate_many(t, images), axis=1,
        ))))

        flowed = integrate_batch(lift.lifted_field, points, s, t, cfg, jacobian=False).endpoints
        consistency = max(consistency, float(np.max(np.linalg.norm(flowed - images, axis=1))))
        evolutions.append({'s': s, 't': t, 'images': encode(images), 'max_norm': float(np.max(np.linalg.norm(images, axis=1)))})

    audit = lift.audit_arg_hypotheses(times)
    passed = association <= tol and consistency <= tol

    results = {
        'lift': lift.to_raw(),
        'chain_values': {key: encode(value) for key, value in chain_values.items()},
        'evolutions': evolutions,
        'association_residual': association,
        'field_flow_residual': consistency,
        'arg_audit': audit.to_raw(),
        'verdict': 'PASS' if passed else 'FAIL',
    }
    return results, passed


def _load_map(document: Dict[str, Any]) -> Tuple[HolomorphicMap, LinearOperator]:
    f = map_from_raw(document.get('map'), 'map')
    A = LinearOperator.from_raw(document.get('A', 1), 'A', f.dimension)
    return f, A


def _run_shape(document: Dict[str, Any], run_block: _Run, cfg: IntegratorConfig, manifest: RunManifest):
    f, A = _load_map(document)
    mut = MapUnderTest(f, A, run_block.get('name'))

    probes = shape_probes(
        f.dimension,
        run_block.numbers('radii', DEFAULT_RADII),
        run_block.integer('per_sphere', 1000),
        seed=manifest.seed,
    )
    report = spiral_criterion(mut, probes, tol=run_block.number('tol', 1e-9, positive=True))
    injectivity = injectivity_spot_check(f, probes)

    oracle = None
    if f.dimension == 1:
        oracle = image_membership_oracle(f, complex(A.matrix[0, 0]), seed=manifest.seed)

    if manifest.dump_csv:
        dump_margins(manifest.dump_csv, report)

    results = {
        'criterion': report.to_raw(),
        'verdict': report.verdict.value,
        'injectivity': injectivity.to_raw(),
        'oracle': oracle.to_raw() if oracle is not None else None,
    }
    return results, report.passed


def _run_kernel(document: Dict[str, Any], run_block: _Run, cfg: IntegratorConfig, manifest: RunManifest):
    f, _ = _load_map(document)
    if not isinstance(f, DiscMap) or f.dimension != 1:
        raise SpecValidationError('map.kind', 'the kernel audit needs a disc map')

    ks = [int(k) for k in run_block.numbers('ks', [10, 100, 1000])]
    if any(k < 2 for k in ks):
        raise SpecValidationError('run.ks', 'indices must be at least 2')

    radius = run_block.number('radius', 0.3, positive=True)
    count = run_block.integer('points', 64)
    ring = sphere_points(1, count)[:, 0]
    K = np.concatenate([r * ring for r in (radius / 3, 2 * radius / 3, radius)])

    report = check_inverse_convergence([ScaledMap(f, 1 - 1 / k) for k in ks], f, K, labels=ks)
    return report.to_raw(), report.passed


__handlers__: Dict[Command, _Handler] = {
    Command.FLOW: _run_flow,
    Command.CHAIN: _run_chain,
    Command.RANGE: _run_range,
    Command.CHECK_FIELD: _run_check_field,
    Command.EXTEND: _run_extend,
    Command.SHAPE: _run_shape,
    Command.KERNEL: _run_kernel,
}


def _error(exc: BaseException, **extra: Any) -> Dict[str, Any]:
    return {'type': exc.__class__.__name__, 'message': str(exc), **extra}


def run(manifest: RunManifest) -> int:
    """Runs one analysis command and writes its report atomically.

    Returns
    -------
    int
        ``0`` on success, ``2`` on a failing verdict, ``3`` on errors, ``4`` on
        malformed input and ``5`` when a trajectory escaped its domain.
    """

    started = time.perf_counter()
    report: Dict[str, Any] = {
        'schema_version': SCHEMA_VERSION,
        'command': manifest.command.value,
        'inputs_digest': None,
        'config': {'seed': manifest.seed},
        'results': None,
        'error': None,
    }

    try:
        with open(manifest.input_path, 'rb') as fp:
            raw = fp.read()

        report['inputs_digest'] = hashlib.sha256(raw).hexdigest()
        document = json.loads(raw)
        if not isinstance(document, dict):
            raise SpecValidationError('', 'expected a JSON object')

        overrides = {key: value for key, value in manifest.overrides.items() if key not in _CONFIG_KEYS}
        run_block = _Run(document.pop('run', None), overrides)

        cfg = _integrator_config(run_block, manifest)
        report['config']['integrator'] = cfg.to_raw()

        results, passed = __handlers__[manifest.command](document, run_block, cfg, manifest)
        report['config']['run'] = run_block.effective
        report['results'] = results
        status = EXIT_OK if passed else EXIT_FAIL

    except json.JSONDecodeError as exc:
        __log__.error(f'CLI | {manifest.input_path}:{exc.lineno}:{exc.colno}: {exc.msg}')
        report['error'] = _error(exc, line=exc.lineno, column=exc.colno)
        status = EXIT_INVALID

    except SpecValidationError as exc:
        __log__.error(f'CLI | invalid input at {exc.path or "<root>"}: {exc}')
        report['error'] = _error(exc, path=exc.path)
        status = EXIT_INVALID

    except TrajectoryEscaped as exc:
        __log__.error(f'CLI | {exc}')
        report['error'] = _error(exc, t_escape=exc.t_escape)
        status = EXIT_ESCAPED

    except (LoewnerException, ValueError, OSError) as exc:
        __log__.error(f'CLI | {manifest.command.value} failed: {exc}')
        report['error'] = _error(exc)
        status = EXIT_ERROR

    except Exception as exc:
        __log__.exception(f'CLI | {manifest.command.value} crashed')
        report['error'] = _error(exc)
        status = EXIT_ERROR

    report['status'] = status
    report['timings'] = {'total_seconds': time.perf_counter() - started}
    write_json(manifest.output_path, report)
    return status


def validate_spec(input_path: str) -> Dict[str, Any]:
    """Validates a field or map document without running any numerics.

    Returns
    -------
    dict
        ``{"valid": bool, "kind": "field" | "map", "path": str, "message": str}``;
        on a JSON syntax error ``line`` and ``column`` are included.
    """

    with open(input_path, 'rb') as fp:
        raw = fp.read()

    try:
        document = json.loads(raw)
    except json.JSONDecodeError as exc:
        return {'valid': False, 'kind': None, 'path': '', 'message': exc.msg, 'line': exc.lineno, 'column': exc.colno}

    kind = 'map' if isinstance(document, dict) and 'map' in document else 'field'
    try:
        if not isinstance(document, dict):
            raise SpecValidationError('', 'expected a JSON object')

        document.pop('run', None)
        if kind == 'map':
            _load_map(document)
        else:
            field_from_raw(document)
    except SpecValidationError as exc:
        return {'valid': False, 'kind': kind, 'path': exc.path, 'message': str(exc)}

    return {'valid': True, 'kind': kind, 'path': '', 'message': 'ok'}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='loewner', description='Numerical Loewner theory on the disc and the ball.')
    parser.add_argument('-v', '--verbose', action='store_true', help='log analysis progress')

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--input', required=True, help='field or map specification (JSON)')
    common.add_argument('--output', required=True, help='where to write the JSON report')
    common.add_argument('--t-max', dest='t_max', type=float, help='final time (flow) or beta horizon (range)')
    common.add_argument('--step', type=float, help='integrator step')
    common.add_argument('--tol', type=float, help='integrator absolute and relative tolerance')
    common.add_argument('--seed', type=int, default=0, help='seed of every random probe')
    common.add_argument('--dump-csv', dest='dump_csv', help='also write a CSV data table here')
    common.add_argument('--horizon', type=float, help='chain horizon T')
    common.add_argument(
        '--set', dest='overrides', action='append', type=_parse_override, metavar='KEY=VALUE',
        help='override an integrator option or a run parameter',
    )

    commands = parser.add_subparsers(dest='command', required=True)
    for command in Command:
        commands.add_parser(command.value, parents=[common])

    validate = commands.add_parser('validate', help='check a specification without running it')
    validate.add_argument('--input', required=True)
    validate.add_argument('--output', help='where to write the validation report')
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s',
    )

    if args.command == 'validate':
        try:
            result = validate_spec(args.input)
        except OSError as exc:
            __log__.error(f'CLI | cannot read {args.input}: {exc}')
            return EXIT_ERROR

        if args.output:
            write_json(args.output, {'schema_version': SCHEMA_VERSION, 'command': 'validate', 'results': result})
        if not result['valid']:
            __log__.error(f'CLI | invalid input at {result["path"] or "<root>"}: {result["message"]}')
        return EXIT_OK if result['valid'] else EXIT_INVALID

    return run(RunManifest.from_args(args))
