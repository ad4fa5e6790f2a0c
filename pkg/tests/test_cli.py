import hashlib
import json
import math

import pytest

from loewner import RunManifest, cli, main, run, validate_spec
from loewner.enums import Command


RADIAL = {'domain': {'kind': 'disc'}, 'kind': 'radial', 'params': {'A': [[-1]]}}


def _write(path, document):
    path.write_text(json.dumps(document))
    return str(path)


def _run(tmp_path, command, document, **options):
    source = document if isinstance(document, str) else json.dumps(document)
    (tmp_path / 'input.json').write_text(source)

    manifest = RunManifest(command, str(tmp_path / 'input.json'), str(tmp_path / 'report.json'), **options)
    status = run(manifest)
    return status, json.loads((tmp_path / 'report.json').read_text())


def _complex(pair):
    return complex(pair[0], pair[1])


class TestFlowCommand:
    def test_radial_contraction(self, tmp_path):
        status, report = _run(tmp_path, 'flow', {**RADIAL, 'run': {'z': [0.5], 't': 1.0}})

        assert status == 0
        assert report['status'] == 0
        assert report['schema_version'] == 1
        assert report['command'] == 'flow'
        assert report['error'] is None
        assert _complex(report['results']['endpoint'][0]) == pytest.approx(0.5 / math.e, abs=1e-7)

    def test_report_echoes_inputs(self, tmp_path):
        status, report = _run(tmp_path, 'flow', {**RADIAL, 'run': {'z': 0.25, 's': 0.5}}, t_max=1.5, seed=3)

        digest = hashlib.sha256((tmp_path / 'input.json').read_bytes()).hexdigest()
        assert report['inputs_digest'] == digest
        assert report['config']['seed'] == 3
        assert report['config']['run'] == {'z': [[0.25, 0.0]], 's': 0.5, 't': 1.5}
        assert 'abs_tol' in report['config']['integrator']
        assert report['timings']['total_seconds'] >= 0

    def test_overrides(self, tmp_path):
        status, report = _run(
            tmp_path, 'flow', RADIAL, overrides={'z': [0.5], 't': 2.0, 'method': 'rk4'}, step=0.01,
        )

        assert status == 0
        assert report['config']['integrator']['step_h'] == 0.01
        assert report['config']['run']['t'] == 2.0
        assert _complex(report['results']['endpoint'][0]) == pytest.approx(0.5 * math.exp(-2), abs=1e-8)

    def test_trajectory_dump(self, tmp_path):
        dump = tmp_path / 'trajectory.csv'
        status, _ = _run(tmp_path, 'flow', {**RADIAL, 'run': {'z': [0.5], 't': 1.0}}, dump_csv=str(dump))

        assert status == 0
        assert dump.read_text().splitlines()[0].startswith('t,')

    def test_escape(self, tmp_path):
        document = {**RADIAL, 'params': {'A': [[1]]}, 'run': {'z': [0.5], 't': 2.0}}
        status, report = _run(tmp_path, 'flow', document)

        assert status == 5
        assert report['results'] is None
        assert report['error']['type'] == 'TrajectoryEscaped'
        assert report['error']['t_escape'] == pytest.approx(math.log(2), abs=1e-3)

    def test_backward_times_are_errors(self, tmp_path):
        status, report = _run(tmp_path, 'flow', {**RADIAL, 'run': {'z': [0.5], 's': 1.0, 't': 0.5}})
        assert status == 3
        assert report['error']['type'] == 'ValueError'


class TestInvalidInput:
    def test_syntax_error(self, tmp_path):
        status, report = _run(tmp_path, 'flow', '{"kind": "radial",\n  oops}')

        assert status == 4
        assert report['inputs_digest'] is not None
        assert report['error']['line'] == 2

    @pytest.mark.parametrize('document, path', [
        ({**RADIAL, 'kind': 'spiral', 'run': {'z': [0.5], 't': 1.0}}, 'kind'),
        ({**RADIAL, 'run': {'t': 1.0}}, 'run.z'),
        ({**RADIAL, 'run': {'z': [0.5, 0.1], 't': 1.0}}, 'run.z'),
        ({**RADIAL, 'run': {'z': [0.5]}}, 'run.t'),
        ({**RADIAL, 'run': [1, 2]}, 'run'),
        ({**RADIAL, 'run': {'z': [0.5], 't': 1.0, 'config': {'method': 'euler'}}}, 'run.config'),
    ])
    def test_paths(self, tmp_path, document, path):
        status, report = _run(tmp_path, 'flow', document)

        assert status == 4
        assert report['error']['type'] == 'SpecValidationError'
        assert report['error']['path'] == path

    def test_top_level_must_be_an_object(self, tmp_path):
        status, report = _run(tmp_path, 'flow', [1, 2, 3])
        assert status == 4

    def test_missing_input_file(self, tmp_path):
        manifest = RunManifest(Command.FLOW, str(tmp_path / 'missing.json'), str(tmp_path / 'report.json'))
        assert run(manifest) == 3

    def test_unexpected_errors_still_write_a_report(self, tmp_path, monkeypatch):
        def crash(*args):
            raise RuntimeError('boom')

        monkeypatch.setitem(cli.__handlers__, Command.FLOW, crash)
        status, report = _run(tmp_path, 'flow', {**RADIAL, 'run': {'z': [0.5], 't': 1.0}})

        assert status == 3
        assert report['status'] == 3
        assert report['error'] == {'type': 'RuntimeError', 'message': 'boom'}

    def test_manifest(self):
        with pytest.raises(ValueError):
            RunManifest('flow', '', 'out.json')
        with pytest.raises(ValueError):
            RunManifest('integrate', 'in.json', 'out.json')


class TestAnalysisCommands:
    def test_chain(self, tmp_path):
        document = {**RADIAL, 'run': {'horizon': 1.0, 'points': [[0.5], [0.2]], 's_values': [0.0, 0.5, 1.0]}}
        dump = tmp_path / 'chain.csv'
        status, report = _run(tmp_path, 'chain', document, dump_csv=str(dump), tol=1e-11)

        assert status == 0
        assert report['results']['verdict'] == 'PASS'
        assert report['results']['association']['max_residual'] < 1e-7
        assert len(dump.read_text().splitlines()) == 1 + 3 * 2

    def test_chain_needs_a_horizon(self, tmp_path):
        status, report = _run(tmp_path, 'chain', RADIAL)
        assert status == 4
        assert report['error']['path'] == 'run.horizon'

    def test_range(self, tmp_path):
        status, report = _run(tmp_path, 'range', {**RADIAL, 'params': {'A': [[[0, 1]]]}})

        assert status == 0
        assert report['results']['classification'] == 'Disc'
        assert report['results']['monotone']
        assert report['config']['integrator']['abs_tol'] == 1e-12

    @pytest.mark.parametrize(('command', 'document'), [
        ('check-field', {**RADIAL, 'run': {'pairs': 10}}),
        ('chain', {**RADIAL, 'run': {'horizon': 1.0}}),
    ])
    def test_reports_are_reproducible(self, tmp_path, command, document):
        texts = []
        for name in ('first', 'second'):
            folder = tmp_path / name
            folder.mkdir()
            status, report = _run(folder, command, document, seed=11)
            assert status == 0
            del report['timings']
            texts.append(json.dumps(report, sort_keys=True))

        assert texts[0] == texts[1]

    def test_check_field(self, tmp_path):
        status, report = _run(tmp_path, 'check-field', {**RADIAL, 'run': {'pairs': 10}})

        assert status == 0
        assert report['results']['verdict'] == 'PASS'
        assert report['results']['dissipativity'] is not None

    def test_check_field_on_the_full_space(self, tmp_path):
        document = {'domain': {'kind': 'full', 'dimension': 2}, 'kind': 'radial', 'params': {'A': [[-1, 0], [0, -1]]}}
        status, report = _run(tmp_path, 'check-field', document)

        assert status == 0
        assert report['results']['dissipativity'] is None

    def test_extend(self, tmp_path):
        document = {**RADIAL, 'run': {'horizon': 1.0, 'points': [[0.3, 0.2], [0.1, -0.4]]}}
        status, report = _run(tmp_path, 'extend', document, tol=1e-11)

        assert status == 0
        assert report['results']['association_residual'] < 1e-6
        assert set(report['results']['chain_values']) == {'0.0', '0.5', '1.0'}

    def test_extend_needs_a_disc_field(self, tmp_path):
        document = {'domain': {'kind': 'ball', 'dimension': 2}, 'kind': 'radial', 'params': {'A': -1}, 'run': {'horizon': 1.0}}
        status, report = _run(tmp_path, 'extend', document)

        assert status == 4
        assert report['error']['path'] == 'domain.kind'

    def test_shape_pass(self, tmp_path):
        document = {'map': {'kind': 'koebe'}, 'run': {'radii': [0.5, 0.9], 'per_sphere': 16}}
        dump = tmp_path / 'margins.csv'
        status, report = _run(tmp_path, 'shape', document, dump_csv=str(dump))

        assert status == 0
        assert report['results']['verdict'] == 'PASS'
        assert report['results']['criterion']['probes_used'] == 32
        assert report['results']['oracle'] is not None
        assert dump.exists()

    def test_shape_fail(self, tmp_path):
        document = {'map': {'kind': 'polynomial', 'params': {'coefficients': [0, 1, 2]}}, 'run': {'radii': [0.3], 'per_sphere': 8}}
        status, report = _run(tmp_path, 'shape', document)

        assert status == 2
        assert report['status'] == 2
        assert report['results']['verdict'] == 'FAIL'

    def test_shape_rejects_non_positive_operators(self, tmp_path):
        document = {'map': {'kind': 'identity'}, 'A': -1, 'run': {'radii': [0.5], 'per_sphere': 4}}
        status, report = _run(tmp_path, 'shape', document)

        assert status == 3
        assert report['error']['type'] == 'NonPositiveOperator'

    def test_kernel(self, tmp_path):
        document = {'map': {'kind': 'identity'}, 'run': {'ks': [10, 100]}}
        status, report = _run(tmp_path, 'kernel', document)

        assert status == 0
        assert report['results']['errors'] == pytest.approx([0.3 / 9, 0.3 / 99], rel=1e-8)

    def test_kernel_needs_a_disc_map(self, tmp_path):
        document = {'map': {'kind': 'identity', 'params': {'dimension': 2}}}
        status, report = _run(tmp_path, 'kernel', document)

        assert status == 4
        assert report['error']['path'] == 'map.kind'


class TestEntryPoint:
    def test_main_runs_a_command(self, tmp_path):
        source = _write(tmp_path / 'radial.json', {**RADIAL, 'run': {'z': [0.5]}})
        output = tmp_path / 'report.json'

        status = main(['flow', '--input', source, '--output', str(output), '--t-max', '1', '--set', 'method=rk4'])

        assert status == 0
        report = json.loads(output.read_text())
        assert report['config']['integrator']['method'] == 'rk4'

    def test_bad_override_syntax(self, tmp_path):
        with pytest.raises(SystemExit):
            main(['flow', '--input', 'a.json', '--output', 'b.json', '--set', 'novalue'])

    def test_validate(self, tmp_path):
        good = _write(tmp_path / 'good.json', RADIAL)
        bad = _write(tmp_path / 'bad.json', {**RADIAL, 'domain': {'kind': 'disc', 'dimension': 2}})
        output = tmp_path / 'validation.json'

        assert main(['validate', '--input', good, '--output', str(output)]) == 0
        assert json.loads(output.read_text())['results']['kind'] == 'field'
        assert main(['validate', '--input', bad]) == 4

    def test_validate_spec(self, tmp_path):
        result = validate_spec(_write(tmp_path / 'map.json', {'map': {'kind': 'koebe'}, 'A': [[1, 0], [0, 1]]}))
        assert result['valid'] is False
        assert result['path'] == 'A'

        (tmp_path / 'broken.json').write_text('{\n\n]')
        result = validate_spec(str(tmp_path / 'broken.json'))
        assert result['valid'] is False
        assert result['line'] == 3
