import csv
import math

import numpy as np
import pytest

from loewner import (
    BETA_INTEGRATOR,
    BallDiagonalField,
    DomainSpec,
    Inconclusive,
    IntegratorConfig,
    RadialField,
    RangeClassification,
    Verdict,
    beta_times,
    beta_zero_corank,
    classify_range,
    compute_beta,
    dump_probes,
    random_points,
)


def test_beta_times_are_geometric():
    times = beta_times(1.0, 41.0, levels=12)
    assert times[0] == 1.0 and times[-1] == 41.0
    gaps = np.diff(times)
    assert np.allclose(gaps[1:] / gaps[:-1], 2.0)


def test_beta_times_need_two_levels():
    with pytest.raises(ValueError):
        beta_times(0.0, 1.0, levels=1)


class TestBeta:
    def test_rotation_keeps_the_metric(self):
        probe = compute_beta(RadialField([[1j]]), [0.5], [1.0])
        assert probe.beta_estimate == pytest.approx(4 / 3, rel=1e-6)
        assert probe.converged and probe.monotone

    def test_short_horizon_returns_an_unconverged_probe(self, caplog):
        probe = compute_beta(RadialField([[-1]]), [0.3], [1.0], t_max=3.0)
        assert not probe.converged
        assert probe.monotone
        assert probe.beta_estimate == pytest.approx(math.exp(-3) / (1 - 0.09 * math.exp(-6)), rel=1e-8)
        assert 'did not converge' in caplog.text

    def test_contraction_kills_the_metric(self):
        probe = compute_beta(RadialField([[-1]]), [0.3], [1.0])
        assert probe.beta_estimate < 1e-10
        assert probe.converged

    def test_direction_is_not_normalized(self):
        probe = compute_beta(RadialField([[1j]]), [0.0], [2.0])
        assert probe.beta_estimate == pytest.approx(2.0, rel=1e-6)

    def test_isometry_drift_stays_within_slack(self):
        probe = compute_beta(RadialField([[1j]]), [0.5], [1.0])
        assert np.max(np.diff(probe.values)) <= probe.slack
        assert max(probe.values) - min(probe.values) < 1e-8

    def test_rotation_is_exact_on_many_points(self, rng):
        spec = RadialField([[1j]])
        for z in random_points(1, 10, rng, radius=0.8):
            probe = compute_beta(spec, z, [1.0], levels=4)
            assert probe.beta_estimate == pytest.approx(1 / (1 - abs(z[0]) ** 2), abs=1e-6)

    def test_beta_is_homogeneous_in_the_direction(self):
        spec = BallDiagonalField([[1j, 2j]])
        single = compute_beta(spec, [0.3, 0.1j], [0.6, 0.8], levels=4).beta_estimate
        double = compute_beta(spec, [0.3, 0.1j], [1.2, 1.6], levels=4).beta_estimate
        assert double == pytest.approx(2 * single, rel=1e-9)

    def test_explicit_config_is_used(self):
        coarse = IntegratorConfig(method='rk4', step_h=0.5)
        rough = compute_beta(RadialField([[1j]]), [0.5], [1.0], t_max=4.0, cfg=coarse, levels=3)
        fine = compute_beta(RadialField([[1j]]), [0.5], [1.0], t_max=4.0, levels=3)

        assert abs(rough.beta_estimate - 4 / 3) > 1e-5
        assert abs(fine.beta_estimate - 4 / 3) < 1e-9
        assert BETA_INTEGRATOR.abs_tol == 1e-12

    def test_zero_direction(self):
        with pytest.raises(ValueError):
            compute_beta(RadialField([[1j]]), [0.0], [0.0])

    def test_probe_serializes(self):
        raw = compute_beta(RadialField([[1j]]), [0.5], [1.0]).to_raw()
        assert set(raw) == {'z', 'v', 's', 'beta', 'converged', 'monotone'}


class TestCorank:
    def test_disc_contraction(self):
        assert beta_zero_corank(RadialField([[-1]]), [0.2]).corank == 1

    def test_cylinder_direction(self):
        report = beta_zero_corank(BallDiagonalField([[1j, -1]]), [0.3, 0.1])
        assert report.corank == 1
        assert len(report.random_probes) == 4

    def test_full_space_is_refused(self):
        spec = RadialField(-np.eye(2), DomainSpec.full_space(2))
        with pytest.raises(Inconclusive):
            beta_zero_corank(spec, [0.1, 0.1])

    def test_basis_must_span(self):
        with pytest.raises(ValueError):
            beta_zero_corank(BallDiagonalField([[1j, -1]]), [0.0, 0.0], basis=[[1, 0], [2, 0]])


class TestClassifyRange:
    @pytest.mark.parametrize(('spec', 'expected'), [
        (RadialField([[-1]]), RangeClassification.PLANE),
        (RadialField([[1j]]), RangeClassification.DISC),
        (BallDiagonalField([[1j, -1]]), RangeClassification.CYLINDER_BUNDLE),
        (BallDiagonalField([[1j, 2j]]), RangeClassification.BALL_BIHOLOMORPHIC),
    ])
    @pytest.mark.slow
    def test_classification(self, spec, expected):
        report = classify_range(spec)
        assert report.classification is expected
        assert report.verdict is Verdict.PASS
        assert report.monotone

    def test_corank_two_is_undetermined(self):
        report = classify_range(BallDiagonalField([[-1, -1]]))
        assert report.classification is RangeClassification.INCONCLUSIVE
        assert report.corank == 2
        assert 'corank 2' in report.reason

    def test_short_horizon_is_inconclusive(self):
        report = classify_range(RadialField([[-1]]), t_max=7.0)
        assert report.classification is RangeClassification.INCONCLUSIVE
        assert report.reason
        assert not report.passed

    def test_piecewise_field_over_several_times(self):
        spec = BallDiagonalField([[1j, -1], [-0.5j, -2]], breakpoints=[1.0])
        report = classify_range(spec, s_values=[0.0, 2.0])
        assert report.classification is RangeClassification.CYLINDER_BUNDLE
        assert {entry['s'] for entry in report.coranks} == {0.0, 2.0}

    def test_polydisc_is_refused(self):
        spec = RadialField(-np.eye(2), DomainSpec.polydisc(2))
        with pytest.raises(Inconclusive):
            classify_range(spec)

    def test_report_and_probe_dump(self, tmp_path):
        report = classify_range(RadialField([[1j]]), base_points=[[0.0], [0.4]], levels=4)
        raw = report.to_raw()
        assert raw['classification'] == 'Disc'
        assert raw['thresholds']['levels'] == 4
        assert raw['monotone']
        assert len(raw['probes']) == 2

        path = tmp_path / 'probes.csv'
        dump_probes(str(path), report.probes)
        with open(path, newline='') as fp:
            rows = list(csv.reader(fp))
        assert rows[0] == ['probe', 't', 'kappa']
        assert len(rows) == 1 + 2 * 5
