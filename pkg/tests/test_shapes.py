import csv

import numpy as np
import pytest

from loewner import (
    HalfPlaneMap,
    IdentityMap,
    KoebeMap,
    MapUnderTest,
    NonPositiveOperator,
    PointOutsideDomain,
    PolynomialMap,
    RoperSuffridgeMap,
    SingularJacobian,
    Verdict,
    dump_margins,
    image_membership_oracle,
    injectivity_spot_check,
    shape_probes,
    spiral_chain_residual,
    spiral_criterion,
    star_criterion,
)


@pytest.mark.slow
@pytest.mark.parametrize('f', [KoebeMap(), HalfPlaneMap(), IdentityMap()])
def test_starlike_maps_pass(f):
    report = star_criterion(f)
    assert report.verdict is Verdict.PASS
    assert report.probes_used == 10_000
    assert report.min_margin >= 0


def test_non_starlike_polynomial_fails():
    report = star_criterion(PolynomialMap([0, 1, 2]), [[-0.3]])
    assert report.verdict is Verdict.FAIL
    assert report.min_margin == pytest.approx(-0.18)
    assert report.witness_point[0] == pytest.approx(-0.3)


def test_marginal_band():
    report = star_criterion(PolynomialMap([0, 1, 2]), [[-0.3]], tol=1.0)
    assert report.verdict is Verdict.MARGINAL
    assert report.passed


def test_spiral_criterion_with_rotated_operator():
    mut = MapUnderTest(KoebeMap(), np.exp(0.3j), name='koebe')
    report = spiral_criterion(mut, shape_probes(1, per_sphere=256))
    assert report.name == 'koebe'
    assert report.m_A == pytest.approx(np.cos(0.3))


def test_extension_to_the_ball_stays_starlike():
    f = RoperSuffridgeMap(KoebeMap(), 2)
    report = star_criterion(f, shape_probes(2, per_sphere=200, seed=7))
    assert report.passed


def test_non_positive_operator():
    mut = MapUnderTest(IdentityMap(2), [[0, 1], [0, 0]])
    with pytest.raises(NonPositiveOperator):
        spiral_criterion(mut)


def test_singular_jacobian():
    with pytest.raises(SingularJacobian):
        star_criterion(PolynomialMap([0, 1, 2]), [[-0.25]])


def test_probes_must_lie_in_the_ball():
    with pytest.raises(PointOutsideDomain):
        star_criterion(IdentityMap(), [[1.0]])


def test_origin_screen():
    report = star_criterion(PolynomialMap([0.5, 1]), shape_probes(1, radii=[0.1, 0.2], per_sphere=64))
    assert report.origin_warning
    assert report.min_image_norm == pytest.approx(0.3)

    assert not star_criterion(KoebeMap()).origin_warning


def test_margin_dump(tmp_path):
    report = star_criterion(KoebeMap(), shape_probes(1, radii=[0.1, 0.5], per_sphere=64))
    path = tmp_path / 'margins.csv'
    dump_margins(str(path), report)

    with open(path, newline='') as fp:
        rows = list(csv.reader(fp))
    assert rows[0] == ['radius', 'min_margin']
    assert [float(row[0]) for row in rows[1:]] == [0.1, 0.5]


def test_spiral_chain_residual():
    report = spiral_chain_residual(MapUnderTest(KoebeMap(), 1.0), [0.0, 0.5, 1.0], membership_probes=20)
    assert report.max_residual < 1e-8
    assert report.membership == {'0.1': 20, '0.5': 20, '1.0': 20}
    assert report.passed


@pytest.mark.parametrize('f', [KoebeMap(), HalfPlaneMap()])
def test_membership_oracle(f):
    report = image_membership_oracle(f, lambdas=[0.1, 0.5, 1.0], points=20)
    assert report.tested == 60
    assert report.passed


def test_membership_oracle_agrees_on_a_non_starlike_polynomial():
    f = PolynomialMap([0, 1, 2])
    report = image_membership_oracle(f, lambdas=[0.1, 0.5, 1.0], points=20)
    assert not report.passed
    # small images have a second preimage near -1/2
    assert any(failure['count'] == 2 for failure in report.failures)
    assert star_criterion(f, [[-0.3]]).passed is report.passed


def test_membership_oracle_rejects_bad_lambdas():
    with pytest.raises(ValueError):
        image_membership_oracle(IdentityMap(), lambdas=[0.0, 1.0])


def test_injectivity():
    probes = shape_probes(1, radii=[0.3, 0.6], per_sphere=64)
    assert injectivity_spot_check(IdentityMap(), probes).passed

    report = injectivity_spot_check(PolynomialMap([0, 0, 1]), probes)
    assert report.pairs_within_tol > 0
    assert report.winding_failures
    assert not report.passed
