import json

import numpy as np
import pytest

import cccharts.chart as chart_module
from cccharts.chart import (ChartConfig, build_chart, chart_inverse, chart_to_json, ift_kappa, radii_estimates,
                            sample_Y, uniform_ball_points, verify_injectivity)
from cccharts.errors import IFTError, SpanError
from cccharts.fields import Box, VectorField, VectorSystem
from cccharts.systems import rotation

LIGHT = ChartConfig(grid=9, verify_samples=30, injectivity_pairs=200, ift_samples=8, n_dirs=8)


@pytest.fixture(scope="module")
def euclidean_chart(euclidean2):
    return build_chart(euclidean2.system, [0.2, -0.1], config=LIGHT)


def test_euclidean_chart_is_a_translation(euclidean_chart):
    chart, diagnostics = euclidean_chart
    assert chart.J0 == (1, 2)
    assert np.max(np.abs(chart.A.values)) <= 1e-10
    t = np.array([0.3, 0.1])
    np.testing.assert_allclose(chart.phi(t), chart.x0 + t, atol=1e-10)
    assert diagnostics.residuals["pullback"]["max"] <= 1e-8
    assert diagnostics.residuals["A_bound"]["half_bound_ok"]
    assert diagnostics.injectivity.ok


def test_euclidean_pulled_back_fields_are_coordinates(euclidean_chart):
    chart, _ = euclidean_chart
    Y = sample_Y(chart, [[0.1, 0.1], [-0.2, 0.0]])
    assert Y.shape == (2, 2, 2)
    np.testing.assert_allclose(Y[0], np.eye(2), atol=1e-8)


def test_inverse_recovers_t(euclidean_chart):
    chart, _ = euclidean_chart
    t = np.array([0.05, -0.1])
    np.testing.assert_allclose(chart_inverse(chart, chart.phi(t)), t, atol=1e-7)


def test_radii_are_ordered(euclidean_chart):
    radii = euclidean_chart[0].radii
    assert 0 < radii.eta1 <= radii.eta_prime <= radii.eta0 <= radii.eta


def test_chart_json_writes_payload(euclidean_chart, tmp_path):
    chart, diagnostics = euclidean_chart
    path = chart_to_json(chart, diagnostics, tmp_path / "chart.json")
    header = json.loads(path.read_text(encoding="utf-8"))
    assert header["J0"] == [1, 2]
    assert header["schema_version"] == 1
    assert (tmp_path / header["A_payload"]).exists()


def test_non_spanning_fields_raise():
    S = VectorSystem((VectorField.from_strings(["1", "0"], 2),), Box.cube(2, 1.0))
    with pytest.raises(SpanError):
        build_chart(S, [0.0, 0.0], config=LIGHT)


def test_base_point_outside_domain(euclidean2):
    with pytest.raises(ValueError):
        build_chart(euclidean2.system, [100.0, 0.0], config=LIGHT)


def test_chart_config_validation():
    with pytest.raises(ValueError):
        ChartConfig(zeta=0.0)


def test_uniform_ball_points_stay_inside(rng):
    pts = uniform_ball_points(rng, 500, 3, 0.7)
    assert pts.shape == (500, 3)
    assert np.all(np.linalg.norm(pts, axis=1) <= 0.7 + 1e-12)


@pytest.mark.slow
def test_heisenberg_chart_pullback(heisenberg):
    chart, diagnostics = build_chart(heisenberg.system, [0.1, -0.2, 0.0])
    assert chart.J0 == (1, 2, 3)
    assert diagnostics.residuals["pullback"]["max"] <= 1e-5
    assert diagnostics.residuals["determinant"]["max_relative"] <= 1e-4
    assert diagnostics.residuals["A_bound"]["sixteenth_bound_ok"]
    assert diagnostics.residuals["A_bound"]["A_origin"] == 0.0


@pytest.mark.slow
def test_grushin_chart_away_from_degeneracy(grushin):
    chart, diagnostics = build_chart(grushin.system, [0.5, 0.0], config=LIGHT)
    assert len(chart.J0) == 2
    assert diagnostics.residuals["A_bound"]["half_bound_ok"]


def constant_frame(matrix):
    matrix = np.asarray(matrix, dtype=float)
    return lambda U: np.tile(matrix, (np.atleast_2d(U).shape[0], 1, 1))


def test_ift_kappa_for_coordinate_frame():
    report = ift_kappa(constant_frame(np.eye(2)), 2, 0.5, samples=4)
    assert report.kappa == pytest.approx(0.5, rel=1e-6)
    assert report.cofactor_ok
    assert report.surjectivity_ok
    assert report.delta1 == report.Delta0 == pytest.approx(0.2475, rel=1e-6)


def test_ift_kappa_doubles_for_doubled_frame():
    report = ift_kappa(constant_frame(2.0 * np.eye(2)), 2, 0.5, samples=4)
    assert report.kappa == pytest.approx(1.0, rel=1e-6)
    assert report.kappa >= 0.99 * report.cofactor_bound
    assert report.surjectivity_ok
    assert report.to_dict()["surjectivity_ok"] is True


def test_ift_kappa_rejects_degenerate_frame():
    with pytest.raises(IFTError):
        ift_kappa(constant_frame([[1.0, 0.0], [1.0, 0.0]]), 2, 0.5, samples=4)


def test_eta1_uses_kappa_times_delta1(euclidean_chart):
    chart, diagnostics = euclidean_chart
    radii, ift = chart.radii, diagnostics.ift
    assert radii.delta1 == ift.delta1
    assert radii.eta1 == min(ift.kappa * radii.delta1, radii.eta_prime)
    assert radii.to_dict()["delta1"] == radii.delta1


def test_build_chart_refuses_non_surjective_psi(euclidean2, monkeypatch):
    monkeypatch.setattr(chart_module, "_surjectivity_ratio", lambda *args, **kwargs: 2.0)
    with pytest.raises(IFTError):
        build_chart(euclidean2.system, [0.2, -0.1], config=LIGHT)


def test_euclidean_injectivity_ratio_is_one(euclidean_chart):
    report = verify_injectivity(euclidean_chart[0], pairs=100)
    assert report.ok
    assert report.c_min == pytest.approx(1.0, abs=1e-6)


def test_euclidean_radii_estimates_reach_eta1(euclidean_chart):
    chart, _ = euclidean_chart
    report = radii_estimates(chart, samples=16)
    assert report.xi1 == pytest.approx(chart.radii.eta1)
    assert 0 < report.xi2 <= report.xi1


@pytest.mark.slow
def test_rotation_chart_has_no_collisions():
    chart, _ = build_chart(rotation(10.0).system, [1.0, 0.0], config=LIGHT)
    assert chart.radii.eta1 <= 2 * np.pi / 10.0
    report = verify_injectivity(chart, pairs=500)
    assert report.ok
    assert report.c_min > 0
