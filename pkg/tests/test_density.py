import math

import numpy as np
import pytest

from cccharts.ccmetric import CCParams
from cccharts.chart import ChartConfig, build_chart
from cccharts.density import (Density, ball_quadrature, change_of_variables_check, g_ratio_sweep, lie_ratio,
                              nu0_eval, pullback_h, weighted_ball_measure)
from cccharts.errors import SpanError
from cccharts.fields import VectorField

LIGHT = ChartConfig(grid=9, verify_samples=30, injectivity_pairs=200, ift_samples=8, n_dirs=8)


@pytest.fixture(scope="module")
def euclidean_chart(euclidean2):
    chart, _ = build_chart(euclidean2.system, [0.0, 0.0], config=LIGHT)
    return chart


def test_weighted_measure_is_linear_in_the_density(euclidean2):
    nu = Density.lebesgue(2)
    one = weighted_ball_measure(euclidean2.system, [0.0, 0.0], 0.5, nu, N=2000, seed=4)
    ten = weighted_ball_measure(euclidean2.system, [0.0, 0.0], 0.5, nu.scaled(10.0), N=2000, seed=4)
    assert ten.value == pytest.approx(10.0 * one.value, rel=1e-10)
    assert ten.hits == one.hits


def test_weighted_measure_independent_of_threads(euclidean2):
    nu = Density.from_expr("1 + x1^2", 2)
    serial = weighted_ball_measure(euclidean2.system, [0.0, 0.0], 0.5, nu, 3000, 1, CCParams(chunk=500))
    pooled = weighted_ball_measure(euclidean2.system, [0.0, 0.0], 0.5, nu, 3000, 1, CCParams(chunk=500, threads=3))
    assert serial.value == pooled.value


def test_weighted_measure_needs_samples(euclidean2):
    with pytest.raises(ValueError):
        weighted_ball_measure(euclidean2.system, [0.0, 0.0], 0.5, Density.lebesgue(2), N=0)


@pytest.mark.slow
def test_lebesgue_measure_of_unit_disc(euclidean2):
    est = weighted_ball_measure(euclidean2.system, [0.0, 0.0], 1.0, Density.lebesgue(2), N=20000, seed=0)
    assert abs(est.value - math.pi) <= 3.0 * est.stderr


@pytest.mark.parametrize("n, volume", [(2, math.pi * 0.25), (3, 4.0 / 3.0 * math.pi * 0.125)])
def test_ball_quadrature_weights(n, volume):
    _, weights = ball_quadrature(n, 0.5)
    assert np.sum(weights) == pytest.approx(volume, rel=1e-10)


def test_nu0_is_one_on_the_frame(heisenberg):
    S = heisenberg.system
    x = np.array([0.3, -0.4, 0.2])
    assert nu0_eval(S, x, S.matrix(x).T) == pytest.approx(1.0)
    assert Density.nu0(S, (1, 2, 3))(x)[0] == pytest.approx(1.0)


def test_nu0_needs_spanning_tuple(grushin):
    with pytest.raises(SpanError):
        nu0_eval(grushin.system, [0.0, 0.0], np.eye(2), J0=(1, 2))


def test_lie_ratio_of_radial_field():
    X = VectorField.from_strings(["x1", "x2"], 2)
    assert lie_ratio(X, Density.lebesgue(2), [0.3, 0.7]) == pytest.approx(2.0)


def test_lie_ratio_with_exponential_weight():
    X = VectorField.constant([1.0, 0.0])
    assert lie_ratio(X, Density.from_expr("exp(x1)", 2), [0.2, 0.1]) == pytest.approx(1.0)


def test_pullback_h_of_translation(euclidean_chart):
    nu = Density.from_expr("2 + x1", 2)
    assert pullback_h(euclidean_chart, nu, [0.1, 0.0]) == pytest.approx(2.1, rel=1e-8)


def test_change_of_variables_matches_quadrature(euclidean_chart):
    report = change_of_variables_check(euclidean_chart, Density.lebesgue(2), r=0.3, N=4000, seed=0)
    assert report.quadrature == pytest.approx(math.pi * 0.09, rel=1e-8)
    assert report.deviation <= 4.0


def test_change_of_variables_radius_range(euclidean_chart):
    with pytest.raises(ValueError):
        change_of_variables_check(euclidean_chart, Density.lebesgue(2), r=100.0)


def test_g_ratio_constant_for_lebesgue(euclidean_chart):
    report = g_ratio_sweep(euclidean_chart, Density.lebesgue(2), samples=50)
    assert report.sign_constant
    assert report.spread == pytest.approx(1.0)
