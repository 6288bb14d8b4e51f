import numpy as np
import pytest

from cccharts.chart import ChartConfig
from cccharts.fields import Box, VectorField
from cccharts.scaling import (SAMPLE_FLOOR, GradedSystem, constant_structure_check, delta_seed, doubling_ladder,
                              fit_slope, graded, hormander_expand, jacobian_band, lambda_, lambda_tuple, nsw_chart,
                              scaled_structure_coefficients, volume_vs_lambda)

LIGHT = ChartConfig(grid=9, verify_samples=30, injectivity_pairs=200, ift_samples=8, n_dirs=8)


def test_heisenberg_lambda(heisenberg):
    assert lambda_(heisenberg, [0.0, 0.0, 0.0], 0.5) == pytest.approx(0.0625)
    batch = lambda_(heisenberg, np.array([[0.0, 0.0, 0.0], [1.0, -1.0, 0.5]]), 0.5)
    np.testing.assert_allclose(batch, [0.0625, 0.0625])


def test_grushin_lambda_and_tuple(grushin):
    value, J = lambda_tuple(grushin, [0.0, 0.0], 0.5)
    assert value == pytest.approx(0.125)
    assert J == (1, 3)


def test_lambda_delta_range(heisenberg):
    with pytest.raises(ValueError):
        lambda_(heisenberg, [0.0, 0.0, 0.0], 1.5)


def test_grushin_expansion_words_and_flags(grushin):
    assert grushin.words == ((1,), (2,), (1, 2), (2, 1))
    assert grushin.degrees == (1.0, 1.0, 2.0, 2.0)
    assert grushin.flagged("duplicate") == [4]
    assert grushin.pruned().q == 3


def test_expansion_keeps_vanishing_brackets():
    fields = [VectorField.constant([1.0, 0.0]), VectorField.constant([0.0, 1.0])]
    G = hormander_expand(fields, 2, Box.cube(2, 1.0))
    assert G.q == 4
    assert G.flagged("zero") == [3, 4]


@pytest.mark.parametrize("m", [0, -1])
def test_expansion_order_checked(m):
    with pytest.raises(ValueError):
        hormander_expand([VectorField.constant([1.0])], m, Box.cube(1, 1.0))


def test_expansion_needs_symbolic_fields():
    native = VectorField(1, native=lambda p: p)
    with pytest.raises(ValueError):
        hormander_expand([native], 2, Box.cube(1, 1.0))


def test_graded_system_validation(heisenberg):
    with pytest.raises(ValueError):
        GradedSystem(heisenberg.system, (1.0, 1.0))
    with pytest.raises(ValueError):
        GradedSystem(heisenberg.system, (1.0, 0.5, 2.0))
    assert graded(heisenberg.system).degrees == (1.0, 1.0, 1.0)


def test_delta_family_dimension_checked(euclidean2, heisenberg):
    G = GradedSystem(euclidean2.system, (1.0, 1.0), family=lambda d: heisenberg.system)
    assert not G.is_graded
    with pytest.raises(ValueError):
        G.scaled_system(0.5)


def test_scaled_structure_coefficients(heisenberg):
    c = scaled_structure_coefficients(heisenberg, np.zeros(3), 0.3)
    assert c[0, 1, 2] == pytest.approx(1.0)
    assert c[1, 0, 2] == pytest.approx(-1.0)


@pytest.mark.parametrize("name", ["heisenberg", "grushin"])
def test_constant_structure(name, request):
    G = request.getfixturevalue(name)
    pts = np.random.default_rng(0).uniform(-1.0, 1.0, size=(20, G.n))
    assert constant_structure_check(G, pts)["holds"]


def test_fit_slope_of_power_law():
    deltas = [0.25, 0.5, 1.0]
    slope, intercept, residuals = fit_slope(deltas, [2.0 * d ** 3 for d in deltas])
    assert slope == pytest.approx(3.0)
    assert intercept == pytest.approx(np.log(2.0))
    assert max(abs(r) for r in residuals) <= 1e-10


def test_delta_seeds_are_stable_and_distinct():
    assert delta_seed(0, 1) == delta_seed(0, 1)
    assert len({delta_seed(0, i) for i in range(10)}) == 10


def test_single_delta_has_no_slope(euclidean2):
    report = volume_vs_lambda(euclidean2, [0.0, 0.0], [0.5], N=10, seed=0)
    assert report.samples == SAMPLE_FLOOR
    assert report.slope is None
    assert report.lambdas == [pytest.approx(0.25)]


def test_volume_law_delta_range(euclidean2):
    with pytest.raises(ValueError):
        volume_vs_lambda(euclidean2, [0.0, 0.0], [0.5, 2.0])
    with pytest.raises(ValueError):
        volume_vs_lambda(euclidean2, [0.0, 0.0], [])


@pytest.mark.slow
def test_heisenberg_volume_slope(heisenberg):
    report = volume_vs_lambda(heisenberg, [0.0, 0.0, 0.0], [0.2, 0.4, 0.6, 0.8, 1.0], N=20000, seed=0)
    assert report.slope == pytest.approx(4.0, abs=0.25)


@pytest.mark.slow
def test_grushin_volume_slope(grushin):
    report = volume_vs_lambda(grushin, [0.0, 0.0], [0.2, 0.4, 0.6, 0.8, 1.0], N=20000, seed=0)
    assert report.slope == pytest.approx(3.0, abs=0.25)


@pytest.mark.slow
def test_euclidean_doubling_ladder(euclidean2):
    for est in doubling_ladder(euclidean2, [0.0, 0.0], [0.1, 0.2], N=20000, seed=0):
        assert est.ratio == pytest.approx(4.0, rel=0.1)


@pytest.mark.slow
def test_rescaled_chart_jacobian_band(heisenberg):
    nsw = nsw_chart(heisenberg, [0.0, 0.0, 0.0], 0.5, config=LIGHT)
    assert nsw.lam == pytest.approx(0.0625)
    band = jacobian_band(nsw, samples=32)
    assert 0.25 <= band["min"] <= band["max"] <= 4.0
