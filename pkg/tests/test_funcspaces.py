import numpy as np
import pytest

from cccharts.fields import Box
from cccharts.funcspaces import (Ball, Lattice, ScalarFunction, adapted_holder_norm, affine_region, algebra_check,
                                 cml_norm, derivative_c1_sum, holder_norm, inclusion_check, pushforward_function,
                                 zygmund_norm)
from cccharts.odecore import GridFunction, make_grid

INTERVAL = Box.cube(1, 1.0)


def test_abs_second_difference_is_two():
    report = zygmund_norm("abs(x1)", INTERVAL, 1.0, grid=33)
    assert report.components["second_difference"] == pytest.approx(2.0, abs=0.05)
    assert report.semantics == "lower-bound"


def test_affine_function_has_no_second_difference():
    report = zygmund_norm("2*x1 - x2 + 1", Box.cube(2, 1.0), 1.0, grid=9)
    assert report.components["second_difference"] <= 1e-12


def test_holder_of_linear_function():
    report = holder_norm("x1", Box.cube(2, 0.5), m=0, s=1.0, grid=9)
    assert report.components["f.sup"] == pytest.approx(0.5)
    assert report.components["f.holder"] == pytest.approx(1.0)
    assert report.value == pytest.approx(1.5)


def test_c_m_norm_has_no_difference_term():
    report = holder_norm("x1^2", INTERVAL, m=1, s=0.0, grid=17)
    assert report.family == "C^m"
    assert report.value == pytest.approx(1.0 + 2.0)


def test_estimates_never_decrease_under_refinement():
    coarse = zygmund_norm("sin(3*x1)", INTERVAL, 1.0, grid=9).value
    fine = zygmund_norm("sin(3*x1)", INTERVAL, 1.0, grid=17).value
    assert fine >= coarse - 1e-12


def test_refined_lattice_keeps_old_nodes():
    coarse = Lattice(INTERVAL, 5)
    fine = Lattice(INTERVAL, 9)
    assert set(np.round(coarse.points[:, 0], 12)) <= set(np.round(fine.points[:, 0], 12))


def test_ball_region_masks_corners():
    lat = Lattice(Ball.at_origin(2, 1.0), 5)
    assert not lat.mask.all()
    assert lat.mask[np.argmin(np.linalg.norm(lat.points, axis=1))]


def test_domain_errors_are_skipped_not_raised():
    report = holder_norm("log(x1)", Box((-1.0,), (1.0,)), m=0, s=0.0, grid=5)
    assert report.skipped >= 1


@pytest.mark.parametrize("kwargs", [dict(m=-1), dict(s=1.5)])
def test_holder_argument_checks(kwargs):
    with pytest.raises(ValueError):
        holder_norm("x1", INTERVAL, **kwargs)


def test_native_callable_uses_finite_differences():
    f = ScalarFunction.from_any(lambda p: p[:, 0] ** 2, 1)
    assert f.partial(1)(np.array([[0.5]]))[0] == pytest.approx(1.0, rel=1e-6)


def test_inclusions_hold_for_smooth_function():
    report = inclusion_check("sin(x1)", INTERVAL, 0.5, 1.0, grid=17, sub_region=Box.cube(1, 0.5))
    assert report.holds
    names = [item["name"] for item in report.items]
    assert "holder_exponents" in names and "domain_monotone_zygmund" in names
    constants = {item["name"]: item["constant"] for item in report.items}
    assert constants["holder_exponents"] == 3.0
    assert constants["holder_vs_derivative"] == 1.0
    assert constants["zygmund_vs_holder"] == 5.0
    assert constants["zygmund_exponents"] == 15.0


def test_lipschitz_inclusion_with_mixed_derivatives():
    square = Box((-1.0, -1.0), (1.0, 1.0))
    report = inclusion_check("x1*x2", square, 0.5, 1.0, m=1, grid=17)
    assert report.holds
    item = next(i for i in report.items if i["name"] == "holder_vs_derivative")
    # (1 + 1 + 1) for f plus (1 + 1) for each of x2 and x1
    assert item["rhs"] == pytest.approx(7.0, abs=1e-9)
    assert item["lhs"] > 6.0


def test_derivative_c1_sum_is_c1_norm_at_order_zero():
    square = Box((-1.0, -1.0), (1.0, 1.0))
    c1 = holder_norm("x1*x2", square, 1, 0.0, grid=9).value
    assert derivative_c1_sum("x1*x2", square, 0, grid=9) == pytest.approx(c1)
    assert c1 == pytest.approx(3.0)


def test_inclusion_exponent_order():
    with pytest.raises(ValueError):
        inclusion_check("x1", INTERVAL, 1.0, 0.5)


def test_cml_norm_of_square():
    report = cml_norm("x1^2", m=0, l=2, omega_exponent=1.0, region=INTERVAL, grid=17)
    assert report.components["F.j0"] == pytest.approx(1.0)
    assert report.components["F.j2"] == pytest.approx(2.0)


def test_cml_norm_on_grid_function():
    spec = make_grid(1, 0.5, 9)
    values = spec.nodes[:, 0][:, None, None] ** 2
    report = cml_norm(GridFunction(spec, values), m=0, l=1, omega_exponent=1.0)
    assert report.components["F.j0"] == pytest.approx(0.25)


@pytest.mark.parametrize("kwargs", [dict(l=3), dict(omega_exponent=0.0)])
def test_cml_argument_checks(kwargs):
    with pytest.raises(ValueError):
        cml_norm("x1", region=INTERVAL, **kwargs)


def test_adapted_holder_matches_euclidean_for_coordinate_fields(euclidean2):
    region = Box.cube(2, 0.5)
    adapted = adapted_holder_norm("x1", euclidean2.system, region, m=0, s=1.0, grid=5)
    assert adapted.value == pytest.approx(holder_norm("x1", region, 0, 1.0, grid=5).value, rel=2e-2)


def test_algebra_check_on_polynomials():
    assert algebra_check("x1", "x1^2", INTERVAL, 1.0, grid=17)["holds"]


def test_affine_pushforward_of_function():
    M = np.array([[2.0]])
    b = np.array([1.0])
    g = pushforward_function("x1^2", M, b)
    assert g(np.array([[3.0]]))[0] == pytest.approx(1.0)
    box = affine_region(INTERVAL, M, b)
    assert box.lower == (-1.0,) and box.upper == (3.0,)
