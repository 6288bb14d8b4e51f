import numpy as np
import pytest

from cccharts.errors import SpanError
from cccharts.expr import parse
from cccharts.fields import (Box, VectorField, VectorSystem, bracket_field, brackets, combine, commutator,
                             cramer_coeffs, fd_jacobian, is_spanning, select_J0, structure_coefficients,
                             structure_residual, validate_index_tuple, wedge_det, wedge_ratios)


def test_box_basics():
    box = Box.around([1.0, -1.0], 0.5)
    assert box.lower == (0.5, -1.5)
    assert box.volume == pytest.approx(1.0)
    assert box.contains(np.array([1.0, -1.0]))
    assert not box.contains(np.array([2.0, -1.0]))
    assert box.grid(3).shape == (9, 2)


def test_degenerate_box_rejected():
    with pytest.raises(ValueError):
        Box((0.0, 1.0), (1.0, 1.0))


def test_box_intersect():
    box = Box.cube(2, 1.0).intersect(Box.around([1.0, 1.0], 0.5))
    assert box.lower == (0.5, 0.5)
    assert box.upper == (1.0, 1.0)


def test_field_evaluation_and_jacobian():
    X = VectorField.from_strings(["x1*x2", "sin(x1)"], 2)
    x = np.array([0.5, 2.0])
    np.testing.assert_allclose(X(x), [1.0, np.sin(0.5)])
    np.testing.assert_allclose(X.jacobian(x), [[2.0, 0.5], [np.cos(0.5), 0.0]])


def test_native_field_uses_finite_differences():
    X = VectorField(2, native=lambda p: np.stack([p[:, 0] ** 2, p[:, 0] * p[:, 1]], axis=-1))
    J = X.jacobian(np.array([1.5, -2.0]))
    np.testing.assert_allclose(J, [[3.0, 0.0], [-2.0, 1.5]], atol=1e-6)


def test_fd_jacobian_shape():
    pts = np.zeros((4, 3))
    jac = fd_jacobian(lambda p: p[:, :2] * 2.0, pts)
    assert jac.shape == (4, 2, 3)


def test_field_component_count_checked():
    with pytest.raises(ValueError):
        VectorField(2, components=(parse("x1", 2),))


def test_heisenberg_bracket_is_T(heisenberg):
    X, Y, _ = heisenberg.system.fields
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1.0, 1.0, size=(10, 3))
    np.testing.assert_allclose(commutator(X, Y, pts), np.tile([0.0, 0.0, 1.0], (10, 1)), atol=1e-12)
    symbolic = bracket_field(X, Y)
    np.testing.assert_allclose(symbolic(pts), commutator(X, Y, pts), atol=1e-12)


def test_brackets_are_antisymmetric(heisenberg):
    br = brackets(heisenberg.system, np.array([0.3, -0.2, 0.1]))
    np.testing.assert_array_equal(br, -np.transpose(br, (1, 0, 2)))
    np.testing.assert_array_equal(np.diagonal(br, axis1=0, axis2=1), 0.0)


def test_heisenberg_structure_coefficients(heisenberg):
    c = structure_coefficients(heisenberg.system, np.array([0.4, 0.1, -0.3]))
    assert c[0, 1, 2] == pytest.approx(1.0)
    assert c[1, 0, 2] == pytest.approx(-1.0)
    assert structure_residual(heisenberg.system, np.zeros((1, 3))) <= 1e-12


def test_structure_coefficients_need_spanning():
    S = VectorSystem((VectorField.constant([1.0, 0.0]),), Box.cube(2, 1.0))
    with pytest.raises(SpanError):
        structure_coefficients(S, np.zeros(2))


def test_combine_constant_coefficients(euclidean2):
    Z = combine([2.0, -1.0], euclidean2.system.fields)
    np.testing.assert_allclose(Z(np.zeros(2)), [2.0, -1.0])


def test_select_J0_euclidean(euclidean3):
    J0, ratio = select_J0(euclidean3.system, np.zeros(3))
    assert J0 == (1, 2, 3)
    assert ratio == pytest.approx(1.0)


def test_select_J0_prefers_lexicographic_tie(grushin):
    J0, _ = select_J0(grushin.system, np.zeros(2))
    assert J0 == (1, 3)


def test_select_J0_rejects_non_spanning():
    S = VectorSystem((VectorField.from_strings(["x1", "0"], 2), VectorField.from_strings(["0", "x1"], 2)),
                     Box.cube(2, 1.0))
    assert not is_spanning(S, np.zeros(2))
    with pytest.raises(SpanError):
        select_J0(S, np.zeros(2))


def test_select_J0_zeta_range(euclidean2):
    with pytest.raises(ValueError):
        select_J0(euclidean2.system, np.zeros(2), zeta=0.0)


def test_wedge_det_and_ratios(grushin):
    x = np.array([0.5, 0.0])
    assert wedge_det(grushin.system, (1, 2), x) == pytest.approx(0.5)
    ratios = wedge_ratios(grushin.system, (1, 3), x[None, :])
    assert ratios[0] == pytest.approx(1.0)


@pytest.mark.parametrize("J", [(1,), (0, 1), (1, 5)])
def test_validate_index_tuple(J):
    with pytest.raises(ValueError):
        validate_index_tuple(J, 2, 4)


def test_cramer_coeffs_recovers_combination(heisenberg):
    X, Y, T = heisenberg.system.fields
    target = combine([0.5, -2.0, 3.0], [X, Y, T])
    b = cramer_coeffs([X, Y, T], target, np.array([0.2, 0.7, -0.4]))
    np.testing.assert_allclose(b, [0.5, -2.0, 3.0], atol=1e-12)


def test_scaled_system(heisenberg):
    scaled = heisenberg.system.scaled([0.5, 0.5, 0.25])
    np.testing.assert_allclose(scaled.matrix(np.zeros(3)), np.diag([0.5, 0.5, 0.25]))


def test_affine_pushforward_of_constant_fields(euclidean2):
    M = np.array([[2.0, 0.0], [1.0, 1.0]])
    pushed = euclidean2.system.pushforward_affine(M, np.array([1.0, 0.0]))
    np.testing.assert_allclose(pushed.matrix(np.zeros(2)), M)
