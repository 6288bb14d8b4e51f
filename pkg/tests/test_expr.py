import math

import numpy as np
import pytest

from cccharts.errors import DomainError, ExprSyntaxError, UnknownIdentifierError
from cccharts.expr import as_expr, differentiate, evaluate, gradient, parse, substitution_for_affine


def test_evaluate_single_point():
    e = parse("x1^2 + 3*x2", 2)
    assert evaluate(e, [2.0, 1.0]) == pytest.approx(7.0)


def test_evaluate_batch_shape():
    e = parse("x1 * x2", 2)
    pts = np.array([[1.0, 2.0], [3.0, 4.0], [-1.0, 0.5]])
    np.testing.assert_allclose(evaluate(e, pts), [2.0, 12.0, -0.5])


@pytest.mark.parametrize("text, point, expected", [
    ("-x1^2", [3.0], -9.0),
    ("2*x1 - x1/4", [4.0], 7.0),
    ("(x1 + 1)^(-1)", [1.0], 0.5),
    ("sqrt(abs(x1))", [-4.0], 2.0),
    ("exp(log(x1))", [2.5], 2.5),
    ("sin(pi/2) + cos(0)", [0.0], 2.0),
    ("sign(x1)", [-0.1], -1.0),
    ("1e-3*x1", [1000.0], 1.0),
])
def test_grammar_and_functions(text, point, expected):
    assert evaluate(parse(text, 1), point) == pytest.approx(expected)


def test_unknown_identifier_reports_offset():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("x1 + y", 2)
    assert info.value.offset == 5


@pytest.mark.parametrize("text", ["", "   ", "(x1", "x1 +", "x1 ** 2", "2^x1", "x1 $ 2", "foo(x1)"])
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        parse(text, 2)


def test_variable_index_out_of_range():
    with pytest.raises(ExprSyntaxError):
        parse("x3", 2)


@pytest.mark.parametrize("text, point", [("log(x1)", [-1.0]), ("1/x1", [0.0]), ("sqrt(x1)", [-2.0])])
def test_domain_errors(text, point):
    with pytest.raises(DomainError):
        evaluate(parse(text, 1), point)


def test_derivative_closed_form():
    e = parse("sin(x1*x2)", 2)
    d1 = differentiate(e, 1)
    x = [0.7, -1.3]
    assert evaluate(d1, x) == pytest.approx(-1.3 * math.cos(0.7 * -1.3))


def test_derivative_matches_finite_differences(rng):
    e = parse("exp(x1) * x2^3 - x1/(1 + x2^2)", 2)
    h = 1e-6
    for x in rng.uniform(-1.0, 1.0, size=(10, 2)):
        for k, step in ((1, [h, 0.0]), (2, [0.0, h])):
            fd = (evaluate(e, x + step) - evaluate(e, x - step)) / (2 * h)
            assert evaluate(differentiate(e, k), x) == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_gradient_length():
    grads = gradient(parse("x1*x2*x3", 3), 3)
    assert [evaluate(g, [1.0, 2.0, 3.0]) for g in grads] == pytest.approx([6.0, 3.0, 2.0])


def test_differentiate_rejects_zero_index():
    with pytest.raises(ValueError):
        differentiate(parse("x1", 1), 0)


def test_printed_text_parses_back(rng):
    e = parse("-(x1 - 2)^3 / (1 + abs(x2)) + cos(x1*x2)", 2)
    again = parse(e.to_text(), 2)
    pts = rng.uniform(-2.0, 2.0, size=(20, 2))
    np.testing.assert_allclose(evaluate(again, pts), evaluate(e, pts), rtol=1e-14, atol=1e-15)


def test_affine_substitution():
    e = parse("x1 * x2 + x2", 2)
    M = np.array([[2.0, 1.0], [0.0, -1.0]])
    b = np.array([0.5, 1.0])
    composed = e.substitute(substitution_for_affine(M, b))
    y = np.array([0.3, -0.8])
    assert evaluate(composed, y) == pytest.approx(evaluate(e, M @ y + b))


def test_as_expr_accepts_numbers_and_text():
    assert evaluate(as_expr(2.5, 2), [0.0, 0.0]) == 2.5
    assert evaluate(as_expr("x2", 2), [0.0, 4.0]) == 4.0
