import numpy as np
import pytest

from flexbeam.expr import ExpressionError, function_and_derivatives, parse


def test_polynomial_and_derivatives():
    w, dw, d2w = function_and_derivatives("0.1 + 0.3*x - 0.2*x**2")
    x = np.array([-2.0, 0.0, 1.5])
    np.testing.assert_allclose(w(x), 0.1 + 0.3 * x - 0.2 * x**2)
    np.testing.assert_allclose(dw(x), 0.3 - 0.4 * x)
    np.testing.assert_allclose(d2w(x), -0.4)


def test_constants_broadcast():
    (f,) = function_and_derivatives("2.5", 0)
    assert f(np.zeros(4)).shape == (4,)
    _, dw, d2w = function_and_derivatives("1")
    assert np.all(dw(np.ones(3)) == 0) and d2w(np.ones(3)).shape == (3,)


def test_transcendental():
    w, dw, _ = function_and_derivatives("sin(3*x) + exp(-x) * tanh(x)")
    x = np.linspace(-1, 1, 5)
    np.testing.assert_allclose(w(x), np.sin(3 * x) + np.exp(-x) * np.tanh(x))
    np.testing.assert_allclose(dw(x), 3 * np.cos(3 * x) - np.exp(-x) * np.tanh(x) + np.exp(-x) / np.cosh(x) ** 2)


def test_piecewise():
    (f,) = function_and_derivatives("piecewise(x < 0, -1, (x >= 0) & (x < 0.5), 2, 0)", 0)
    np.testing.assert_allclose(f(np.array([-0.5, 0.25, 0.75])), [-1, 2, 0])


@pytest.mark.parametrize("text", ["__import__('os')", "x.real", "y + 1", "lambda: 1", "open('f')", "", "1 +"])
def test_rejects(text):
    with pytest.raises(ExpressionError):
        parse(text)
