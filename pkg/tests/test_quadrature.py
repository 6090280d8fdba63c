import math

import numpy as np
import pytest

from flocbal.quadrature import (QuadratureError, adaptive_gl, adaptive_gl_graded, adaptive_gl_log,
                                gauss_legendre, mapped_rule)


@pytest.mark.parametrize("order", [1, 2, 4, 7])
def test_gauss_legendre_exact_for_polynomials(order):
    x, w = gauss_legendre(order)
    for k in range(2 * order):
        exact = (1 - (-1) ** (k + 1)) / (k + 1)
        assert np.dot(w, x ** k) == pytest.approx(exact, abs=1e-14)


def test_mapped_rule_shapes_and_degenerate():
    x, w = mapped_rule(np.array([0.0, 1.0, 2.0]), np.array([1.0, 1.0, 5.0]), 3)
    assert x.shape == w.shape == (3, 3)
    assert np.all(w[1] == 0.0)
    assert w[2].sum() == pytest.approx(3.0, rel=1e-15)


def test_adaptive_smooth_and_kinked():
    assert adaptive_gl(np.exp, 0.0, 1.0, tol=1e-13) == pytest.approx(math.e - 1, rel=1e-14)
    assert adaptive_gl(lambda x: np.abs(x - 0.3), 0.0, 1.0, tol=1e-12, breakpoints=(0.3,)) \
        == pytest.approx(0.045 + 0.245, rel=1e-13)
    assert adaptive_gl(np.sqrt, 0.0, 1.0, tol=1e-10) == pytest.approx(2 / 3, abs=1e-10)


def test_adaptive_empty_interval():
    assert adaptive_gl(np.exp, 2.0, 2.0) == 0.0


def test_log_and_graded_maps():
    # 1/(x - anchor) with the lower end a hair above the anchor
    val = adaptive_gl_log(lambda x: 1.0 / x, 0.0, 1e-9, 2.0, tol=1e-11)
    assert val == pytest.approx(math.log(2e9), rel=1e-12)
    with pytest.raises(ValueError):
        adaptive_gl_log(np.exp, 1.0, 1.0, 2.0)
    val = adaptive_gl_graded(lambda x: x ** -0.5, 0.0, 1.0, tol=1e-11)
    assert val == pytest.approx(2.0, abs=1e-9)
    val = adaptive_gl_graded(lambda x: -np.log(x), 0.0, 1.0, tol=1e-11)
    assert val == pytest.approx(1.0, abs=1e-9)


def test_non_convergence_raises():
    with pytest.raises(QuadratureError):
        adaptive_gl(lambda x: np.sin(1.0 / np.maximum(x, 1e-300)), 0.0, 1.0, tol=1e-15, max_refine=5)
