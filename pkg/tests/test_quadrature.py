import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as sci

from shortfall.errors import DomainError, NumericalError
from shortfall.quadrature import GAUSS_WEIGHTS, KRONROD_WEIGHTS, QuadratureConfig, integrate


def test_rule_weights_sum_to_two():
    assert KRONROD_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
    assert GAUSS_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)


@pytest.mark.parametrize("f, a, b, exact", [
    (np.exp, 0.0, 1.0, math.e - 1.0),
    (np.sin, 0.0, math.pi, 2.0),
    (lambda x: 1.0 / np.sqrt(x), 0.0, 1.0, 2.0),
    (lambda x: np.log(x), 0.0, 1.0, -1.0),
])
def test_known_integrals(f, a, b, exact):
    res = integrate(f, a, b)
    assert res.value == pytest.approx(exact, rel=1e-9, abs=1e-12)


def test_power_singularity_against_scipy():
    f = lambda x: x ** (-2.0 / 3.0) * np.exp(-x)
    ref, _ = sci.quad(lambda x: x ** (-2.0 / 3.0) * math.exp(-x), 0, 5, limit=500)
    assert integrate(f, 0.0, 5.0).value == pytest.approx(ref, rel=1e-8)


@given(st.floats(-5, 5), st.floats(0.01, 5), st.integers(0, 6))
def test_polynomials_exact(a, width, degree):
    b = a + width
    exact = (b ** (degree + 1) - a ** (degree + 1)) / (degree + 1)
    assert integrate(lambda x: x**degree, a, b).value == pytest.approx(exact, rel=1e-10, abs=1e-10)


def test_kink_at_breakpoint():
    f = lambda x: np.abs(x - 0.3)
    fwd = integrate(f, 0.0, 1.0, breakpoints=[0.3]).value
    assert fwd == pytest.approx(0.5 * 0.09 + 0.5 * 0.49, abs=1e-14)


def test_nonfinite_integrand_raises():
    with pytest.raises(NumericalError):
        integrate(lambda x: np.full_like(x, np.nan), 0.0, 1.0)


def test_budget_exhaustion_reports_estimate():
    cfg = QuadratureConfig(rel_tol=1e-14, abs_tol=1e-300, max_subdivisions=3)
    with pytest.raises(NumericalError) as info:
        integrate(lambda x: np.sin(1.0 / x), 1e-4, 1.0, cfg)
    assert info.value.estimate is not None


@pytest.mark.parametrize("kw", [{"rel_tol": 0.0}, {"rel_tol": 1.5}, {"abs_tol": -1}, {"max_subdivisions": 0}])
def test_config_validation(kw):
    with pytest.raises(DomainError):
        QuadratureConfig(**kw)
