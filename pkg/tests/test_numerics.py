import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polcav.errors import NoConvergence
from polcav.numerics import bisect, covariance_from_jacobian, levenberg_marquardt


def test_bisect_machine_precision():
    root = bisect(lambda x: x * x - 2.0, 0.0, 2.0)
    assert abs(root - math.sqrt(2.0)) <= 2 * math.ulp(math.sqrt(2.0))


def test_bisect_endpoints_and_bracket():
    assert bisect(lambda x: x, 0.0, 1.0) == 0.0
    assert bisect(lambda x: x - 1.0, 0.0, 1.0) == 1.0
    with pytest.raises(ValueError):
        bisect(lambda x: x * x + 1.0, -1.0, 1.0)


def test_bisect_ftol_stops_early():
    calls = []

    def f(x):
        calls.append(x)
        return x - 0.3

    bisect(f, 0.0, 1.0, ftol=0.1)
    assert len(calls) < 10


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e6, 1e6), st.floats(1e-3, 1e3))
def test_bisect_monotone_inversion(target, slope):
    f = lambda x: slope * x + math.atan(x) - target  # noqa: E731
    lo, hi = -1e10, 1e10
    x = bisect(f, lo, hi)
    assert abs(f(x)) <= 1e-6 * max(1.0, abs(target))


def test_lm_exponential():
    t = np.linspace(0, 4, 50)
    y = 2.5 * np.exp(-1.3 * t)

    def fun(p):
        return p[0] * np.exp(-p[1] * t) - y

    def jac(p):
        e = np.exp(-p[1] * t)
        return np.column_stack([e, -p[0] * t * e])

    res = levenberg_marquardt(fun, jac, [1.0, 0.5])
    np.testing.assert_allclose(res.x, [2.5, 1.3], rtol=1e-10)
    assert res.cost < 1e-18


def test_lm_iteration_cap():
    def fun(p):
        return np.array([p[0] - 1.0, 10 * (p[1] - p[0] ** 2)])

    def jac(p):
        return np.array([[1.0, 0.0], [-20 * p[0], 10.0]])

    with pytest.raises(NoConvergence):
        levenberg_marquardt(fun, jac, [-1.2, 1.0], max_iter=2)
    res = levenberg_marquardt(fun, jac, [-1.2, 1.0])
    np.testing.assert_allclose(res.x, [1.0, 1.0], rtol=1e-8)


def test_lm_respects_feasible_region():
    def fun(p):
        return np.array([p[0] + 1.0])

    def jac(p):
        return np.array([[1.0]])

    res = levenberg_marquardt(fun, jac, [2.0], feasible=lambda p: p[0] > 0)
    assert res.x[0] > 0


def test_covariance_linear_model():
    rng = np.random.default_rng(0)
    J = np.column_stack([np.ones(100), np.linspace(0, 1, 100)])
    r = rng.standard_normal(100)
    cov = covariance_from_jacobian(J, r)
    s2 = r @ r / 98
    np.testing.assert_allclose(cov, s2 * np.linalg.inv(J.T @ J), rtol=1e-14)
