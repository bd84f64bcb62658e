"""Root bracketing and damped least squares shared by the fitting code."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence


def bisect(f, lo, hi, *, ftol=0.0, max_iter=200):
    """Bisection on ``[lo, hi]`` where ``f(lo)`` and ``f(hi)`` differ in sign.

    Stops when ``|f(mid)| <= ftol`` or when the bracket can no longer be
    split in floating point, so with the default ``ftol=0`` the result is
    the root to machine resolution.
    """
    flo = f(lo)
    fhi = f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if math.copysign(1.0, flo) == math.copysign(1.0, fhi):
        raise ValueError("root is not bracketed")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fmid = f(mid)
        if fmid == 0 or abs(fmid) <= ftol:
            return mid
        if math.copysign(1.0, fmid) == math.copysign(1.0, flo):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    return lo if abs(flo) <= abs(fhi) else hi


@dataclass
class LeastSquaresResult:
    x: np.ndarray
    residuals: np.ndarray
    jacobian: np.ndarray
    cost: float
    iterations: int
    damping: float


def levenberg_marquardt(
    fun,
    jac,
    x0,
    *,
    x_scale=None,
    xtol=1e-10,
    max_iter=200,
    damping=1e-3,
    feasible=None,
):
    """Minimize ``sum(fun(x)**2)`` with a Levenberg-Marquardt iteration.

    The damping term is ``damping * diag(J^T J)`` (Marquardt scaling), so the
    iteration does not care about the units of the parameters. Damping
    starts at ``damping`` and is multiplied by 10 after a rejected step and
    divided by 10 after an accepted one.

    Convergence is declared when every component of the proposed step
    satisfies ``|dx_i| <= xtol * (|x_i| + x_scale_i)``.

    Parameters
    ----------
    fun, jac : callable
        Residual vector and its Jacobian (m x n) as functions of ``x``.
    x0 : array_like
        Starting point.
    x_scale : array_like, optional
        Absolute scale per parameter; guards the relative step test for
        parameters whose value may be near zero.
    feasible : callable, optional
        Steps to points where ``feasible(x)`` is False are rejected.

    Raises
    ------
    NoConvergence
        When ``max_iter`` iterations pass without meeting the step test.
    """
    x = np.array(x0, dtype=float)
    scale = np.zeros_like(x) if x_scale is None else np.asarray(x_scale, dtype=float)
    r = np.asarray(fun(x), dtype=float)
    cost = float(r @ r)
    if not math.isfinite(cost):
        raise NoConvergence("residual is not finite at the starting point")
    lam = damping
    J = np.asarray(jac(x), dtype=float)

    for it in range(1, max_iter + 1):
        A = J.T @ J
        g = J.T @ r
        d = np.diag(A).copy()
        d[d <= 0] = 1.0
        while True:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            if np.all(np.abs(step) <= xtol * (np.abs(x) + scale)):
                return LeastSquaresResult(x, r, J, cost, it, lam)
            x_new = x + step
            if feasible is not None and not feasible(x_new):
                lam *= 10.0
                continue
            r_new = np.asarray(fun(x_new), dtype=float)
            cost_new = float(r_new @ r_new)
            if math.isfinite(cost_new) and cost_new < cost:
                x, r, cost = x_new, r_new, cost_new
                lam = max(lam / 10.0, 1e-15)
                J = np.asarray(jac(x), dtype=float)
                break
            lam *= 10.0
            if lam > 1e30:
                # no descent direction left at this precision
                return LeastSquaresResult(x, r, J, cost, it, lam)

    raise NoConvergence(f"no convergence after {max_iter} iterations (cost {cost:.3e})")


def covariance_from_jacobian(J, residuals, n_params=None):
    """Parameter covariance ``s^2 (J^T J)^-1`` with ``s^2 = SSR / (m - n)``."""
    m, n = J.shape
    n = n if n_params is None else n_params
    dof = max(m - n, 1)
    s2 = float(residuals @ residuals) / dof
    return s2 * np.linalg.inv(J.T @ J)
