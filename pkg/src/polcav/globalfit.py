"""Simultaneous fit of spring shift and damping versus detuning.

Free parameters are the cavity linewidth, the polarization splitting and the
two projected input powers, ``theta = (kappa_hz, splitting_hz, p_h, p_v)``.
Mechanics, ``g0``, wavelength and coupling efficiency are held fixed.

Residuals of the two observables are divided by the sample standard deviation
of the observed values so that both contribute on equal footing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CONSTANTS, TWO_PI, MechanicalMode, laser_angular_frequency
from .errors import DegenerateFit, NoConvergence
from .numerics import covariance_from_jacobian, levenberg_marquardt

CONDITION_LIMIT = 1e10


@dataclass(frozen=True)
class FixedParameters:
    mech: MechanicalMode
    g0: float
    wavelength: float = 1064e-9
    eta: float = 1.0


@dataclass(frozen=True, eq=False)
class GlobalFitResult:
    kappa: float
    splitting: float
    p_h: float
    p_v: float
    covariance: np.ndarray
    residual_rms: float
    iterations: int = 0

    @property
    def params(self):
        return np.array([self.kappa, self.splitting, self.p_h, self.p_v])

    @property
    def std_errors(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


def _mode_terms(delta, kappa, omega_m):
    """Damping and spring per unit ``A = g0^2 eta P / (hbar omega_L)`` with derivatives.

    Returns ``(G, S, dG/dkappa, dG/ddelta, dS/dkappa, dS/ddelta)``, all in
    angular units.
    """
    q = 0.25 * kappa**2

    def u(y):
        return 1.0 / (q + y**2)

    yp, ym = delta + omega_m, delta - omega_m
    u0, up, um = u(delta), u(yp), u(ym)
    # du/dkappa = -u^2 kappa/2 ; du/dy = -2 y u^2
    u0_k, up_k, um_k = -0.5 * kappa * u0**2, -0.5 * kappa * up**2, -0.5 * kappa * um**2
    u0_d, up_d, um_d = -2 * delta * u0**2, -2 * yp * up**2, -2 * ym * um**2

    diff = up - um
    G = kappa**2 * u0 * diff
    G_k = 2 * kappa * u0 * diff + kappa**2 * u0_k * diff + kappa**2 * u0 * (up_k - um_k)
    G_d = kappa**2 * (u0_d * diff + u0 * (up_d - um_d))

    sp, sm = yp * up, ym * um
    sp_k, sm_k = yp * up_k, ym * um_k
    sp_d, sm_d = up + yp * up_d, um + ym * um_d
    ssum = sp + sm
    S = kappa * u0 * ssum
    S_k = u0 * ssum + kappa * u0_k * ssum + kappa * u0 * (sp_k + sm_k)
    S_d = kappa * (u0_d * ssum + u0 * (sp_d + sm_d))
    return G, S, G_k, G_d, S_k, S_d


class GlobalFitProblem:
    """Residuals and Jacobian in the physical parameters ``(Hz, Hz, W, W)``."""

    def __init__(self, observations, fixed: FixedParameters):
        obs = np.asarray(observations, dtype=float)
        if obs.ndim != 2 or obs.shape[1] != 3:
            raise ValueError("observations must be (detuning_ref, delta_omega, gamma_eff) triples")
        obs = obs[np.all(np.isfinite(obs), axis=1)]
        self.detuning = obs[:, 0]
        self.spring_obs = obs[:, 1]
        self.gamma_obs = obs[:, 2]
        self.fixed = fixed
        n = obs.shape[0]
        self.sigma_spring = float(np.std(self.spring_obs, ddof=1)) if n > 1 else 1.0
        self.sigma_gamma = float(np.std(self.gamma_obs, ddof=1)) if n > 1 else 1.0
        if not self.sigma_spring > 0:
            self.sigma_spring = 1.0
        if not self.sigma_gamma > 0:
            self.sigma_gamma = 1.0
        self.unit_a = fixed.g0**2 * fixed.eta / (CONSTANTS.hbar * laser_angular_frequency(fixed.wavelength))

    def __len__(self):
        return self.detuning.size

    def model(self, theta):
        """Predicted ``(delta_omega, gamma_eff)`` arrays in rad/s."""
        kappa_hz, split_hz, p_h, p_v = theta
        kappa, split = TWO_PI * kappa_hz, TWO_PI * split_hz
        om = self.fixed.mech.omega_m
        gh, sh, *_ = _mode_terms(self.detuning, kappa, om)
        gv, sv, *_ = _mode_terms(self.detuning - split, kappa, om)
        a = self.unit_a
        spring = a * (p_h * sh + p_v * sv)
        gamma = a * (p_h * gh + p_v * gv) + self.fixed.mech.gamma_m
        return spring, gamma

    def residuals(self, theta):
        spring, gamma = self.model(theta)
        return np.concatenate([
            (spring - self.spring_obs) / self.sigma_spring,
            (gamma - self.gamma_obs) / self.sigma_gamma,
        ])

    def jacobian(self, theta):
        kappa_hz, split_hz, p_h, p_v = theta
        kappa, split = TWO_PI * kappa_hz, TWO_PI * split_hz
        om = self.fixed.mech.omega_m
        gh, sh, gh_k, _, sh_k, _ = _mode_terms(self.detuning, kappa, om)
        gv, sv, gv_k, gv_d, sv_k, sv_d = _mode_terms(self.detuning - split, kappa, om)
        a = self.unit_a
        # V is evaluated at detuning_ref - splitting
        j_spring = a * np.column_stack([
            TWO_PI * (p_h * sh_k + p_v * sv_k),
            -TWO_PI * p_v * sv_d,
            sh,
            sv,
        ])
        j_gamma = a * np.column_stack([
            TWO_PI * (p_h * gh_k + p_v * gv_k),
            -TWO_PI * p_v * gv_d,
            gh,
            gv,
        ])
        return np.vstack([j_spring / self.sigma_spring, j_gamma / self.sigma_gamma])


def _check_conditioning(J):
    A = J.T @ J
    d = np.diag(A)
    if np.any(~(d > 0)):
        raise DegenerateFit("a parameter has no influence on the residuals")
    s = 1.0 / np.sqrt(d)
    corr = A * np.outer(s, s)
    cond = np.linalg.cond(corr)
    if not cond < CONDITION_LIMIT:
        raise DegenerateFit(f"normal matrix is singular (condition number {cond:.3g})")


def global_fit(observations, fixed: FixedParameters, init, *, max_iter=200, xtol=1e-10) -> GlobalFitResult:
    """Fit (kappa, splitting, P_h, P_v) to spring and damping data.

    Parameters
    ----------
    observations : array_like, shape (N, 3)
        ``(detuning_ref, delta_omega, gamma_eff)`` in rad/s. Rows with
        non-finite entries are dropped.
    fixed : FixedParameters
    init : sequence of 4 floats
        Starting ``(kappa_hz, splitting_hz, p_h, p_v)``; all positive.

    Raises
    ------
    DegenerateFit
        If the data cannot separate the four parameters.
    NoConvergence
        If the iteration cap is reached.
    """
    problem = GlobalFitProblem(observations, fixed)
    if len(problem) < 8:
        raise ValueError("need at least 8 observations")
    init = np.asarray(init, dtype=float)
    if init.shape != (4,) or np.any(~(init > 0)):
        raise ValueError("init must be four positive numbers")

    scale = init.copy()

    def fun(p):
        return problem.residuals(p * scale)

    def jac(p):
        return problem.jacobian(p * scale) * scale

    try:
        res = levenberg_marquardt(fun, jac, np.ones(4), xtol=xtol, max_iter=max_iter,
                                  feasible=lambda p: bool(np.all(p > 0)))
    except NoConvergence:
        # a non-identifiable problem usually shows up as a stalled iteration
        _check_conditioning(jac(np.ones(4)))
        raise
    _check_conditioning(res.jacobian)
    cov_p = covariance_from_jacobian(res.jacobian, res.residuals)
    cov = cov_p * np.outer(scale, scale)
    cov = 0.5 * (cov + cov.T)
    theta = res.x * scale
    return GlobalFitResult(
        kappa=float(theta[0]),
        splitting=float(theta[1]),
        p_h=float(theta[2]),
        p_v=float(theta[3]),
        covariance=cov,
        residual_rms=float(math.sqrt(res.cost / res.residuals.size)),
        iterations=res.iterations,
    )


def observations_from_sweep(result):
    """``(N, 3)`` observation array from a :class:`~polcav.twomode.SweepResult`."""
    return np.array(
        [(p.detuning_ref, p.delta_omega_total, p.gamma_eff_total) for p in result.points],
        dtype=float,
    ).reshape(-1, 3)


def add_observation_noise(observations, fraction, seed):
    """Multiplicative Gaussian noise on both observables, detunings untouched."""
    obs = np.array(observations, dtype=float)
    rng = np.random.default_rng(seed)
    obs[:, 1:] *= 1.0 + fraction * rng.standard_normal((obs.shape[0], 2))
    return obs
