"""Thermal displacement spectra, Lorentzian fits and cavity ringdown fits.

Spectra live on an ordinary-frequency grid (Hz) with PSD in m^2/Hz. The
synthetic PSD is a Lorentzian whose integral over all frequencies is the
equipartition variance ``k_B T_eff / (m_eff omega_m^2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import CONSTANTS, TWO_PI, MechanicalMode
from .errors import InstabilityError, NoPeak, NotDecaying
from .numerics import covariance_from_jacobian, levenberg_marquardt
from .twomode import TwoModeSystem, sweep


@dataclass(frozen=True, eq=False)
class NoiseSpectrum:
    freq: np.ndarray
    psd: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        freq = np.asarray(self.freq, dtype=float)
        psd = np.asarray(self.psd, dtype=float)
        if freq.ndim != 1 or freq.shape != psd.shape:
            raise ValueError("freq and psd must be 1-D arrays of equal length")
        if freq.size > 1 and np.any(np.diff(freq) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        if np.any(psd < 0):
            raise ValueError("psd must be non-negative")
        object.__setattr__(self, "freq", freq)
        object.__setattr__(self, "psd", psd)


@dataclass(frozen=True)
class LorentzianFit:
    center: float
    fwhm: float
    area: float
    offset: float
    center_err: float
    fwhm_err: float
    area_err: float
    offset_err: float
    residual_rms: float
    iterations: int = 0


def lorentzian_psd(freq, center, fwhm, area, offset=0.0):
    """Area-normalized Lorentzian plus a constant floor."""
    half = 0.5 * fwhm
    f = np.asarray(freq, dtype=float)
    return area * half / math.pi / ((f - center) ** 2 + half**2) + offset


def displacement_variance(t_eff, mech: MechanicalMode):
    return CONSTANTS.k_B * t_eff / (mech.effective_mass * mech.omega_m**2)


def lorentzian_spectrum(freq, center, fwhm, area, *, offset=0.0, noise_fraction=0.0, seed=None,
                        metadata=None) -> NoiseSpectrum:
    """Lorentzian PSD with optional per-bin multiplicative Gaussian noise."""
    freq = np.asarray(freq, dtype=float)
    psd = lorentzian_psd(freq, center, fwhm, area, offset)
    if noise_fraction:
        rng = np.random.default_rng(seed)
        psd = np.clip(psd * (1.0 + noise_fraction * rng.standard_normal(freq.size)), 0.0, None)
    meta = {"seed": seed, "rbw": float(np.median(np.diff(freq))) if freq.size > 1 else math.nan}
    meta.update(metadata or {})
    return NoiseSpectrum(freq, psd, meta)


def synthesize_spectrum(sys: TwoModeSystem, detuning_ref, freq, noise_fraction=0.0, seed=None,
                        *, offset=0.0, quantum_bath=False) -> NoiseSpectrum:
    """Displacement PSD of the mechanical mode with the laser at ``detuning_ref``.

    Center ``(omega_m + delta_omega) / 2 pi``, FWHM ``gamma_eff / 2 pi``, area
    from equipartition at the effective temperature.
    """
    point = sweep(sys, [detuning_ref], quantum_bath=quantum_bath).points[0]
    if not point.stable:
        raise InstabilityError(point.instability)
    center = (sys.mech.omega_m + point.delta_omega_total) / TWO_PI
    fwhm = point.gamma_eff_total / TWO_PI
    area = displacement_variance(point.t_eff, sys.mech)
    return lorentzian_spectrum(
        freq, center, fwhm, area, offset=offset, noise_fraction=noise_fraction, seed=seed,
        metadata={"detuning_ref": float(detuning_ref), "t_eff": point.t_eff},
    )


# -- Lorentzian fit ---------------------------------------------------------

def _moving_average(y, n=5):
    if y.size < n:
        return y.copy()
    return np.convolve(y, np.ones(n) / n, mode="same")


def _initial_guess(f, y):
    i_max = int(np.argmax(y))
    edge = max(1, y.size // 20)
    offset = 0.5 * (np.mean(y[:edge]) + np.mean(y[-edge:]))
    height = y[i_max] - offset
    half = offset + 0.5 * height

    left = i_max
    while left > 0 and y[left] > half:
        left -= 1
    right = i_max
    while right < y.size - 1 and y[right] > half:
        right += 1

    def crossing(i, j):
        # linear interpolation of the half-maximum crossing between bins i, j
        if y[i] == y[j]:
            return f[i]
        return f[i] + (half - y[i]) * (f[j] - f[i]) / (y[j] - y[i])

    f_left = crossing(left, left + 1) if y[left] <= half else f[0]
    f_right = crossing(right - 1, right) if y[right] <= half else f[-1]
    fwhm = f_right - f_left
    if not fwhm > 0:
        fwhm = (f[-1] - f[0]) / 10.0
    area = np.trapezoid(y - offset, f)
    if not area > 0:
        area = height * fwhm * math.pi / 2.0
    return f[i_max], fwhm, area, offset


def _check_peak(y):
    smooth = _moving_average(y)
    baseline = np.median(y)
    noise = 1.4826 * np.median(np.abs(np.diff(y))) / math.sqrt(2.0)
    if not smooth.max() - baseline > 3.0 * noise or not y.max() > baseline:
        raise NoPeak("no maximum stands out of the noise floor")


def fit_lorentzian(spec: NoiseSpectrum, *, max_iter=200, xtol=1e-10) -> LorentzianFit:
    """Least-squares fit of ``lorentzian_psd`` (center, FWHM, area, offset).

    Raises
    ------
    NoPeak
        If no maximum exceeds the floor by three times the bin-to-bin noise.
    NoConvergence
        If the iteration cap is reached.
    """
    f, y = spec.freq, spec.psd
    if f.size < 5:
        raise NoPeak("need at least 5 bins")
    _check_peak(y)
    c0, w0, a0, o0 = _initial_guess(f, y)

    # dimensionless problem: frequencies in units of w0 around c0, PSD in units of ymax
    ys = float(y.max())
    x = (f - c0) / w0
    t = y / ys

    def model_parts(p):
        c, w, a, o = p
        h = 0.5 * w
        dx = x - c
        den = dx**2 + h**2
        return c, w, a, o, h, dx, den

    def fun(p):
        _, _, a, o, h, _, den = model_parts(p)
        return a * h / math.pi / den + o - t

    def jac(p):
        _, _, a, _, h, dx, den = model_parts(p)
        d_a = h / math.pi / den
        d_c = a * h / math.pi * 2.0 * dx / den**2
        d_w = 0.5 * a / math.pi * (dx**2 - h**2) / den**2
        return np.column_stack([d_c, d_w, d_a, np.ones_like(x)])

    p0 = np.array([0.0, 1.0, a0 / (ys * w0), o0 / ys])
    res = levenberg_marquardt(
        fun, jac, p0,
        x_scale=[1.0, 0.0, 0.0, 1.0],
        xtol=xtol, max_iter=max_iter,
        feasible=lambda p: p[1] > 0 and p[2] > 0,
    )
    c, w, a, o = res.x
    scale = np.array([w0, w0, ys * w0, ys])
    try:
        cov = covariance_from_jacobian(res.jacobian, res.residuals)
        err = np.sqrt(np.clip(np.diag(cov), 0.0, None)) * scale
    except np.linalg.LinAlgError:
        err = np.full(4, math.inf)
    rms = float(np.sqrt(np.mean(res.residuals**2))) * ys
    return LorentzianFit(
        center=float(c0 + c * w0),
        fwhm=float(w * w0),
        area=float(a * ys * w0),
        offset=float(o * ys),
        center_err=float(err[0]),
        fwhm_err=float(err[1]),
        area_err=float(err[2]),
        offset_err=float(err[3]),
        residual_rms=rms,
        iterations=res.iterations,
    )


def temperature_from_fit(fit: LorentzianFit, mech: MechanicalMode) -> float:
    """Mode temperature from the fitted area via equipartition."""
    return mech.effective_mass * mech.omega_m**2 * fit.area / CONSTANTS.k_B


# -- ringdown ---------------------------------------------------------------

@dataclass(frozen=True)
class RingdownFit:
    kappa: float
    tau: float
    amplitude: float
    background: float
    tau_err: float = math.nan


def tau_from_kappa(kappa_hz):
    """Intensity decay time for a linewidth (FWHM) given in Hz."""
    return 1.0 / (TWO_PI * kappa_hz)


def kappa_from_tau(tau):
    return 1.0 / (TWO_PI * tau)


def ringdown_fit(time_series, *, max_iter=200) -> RingdownFit:
    """Fit ``I0 exp(-t / tau) + b`` to the samples after the intensity peak.

    ``time_series`` is a sequence of ``(t, intensity)`` pairs or an (N, 2)
    array. The returned ``kappa`` is the FWHM linewidth in Hz.

    Raises
    ------
    NotDecaying
        If the signal does not fall after the peak or the fitted decay
        time is not positive.
    """
    data = np.asarray(time_series, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("time_series must be a sequence of (t, intensity) pairs")
    t, y = data[:, 0], data[:, 1]
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("time samples must be strictly increasing")
    i0 = int(np.argmax(y))
    t, y = t[i0:] - t[i0], y[i0:]
    if t.size < 4:
        raise NotDecaying("fewer than 4 samples after the peak")

    tail = max(2, t.size // 10)
    b0 = float(np.mean(y[-tail:]))
    a0 = float(y[0] - b0)
    ys = float(np.max(np.abs(y)))
    if not a0 > 1e-12 * ys:
        raise NotDecaying("signal does not fall after its peak")
    above = (y - b0) > 0.2 * a0
    above[0] = True
    idx = np.nonzero(above)[0]
    if idx.size >= 3 and t[idx[-1]] > 0:
        slope = np.polyfit(t[idx], np.log(y[idx] - b0), 1)[0]
    else:
        slope = -1.0 / max(t[-1], 1e-300)
    if not slope < 0:
        raise NotDecaying("log-intensity does not decrease")
    tau0 = -1.0 / slope
    x = t / tau0

    def fun(p):
        a, k, b = p
        return (a * np.exp(-k * x) + b - y) / ys

    def jac(p):
        a, k, _ = p
        e = np.exp(-k * x)
        return np.column_stack([e, -a * x * e, np.ones_like(x)]) / ys

    res = levenberg_marquardt(fun, jac, [a0, 1.0, b0], x_scale=[0.0, 0.0, ys],
                              max_iter=max_iter)
    a, k, b = res.x
    if not k > 0 or not a > 0:
        raise NotDecaying(f"fitted decay rate {k / tau0} 1/s is not positive")
    tau = tau0 / k
    try:
        cov = covariance_from_jacobian(res.jacobian, res.residuals)
        tau_err = tau * math.sqrt(max(cov[1, 1], 0.0)) / k
    except np.linalg.LinAlgError:
        tau_err = math.inf
    return RingdownFit(kappa=kappa_from_tau(tau), tau=float(tau), amplitude=float(a),
                       background=float(b), tau_err=float(tau_err))
