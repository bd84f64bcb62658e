"""Single optical mode coupled to a mechanical mode, linearized theory.

Conventions
-----------
* Everything in this module is angular frequency (rad/s). Conversion from
  the Hz values people quote happens at the edges (config, CLI).
* Detuning is ``omega_laser - omega_mode``: negative is red (cooling),
  positive is blue (anti-damping).
* ``kappa`` and ``gamma_m`` are full widths at half maximum.

The ``*_array`` helpers are the vectorized kernels; the functions taking an
:class:`OpticalMode` are the scalar entry points built on them.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.constants as _c

from .errors import InstabilityError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Constants:
    hbar: float = _c.hbar
    k_B: float = _c.k
    c: float = _c.c


CONSTANTS = Constants()


class Polarization(str, enum.Enum):
    H = "H"
    V = "V"


@dataclass(frozen=True)
class OpticalMode:
    """One polarization eigenmode of the cavity as seen by the laser.

    Attributes
    ----------
    detuning : float
        ``omega_laser - omega_mode`` in rad/s.
    linewidth : float
        Cavity energy decay rate (FWHM) in rad/s.
    input_power : float
        Laser power projected onto this mode, W.
    wavelength : float
        Laser wavelength, m.
    coupling_efficiency : float
        Lumped input coupling, 0..1.
    """

    detuning: float
    linewidth: float
    input_power: float
    wavelength: float = 1064e-9
    coupling_efficiency: float = 1.0
    polarization: Polarization = Polarization.H

    def __post_init__(self):
        if not self.linewidth > 0:
            raise ValueError(f"linewidth must be > 0, got {self.linewidth}")
        if not self.input_power >= 0:
            raise ValueError(f"input_power must be >= 0, got {self.input_power}")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be > 0, got {self.wavelength}")
        if not 0.0 <= self.coupling_efficiency <= 1.0:
            raise ValueError("coupling_efficiency must lie in [0, 1]")
        if not math.isfinite(self.detuning):
            raise ValueError("detuning must be finite")

    def with_detuning(self, detuning: float) -> "OpticalMode":
        return replace(self, detuning=float(detuning))


@dataclass(frozen=True)
class MechanicalMode:
    """Mechanical resonance (rad/s, kg, K)."""

    omega_m: float
    gamma_m: float
    effective_mass: float = 100e-12
    bath_temperature: float = 300.0

    def __post_init__(self):
        if not self.omega_m > 0:
            raise ValueError("omega_m must be > 0")
        if not self.gamma_m > 0:
            raise ValueError("gamma_m must be > 0")
        if not self.effective_mass > 0:
            raise ValueError("effective_mass must be > 0")
        if not self.bath_temperature >= 0:
            raise ValueError("bath_temperature must be >= 0")

    @property
    def quality_factor(self) -> float:
        return self.omega_m / self.gamma_m


def laser_angular_frequency(wavelength):
    return TWO_PI * CONSTANTS.c / wavelength


# -- vectorized kernels -----------------------------------------------------

def photon_number_array(detuning, kappa, power, wavelength=1064e-9, eta=1.0):
    detuning = np.asarray(detuning, dtype=float)
    omega_l = laser_angular_frequency(wavelength)
    return eta * kappa * power / (CONSTANTS.hbar * omega_l * ((0.5 * kappa) ** 2 + detuning**2))


def damping_bracket(detuning, kappa, omega_m):
    q = (0.5 * kappa) ** 2
    return kappa / (q + (detuning + omega_m) ** 2) - kappa / (q + (detuning - omega_m) ** 2)


def spring_bracket(detuning, kappa, omega_m):
    q = (0.5 * kappa) ** 2
    plus = detuning + omega_m
    minus = detuning - omega_m
    return plus / (q + plus**2) + minus / (q + minus**2)


def optical_damping_array(detuning, kappa, power, omega_m, g0, wavelength=1064e-9, eta=1.0):
    n = photon_number_array(detuning, kappa, power, wavelength, eta)
    return n * g0**2 * damping_bracket(detuning, kappa, omega_m)


def optical_spring_array(detuning, kappa, power, omega_m, g0, wavelength=1064e-9, eta=1.0):
    n = photon_number_array(detuning, kappa, power, wavelength, eta)
    return n * g0**2 * spring_bracket(detuning, kappa, omega_m)


# -- scalar operations ------------------------------------------------------

def intracavity_photon_number(mode: OpticalMode) -> float:
    """Mean intracavity photon number for a coherent drive of this mode."""
    return float(
        photon_number_array(
            mode.detuning, mode.linewidth, mode.input_power, mode.wavelength, mode.coupling_efficiency
        )
    )


def optical_damping(mode: OpticalMode, mech: MechanicalMode, g0: float) -> float:
    """Light-induced damping rate (rad/s); positive on the red side."""
    if g0 < 0:
        raise ValueError("g0 must be >= 0")
    return float(
        optical_damping_array(
            mode.detuning, mode.linewidth, mode.input_power, mech.omega_m, g0,
            mode.wavelength, mode.coupling_efficiency,
        )
    )


def optical_spring(mode: OpticalMode, mech: MechanicalMode, g0: float) -> float:
    """Light-induced shift of the mechanical frequency (rad/s)."""
    if g0 < 0:
        raise ValueError("g0 must be >= 0")
    return float(
        optical_spring_array(
            mode.detuning, mode.linewidth, mode.input_power, mech.omega_m, g0,
            mode.wavelength, mode.coupling_efficiency,
        )
    )


def minimum_phonon_number(kappa: float, omega_m: float) -> float:
    """Resolved-sideband cooling limit ``(kappa / 4 omega_m)**2``."""
    if kappa < 0 or not omega_m > 0:
        raise ValueError("need kappa >= 0 and omega_m > 0")
    return (kappa / (4.0 * omega_m)) ** 2


def thermal_occupation(temperature: float, omega_m: float) -> float:
    """Bose-Einstein occupation of a mode at ``omega_m`` (rad/s)."""
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    if temperature == 0:
        return 0.0
    x = CONSTANTS.hbar * omega_m / (CONSTANTS.k_B * temperature)
    return 1.0 / math.expm1(x)


def classical_occupation(temperature: float, omega_m: float) -> float:
    """Equipartition occupation ``k_B T / (hbar omega_m)``."""
    return CONSTANTS.k_B * temperature / (CONSTANTS.hbar * omega_m)


def occupation_to_temperature(n, omega_m):
    return CONSTANTS.hbar * omega_m * n / CONSTANTS.k_B


def effective_occupation(gamma_m, gamma_opt, n_th, n_min):
    """Damping-weighted mean of the bath and cooling-limit occupations."""
    total = gamma_m + gamma_opt
    if np.any(np.asarray(total) <= 0):
        raise InstabilityError(
            f"total damping gamma_m + gamma_opt = {np.min(total):.6g} rad/s is not positive"
        )
    return (n_th * gamma_m + n_min * gamma_opt) / total


def effective_temperature(gamma_m, gamma_opt, n_th, n_min, omega_m):
    """Mode temperature (K) under combined bath and optical damping.

    Raises
    ------
    InstabilityError
        If ``gamma_m + gamma_opt <= 0``.
    """
    n_eff = effective_occupation(gamma_m, gamma_opt, n_th, n_min)
    return occupation_to_temperature(n_eff, omega_m)


def cooperativity(n_cav, g0, kappa, gamma_m):
    """Multi-photon cooperativity ``4 n g0^2 / (kappa gamma_m)``."""
    if not kappa > 0 or not gamma_m > 0:
        raise ValueError("kappa and gamma_m must be > 0")
    return 4.0 * n_cav * g0**2 / (kappa * gamma_m)
