"""Two polarization modes driven by one laser tone.

The H mode is taken as the lower-frequency mode and every sweep is indexed by
the detuning from it (``detuning_ref``). The V mode sits ``splitting`` above,
so for the same laser its detuning is ``detuning_ref - splitting``. A laser
between the two modes is therefore blue of H and red of V.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import core
from .core import TWO_PI, MechanicalMode, OpticalMode, Polarization
from .errors import InstabilityError, NoCancellation
from .numerics import bisect


@dataclass(frozen=True)
class TwoModeSystem:
    mode_h: OpticalMode
    mode_v: OpticalMode
    splitting: float
    g0: float
    mech: MechanicalMode

    def __post_init__(self):
        if not self.splitting > 0:
            raise ValueError("splitting must be > 0")
        if self.g0 < 0:
            raise ValueError("g0 must be >= 0")
        if self.mode_h.linewidth != self.mode_v.linewidth:
            raise ValueError("both modes must share the same linewidth")
        if self.mode_h.wavelength != self.mode_v.wavelength:
            raise ValueError("both modes must share the same wavelength")
        gap = self.mode_h.detuning - self.mode_v.detuning
        if not math.isclose(gap, self.splitting, rel_tol=1e-9, abs_tol=1e-9):
            raise ValueError(
                f"mode detunings differ by {gap} rad/s, expected the splitting {self.splitting}"
            )

    @classmethod
    def from_parameters(
        cls,
        kappa,
        splitting,
        p_h,
        p_v,
        g0,
        mech,
        *,
        wavelength=1064e-9,
        eta=1.0,
        detuning_ref=0.0,
    ):
        """Build a system from angular-frequency parameters (rad/s, W)."""
        mode_h = OpticalMode(detuning_ref, kappa, p_h, wavelength, eta, Polarization.H)
        mode_v = OpticalMode(detuning_ref - splitting, kappa, p_v, wavelength, eta, Polarization.V)
        return cls(mode_h, mode_v, splitting, g0, mech)

    @property
    def kappa(self):
        return self.mode_h.linewidth

    @property
    def detuning_ref(self):
        return self.mode_h.detuning

    def at(self, detuning_ref) -> "TwoModeSystem":
        """The same system with the laser moved to ``detuning_ref``."""
        return replace(
            self,
            mode_h=self.mode_h.with_detuning(detuning_ref),
            mode_v=self.mode_v.with_detuning(detuning_ref - self.splitting),
        )

    def with_powers(self, p_h, p_v) -> "TwoModeSystem":
        return replace(
            self,
            mode_h=replace(self.mode_h, input_power=p_h),
            mode_v=replace(self.mode_v, input_power=p_v),
        )


def reference_system(g0_hz=1.6, t_bath=300.0, m_eff=100e-12) -> TwoModeSystem:
    """The 5 cm experiment at the fitted parameters (52 kHz, 82.4 kHz, 2.19/1.85 uW)."""
    mech = MechanicalMode(TWO_PI * 222e3, TWO_PI * 19.0, m_eff, t_bath)
    return TwoModeSystem.from_parameters(
        TWO_PI * 52e3, TWO_PI * 82.4e3, 2.19e-6, 1.85e-6, TWO_PI * g0_hz, mech
    )


# -- composition ------------------------------------------------------------

def mode_responses(sys: TwoModeSystem, detuning_ref):
    """Per-mode ``(spring_h, spring_v, damping_h, damping_v)`` on a detuning array."""
    x = np.asarray(detuning_ref, dtype=float)
    h, v, m = sys.mode_h, sys.mode_v, sys.mech
    args_h = (h.linewidth, h.input_power, m.omega_m, sys.g0, h.wavelength, h.coupling_efficiency)
    args_v = (v.linewidth, v.input_power, m.omega_m, sys.g0, v.wavelength, v.coupling_efficiency)
    x_v = x - sys.splitting
    return (
        core.optical_spring_array(x, *args_h),
        core.optical_spring_array(x_v, *args_v),
        core.optical_damping_array(x, *args_h),
        core.optical_damping_array(x_v, *args_v),
    )


def total_optical_damping(sys: TwoModeSystem, detuning_ref):
    _, _, g_h, g_v = mode_responses(sys, detuning_ref)
    return g_h + g_v


def combined_response(sys: TwoModeSystem, detuning_ref: float):
    """Total frequency shift and total mechanical linewidth (rad/s).

    Both modes act on the resonator independently, so the optical spring
    shifts add and the optical damping rates add on top of ``gamma_m``.
    """
    s_h, s_v, g_h, g_v = mode_responses(sys, detuning_ref)
    return float(s_h + s_v), float(g_h + g_v + sys.mech.gamma_m)


# -- sweep ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    detuning_ref: float
    delta_omega_total: float
    gamma_eff_total: float
    t_eff: float
    n_eff: float
    instability: str | None = None

    @property
    def stable(self):
        return self.instability is None


@dataclass(frozen=True)
class SweepResult:
    points: tuple
    system: TwoModeSystem
    grid: tuple = field(default=())
    quantum_bath: bool = False

    def __len__(self):
        return len(self.points)

    def column(self, name):
        return np.array([getattr(p, name) for p in self.points], dtype=float)


def bath_occupation(mech: MechanicalMode, quantum=False):
    """Bath phonon number fed to the effective-temperature average.

    By default this is the equipartition value ``k_B T / hbar omega_m`` so
    that a point with no net optical damping reports exactly the bath
    temperature. ``quantum=True`` uses the Bose-Einstein occupation instead.
    """
    if quantum:
        return core.thermal_occupation(mech.bath_temperature, mech.omega_m)
    return core.classical_occupation(mech.bath_temperature, mech.omega_m)


def sweep(sys: TwoModeSystem, grid, *, quantum_bath=False) -> SweepResult:
    """Evaluate spring, damping and mode temperature over a detuning grid.

    Points where the total damping is not positive are kept, with
    ``t_eff`` and ``n_eff`` set to NaN and the reason stored in
    ``instability``.
    """
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("detuning grid must be strictly increasing")
    if grid.size == 0:
        return SweepResult((), sys, (), quantum_bath)

    s_h, s_v, g_h, g_v = mode_responses(sys, grid)
    gamma_opt = g_h + g_v
    n_th = bath_occupation(sys.mech, quantum_bath)
    n_min = core.minimum_phonon_number(sys.kappa, sys.mech.omega_m)

    points = []
    for x, spring, g_opt in zip(grid, s_h + s_v, gamma_opt):
        gamma_eff = g_opt + sys.mech.gamma_m
        try:
            n_eff = core.effective_occupation(sys.mech.gamma_m, g_opt, n_th, n_min)
        except InstabilityError as exc:
            points.append(SweepPoint(float(x), float(spring), float(gamma_eff), math.nan, math.nan, str(exc)))
            continue
        t_eff = core.occupation_to_temperature(n_eff, sys.mech.omega_m)
        points.append(SweepPoint(float(x), float(spring), float(gamma_eff), float(t_eff), float(n_eff)))
    return SweepResult(tuple(points), sys, tuple(float(x) for x in grid), quantum_bath)


# -- cancellation -----------------------------------------------------------

def cancellation_detunings(sys: TwoModeSystem, n_scan=4001):
    """Every zero of the total optical damping strictly between the modes.

    The open interval ``(0, splitting)`` is scanned on ``n_scan`` points and
    each sign change is refined by bisection to floating-point resolution.
    """
    if not (sys.mode_h.input_power > 0 and sys.mode_v.input_power > 0):
        raise NoCancellation("both modes need nonzero power to cancel")
    x = np.linspace(0.0, sys.splitting, n_scan)[1:-1]
    vals = total_optical_damping(sys, x)

    def f(d):
        return float(total_optical_damping(sys, d))

    roots = [float(xi) for xi, v in zip(x, vals) if v == 0.0]
    s = np.sign(vals)
    for i in np.nonzero(s[:-1] * s[1:] < 0)[0]:
        roots.append(bisect(f, float(x[i]), float(x[i + 1])))
    if not roots:
        raise NoCancellation("total optical damping keeps one sign between the modes")
    return sorted(roots)


def cancellation_detuning(sys: TwoModeSystem) -> float:
    """The zero of the total optical damping closest to the midpoint.

    With equal powers this is exactly ``splitting / 2``. When the modes
    overlap (``splitting`` of order ``kappa``) the total damping can cross
    zero more than once between the modes; the crossing nearest the
    midpoint is the one that continues the symmetric cancellation.
    """
    mid = 0.5 * sys.splitting
    roots = cancellation_detunings(sys)
    return min(roots, key=lambda r: abs(r - mid))


# -- transmission -----------------------------------------------------------

def transmission_scan(sys: TwoModeSystem, laser_offsets, input_pol_angle: float):
    """Bare-cavity transmission versus laser offset from the H mode.

    ``input_pol_angle`` is measured from the H axis: 0 couples only to H,
    pi/2 only to V.
    """
    if not 0.0 <= input_pol_angle <= 0.5 * math.pi:
        raise ValueError("input_pol_angle must lie in [0, pi/2]")
    w = np.asarray(laser_offsets, dtype=float)
    q = (0.5 * sys.kappa) ** 2
    lor_h = q / (q + w**2)
    lor_v = q / (q + (w - sys.splitting) ** 2)
    t = math.cos(input_pol_angle) ** 2 * lor_h + math.sin(input_pol_angle) ** 2 * lor_v
    return [(float(a), float(b)) for a, b in zip(w, t)]


# -- design feasibility -----------------------------------------------------

@dataclass(frozen=True)
class DesignCandidate:
    """Candidate cavity in lab units (Hz, m, W, K).

    The splitting reference is the measured 83 kHz at 5 cm; it is rescaled
    as ``1 / length``.
    """

    length: float = 0.01
    kappa_hz: float = 85e3
    omega_m_hz: float = 250e3
    q_factor: float = 5e5
    g0_hz: float = 8.0
    power: float = 50e-6
    temperature: float = 1.0
    wavelength: float = 1064e-9
    eta: float = 1.0
    ref_splitting_hz: float = 83e3
    ref_length: float = 0.05


@dataclass(frozen=True)
class FeasibilityReport:
    n_cav: float
    cooperativity: float
    n_th: float
    ratio: float
    sideband_resolved: bool
    predicted_splitting_hz: float


def design_feasibility(candidate: DesignCandidate) -> FeasibilityReport:
    """Cooperativity versus thermal occupation for a red-sideband drive.

    ``sideband_resolved`` is ``kappa < 4 omega_m``, i.e. the cooling limit
    ``(kappa / 4 omega_m)**2`` is below one phonon.
    """
    c = candidate
    for name in ("length", "kappa_hz", "omega_m_hz", "q_factor", "power", "wavelength",
                 "ref_splitting_hz", "ref_length"):
        if not getattr(c, name) > 0:
            raise ValueError(f"{name} must be > 0")
    if c.g0_hz < 0 or c.temperature < 0:
        raise ValueError("g0_hz and temperature must be >= 0")
    kappa = TWO_PI * c.kappa_hz
    omega_m = TWO_PI * c.omega_m_hz
    gamma_m = omega_m / c.q_factor
    g0 = TWO_PI * c.g0_hz
    mode = OpticalMode(-omega_m, kappa, c.power, c.wavelength, c.eta)
    n_cav = core.intracavity_photon_number(mode)
    coop = core.cooperativity(n_cav, g0, kappa, gamma_m)
    n_th = core.thermal_occupation(c.temperature, omega_m)
    ratio = coop / n_th if n_th > 0 else math.inf
    return FeasibilityReport(
        n_cav=n_cav,
        cooperativity=coop,
        n_th=n_th,
        ratio=ratio,
        sideband_resolved=kappa < 4.0 * omega_m,
        predicted_splitting_hz=c.ref_splitting_hz * c.ref_length / c.length,
    )
