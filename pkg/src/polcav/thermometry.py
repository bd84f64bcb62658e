"""Phonon-number readout from the H/V balance of scattered light.

A laser between the two modes scatters Stokes light (rate ~ n+1) at
``omega_L - omega_m`` and anti-Stokes light (rate ~ n) at ``omega_L + omega_m``.
Each cavity mode filters both sidebands with its Lorentzian response, so the
power leaving in H versus V encodes ``n``. When the splitting is twice the
mechanical frequency and the laser sits at the midpoint, Stokes light exits
only in H and anti-Stokes only in V, and the H/V ratio is ``1 + 1/n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DivisionDegenerate, OutOfRange
from .numerics import bisect
from .twomode import TwoModeSystem


@dataclass(frozen=True)
class SidebandWeights:
    """Unit-peak cavity transfer ``|chi|^2`` of each sideband into each mode."""

    t_stokes_h: float
    t_antistokes_h: float
    t_stokes_v: float
    t_antistokes_v: float

    def __post_init__(self):
        for name in ("t_stokes_h", "t_antistokes_h", "t_stokes_v", "t_antistokes_v"):
            w = getattr(self, name)
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {w}")

    @classmethod
    def ideal(cls):
        """Perfect filtering: Stokes only into H, anti-Stokes only into V."""
        return cls(1.0, 0.0, 0.0, 1.0)


@dataclass(frozen=True)
class ThermometryResult:
    ratio_hv: float
    n_est: float
    s_omega: float
    s_2omega: float


def _unit_lorentzian(offset, kappa):
    q = (0.5 * kappa) ** 2
    return q / (q + offset**2)


def sideband_weights(sys: TwoModeSystem) -> SidebandWeights:
    """Filter weights for the laser position stored in ``sys``.

    The Stokes line sits at ``omega_L - omega_m``, i.e. ``detuning - omega_m``
    away from a mode; anti-Stokes at ``detuning + omega_m``.
    """
    om, kappa = sys.mech.omega_m, sys.kappa
    d_h, d_v = sys.mode_h.detuning, sys.mode_v.detuning
    return SidebandWeights(
        t_stokes_h=_unit_lorentzian(d_h - om, kappa),
        t_antistokes_h=_unit_lorentzian(d_h + om, kappa),
        t_stokes_v=_unit_lorentzian(d_v - om, kappa),
        t_antistokes_v=_unit_lorentzian(d_v + om, kappa),
    )


def _weights(source):
    return source if isinstance(source, SidebandWeights) else sideband_weights(source)


def polarization_ratio(source, n: float) -> float:
    """Scattered power in H over scattered power in V at occupation ``n``.

    ``source`` is a :class:`TwoModeSystem` or precomputed :class:`SidebandWeights`.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    w = _weights(source)
    if math.isinf(n):
        return ratio_asymptote(w)
    num = (n + 1.0) * w.t_stokes_h + n * w.t_antistokes_h
    den = (n + 1.0) * w.t_stokes_v + n * w.t_antistokes_v
    if den == 0.0:
        raise DivisionDegenerate("no scattered light reaches the V mode")
    return num / den


def ratio_asymptote(source) -> float:
    """High-occupation limit of :func:`polarization_ratio`."""
    w = _weights(source)
    den = w.t_stokes_v + w.t_antistokes_v
    if den == 0.0:
        raise DivisionDegenerate("no scattered light reaches the V mode")
    return (w.t_stokes_h + w.t_antistokes_h) / den


def estimate_phonon_number(ratio: float, source) -> float:
    """Invert :func:`polarization_ratio` for ``n`` by bisection.

    The root is refined to floating-point resolution.

    Raises
    ------
    OutOfRange
        If ``ratio`` is at or below the high-occupation asymptote, or above
        the ground-state value.
    """
    w = _weights(source)
    floor = ratio_asymptote(w)
    if not ratio > floor:
        raise OutOfRange(f"ratio {ratio} is not above the n -> inf limit {floor}")
    if not w.t_stokes_h * w.t_antistokes_v > w.t_antistokes_h * w.t_stokes_v:
        raise OutOfRange("weights give a ratio that does not fall with n")
    if w.t_stokes_v > 0:
        ceiling = w.t_stokes_h / w.t_stokes_v
        if ratio > ceiling:
            raise OutOfRange(f"ratio {ratio} exceeds the ground-state value {ceiling}")
        if ratio == ceiling:
            return 0.0

    def f(n):
        return polarization_ratio(w, n) - ratio

    # f falls with n: grow hi until f(hi) <= 0, then halve down to a point with f > 0
    hi = 1.0
    while f(hi) > 0:
        hi *= 2.0
    lo = hi
    while f(lo) <= 0:
        lo *= 0.5
        if lo < 1e-300:
            return 0.0
    return bisect(f, lo, min(hi, 2.0 * lo))


def detector_signal_components(source, n: float, carrier_amplitude: float = 1.0):
    """Beat-note amplitudes at ``omega_m`` and ``2 omega_m`` behind the polarizer.

    Sideband fields are ``a_S = sqrt((n+1) t_S)`` and ``a_AS = sqrt(n t_AS)``,
    with ``t_S``, ``t_AS`` the H and V weights summed (the 45 degree polarizer
    projects both modes equally, and that common factor is absorbed into the
    arbitrary detector units). The sidebands beat against the carrier with
    opposite sign, so the ``omega_m`` component is ``carrier * |a_S - a_AS|``;
    the ``2 omega_m`` component is the sideband-sideband beat ``a_S * a_AS``.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if not carrier_amplitude > 0:
        raise ValueError("carrier_amplitude must be > 0")
    w = _weights(source)
    t_s = w.t_stokes_h + w.t_stokes_v
    t_as = w.t_antistokes_h + w.t_antistokes_v
    a_s = math.sqrt((n + 1.0) * t_s)
    a_as = math.sqrt(n * t_as)
    return carrier_amplitude * abs(a_s - a_as), a_s * a_as


def thermometry(source, *, n=None, ratio=None, carrier_amplitude=1.0) -> ThermometryResult:
    """Forward model from ``n`` or inversion from a measured ``ratio``."""
    if (n is None) == (ratio is None):
        raise ValueError("give exactly one of n or ratio")
    w = _weights(source)
    if n is None:
        n = estimate_phonon_number(ratio, w)
    else:
        ratio = polarization_ratio(w, n)
    s1, s2 = detector_signal_components(w, n, carrier_amplitude)
    return ThermometryResult(ratio_hv=ratio, n_est=n, s_omega=s1, s_2omega=s2)
