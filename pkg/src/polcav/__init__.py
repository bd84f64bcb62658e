"""Optomechanics of a cavity with two polarization-split optical modes."""

__version__ = "0.1.0"

from .core import (CONSTANTS, MechanicalMode, OpticalMode, Polarization, cooperativity,
                   effective_temperature, intracavity_photon_number, minimum_phonon_number,
                   optical_damping, optical_spring, thermal_occupation)
from .errors import InputError, NumericalError, PolcavError
from .twomode import (TwoModeSystem, cancellation_detuning, design_feasibility, reference_system,
                      sweep, transmission_scan)

__all__ = [
    "CONSTANTS", "MechanicalMode", "OpticalMode", "Polarization", "cooperativity",
    "effective_temperature", "intracavity_photon_number", "minimum_phonon_number",
    "optical_damping", "optical_spring", "thermal_occupation", "InputError", "NumericalError",
    "PolcavError", "TwoModeSystem", "cancellation_detuning", "design_feasibility",
    "reference_system", "sweep", "transmission_scan", "__version__",
]
