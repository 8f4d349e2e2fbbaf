"""Physical constants and the few unit conversions the pipeline needs.

Everything inside the package is SI. Conversions happen only when reading or
writing files and reports.
"""
from dataclasses import dataclass
import math

from .errors import DomainError


@dataclass(frozen=True)
class PhysicalConstants:
    e: float = 1.602176634e-19  # C
    k_B: float = 1.380649e-23  # J/K
    hbar: float = 1.054571817e-34  # J s
    eps0: float = 8.8541878128e-12  # F/m


CONSTANTS = PhysicalConstants()

E_CHARGE = CONSTANTS.e
K_B = CONSTANTS.k_B
HBAR = CONSTANTS.hbar
EPS0 = CONSTANTS.eps0

# 1 eV^-1 cm^-3 expressed in J^-1 m^-3
_DOS_FACTOR = 1.0 / (E_CHARGE * 1e-6)


def dos_to_si(g):
    """Density of states from eV^-1 cm^-3 to J^-1 m^-3."""
    if not g >= 0:
        raise DomainError(f"density of states must be non-negative, got {g!r}")
    return g * _DOS_FACTOR


def dos_from_si(g):
    """Density of states from J^-1 m^-3 to eV^-1 cm^-3."""
    if not g >= 0:
        raise DomainError(f"density of states must be non-negative, got {g!r}")
    return g / _DOS_FACTOR


def dbm_to_watts(p):
    if not math.isfinite(p):
        raise DomainError(f"power in dBm must be finite, got {p!r}")
    return 1e-3 * 10.0 ** (p / 10.0)


def watts_to_dbm(p):
    if not (p > 0 and math.isfinite(p)):
        raise DomainError(f"power must be positive and finite, got {p!r}")
    return 10.0 * math.log10(p / 1e-3)


def angular_frequency(frequency_hz):
    if not frequency_hz > 0:
        raise DomainError(f"frequency must be positive, got {frequency_hz!r}")
    return 2.0 * math.pi * frequency_hz
