"""Spectral unit algebra.

Conversions between vacuum wavelength, photon energy and frequency, plus
Q-factor and photon-lifetime arithmetic. Energies are canonically held in
micro-electronvolts and wavelengths in nanometers.

Constants (CODATA 2018; SI-exact defining values)

    PLANCK_H       = 4.135667696e-15 eV s   (6.62607015e-34 J s / e)
    HBAR           = 6.582119569e-16 eV s   (PLANCK_H / 2 pi)
    LIGHT_SPEED_C  = 299792458 m/s
    hc             = 1.239841984e9 ueV nm
    hbar           = 658.2119569 ueV ps
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import MissingReferenceError, NonPositiveError, UnitError

ELEMENTARY_CHARGE = 1.602176634e-19  # C
PLANCK_H = 6.62607015e-34 / ELEMENTARY_CHARGE  # eV s
HBAR = PLANCK_H / (2.0 * math.pi)  # eV s
LIGHT_SPEED_C = 299792458.0  # m / s

# Derived conveniences in canonical units.
HC_UEV_NM = PLANCK_H * LIGHT_SPEED_C * 1e9 * 1e6  # ueV nm
H_UEV_PER_GHZ = PLANCK_H * 1e9 * 1e6  # ueV per GHz
HBAR_UEV_PS = HBAR * 1e6 * 1e12  # ueV ps
HBAR_C_UEV_M = HBAR * LIGHT_SPEED_C * 1e6  # ueV m


class Unit(str, Enum):
    NANOMETER = "nm"
    PICOMETER = "pm"
    ELECTRONVOLT = "eV"
    MICRO_ELECTRONVOLT = "ueV"
    GIGAHERTZ = "GHz"

    @property
    def dimension(self) -> str:
        if self in (Unit.NANOMETER, Unit.PICOMETER):
            return "wavelength"
        if self is Unit.GIGAHERTZ:
            return "frequency"
        return "energy"

    @classmethod
    def parse(cls, token: str | Unit) -> Unit:
        if isinstance(token, Unit):
            return token
        key = str(token).strip()
        unit = _ALIASES.get(key) or _ALIASES.get(key.lower())
        if unit is None:
            raise UnitError(f"unknown unit {token!r}")
        return unit


_ALIASES = {
    "nm": Unit.NANOMETER,
    "nanometer": Unit.NANOMETER,
    "pm": Unit.PICOMETER,
    "picometer": Unit.PICOMETER,
    "eV": Unit.ELECTRONVOLT,
    "ev": Unit.ELECTRONVOLT,
    "electronvolt": Unit.ELECTRONVOLT,
    "ueV": Unit.MICRO_ELECTRONVOLT,
    "uev": Unit.MICRO_ELECTRONVOLT,
    "μeV": Unit.MICRO_ELECTRONVOLT,
    "µeV": Unit.MICRO_ELECTRONVOLT,
    "micro_electronvolt": Unit.MICRO_ELECTRONVOLT,
    "GHz": Unit.GIGAHERTZ,
    "ghz": Unit.GIGAHERTZ,
    "gigahertz": Unit.GIGAHERTZ,
}

# Scale of each unit relative to the canonical unit of its dimension
# (nm for wavelength, ueV for energy, GHz for frequency).
_SCALE = {
    Unit.NANOMETER: 1.0,
    Unit.PICOMETER: 1e-3,
    Unit.ELECTRONVOLT: 1e6,
    Unit.MICRO_ELECTRONVOLT: 1.0,
    Unit.GIGAHERTZ: 1.0,
}


@dataclass(frozen=True)
class SpectralValue:
    """A magnitude with a spectral unit.

    ``width=True`` marks a linewidth (an interval) rather than an absolute
    spectral position. Widths convert linearly between energy and frequency
    but need a reference position to convert to or from wavelength.
    """

    magnitude: float
    unit: Unit
    width: bool = False

    def __post_init__(self):
        object.__setattr__(self, "unit", Unit.parse(self.unit))
        if not math.isfinite(self.magnitude):
            raise NonPositiveError(f"non-finite magnitude {self.magnitude}")

    def to(self, target: Unit | str, reference: SpectralValue | None = None) -> SpectralValue:
        return convert(self, target, reference)


def _to_energy_position(value: SpectralValue) -> float:
    """Absolute position in ueV."""
    if value.magnitude <= 0:
        raise NonPositiveError(f"absolute position must be > 0, got {value.magnitude} {value.unit.value}")
    canon = value.magnitude * _SCALE[value.unit]
    dim = value.unit.dimension
    if dim == "energy":
        return canon
    if dim == "frequency":
        return canon * H_UEV_PER_GHZ
    return HC_UEV_NM / canon


def _from_energy_position(energy: float, target: Unit) -> float:
    dim = target.dimension
    if dim == "energy":
        canon = energy
    elif dim == "frequency":
        canon = energy / H_UEV_PER_GHZ
    else:
        canon = HC_UEV_NM / energy
    return canon / _SCALE[target]


def _to_energy_width(value: SpectralValue, reference: SpectralValue | None) -> float:
    canon = abs(value.magnitude) * _SCALE[value.unit]
    dim = value.unit.dimension
    if dim == "energy":
        return canon
    if dim == "frequency":
        return canon * H_UEV_PER_GHZ
    if reference is None:
        raise MissingReferenceError("wavelength linewidth conversion needs a line center")
    lam = HC_UEV_NM / _to_energy_position(reference)
    # first order: |dE| = hc |dlambda| / lambda^2
    return HC_UEV_NM * canon / lam**2


def _from_energy_width(width: float, target: Unit, reference: SpectralValue | None) -> float:
    dim = target.dimension
    if dim == "energy":
        canon = width
    elif dim == "frequency":
        canon = width / H_UEV_PER_GHZ
    else:
        if reference is None:
            raise MissingReferenceError("wavelength linewidth conversion needs a line center")
        lam = HC_UEV_NM / _to_energy_position(reference)
        canon = width * lam**2 / HC_UEV_NM
    return canon / _SCALE[target]


def convert(
    value: SpectralValue, target_unit: Unit | str, reference: SpectralValue | None = None
) -> SpectralValue:
    """Convert a spectral position or linewidth to ``target_unit``.

    Parameters
    ----------
    value : SpectralValue
        Position (``width=False``) or linewidth (``width=True``).
    target_unit : Unit or str
    reference : SpectralValue, optional
        Line center, required when a linewidth crosses between wavelength
        and energy/frequency units.

    Raises
    ------
    NonPositiveError
        Zero or negative absolute position.
    MissingReferenceError
        Wavelength linewidth conversion without a center.
    """
    target = Unit.parse(target_unit)
    if value.width:
        if value.magnitude < 0:
            raise NonPositiveError("linewidth must be >= 0")
        if value.unit.dimension == target.dimension:
            mag = value.magnitude * _SCALE[value.unit] / _SCALE[target]
        else:
            mag = _from_energy_width(_to_energy_width(value, reference), target, reference)
        return SpectralValue(mag, target, width=True)
    if value.magnitude <= 0:
        raise NonPositiveError(f"absolute position must be > 0, got {value.magnitude}")
    if value.unit.dimension == target.dimension:
        mag = value.magnitude * _SCALE[value.unit] / _SCALE[target]
    else:
        mag = _from_energy_position(_to_energy_position(value), target)
    return SpectralValue(mag, target)


def q_factor(center: SpectralValue, fwhm: SpectralValue) -> float:
    """Q = center / fwhm, after bringing both to energy units."""
    if fwhm.magnitude <= 0:
        raise NonPositiveError("fwhm must be > 0")
    c = _to_energy_position(center)
    w = _to_energy_width(fwhm, center)
    return c / w


def photon_lifetime(fwhm_energy: SpectralValue | float) -> float:
    """Photon lifetime hbar / FWHM in picoseconds.

    A bare float is taken as a FWHM in ueV.
    """
    if not isinstance(fwhm_energy, SpectralValue):
        fwhm_energy = SpectralValue(float(fwhm_energy), Unit.MICRO_ELECTRONVOLT, width=True)
    if fwhm_energy.magnitude <= 0:
        raise NonPositiveError("fwhm must be > 0")
    return HBAR_UEV_PS / _to_energy_width(fwhm_energy, None)


def wavelength_to_ueV(wavelength_nm):
    """Vectorized absolute conversion nm -> ueV."""
    return HC_UEV_NM / wavelength_nm


def ueV_to_wavelength(energy_ueV):
    return HC_UEV_NM / energy_ueV


def axis_to_ueV(axis, unit: Unit | str):
    """Vectorized absolute-position conversion of an axis array to ueV."""
    unit = Unit.parse(unit)
    canon = axis * _SCALE[unit]
    if unit.dimension == "energy":
        return canon
    if unit.dimension == "frequency":
        return canon * H_UEV_PER_GHZ
    return HC_UEV_NM / canon


def axis_from_ueV(energy, unit: Unit | str):
    unit = Unit.parse(unit)
    if unit.dimension == "energy":
        canon = energy
    elif unit.dimension == "frequency":
        canon = energy / H_UEV_PER_GHZ
    else:
        canon = HC_UEV_NM / energy
    return canon / _SCALE[unit]
