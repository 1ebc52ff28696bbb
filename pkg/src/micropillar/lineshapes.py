"""Closed-form lineshape models.

All positions and widths are energies in ueV and every width is a FWHM.
Each ``eval_*`` function is vectorized over ``x`` and has a companion
``grad_*`` returning the partial derivatives with respect to every
parameter, keyed by field name; the fitter uses them as its Jacobian.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import ClassVar, Union

import numpy as np
from scipy.optimize import brentq
from scipy.special import wofz

from .errors import InvalidParamsError

LN2 = math.log(2.0)
SQRT2 = math.sqrt(2.0)
# FWHM -> standard deviation of a Gaussian
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * LN2))


@dataclass(frozen=True)
class LorentzianParams:
    center: float
    fwhm: float
    amplitude: float = 1.0
    offset: float = 0.0

    kind: ClassVar[str] = "lorentzian"
    widths: ClassVar[tuple[str, ...]] = ("fwhm",)

    def validate(self):
        if not self.fwhm > 0:
            raise InvalidParamsError(f"fwhm must be > 0, got {self.fwhm}")
        return self


@dataclass(frozen=True)
class GaussianParams:
    center: float
    fwhm: float
    amplitude: float = 1.0
    offset: float = 0.0

    kind: ClassVar[str] = "gaussian"
    widths: ClassVar[tuple[str, ...]] = ("fwhm",)

    def validate(self):
        if not self.fwhm > 0:
            raise InvalidParamsError(f"fwhm must be > 0, got {self.fwhm}")
        return self


@dataclass(frozen=True)
class VoigtParams:
    center: float
    lorentz_fwhm: float
    gauss_fwhm: float
    amplitude: float = 1.0
    offset: float = 0.0

    kind: ClassVar[str] = "voigt"
    widths: ClassVar[tuple[str, ...]] = ("lorentz_fwhm", "gauss_fwhm")

    def validate(self):
        if self.lorentz_fwhm < 0 or self.gauss_fwhm < 0:
            raise InvalidParamsError("Voigt widths must be >= 0")
        if self.lorentz_fwhm == 0 and self.gauss_fwhm == 0:
            raise InvalidParamsError("Voigt widths cannot both be zero")
        return self


@dataclass(frozen=True)
class FanoParams:
    """Fano reflectance resonance.

    ``r0`` is the reflectivity offset, ``a0`` the amplitude, ``q`` the Fano
    asymmetry parameter, ``omega0`` the resonance energy and ``gamma_c`` the
    FWHM of the underlying Lorentzian.
    """

    r0: float
    a0: float
    q: float
    omega0: float
    gamma_c: float

    kind: ClassVar[str] = "fano"
    widths: ClassVar[tuple[str, ...]] = ("gamma_c",)

    def validate(self):
        if not self.gamma_c > 0:
            raise InvalidParamsError(f"gamma_c must be > 0, got {self.gamma_c}")
        return self


LineshapeParams = Union[LorentzianParams, GaussianParams, VoigtParams, FanoParams]

PARAMS_BY_KIND: dict[str, type] = {
    cls.kind: cls for cls in (LorentzianParams, GaussianParams, VoigtParams, FanoParams)
}


def param_names(kind: str) -> tuple[str, ...]:
    return tuple(f.name for f in fields(PARAMS_BY_KIND[kind]))


def params_from_dict(kind: str, values: dict) -> LineshapeParams:
    try:
        cls = PARAMS_BY_KIND[kind]
    except KeyError:
        raise InvalidParamsError(f"unknown model kind {kind!r}") from None
    try:
        return cls(**{k: float(v) for k, v in values.items()})
    except TypeError as exc:
        raise InvalidParamsError(str(exc)) from None


def params_to_dict(p: LineshapeParams) -> dict[str, float]:
    return asdict(p)


def center_of(p: LineshapeParams) -> float:
    return p.omega0 if isinstance(p, FanoParams) else p.center


# ---------------------------------------------------------------- Lorentzian

def eval_lorentzian(x, p: LorentzianParams):
    p.validate()
    hw = 0.5 * p.fwhm
    d = np.asarray(x, dtype=float) - p.center
    return p.offset + p.amplitude * hw**2 / (d**2 + hw**2)


def grad_lorentzian(x, p: LorentzianParams) -> dict[str, np.ndarray]:
    hw = 0.5 * p.fwhm
    d = np.asarray(x, dtype=float) - p.center
    den = d**2 + hw**2
    shape = hw**2 / den
    return {
        "center": p.amplitude * 2.0 * d * hw**2 / den**2,
        "fwhm": p.amplitude * hw * d**2 / den**2,
        "amplitude": shape,
        "offset": np.ones_like(d),
    }


# ------------------------------------------------------------------ Gaussian

def eval_gaussian(x, p: GaussianParams):
    p.validate()
    d = np.asarray(x, dtype=float) - p.center
    return p.offset + p.amplitude * np.exp(-4.0 * LN2 * d**2 / p.fwhm**2)


def grad_gaussian(x, p: GaussianParams) -> dict[str, np.ndarray]:
    d = np.asarray(x, dtype=float) - p.center
    e = np.exp(-4.0 * LN2 * d**2 / p.fwhm**2)
    return {
        "center": p.amplitude * e * 8.0 * LN2 * d / p.fwhm**2,
        "fwhm": p.amplitude * e * 8.0 * LN2 * d**2 / p.fwhm**3,
        "amplitude": e,
        "offset": np.ones_like(d),
    }


# --------------------------------------------------------------------- Voigt

def _voigt_z(x, p: VoigtParams):
    sigma = p.gauss_fwhm * FWHM_TO_SIGMA
    gamma = 0.5 * p.lorentz_fwhm
    scale = sigma * SQRT2
    z = (np.asarray(x, dtype=float) - p.center + 1j * gamma) / scale
    z0 = 1j * gamma / scale
    return z, z0, sigma, scale


def eval_voigt(x, p: VoigtParams):
    """Peak-normalized Voigt profile via the Faddeeva function.

    ``amplitude`` is the peak height above ``offset``. Degenerate widths fall
    back to the pure Lorentzian or Gaussian.
    """
    p.validate()
    if p.gauss_fwhm == 0:
        return eval_lorentzian(x, LorentzianParams(p.center, p.lorentz_fwhm, p.amplitude, p.offset))
    if p.lorentz_fwhm == 0:
        return eval_gaussian(x, GaussianParams(p.center, p.gauss_fwhm, p.amplitude, p.offset))
    z, z0, _, _ = _voigt_z(x, p)
    return p.offset + p.amplitude * wofz(z).real / wofz(z0).real


def grad_voigt(x, p: VoigtParams) -> dict[str, np.ndarray]:
    if p.gauss_fwhm == 0:
        g = grad_lorentzian(x, LorentzianParams(p.center, p.lorentz_fwhm, p.amplitude, p.offset))
        g["lorentz_fwhm"] = g.pop("fwhm")
        g["gauss_fwhm"] = np.zeros_like(g["offset"])
        return g
    if p.lorentz_fwhm == 0:
        g = grad_gaussian(x, GaussianParams(p.center, p.gauss_fwhm, p.amplitude, p.offset))
        g["gauss_fwhm"] = g.pop("fwhm")
        g["lorentz_fwhm"] = np.zeros_like(g["offset"])
        return g
    z, z0, sigma, scale = _voigt_z(x, p)
    w = wofz(z)
    w0 = wofz(z0)
    # w'(z) = -2 z w(z) + 2i / sqrt(pi)
    dw = -2.0 * z * w + 2j / math.sqrt(math.pi)
    dw0 = -2.0 * z0 * w0 + 2j / math.sqrt(math.pi)
    u, u0 = w.real, w0.real

    def ratio_deriv(dz, dz0):
        du = (dw * dz).real
        du0 = (dw0 * dz0).real
        return (du * u0 - u * du0) / u0**2

    dz_dc = -1.0 / scale
    # gamma = fwhm_L / 2
    dz_dL = 0.5j / scale
    # sigma = fwhm_G * k ; dz/dsigma = -z / sigma
    dz_dG = -z * FWHM_TO_SIGMA / sigma
    dz0_dG = -z0 * FWHM_TO_SIGMA / sigma
    return {
        "center": p.amplitude * ratio_deriv(dz_dc, 0.0),
        "lorentz_fwhm": p.amplitude * ratio_deriv(dz_dL, dz_dL),
        "gauss_fwhm": p.amplitude * ratio_deriv(dz_dG, dz0_dG),
        "amplitude": u / u0,
        "offset": np.ones_like(u),
    }


def voigt_fwhm(lorentz_fwhm: float, gauss_fwhm: float) -> float:
    """Numeric FWHM of the Voigt profile, by root bracketing on the half maximum."""
    p = VoigtParams(0.0, lorentz_fwhm, gauss_fwhm).validate()
    if gauss_fwhm == 0:
        return lorentz_fwhm
    if lorentz_fwhm == 0:
        return gauss_fwhm
    hi = 0.5 * (lorentz_fwhm + gauss_fwhm)
    half = brentq(lambda t: eval_voigt(t, p) - 0.5, 0.0, hi, xtol=1e-14 * hi, rtol=1e-15)
    return 2.0 * half


def olivero_fwhm(lorentz_fwhm: float, gauss_fwhm: float) -> float:
    """Olivero-Longbothum approximation to the Voigt FWHM (about 0.02 % accurate)."""
    return 0.5346 * lorentz_fwhm + math.sqrt(0.2166 * lorentz_fwhm**2 + gauss_fwhm**2)


def lorentz_from_voigt_fwhm(total_fwhm: float, gauss_fwhm: float) -> float:
    """Invert the Olivero-Longbothum relation for the Lorentzian width."""
    if total_fwhm <= gauss_fwhm:
        return 0.0
    # 0.5346 L + sqrt(0.2166 L^2 + G^2) = V  ->  quadratic in L
    a = 0.5346**2 - 0.2166
    b = -2.0 * 0.5346 * total_fwhm
    c = total_fwhm**2 - gauss_fwhm**2
    disc = math.sqrt(max(b * b - 4 * a * c, 0.0))
    return (-b - disc) / (2 * a)


# ---------------------------------------------------------------------- Fano

def eval_fano(omega, p: FanoParams):
    """R0 + A0 (q + x)^2 / (1 + x^2) with x = 2 (omega - omega0) / gamma_c."""
    p.validate()
    xr = 2.0 * (np.asarray(omega, dtype=float) - p.omega0) / p.gamma_c
    return p.r0 + p.a0 * (p.q + xr) ** 2 / (1.0 + xr**2)


def grad_fano(omega, p: FanoParams) -> dict[str, np.ndarray]:
    d = np.asarray(omega, dtype=float) - p.omega0
    xr = 2.0 * d / p.gamma_c
    den = 1.0 + xr**2
    shape = (p.q + xr) ** 2 / den
    # dF/dx = 2 A0 (q + x)(1 - q x) / (1 + x^2)^2
    dfdx = 2.0 * p.a0 * (p.q + xr) * (1.0 - p.q * xr) / den**2
    return {
        "r0": np.ones_like(xr),
        "a0": shape,
        "q": 2.0 * p.a0 * (p.q + xr) / den,
        "omega0": dfdx * (-2.0 / p.gamma_c),
        "gamma_c": dfdx * (-xr / p.gamma_c),
    }


def fano_q_factor(p: FanoParams) -> float:
    if not (p.omega0 > 0 and p.gamma_c > 0):
        raise InvalidParamsError("omega0 and gamma_c must be > 0")
    return p.omega0 / p.gamma_c


# ------------------------------------------------------------------ dispatch

_EVAL = {
    "lorentzian": eval_lorentzian,
    "gaussian": eval_gaussian,
    "voigt": eval_voigt,
    "fano": eval_fano,
}
_GRAD = {
    "lorentzian": grad_lorentzian,
    "gaussian": grad_gaussian,
    "voigt": grad_voigt,
    "fano": grad_fano,
}


def evaluate(x, p: LineshapeParams):
    return _EVAL[p.kind](x, p)


def gradient(x, p: LineshapeParams) -> dict[str, np.ndarray]:
    return _GRAD[p.kind](x, p)


def with_values(p: LineshapeParams, **changes) -> LineshapeParams:
    return replace(p, **changes)
