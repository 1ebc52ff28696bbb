"""Normal-incidence transfer-matrix simulation of planar DBR microcavities.

Also holds the micropillar lateral-confinement model: the fundamental
step-index waveguide mode gives the transverse wavenumber ``k_t`` used both
for the sidewall-scattering term and for the blue shift of the pillar mode,
which in turn lowers the intrinsic (mirror-leakage) Q.

Conventions: time dependence exp(-i w t), complex index ``n + i k`` with
``k >= 0`` for absorbing layers, thicknesses and wavelengths in nm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import yaml
from scipy.optimize import brentq
from scipy.special import j0, j1, k0e, k1e

from .errors import InvalidParamsError, NoGuidedModeError, NoResonanceError, ParseError
from .units import HBAR_C_UEV_M, HC_UEV_NM

N_GAAS = 3.46
N_ALAS = 2.89
J0_FIRST_ZERO = 2.404825557695773


@dataclass(frozen=True)
class Layer:
    refractive_index: complex
    thickness: float  # nm

    def __post_init__(self):
        n = complex(self.refractive_index)
        object.__setattr__(self, "refractive_index", n)
        if n.real < 1 or n.imag < 0:
            raise InvalidParamsError(f"invalid refractive index {n}")
        if not (math.isfinite(self.thickness) and self.thickness > 0):
            raise InvalidParamsError(f"layer thickness must be > 0, got {self.thickness}")


@dataclass(frozen=True)
class LayerStack:
    """Layers ordered from the ambient side to the substrate side.

    ``cavity_layer`` indexes the spacer layer; when ``None`` the thickest
    layer is taken as the spacer.
    """

    ambient_index: float
    layers: tuple[Layer, ...]
    substrate_index: float
    cavity_layer: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise InvalidParamsError("stack has no layers")
        if self.ambient_index < 1 or self.substrate_index < 1:
            raise InvalidParamsError("ambient and substrate indices must be >= 1")

    @property
    def spacer_index(self) -> int:
        if self.cavity_layer is not None:
            return self.cavity_layer
        return max(range(len(self.layers)), key=lambda i: self.layers[i].thickness)

    def reversed(self) -> LayerStack:
        return LayerStack(self.substrate_index, self.layers[::-1], self.ambient_index)

    def design_wavelength(self) -> float:
        """Four times the median quarter-wave optical thickness."""
        return 4.0 * float(np.median([l.refractive_index.real * l.thickness for l in self.layers]))


@dataclass(frozen=True)
class PillarGeometry:
    radius: float  # um
    effective_core_index: float = N_GAAS
    cladding_index: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidParamsError("pillar radius must be > 0")
        if not self.effective_core_index > self.cladding_index:
            raise InvalidParamsError("core index must exceed cladding index")


def dbr_pairs(n_first, d_first, n_second, d_second, count) -> list[Layer]:
    return [Layer(n_first, d_first), Layer(n_second, d_second)] * count


def reference_stack(
    top_pairs: int = 32,
    bottom_pairs: int = 36,
    n_gaas: float = N_GAAS,
    n_alas: float = N_ALAS,
    d_gaas: float = 68.0,
    d_alas: float = 81.5,
    d_cavity: float = 272.0,
) -> LayerStack:
    """GaAs lambda-cavity between AlAs/GaAs Bragg mirrors on a GaAs substrate.

    AlAs (low index) layers face the high-index spacer on both sides.
    """
    top = dbr_pairs(n_gaas, d_gaas, n_alas, d_alas, top_pairs)
    bottom = dbr_pairs(n_alas, d_alas, n_gaas, d_gaas, bottom_pairs)
    layers = top + [Layer(n_gaas, d_cavity)] + bottom
    return LayerStack(1.0, tuple(layers), n_gaas, cavity_layer=len(top))


# ------------------------------------------------------------ transfer matrix

def characteristic_matrix(stack: LayerStack, wavelength):
    """Product of layer characteristic matrices, as four arrays over wavelength."""
    lam = np.asarray(wavelength, dtype=float)
    if np.any(lam <= 0):
        raise InvalidParamsError("wavelength must be > 0")
    m11 = np.ones(lam.shape, complex)
    m12 = np.zeros(lam.shape, complex)
    m21 = np.zeros(lam.shape, complex)
    m22 = np.ones(lam.shape, complex)
    k0_ = 2.0 * np.pi / lam
    for layer in stack.layers:
        n = layer.refractive_index
        delta = k0_ * n * layer.thickness
        c = np.cos(delta)
        s = np.sin(delta)
        a11, a12, a21, a22 = c, -1j * s / n, -1j * n * s, c
        m11, m12, m21, m22 = (
            m11 * a11 + m12 * a21,
            m11 * a12 + m12 * a22,
            m21 * a11 + m22 * a21,
            m21 * a12 + m22 * a22,
        )
    return m11, m12, m21, m22


def amplitudes(stack: LayerStack, wavelength):
    """Complex reflection and transmission amplitudes (r, t)."""
    m11, m12, m21, m22 = characteristic_matrix(stack, wavelength)
    n0, ns = stack.ambient_index, stack.substrate_index
    b = m11 + m12 * ns
    c = m21 + m22 * ns
    den = n0 * b + c
    return (n0 * b - c) / den, 2.0 * n0 / den


def reflectance(stack: LayerStack, wavelength):
    """Return ``(r, R)`` with ``R = |r|**2``; vectorized over wavelength (nm)."""
    r, _ = amplitudes(stack, wavelength)
    return r, np.abs(r) ** 2


def transmittance(stack: LayerStack, wavelength):
    _, t = amplitudes(stack, wavelength)
    return stack.substrate_index / stack.ambient_index * np.abs(t) ** 2


def quarter_wave_reflectance(n_ambient, n_high, n_low, n_substrate, pairs) -> float:
    """Closed-form R of ``pairs`` (H L) quarter-wave pairs at the Bragg wavelength."""
    y = (n_high / n_low) ** (2 * pairs) * n_substrate
    return ((n_ambient - y) / (n_ambient + y)) ** 2


# ----------------------------------------------------------------- cavity mode

@dataclass(frozen=True)
class CavityMode:
    wavelength: float  # nm
    q_planar: float
    fwhm: float  # nm
    peak_transmission: float


def _golden_max(f, a, b, rel_tol):
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > rel_tol * 0.5 * (a + b):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def cavity_mode(
    stack: LayerStack, search_window: tuple[float, float] | None = None, *, coarse_points: int = 4001
) -> CavityMode:
    """Locate the transmission resonance inside the stop band.

    A coarse scan picks the grid point of highest transmission (transmission
    falls monotonically on both sides of an isolated resonance, so this is
    the point nearest to it even when the grid is coarser than the
    linewidth); golden-section search then refines the maximum to
    ``d(lambda)/lambda < 1e-9`` and the FWHM comes from root bracketing on
    half the peak transmission.

    Parameters
    ----------
    search_window : (lo, hi) in nm, optional
        Defaults to +-3 % around the stack's design wavelength.

    Raises
    ------
    NoResonanceError
        No isolated transmission peak inside the window.
    """
    if search_window is None:
        lam_d = stack.design_wavelength()
        search_window = (0.97 * lam_d, 1.03 * lam_d)
    lo, hi = map(float, search_window)
    if not 0 < lo < hi:
        raise InvalidParamsError("search window must satisfy 0 < lo < hi")
    grid = np.linspace(lo, hi, coarse_points)
    T = transmittance(stack, grid)
    i = int(np.argmax(T))
    if i == 0 or i == grid.size - 1 or T[i] < 2.0 * np.median(T):
        raise NoResonanceError(f"no transmission resonance in [{lo}, {hi}] nm")

    def t_at(lam):
        return float(transmittance(stack, lam))

    lam0 = _golden_max(t_at, grid[i - 1], grid[i + 1], 1e-10)
    t_max = t_at(lam0)
    half = 0.5 * t_max

    def side(direction):
        step = 1e-8 * lam0
        while t_at(lam0 + direction * step) >= half:
            step *= 2.0
            if step > hi - lo:
                raise NoResonanceError("resonance half-maximum not found inside window")
        a, b = sorted((lam0, lam0 + direction * step))
        return brentq(lambda l: t_at(l) - half, a, b, xtol=1e-15 * lam0)

    left = side(-1)
    right = side(+1)
    fwhm = right - left
    return CavityMode(float(lam0), float(lam0 / fwhm), float(fwhm), float(t_max))


# ------------------------------------------------------------- pillar modes

def v_number(geometry: PillarGeometry, wavelength: float) -> float:
    k = 2.0 * math.pi / (wavelength * 1e-9)
    na = math.sqrt(geometry.effective_core_index**2 - geometry.cladding_index**2)
    return k * geometry.radius * 1e-6 * na


def transverse_wavenumber(geometry: PillarGeometry, wavelength: float) -> float:
    """Core transverse wavenumber ``k_t`` (1/m) of the fundamental LP01 mode.

    Solves the weakly-guiding step-index relation
    ``u J1(u) / J0(u) = w K1(w) / K0(w)`` with ``u**2 + w**2 = V**2`` and
    returns ``u / R``. ``u`` lies in ``(0, min(V, 2.405))``.
    """
    if wavelength <= 0:
        raise InvalidParamsError("wavelength must be > 0")
    V = v_number(geometry, wavelength)
    if not V > 0:
        raise NoGuidedModeError("V-number must be positive")

    def mismatch(u):
        w = math.sqrt(max(V * V - u * u, 0.0))
        # exponentially scaled K ratio is stable for large w
        return u * j1(u) / j0(u) - w * k1e(w) / k0e(w)

    hi = min(V, J0_FIRST_ZERO) * (1.0 - 1e-15)
    lo = 1e-12 * hi
    if not mismatch(lo) < 0 < mismatch(hi):
        # the LP01 mode has no cutoff; reaching here means numerics failed
        raise NoGuidedModeError(f"no LP01 root found (V = {V:g})")
    u = brentq(mismatch, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    return u / (geometry.radius * 1e-6)


def mode_shift(geometry: PillarGeometry, planar_energy: float) -> float:
    """Pillar mode energy (ueV): sqrt(E_planar**2 + (hbar c k_t / n_eff)**2)."""
    if planar_energy <= 0:
        raise InvalidParamsError("planar energy must be > 0")
    lam = HC_UEV_NM / planar_energy
    kt = transverse_wavenumber(geometry, lam)
    lateral = HBAR_C_UEV_M * kt / geometry.effective_core_index
    return math.hypot(planar_energy, lateral)


def q_int(stack: LayerStack, geometry: PillarGeometry | None, planar: CavityMode | None = None) -> float:
    """Mirror-limited Q of the pillar mode.

    The planar resonance is moved to the blue-shifted pillar wavelength by
    scaling the spacer thickness until the retuned stack resonates there;
    the planar Q of that retuned stack is returned. ``geometry=None`` means
    an infinitely wide pillar.
    """
    planar = planar or cavity_mode(stack)
    if geometry is None:
        return planar.q_planar
    e_planar = HC_UEV_NM / planar.wavelength
    lam_pillar = HC_UEV_NM / mode_shift(geometry, e_planar)
    if lam_pillar >= planar.wavelength * (1.0 - 1e-12):
        return planar.q_planar
    idx = stack.spacer_index
    spacer = stack.layers[idx]
    window = (lam_pillar - 2.0 * (planar.wavelength - lam_pillar) - 1.0, planar.wavelength + 1.0)

    def retuned(scale):
        layers = list(stack.layers)
        layers[idx] = replace(spacer, thickness=spacer.thickness * scale)
        return cavity_mode(replace(stack, layers=tuple(layers)), window)

    def detuning(scale):
        return retuned(scale).wavelength - lam_pillar

    ratio = lam_pillar / planar.wavelength
    lo = 1.0 - 3.0 * (1.0 - ratio)
    while detuning(lo) > 0:
        lo = 1.0 - 2.0 * (1.0 - lo)
        if lo <= 0:
            raise NoResonanceError("cannot retune the spacer to the pillar mode")
    scale = brentq(detuning, lo, 1.0, xtol=1e-12, rtol=1e-12)
    return retuned(scale).q_planar


# --------------------------------------------------------------- stack files

def load_stack(source) -> LayerStack:
    """Parse a YAML stack description.

    ::

        ambient_index: 1.0
        substrate_index: 3.46
        layers:
          - repeat: 32
            layers:
              - {index: 3.46, thickness_nm: 68}
              - {index: 2.89, thickness_nm: 81.5}
          - {index: 3.46, thickness_nm: 272, cavity: true}
          - ...

    ``extinction`` adds an imaginary index part.
    """
    text = source.read() if hasattr(source, "read") else open(source, encoding="utf-8").read()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid stack file: {exc}") from None
    if not isinstance(doc, dict) or "layers" not in doc:
        raise ParseError("stack file needs a 'layers' list")
    layers: list[Layer] = []
    cavity: list[int] = []

    def walk(items: Sequence, depth=0):
        if not isinstance(items, list):
            raise ParseError("'layers' must be a list")
        for item in items:
            if not isinstance(item, dict):
                raise ParseError(f"bad layer entry {item!r}")
            if "repeat" in item:
                count = int(item["repeat"])
                if count < 0:
                    raise ParseError("repeat count must be >= 0")
                for _ in range(count):
                    walk(item.get("layers", []), depth + 1)
                continue
            try:
                n = complex(float(item["index"]), float(item.get("extinction", 0.0)))
                d = float(item["thickness_nm"])
            except (KeyError, TypeError, ValueError):
                raise ParseError(f"layer needs numeric 'index' and 'thickness_nm': {item!r}") from None
            if item.get("cavity"):
                cavity.append(len(layers))
            layers.append(Layer(n, d))

    walk(doc["layers"])
    if len(cavity) > 1:
        raise ParseError("more than one layer marked as cavity")
    return LayerStack(
        float(doc.get("ambient_index", 1.0)),
        tuple(layers),
        float(doc.get("substrate_index", N_GAAS)),
        cavity[0] if cavity else None,
    )


def dump_stack(stack: LayerStack) -> str:
    items = []
    for i, layer in enumerate(stack.layers):
        entry = {"index": layer.refractive_index.real, "thickness_nm": layer.thickness}
        if layer.refractive_index.imag:
            entry["extinction"] = layer.refractive_index.imag
        if stack.cavity_layer == i:
            entry["cavity"] = True
        items.append(entry)
    doc = {"ambient_index": stack.ambient_index, "substrate_index": stack.substrate_index, "layers": items}
    return yaml.safe_dump(doc, sort_keys=False)
