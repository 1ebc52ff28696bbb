"""Coupled-oscillator model of a quantum dot exciton in a cavity mode.

The non-Hermitian 2x2 matrix

    [[E_c - i gamma_c / 2, g              ],
     [g,                   E_x - i gamma_x / 2]]

with FWHM linewidths ``gamma`` gives polariton energies (real parts of the
eigenvalues) and linewidths (``-2 Im``). At zero detuning the splitting is
``2 sqrt(g**2 - (gamma_c - gamma_x)**2 / 16)``. All energies are in ueV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError, InvalidParamsError, NonPositiveDenominatorError, ParseError
from .fitter import covariance, levenberg_marquardt

STRONG_COUPLING_VISIBILITY = 0.25


@dataclass(frozen=True)
class CoupledOscillator:
    e_cavity: float
    e_exciton: float
    g: float
    gamma_cavity: float
    gamma_exciton: float

    def __post_init__(self):
        if self.g < 0:
            raise InvalidParamsError("g must be >= 0")
        if not (self.gamma_cavity > 0 and self.gamma_exciton > 0):
            raise InvalidParamsError("linewidths must be > 0")

    @property
    def detuning(self) -> float:
        return self.e_exciton - self.e_cavity

    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.e_cavity - 0.5j * self.gamma_cavity, self.g],
                [self.g, self.e_exciton - 0.5j * self.gamma_exciton],
            ]
        )


@dataclass(frozen=True)
class Branch:
    energy: float
    fwhm: float


@dataclass(frozen=True)
class PolaritonBranches:
    upper: Branch
    lower: Branch
    detuning: float

    @property
    def splitting(self) -> float:
        return self.upper.energy - self.lower.energy


def _eigenvalues(e_c, e_x, g, gamma_c, gamma_x):
    # work relative to e_c so the large common energy is added back only once
    a = -0.5j * gamma_c
    b = (e_x - e_c) - 0.5j * gamma_x
    mean = 0.5 * (a + b)
    root = np.sqrt(g**2 + 0.25 * (a - b) ** 2 + 0j)
    return e_c + (mean + root), e_c + (mean - root)


def polariton_branches(model: CoupledOscillator) -> PolaritonBranches:
    """Closed-form eigenvalues, ordered by real part into upper and lower branch."""
    l1, l2 = _eigenvalues(model.e_cavity, model.e_exciton, model.g, model.gamma_cavity, model.gamma_exciton)
    if l1.real < l2.real:
        l1, l2 = l2, l1
    return PolaritonBranches(
        Branch(float(l1.real), float(-2.0 * l1.imag)),
        Branch(float(l2.real), float(-2.0 * l2.imag)),
        model.detuning,
    )


def rabi_splitting(model: CoupledOscillator) -> float | None:
    """Zero-detuning splitting, or ``None`` without a real splitting.

    ``g = 0`` and a negative radicand both return ``None``; the exceptional
    point (radicand exactly zero) returns ``0.0``.
    """
    if model.g == 0:
        return None
    radicand = model.g**2 - (model.gamma_cavity - model.gamma_exciton) ** 2 / 16.0
    if radicand < 0:
        return None
    return 2.0 * math.sqrt(radicand)


def visibility(g: float, gamma_cavity: float, gamma_broadening: float) -> float:
    """g / (gamma_broadening + gamma_cavity).

    ``gamma_broadening`` is either the pure-dephasing rate or the full
    (spectral-diffusion) emitter width; the caller picks.
    """
    den = gamma_broadening + gamma_cavity
    if not den > 0:
        raise NonPositiveDenominatorError("gamma_broadening + gamma_cavity must be > 0")
    return g / den


@dataclass(frozen=True)
class CouplingVerdict:
    strong: bool
    margin: float
    visibilities: dict[str, float]

    @property
    def visible(self) -> dict[str, bool]:
        return {k: v > STRONG_COUPLING_VISIBILITY for k, v in self.visibilities.items()}


def is_strong_coupling(model: CoupledOscillator, broadenings: dict[str, float] | None = None) -> CouplingVerdict:
    """Strong coupling when ``g > |gamma_c - gamma_x| / 4``.

    ``broadenings`` maps labels to emitter broadenings for which the
    visibility is reported; by default the exciton linewidth is used.
    """
    threshold = abs(model.gamma_cavity - model.gamma_exciton) / 4.0
    if broadenings is None:
        broadenings = {"exciton": model.gamma_exciton}
    vis = {k: visibility(model.g, model.gamma_cavity, b) for k, b in broadenings.items()}
    return CouplingVerdict(bool(model.g > threshold), float(model.g - threshold), vis)


# --------------------------------------------------------------- anticrossing

@dataclass
class AnticrossingFit:
    model: CoupledOscillator  # evaluated at tuning = 0
    cavity_offset: float
    cavity_slope: float
    exciton_offset: float
    exciton_slope: float
    covariance: np.ndarray  # over (g, ec0, ec1, ex0, ex1)
    residual_norm: float
    iterations: int

    PARAM_NAMES = ("g", "cavity_offset", "cavity_slope", "exciton_offset", "exciton_slope")

    @property
    def g(self) -> float:
        return self.model.g

    @property
    def g_sigma(self) -> float:
        return float(math.sqrt(max(self.covariance[0, 0], 0.0)))

    def at(self, tuning: float) -> CoupledOscillator:
        return CoupledOscillator(
            self.cavity_offset + self.cavity_slope * tuning,
            self.exciton_offset + self.exciton_slope * tuning,
            self.model.g,
            self.model.gamma_cavity,
            self.model.gamma_exciton,
        )


def _anticrossing_start(t, upper, lower):
    """Linear-algebra starting point from trace and squared splitting."""
    # E_c + E_x = upper + lower is exact (trace conservation)
    s1, s0 = np.polyfit(t, upper + lower, 1)
    # (upper - lower)^2 ~ (E_x - E_c)^2 + 4 g^2, quadratic in t
    c2, c1, c0 = np.polyfit(t, (upper - lower) ** 2, 2)
    b = math.sqrt(max(c2, 0.0))
    if b == 0:
        b = 1e-9 * max(abs(s1), 1.0)
    # the exciton is the faster-tuning partner
    if s1 < 0:
        b = -b
    a = c1 / (2.0 * b)
    g = 0.5 * math.sqrt(max(c0 - a * a, 1e-12 * max(c0, 1.0)))
    ex1, ec1 = 0.5 * (s1 + b), 0.5 * (s1 - b)
    ex0, ec0 = 0.5 * (s0 + a), 0.5 * (s0 - a)
    return np.array([g, ec0, ec1, ex0, ex1])


def fit_anticrossing(
    peaks: Sequence[Sequence[float]],
    gamma_cavity: float,
    gamma_exciton: float,
    *,
    max_iter: int = 200,
    tolerance: float = 1e-12,
) -> AnticrossingFit:
    """Fit coupling and affine cavity/exciton tuning laws to branch positions.

    Parameters
    ----------
    peaks : rows of (tuning, upper_energy, lower_energy)
        Tuning is any scalar control (temperature, detuning index ...).
    gamma_cavity, gamma_exciton : float
        FWHM linewidths, held fixed.

    Raises
    ------
    InsufficientDataError
        Fewer than 4 points.
    """
    arr = np.asarray(peaks, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 4:
        raise InsufficientDataError("need >= 4 rows of (tuning, upper, lower)")
    t, upper, lower = arr.T
    if np.any(upper < lower):
        raise InvalidParamsError("upper branch below lower branch")
    if not (gamma_cavity > 0 and gamma_exciton > 0):
        raise InvalidParamsError("linewidths must be > 0")

    # centre and scale energies and tuning to keep J^T J well conditioned
    t_mid = 0.5 * (t.max() + t.min())
    t_scale = max(0.5 * (t.max() - t.min()), 1e-300)
    e_ref = float(np.mean(0.5 * (upper + lower)))
    ts = (t - t_mid) / t_scale
    up = upper - e_ref
    lo = lower - e_ref
    obs = np.concatenate([up, lo])

    def branches(p):
        g, ec0, ec1, ex0, ex1 = p
        l1, l2 = _eigenvalues(ec0 + ec1 * ts, ex0 + ex1 * ts, g, gamma_cavity, gamma_exciton)
        r1, r2 = l1.real, l2.real
        return np.maximum(r1, r2), np.minimum(r1, r2)

    def residual(p):
        u, l = branches(p)
        return np.concatenate([u, l]) - obs

    def jacobian(p):
        J = np.empty((obs.size, p.size))
        for i in range(p.size):
            h = 1e-6 * max(abs(p[i]), 1.0)
            pp, pm = p.copy(), p.copy()
            pp[i] += h
            pm[i] -= h
            J[:, i] = (residual(pp) - residual(pm)) / (2.0 * h)
        return J

    start = _anticrossing_start(ts, up, lo)
    scale = max(float(np.ptp(obs)), gamma_cavity)
    res = levenberg_marquardt(residual, start, jacobian, max_iter=max_iter, tolerance=tolerance, x_scale=scale)
    g, ec0, ec1, ex0, ex1 = (float(v) for v in res.x)
    g = abs(g)
    cov_s = covariance(res.jac, res.cost, obs.size)
    # back to physical tuning units and absolute energies
    T = np.diag([1.0, 1.0, 1.0 / t_scale, 1.0, 1.0 / t_scale])
    T[1, 2] = -t_mid / t_scale
    T[3, 4] = -t_mid / t_scale
    cov = T @ cov_s @ T.T
    c_off = e_ref + ec0 - ec1 * t_mid / t_scale
    x_off = e_ref + ex0 - ex1 * t_mid / t_scale
    c_slope = ec1 / t_scale
    x_slope = ex1 / t_scale
    model = CoupledOscillator(c_off, x_off, g, gamma_cavity, gamma_exciton)
    return AnticrossingFit(model, c_off, c_slope, x_off, x_slope, cov, math.sqrt(res.cost), res.iterations)


def read_peaks(source) -> np.ndarray:
    """Peak table: comment lines '#', optional header, rows ``tuning,upper,lower``."""
    text = source.read() if hasattr(source, "read") else open(source, encoding="utf-8").read()
    rows = []
    first = True
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise ParseError(f"expected 3 columns, got {len(parts)}", lineno)
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            if not first:
                raise ParseError(f"not a number: {line!r}", lineno) from None
            # only the first data-like line may be a header
        first = False
    return np.array(rows)
