"""Loss-channel composition of the micropillar Q-factor and its inverse problem.

    1/Q = 1/Q_int + 1/Q_scat + 1/Q_abs
    1/Q_scat = kappa J0(k_t R)**2 / R
    Q_abs = 2 pi n / (lambda alpha)

An absent channel (kappa = 0 or alpha = 0) is represented by ``math.inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import nnls
from scipy.special import j0

from .errors import InsufficientDataError, InvalidParamsError, NegativeAlphaError, NegativeKappaError
from .fitter import covariance, levenberg_marquardt
from .stack import LayerStack, PillarGeometry, cavity_mode, q_int as stack_q_int, transverse_wavenumber


class Method(str, Enum):
    PHOTOLUMINESCENCE = "photoluminescence"
    PHOTOREFLECTANCE = "photoreflectance"

    @classmethod
    def parse(cls, token: str | Method) -> Method:
        if isinstance(token, Method):
            return token
        key = str(token).strip().lower()
        if key in ("pl", "photoluminescence"):
            return cls.PHOTOLUMINESCENCE
        if key in ("pr", "r", "reflectance", "photoreflectance", "reflection"):
            return cls.PHOTOREFLECTANCE
        raise InvalidParamsError(f"unknown measurement method {token!r}")


@dataclass(frozen=True)
class ConstantQInt:
    value: float = 2.6e6

    def __call__(self, diameter_um: float) -> float:
        return self.value

    def describe(self) -> str:
        return f"const:{self.value!r}"


class StackQInt:
    """Diameter-dependent Q_int from the transfer-matrix pillar model (cached per diameter)."""

    def __init__(self, stack: LayerStack, effective_core_index: float | None = None, cladding_index: float = 1.0,
                 label: str = "stack"):
        self.stack = stack
        self.core_index = effective_core_index or stack.layers[stack.spacer_index].refractive_index.real
        self.cladding_index = cladding_index
        self.label = label
        self._planar = cavity_mode(stack)
        self._cached = lru_cache(maxsize=None)(self._compute)

    def _compute(self, diameter_um: float) -> float:
        geometry = PillarGeometry(0.5 * diameter_um, self.core_index, self.cladding_index)
        return stack_q_int(self.stack, geometry, self._planar)

    def __call__(self, diameter_um: float) -> float:
        return self._cached(float(diameter_um))

    @property
    def planar_q(self) -> float:
        return self._planar.q_planar

    def describe(self) -> str:
        return self.label


@dataclass(frozen=True)
class LossParams:
    kappa: float  # m
    alpha: float  # 1/cm
    q_int_source: ConstantQInt | StackQInt = field(default_factory=ConstantQInt)

    def __post_init__(self):
        if self.kappa < 0:
            raise NegativeKappaError(f"kappa must be >= 0, got {self.kappa}")
        if self.alpha < 0:
            raise NegativeAlphaError(f"alpha must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class QDataPoint:
    diameter: float  # um
    q_measured: float
    method: Method = Method.PHOTOREFLECTANCE
    sigma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        if not self.diameter > 0:
            raise InvalidParamsError("diameter must be > 0")
        if not self.q_measured > 0:
            raise InvalidParamsError("measured Q must be > 0")


def q_abs(alpha: float, wavelength: float, index: float) -> float:
    """Absorption-limited Q from alpha (1/cm), vacuum wavelength (nm), index."""
    if alpha < 0:
        raise NegativeAlphaError(f"alpha must be >= 0, got {alpha}")
    if wavelength <= 0 or index < 1:
        raise InvalidParamsError("need wavelength > 0 and index >= 1")
    if alpha == 0:
        return math.inf
    return 2.0 * math.pi * index / (wavelength * 1e-9 * alpha * 1e2)


def q_scat(radius: float, kappa: float, k_t: float) -> float:
    """Sidewall-scattering Q for pillar radius (m), kappa (m), k_t (1/m)."""
    if kappa < 0:
        raise NegativeKappaError(f"kappa must be >= 0, got {kappa}")
    if radius <= 0:
        raise InvalidParamsError("radius must be > 0")
    loss = kappa * j0(k_t * radius) ** 2 / radius
    if loss == 0:
        return math.inf
    with np.errstate(over="ignore"):
        return float(1.0 / np.float64(loss))


def _scat_shape(diameter_um: float, wavelength: float, index: float) -> float:
    """J0(k_t R)**2 / R in 1/m: the sidewall loss per unit kappa."""
    radius_um = 0.5 * diameter_um
    kt = transverse_wavenumber(PillarGeometry(radius_um, index), wavelength)
    radius = radius_um * 1e-6
    return float(j0(kt * radius) ** 2 / radius)


def _abs_shape(wavelength: float, index: float) -> float:
    """lambda / (2 pi n) in cm: the absorption loss per unit alpha (1/cm)."""
    return wavelength * 1e-9 * 1e2 / (2.0 * math.pi * index)


def loss_channels(diameter: float, params: LossParams, wavelength: float, index: float) -> dict[str, float]:
    """Reciprocal Q of each channel at one diameter (um)."""
    return {
        "int": 1.0 / params.q_int_source(diameter),
        "scat": params.kappa * _scat_shape(diameter, wavelength, index),
        "abs": params.alpha * _abs_shape(wavelength, index),
    }


def q_total(diameter: float, params: LossParams, wavelength: float, index: float) -> float:
    """Harmonic composition of intrinsic, scattering and absorption Q."""
    if diameter <= 0:
        raise InvalidParamsError("diameter must be > 0")
    ch = loss_channels(diameter, params, wavelength, index)
    return 1.0 / (ch["int"] + ch["scat"] + ch["abs"])


@dataclass
class LossFit:
    params: LossParams
    covariance: np.ndarray  # over (kappa, alpha)
    residual_norm: float
    iterations: int

    @property
    def sigmas(self) -> tuple[float, float]:
        return tuple(float(math.sqrt(max(v, 0.0))) for v in np.diag(self.covariance))


def fit_loss_params(
    data: Sequence[QDataPoint],
    q_int_source: ConstantQInt | StackQInt | None = None,
    wavelength: float = 941.0,
    index: float = 3.46,
    *,
    max_iter: int = 200,
    tolerance: float = 1e-12,
) -> LossFit:
    """Fit (kappa, alpha) to Q-versus-diameter data.

    Residuals are relative loss mismatches ``Q_meas / Q_model - 1``. Both
    parameters are optimized in log space; the model is linear in them, so a
    non-negative weighted linear solve supplies the starting point.

    Raises
    ------
    InsufficientDataError
        Fewer than three distinct diameters.
    """
    q_int_source = q_int_source or ConstantQInt()
    if len({p.diameter for p in data}) < 3:
        raise InsufficientDataError("need at least 3 distinct diameters")
    d = np.array([p.diameter for p in data])
    q = np.array([p.q_measured for p in data])
    inv_int = np.array([1.0 / q_int_source(x) for x in d])
    s_scat = np.array([_scat_shape(x, wavelength, index) for x in d])
    s_abs = _abs_shape(wavelength, index)

    # weighted linear start: q (1/Q - 1/Q_int) = kappa q s_scat + alpha q s_abs
    A = np.column_stack([q * s_scat, q * s_abs * np.ones_like(q)])
    b = q * (1.0 / q - inv_int)
    start, _ = nnls(A, b)
    floor = np.array([1e-14, 1e-8])  # kappa in m, alpha in 1/cm
    start = np.maximum(start, floor)

    def model_inv(u):
        kappa, alpha = np.exp(u)
        return inv_int + kappa * s_scat + alpha * s_abs

    def residual(u):
        return q * model_inv(u) - 1.0

    def jacobian(u):
        kappa, alpha = np.exp(u)
        return np.column_stack([q * kappa * s_scat, q * alpha * s_abs * np.ones_like(q)])

    res = levenberg_marquardt(
        residual, np.log(start), jacobian, max_iter=max_iter, tolerance=tolerance, x_scale=1.0
    )
    kappa, alpha = np.exp(res.x)
    cov = covariance(res.jac, res.cost, d.size) * np.outer([kappa, alpha], [kappa, alpha])
    return LossFit(LossParams(float(kappa), float(alpha), q_int_source), cov, math.sqrt(res.cost), res.iterations)
