"""Damped Gauss-Newton (Levenberg-Marquardt) fitting of lineshape models.

The generic solver :func:`levenberg_marquardt` is shared with the loss-model
and anticrossing fits. :func:`fit` wraps it for spectra: widths are optimized
in log space, the line center relative to an anchor inside the data range,
and uncertainties come from the covariance ``s^2 (J^T J)^-1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from . import lineshapes as ls
from .errors import (
    DegenerateSpectrumError,
    InvalidParamsError,
    NoConvergenceError,
    ParseError,
    SingularJacobianError,
    TooFewPointsError,
    WrongModelError,
)
from .units import Unit, axis_to_ueV

MIN_POINTS = 8
MODEL_KINDS = tuple(ls.PARAMS_BY_KIND)
SINGULAR_CONDITION = 1e12


@dataclass
class Spectrum:
    """Sampled spectrum on a single-unit axis.

    ``meta`` holds free-form annotations (pillar diameter, temperature,
    measurement kind ...).
    """

    axis: np.ndarray
    intensity: np.ndarray
    axis_unit: Unit = Unit.MICRO_ELECTRONVOLT
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float).ravel()
        self.intensity = np.asarray(self.intensity, dtype=float).ravel()
        self.axis_unit = Unit.parse(self.axis_unit)
        if self.axis.shape != self.intensity.shape:
            raise ParseError("axis and intensity lengths differ")
        if self.axis.size < MIN_POINTS:
            raise TooFewPointsError(f"spectrum needs >= {MIN_POINTS} points, got {self.axis.size}")
        if not (np.all(np.isfinite(self.axis)) and np.all(np.isfinite(self.intensity))):
            raise ParseError("non-finite values in spectrum")
        d = np.diff(self.axis)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ParseError("spectrum axis must be strictly monotone")

    def __len__(self):
        return self.axis.size

    def energy_axis(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis converted to ueV and sorted ascending, with matching intensities."""
        e = axis_to_ueV(self.axis, self.axis_unit)
        order = np.argsort(e, kind="stable")
        return e[order], self.intensity[order]


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    jac: np.ndarray
    residual: np.ndarray
    iterations: int
    converged: bool
    cost_history: list[float]


def _relative_step(dx, x, x_scale):
    return float(np.max(np.abs(dx) / (np.abs(x) + x_scale)))


def levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    x0,
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None,
    *,
    max_iter: int = 200,
    tolerance: float = 1e-10,
    x_scale=None,
    lambda0: float = 1e-3,
) -> LMResult:
    """Minimize ``sum(residual(x)**2)``.

    Marquardt damping ``(J^T J + lam diag(J^T J)) dx = -J^T r`` with
    ``lam *= 0.5`` on an accepted step and ``lam *= 2`` on a rejected one.
    Converges when the relative parameter step or the relative cost
    decrease falls below ``tolerance``. ``x_scale`` is added to ``|x|`` when
    forming the relative step so parameters near zero are well behaved.

    Raises
    ------
    NoConvergenceError
        After ``max_iter`` iterations without meeting the criteria.
    """
    x = np.array(x0, dtype=float)
    scale = np.ones_like(x) if x_scale is None else np.broadcast_to(np.asarray(x_scale, float), x.shape)
    if jacobian is None:
        jacobian = _forward_difference(residual)

    r = residual(x)
    cost = float(r @ r)
    if not math.isfinite(cost):
        raise InvalidParamsError("residual not finite at the starting point")
    J = jacobian(x)
    lam = lambda0
    history = [cost]
    for it in range(1, max_iter + 1):
        A = J.T @ J
        g = J.T @ r
        d = np.diag(A).copy()
        d[d <= 0] = 1.0
        try:
            dx = np.linalg.solve(A + lam * np.diag(d), -g)
        except np.linalg.LinAlgError:
            lam *= 2.0
            continue
        step = _relative_step(dx, x, scale)
        x_new = x + dx
        r_new = residual(x_new)
        cost_new = float(r_new @ r_new)
        if math.isfinite(cost_new) and cost_new <= cost:
            rel_decrease = (cost - cost_new) / cost if cost > 0 else 0.0
            x, r, cost = x_new, r_new, cost_new
            history.append(cost)
            J = jacobian(x)
            lam = max(lam * 0.5, 1e-15)
            if step < tolerance or rel_decrease < tolerance or cost == 0.0:
                return LMResult(x, cost, J, r, it, True, history)
        else:
            lam *= 2.0
            # at the round-off floor every proposal is rejected and tiny
            if step < tolerance or lam > 1e20:
                return LMResult(x, cost, J, r, it, True, history)
    raise NoConvergenceError(f"no convergence after {max_iter} iterations (cost {cost:.6g})")


def _forward_difference(residual):
    def jac(x):
        r0 = residual(x)
        J = np.empty((r0.size, x.size))
        for i in range(x.size):
            h = 1e-7 * max(abs(x[i]), 1.0)
            xp = x.copy()
            xp[i] += h
            J[:, i] = (residual(xp) - r0) / h
        return J

    return jac


def covariance(jac: np.ndarray, cost: float, n_points: int) -> np.ndarray:
    """``s^2 (J^T J)^-1`` with ``s^2 = cost / (N - k)``.

    Raises ``SingularJacobianError`` when the column-scaled normal matrix has
    a condition number above 1e12.
    """
    k = jac.shape[1]
    A = jac.T @ jac
    d = np.sqrt(np.diag(A))
    if np.any(d == 0) or not np.all(np.isfinite(d)):
        raise SingularJacobianError("a parameter has no influence on the residuals")
    C = A / np.outer(d, d)
    if np.linalg.cond(C) > SINGULAR_CONDITION:
        raise SingularJacobianError("J^T J is numerically singular")
    dof = max(n_points - k, 1)
    s2 = cost / dof
    cinv = np.linalg.inv(C)
    return s2 * cinv / np.outer(d, d)


# ------------------------------------------------------------------ spectra

@dataclass
class FitResult:
    model_kind: str
    params: ls.LineshapeParams
    free_params: tuple[str, ...]
    covariance: np.ndarray
    residual_norm: float
    q_factor: float
    q_factor_sigma: float
    converged: bool
    iterations: int
    n_points: int = 0
    cost_history: list[float] = field(default_factory=list)

    @property
    def sigmas(self) -> dict[str, float | None]:
        """One-sigma uncertainties; ``None`` for fixed parameters."""
        out: dict[str, float | None] = {name: None for name in ls.param_names(self.model_kind)}
        for i, name in enumerate(self.free_params):
            out[name] = float(math.sqrt(max(self.covariance[i, i], 0.0)))
        return out

    def cov(self, a: str, b: str) -> float:
        if a not in self.free_params or b not in self.free_params:
            return 0.0
        return float(self.covariance[self.free_params.index(a), self.free_params.index(b)])


def robust_noise(y) -> float:
    """1.4826 * MAD of first differences / sqrt(2)."""
    d = np.diff(np.asarray(y, dtype=float))
    mad = np.median(np.abs(d - np.median(d)))
    return float(1.4826 * mad / math.sqrt(2.0))


def _edge_baseline(y) -> float:
    n = y.size
    k = max(2, n // 10)
    return float(np.median(np.concatenate([y[:k], y[-k:]])))


def _half_width_crossings(x, y, i, level):
    """Interpolated positions left and right of index ``i`` where ``y`` drops below ``level``."""
    left = x[0]
    for j in range(i, 0, -1):
        if y[j - 1] < level <= y[j]:
            left = x[j - 1] + (level - y[j - 1]) * (x[j] - x[j - 1]) / (y[j] - y[j - 1])
            break
    right = x[-1]
    for j in range(i, x.size - 1):
        if y[j + 1] < level <= y[j]:
            right = x[j] + (y[j] - level) * (x[j + 1] - x[j]) / (y[j] - y[j + 1])
            break
    return left, right


def initial_guess(s: Spectrum, model_kind: str, fixed_params: Mapping[str, float] | None = None):
    """Heuristic starting parameters for ``fit``.

    Emission models take the peak position, half-maximum crossings and
    edge-median baseline. For the Fano model the asymmetry ``|q|`` follows
    from ``(max - baseline) / (baseline - min) = q^2`` and its sign from the
    order of the two extrema; several width estimates are tried and the one
    with the smallest squared error wins.

    Raises
    ------
    DegenerateSpectrumError
        If the extremum is within 3 robust noise units of the baseline.
    """
    if model_kind not in MODEL_KINDS:
        raise InvalidParamsError(f"unknown model kind {model_kind!r}")
    fixed = dict(fixed_params or {})
    x, y = s.energy_axis()
    base = _edge_baseline(y)
    noise = robust_noise(y)
    span = x[-1] - x[0]
    spacing = span / (x.size - 1)

    if model_kind == "fano":
        return _fano_guess(x, y, base, noise, spacing)

    i = int(np.argmax(y - base))
    height = y[i] - base
    if height <= 3.0 * noise or height <= 0:
        raise DegenerateSpectrumError("no peak distinguishable from the baseline")
    left, right = _half_width_crossings(x, y, i, base + 0.5 * height)
    fwhm = max(right - left, spacing)
    center = x[i]
    if model_kind == "lorentzian":
        return ls.LorentzianParams(center, fwhm, height, base)
    if model_kind == "gaussian":
        return ls.GaussianParams(center, fwhm, height, base)
    gauss = fixed.get("gauss_fwhm")
    if gauss is not None:
        lor = ls.lorentz_from_voigt_fwhm(fwhm, gauss)
        if lor <= 0.05 * fwhm:
            lor = 0.1 * fwhm
        gauss = max(gauss, 1e-6 * fwhm)
    elif "lorentz_fwhm" in fixed:
        lor = max(fixed["lorentz_fwhm"], 1e-6 * fwhm)
        gauss = max(fwhm - 0.5 * lor, 0.1 * fwhm)
    else:
        lor = gauss = fwhm / ls.olivero_fwhm(1.0, 1.0)
    return ls.VoigtParams(center, lor, gauss, height, base)


def _fano_guess(x, y, base, noise, spacing):
    i_max = int(np.argmax(y))
    i_min = int(np.argmin(y))
    up = y[i_max] - base
    down = base - y[i_min]
    if max(up, down) <= 3.0 * noise:
        raise DegenerateSpectrumError("no resonance distinguishable from the baseline")
    sign = 1.0 if x[i_max] > x[i_min] else -1.0
    tiny = max(noise, 1e-12 * max(abs(base), 1.0))
    up = max(up, tiny)
    down = max(down, tiny)
    q_abs = math.sqrt(up / down)
    q = sign * q_abs
    a0 = down
    r0 = base - a0

    candidates = []
    # extrema separation = gamma/2 (|q| + 1/|q|)
    sep = abs(x[i_max] - x[i_min])
    if sep > 0:
        g = 2.0 * sep / (q_abs + 1.0 / q_abs)
        candidates.append(ls.FanoParams(r0, a0, q, x[i_min] + q * g / 2.0, g))
        candidates.append(ls.FanoParams(r0, a0, q, x[i_max] - g / (2.0 * q), g))
    # dip or peak half widths, good for |q| << 1 or |q| >> 1
    left, right = _half_width_crossings(x, -(y - base), i_min, 0.5 * down)
    g_dip = max(right - left, spacing)
    candidates.append(ls.FanoParams(r0, a0, q, x[i_min] + q * g_dip / 2.0, g_dip))
    left, right = _half_width_crossings(x, y - base, i_max, 0.5 * up)
    g_peak = max(right - left, spacing)
    candidates.append(ls.FanoParams(r0, a0, q, x[i_max] - g_peak / (2.0 * q), g_peak))

    best, best_sse = None, math.inf
    for c in candidates:
        if not (c.gamma_c > 0 and math.isfinite(c.omega0)):
            continue
        sse = float(np.sum((ls.eval_fano(x, c) - y) ** 2))
        if sse < best_sse:
            best, best_sse = c, sse
    return best


def fit(
    s: Spectrum,
    model_kind: str,
    init: ls.LineshapeParams | Mapping[str, float] | None = None,
    *,
    max_iter: int = 200,
    tolerance: float = 1e-10,
    fixed_params: Mapping[str, float] | None = None,
) -> FitResult:
    """Least-squares fit of a lineshape model to a spectrum.

    Parameters
    ----------
    s : Spectrum
        Any axis unit; the model is evaluated on the axis converted to ueV.
    model_kind : {"lorentzian", "gaussian", "voigt", "fano"}
    init : params or mapping, optional
        Full or partial starting values; missing entries come from
        :func:`initial_guess`.
    fixed_params : mapping, optional
        Parameters held at the given value (e.g. ``{"gauss_fwhm": 6.2}``).

    Returns
    -------
    FitResult
        Parameters in ueV, covariance over the free parameters and the
        Q-factor (center over total FWHM) with its propagated sigma.
    """
    if model_kind not in MODEL_KINDS:
        raise InvalidParamsError(f"unknown model kind {model_kind!r}")
    names = ls.param_names(model_kind)
    fixed = {k: float(v) for k, v in (fixed_params or {}).items()}
    for k in fixed:
        if k not in names:
            raise InvalidParamsError(f"{model_kind} has no parameter {k!r}")

    if isinstance(init, (ls.LorentzianParams, ls.GaussianParams, ls.VoigtParams, ls.FanoParams)):
        if init.kind != model_kind:
            raise WrongModelError(f"init is {init.kind}, model is {model_kind}")
        start = ls.params_to_dict(init)
    else:
        partial = dict(init or {})
        start = {}
        if set(partial) | set(fixed) != set(names):
            start = ls.params_to_dict(initial_guess(s, model_kind, fixed))
        start.update({k: float(v) for k, v in partial.items()})
    start.update(fixed)
    template = ls.params_from_dict(model_kind, start).validate()

    x, y = s.energy_axis()
    cls = type(template)
    center_name = "omega0" if model_kind == "fano" else "center"
    free = tuple(n for n in names if n not in fixed)
    if not free:
        raise InvalidParamsError("all parameters are fixed")
    anchor = start[center_name]
    y_scale = max(float(np.ptp(y)), 1e-300)
    width_scale = min(start[w] for w in cls.widths if start[w] > 0)

    def to_internal(vals):
        out = []
        for n in free:
            v = vals[n]
            if n in cls.widths:
                if v <= 0:
                    raise InvalidParamsError(f"free width {n} must start > 0")
                out.append(math.log(v))
            elif n == center_name:
                out.append(v - anchor)
            else:
                out.append(v)
        return np.array(out)

    def to_params(u):
        vals = dict(start)
        for n, ui in zip(free, u):
            if n in cls.widths:
                vals[n] = math.exp(ui)
            elif n == center_name:
                vals[n] = anchor + ui
            else:
                vals[n] = float(ui)
        return cls(**vals)

    def residual(u):
        with np.errstate(over="ignore", invalid="ignore"):
            try:
                p = to_params(u)
            except OverflowError:
                return np.full_like(y, np.inf)
        return ls.evaluate(x, p) - y

    def jacobian(u):
        p = to_params(u)
        grad = ls.gradient(x, p)
        cols = []
        for n in free:
            col = grad[n]
            if n in cls.widths:
                col = col * getattr(p, n)
            cols.append(col)
        return np.column_stack(cols)

    x_scale = []
    for n in free:
        if n in cls.widths:
            x_scale.append(1.0)
        elif n == center_name:
            x_scale.append(width_scale)
        elif n == "q":
            x_scale.append(1.0)
        else:
            x_scale.append(y_scale)

    res = levenberg_marquardt(
        residual, to_internal(start), jacobian, max_iter=max_iter, tolerance=tolerance, x_scale=x_scale
    )
    params = to_params(res.x)
    cov_int = covariance(res.jac, res.cost, x.size)
    # chain rule from internal (log width) to natural parameters
    t = np.array([getattr(params, n) if n in cls.widths else 1.0 for n in free])
    cov = cov_int * np.outer(t, t)

    result = FitResult(
        model_kind=model_kind,
        params=params,
        free_params=free,
        covariance=cov,
        residual_norm=math.sqrt(res.cost),
        q_factor=math.nan,
        q_factor_sigma=math.nan,
        converged=res.converged,
        iterations=res.iterations,
        n_points=x.size,
        cost_history=res.cost_history,
    )
    q, qs = _q_with_sigma(result)
    result.q_factor = q
    result.q_factor_sigma = qs
    return result


def _propagate(result: FitResult, grad: Mapping[str, float]) -> float:
    var = 0.0
    for a, ga in grad.items():
        for b, gb in grad.items():
            var += ga * gb * result.cov(a, b)
    return math.sqrt(max(var, 0.0))


def _q_with_sigma(result: FitResult) -> tuple[float, float]:
    p = result.params
    if result.model_kind == "fano":
        q = p.omega0 / p.gamma_c
        grad = {"omega0": 1.0 / p.gamma_c, "gamma_c": -q / p.gamma_c}
    elif result.model_kind == "voigt":
        w = ls.voigt_fwhm(p.lorentz_fwhm, p.gauss_fwhm)
        q = p.center / w
        grad = {"center": 1.0 / w}
        for name in ("lorentz_fwhm", "gauss_fwhm"):
            if name in result.free_params:
                grad[name] = -q / w * _voigt_width_partial(p, name)
    else:
        q = p.center / p.fwhm
        grad = {"center": 1.0 / p.fwhm, "fwhm": -q / p.fwhm}
    return q, _propagate(result, grad)


def _voigt_width_partial(p: ls.VoigtParams, name: str) -> float:
    v = getattr(p, name)
    h = 1e-6 * v
    hi = replace(p, **{name: v + h})
    lo = replace(p, **{name: v - h})
    return (ls.voigt_fwhm(hi.lorentz_fwhm, hi.gauss_fwhm) - ls.voigt_fwhm(lo.lorentz_fwhm, lo.gauss_fwhm)) / (2 * h)


def deconvolved_q(result: FitResult) -> tuple[float, float]:
    """Q from the Lorentzian component of a Voigt fit, instrument width excluded."""
    if result.model_kind != "voigt":
        raise WrongModelError(f"deconvolved_q needs a voigt fit, got {result.model_kind}")
    p = result.params
    q = p.center / p.lorentz_fwhm
    grad = {"center": 1.0 / p.lorentz_fwhm, "lorentz_fwhm": -q / p.lorentz_fwhm}
    return q, _propagate(result, grad)


def physical_linewidth(result: FitResult) -> tuple[float, float | None]:
    """Linewidth tied to the photon lifetime, with sigma (None if fixed)."""
    p = result.params
    name = {"fano": "gamma_c", "voigt": "lorentz_fwhm"}.get(result.model_kind, "fwhm")
    return getattr(p, name), result.sigmas[name]
