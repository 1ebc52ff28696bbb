"""Spectrum files, seeded synthetic spectra and fit reports.

Spectrum file format (comma separated)::

    # diameter_um: 6
    # kind: PR
    ueV,intensity
    1313100.0,0.9001
    ...

The first header token names the axis unit. Lines starting with ``#`` are
comments; ``# key: value`` comments become metadata.

Synthetic noise uses the PCG64 bit generator seeded with the given integer;
raw 64-bit outputs are mapped to uniforms in (0, 1) as ``((k >> 11) + 0.5) /
2**53`` and paired through the Box-Muller transform. Unlike
``Generator.normal``, this stream does not depend on the NumPy version.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import IO

import numpy as np

from . import __version__
from . import lineshapes as ls
from .errors import InvalidParamsError, ParseError, TooFewPointsError, UnitError
from .fitter import MIN_POINTS, FitResult, Spectrum, deconvolved_q, physical_linewidth
from .units import SpectralValue, Unit, axis_to_ueV, convert, photon_lifetime

FIT_SCHEMA = "micropillar.fit/1"
LOSS_SCHEMA = "micropillar.loss-fit/1"
ANTICROSS_SCHEMA = "micropillar.anticross/1"


# ------------------------------------------------------------------ parsing

def parse_spectrum(source: str | os.PathLike | IO[str]) -> Spectrum:
    """Read a spectrum file (path or text stream).

    Rows are re-sorted so the axis ascends.

    Raises
    ------
    ParseError
        Malformed content, with the offending line number.
    UnitError
        Unknown axis unit token.
    TooFewPointsError
        Fewer than 8 data rows.
    """
    text = _read_text(source)
    meta: dict[str, str] = {}
    unit = None
    axis: list[float] = []
    values: list[float] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body:
                key, _, val = body.partition(":")
                meta[key.strip()] = val.strip()
            continue
        parts = [p.strip() for p in line.split(",")]
        if unit is None:
            if len(parts) != 2:
                raise ParseError("header must be '<axis_unit>,intensity'", lineno)
            try:
                unit = Unit.parse(parts[0])
            except UnitError as exc:
                raise UnitError(f"line {lineno}: {exc}") from None
            continue
        if len(parts) != 2:
            raise ParseError(f"expected 2 columns, got {len(parts)}", lineno)
        try:
            a, v = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(f"not a number: {line!r}", lineno) from None
        if not (math.isfinite(a) and math.isfinite(v)):
            raise ParseError("non-finite value", lineno)
        axis.append(a)
        values.append(v)
    if unit is None:
        raise ParseError("missing header line")
    if len(axis) < MIN_POINTS:
        raise TooFewPointsError(f"spectrum needs >= {MIN_POINTS} points, got {len(axis)}")
    a = np.array(axis)
    v = np.array(values)
    order = np.argsort(a, kind="stable")
    a, v = a[order], v[order]
    if np.any(np.diff(a) <= 0):
        raise ParseError("duplicate axis values")
    return Spectrum(a, v, unit, meta)


def _read_text(source) -> str:
    if hasattr(source, "read"):
        return source.read()
    return Path(source).read_text(encoding="utf-8")


def format_spectrum(s: Spectrum) -> str:
    out = io.StringIO()
    for k, v in s.meta.items():
        out.write(f"# {k}: {v}\n")
    out.write(f"{s.axis_unit.value},intensity\n")
    for a, v in zip(s.axis, s.intensity):
        out.write(f"{float(a)!r},{float(v)!r}\n")
    return out.getvalue()


def spectrum_digest(s: Spectrum) -> str:
    return hashlib.sha256(format_spectrum(s).encode()).hexdigest()


def file_digest(path: str | os.PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_atomic(path: str | os.PathLike, data: str | bytes) -> None:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ------------------------------------------------------------- synthetic data

@dataclass(frozen=True)
class SynthSpec:
    params: ls.LineshapeParams
    start: float
    stop: float
    count: int
    unit: Unit = Unit.MICRO_ELECTRONVOLT
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "unit", Unit.parse(self.unit))
        if self.count < MIN_POINTS:
            raise TooFewPointsError(f"count must be >= {MIN_POINTS}")
        if not self.stop > self.start:
            raise InvalidParamsError("axis stop must exceed start")
        if self.noise_sigma < 0:
            raise InvalidParamsError("noise_sigma must be >= 0")

    @property
    def model_kind(self) -> str:
        return self.params.kind


def standard_normals(n: int, seed: int) -> np.ndarray:
    """``n`` standard normal variates from PCG64(seed) via Box-Muller."""
    bitgen = np.random.PCG64(seed)
    pairs = (n + 1) // 2
    raw = bitgen.random_raw(2 * pairs).astype(np.uint64)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    u1, u2 = u[0::2], u[1::2]
    rad = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * pairs)
    z[0::2] = rad * np.cos(2.0 * np.pi * u2)
    z[1::2] = rad * np.sin(2.0 * np.pi * u2)
    return z[:n]


def synth_spectrum(spec: SynthSpec, meta: dict | None = None) -> Spectrum:
    """Evaluate the model on a linear axis grid and add seeded Gaussian noise."""
    axis = np.linspace(spec.start, spec.stop, spec.count)
    clean = ls.evaluate(axis_to_ueV(axis, spec.unit), spec.params.validate())
    if spec.noise_sigma > 0:
        clean = clean + spec.noise_sigma * standard_normals(spec.count, spec.seed)
    info = {"model": spec.model_kind, "seed": str(spec.seed), "noise_sigma": repr(float(spec.noise_sigma))}
    info.update(meta or {})
    return Spectrum(axis, clean, spec.unit, info)


# ------------------------------------------------------------------ reports

@dataclass
class FitReport:
    input_digest: str
    model_kind: str
    params: dict[str, float]
    sigmas: dict[str, float | None]
    q_factor: float
    q_factor_sigma: float | None
    linewidth_ueV: float
    photon_lifetime_ps: float
    residual_norm: float
    converged: bool
    iterations: int
    deconvolved_q: float | None = None
    deconvolved_q_sigma: float | None = None
    tool_version: str = __version__
    schema: str = FIT_SCHEMA

    @classmethod
    def from_result(cls, result: FitResult, digest: str) -> FitReport:
        width, _ = physical_linewidth(result)
        dq = dqs = None
        if result.model_kind == "voigt":
            dq, dqs = deconvolved_q(result)
        return cls(
            input_digest=digest,
            model_kind=result.model_kind,
            params=ls.params_to_dict(result.params),
            sigmas=result.sigmas,
            q_factor=float(result.q_factor),
            q_factor_sigma=_opt(result.q_factor_sigma),
            linewidth_ueV=float(width),
            photon_lifetime_ps=photon_lifetime(width),
            residual_norm=float(result.residual_norm),
            converged=bool(result.converged),
            iterations=int(result.iterations),
            deconvolved_q=dq,
            deconvolved_q_sigma=_opt(dqs),
        )

    @property
    def center_ueV(self) -> float:
        return self.params.get("omega0", self.params.get("center"))


@dataclass
class LossFitReport:
    input_digest: str
    method: str
    kappa_m: float
    kappa_sigma: float | None
    alpha_per_cm: float
    alpha_sigma: float | None
    q_int: str
    wavelength_nm: float
    index: float
    n_points: int
    diameters_um: list[float] = field(default_factory=list)
    q_measured: list[float] = field(default_factory=list)
    q_model: list[float] = field(default_factory=list)
    tool_version: str = __version__
    schema: str = LOSS_SCHEMA


@dataclass
class AnticrossReport:
    input_digest: str
    g_ueV: float
    g_sigma: float | None
    cavity_offset_ueV: float
    cavity_slope: float
    exciton_offset_ueV: float
    exciton_slope: float
    gamma_cavity_ueV: float
    gamma_exciton_ueV: float
    rabi_splitting_ueV: float | None
    strong_coupling: bool
    coupling_margin_ueV: float
    visibility_broadened: float
    visibility_dephasing: float | None = None
    tool_version: str = __version__
    schema: str = ANTICROSS_SCHEMA


_REPORTS = {FIT_SCHEMA: FitReport, LOSS_SCHEMA: LossFitReport, ANTICROSS_SCHEMA: AnticrossReport}


def _opt(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def emit_report(report, fmt: str = "struct") -> bytes:
    """Serialize a report.

    ``struct`` is sorted-key JSON carrying a ``schema`` field and parses back
    with :func:`parse_report`; ``table`` is a human-readable summary. A list
    of reports becomes a JSON array.
    """
    if fmt == "struct":
        doc = [asdict(r) for r in report] if isinstance(report, list) else asdict(report)
        return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")
    if fmt == "table":
        if isinstance(report, list):
            return "\n".join(_table(r) for r in report).encode("utf-8")
        return _table(report).encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}")


def parse_report(data: bytes | str):
    """Inverse of ``emit_report(..., "struct")``; a JSON array gives a list."""
    doc = json.loads(data)
    if isinstance(doc, list):
        return [_report_from_doc(d) for d in doc]
    return _report_from_doc(doc)


def _report_from_doc(doc: dict):
    try:
        cls = _REPORTS[doc["schema"]]
    except KeyError:
        raise ParseError(f"unknown report schema {doc.get('schema')!r}") from None
    names = {f.name for f in fields(cls)}
    return cls(**{k: v for k, v in doc.items() if k in names})


def _pm(value, sigma=None, fmt="{:.6g}"):
    if value is None:
        return "n/a"
    s = fmt.format(value)
    return f"{s} ± {'n/a' if sigma is None else fmt.format(sigma)}"


def _table(report) -> str:
    rows: list[tuple[str, str]] = []
    if isinstance(report, FitReport):
        center = SpectralValue(report.center_ueV, Unit.MICRO_ELECTRONVOLT)
        width_pm = convert(SpectralValue(report.linewidth_ueV, Unit.MICRO_ELECTRONVOLT, width=True), Unit.PICOMETER, center)
        rows.append(("model", report.model_kind))
        for name, value in report.params.items():
            rows.append((name, _pm(value, report.sigmas.get(name), "{:.10g}")))
        rows.append(("Q-factor", _pm(report.q_factor, report.q_factor_sigma, "{:.0f}")))
        if report.model_kind == "voigt":
            rows.append(("Q (deconvolved)", _pm(report.deconvolved_q, report.deconvolved_q_sigma, "{:.0f}")))
        rows.append(("linewidth [ueV]", f"{report.linewidth_ueV:.4f}"))
        rows.append(("linewidth [pm]", f"{width_pm.magnitude:.4f}"))
        rows.append(("photon lifetime [ps]", f"{report.photon_lifetime_ps:.1f}"))
        rows.append(("residual norm", f"{report.residual_norm:.6g}"))
        rows.append(("converged", str(report.converged)))
    elif isinstance(report, LossFitReport):
        rows += [
            ("method", report.method),
            ("kappa [m]", _pm(report.kappa_m, report.kappa_sigma, "{:.4g}")),
            ("alpha [1/cm]", _pm(report.alpha_per_cm, report.alpha_sigma, "{:.4g}")),
            ("Q_int", report.q_int),
            ("points", str(report.n_points)),
        ]
        for d, qm, qf in zip(report.diameters_um, report.q_measured, report.q_model):
            rows.append((f"d = {d:g} um", f"Q_meas {qm:.0f}   Q_model {qf:.0f}"))
    elif isinstance(report, AnticrossReport):
        rows += [
            ("g [ueV]", _pm(report.g_ueV, report.g_sigma, "{:.4f}")),
            ("Rabi splitting [ueV]", "n/a" if report.rabi_splitting_ueV is None else f"{report.rabi_splitting_ueV:.4f}"),
            ("visibility (broadened)", f"{report.visibility_broadened:.4f}"),
            ("visibility (dephasing)", "n/a" if report.visibility_dephasing is None else f"{report.visibility_dephasing:.4f}"),
            ("strong coupling", f"{report.strong_coupling} (margin {report.coupling_margin_ueV:.4f} ueV)"),
        ]
    else:
        raise TypeError(f"cannot tabulate {type(report).__name__}")
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k.ljust(width)}  {v}\n" for k, v in rows)
