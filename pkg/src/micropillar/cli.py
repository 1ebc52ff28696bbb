"""Command-line interface.

Exit codes: 0 success, 2 input error, 3 fit non-convergence, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

import numpy as np

from . import __version__
from . import lineshapes as ls
from .coupling import fit_anticrossing, is_strong_coupling, rabi_splitting, read_peaks, visibility
from .dataio import (
    AnticrossReport,
    FitReport,
    LossFitReport,
    SynthSpec,
    emit_report,
    file_digest,
    format_spectrum,
    parse_spectrum,
    synth_spectrum,
    write_atomic,
)
from .errors import FitError, InputError, ParseError
from .fitter import fit
from .loss import ConstantQInt, Method, QDataPoint, StackQInt, fit_loss_params, q_total
from .stack import cavity_mode, load_stack, reflectance, transmittance
from .units import SpectralValue, Unit, convert

EXIT_OK, EXIT_INPUT, EXIT_FIT, EXIT_INTERNAL = 0, 2, 3, 4


def _kv_pairs(items) -> dict[str, float]:
    out = {}
    for item in items or []:
        for part in item.split(","):
            if not part.strip():
                continue
            key, sep, val = part.partition("=")
            if not sep:
                raise InputError(f"expected name=value, got {part!r}")
            try:
                out[key.strip()] = float(val)
            except ValueError:
                raise InputError(f"not a number in {part!r}") from None
    return out


def _floats(text: str, n: int, what: str) -> list[str]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != n:
        raise InputError(f"{what} needs {n} comma-separated fields")
    return parts


def _output(data: bytes, out: str | None) -> None:
    if out:
        write_atomic(out, data)
    else:
        sys.stdout.write(data.decode("utf-8"))


# ----------------------------------------------------------------- commands

def cmd_fit(args) -> int:
    s = parse_spectrum(args.spectrum)
    result = fit(
        s,
        args.model,
        init=_kv_pairs(args.init) or None,
        fixed_params=_kv_pairs(args.fix),
        max_iter=args.max_iter,
        tolerance=args.tolerance,
    )
    report = FitReport.from_result(result, file_digest(args.spectrum))
    _output(emit_report(report, args.format), args.out)
    return EXIT_OK


def cmd_synth(args) -> int:
    params = ls.params_from_dict(args.model, _kv_pairs([args.params]))
    start, stop, count, unit = _floats(args.axis, 4, "--axis")
    try:
        spec = SynthSpec(params, float(start), float(stop), int(count), Unit.parse(unit), args.noise, args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _output(format_spectrum(synth_spectrum(spec)).encode(), args.out)
    return EXIT_OK


def cmd_tmm(args) -> int:
    stack = load_stack(args.stack)
    if args.mode:
        window = None
        if args.window:
            lo, hi = _floats(args.window, 2, "--window")
            window = (float(lo), float(hi))
        mode = cavity_mode(stack, window)
        text = (
            f"lambda0_nm {float(mode.wavelength)!r}\n"
            f"q_planar {float(mode.q_planar)!r}\n"
            f"fwhm_nm {float(mode.fwhm)!r}\n"
        )
        _output(text.encode(), args.out)
        return EXIT_OK
    if not args.sweep:
        raise InputError("tmm needs --sweep start,stop,count or --mode")
    start, stop, count = _floats(args.sweep, 3, "--sweep")
    lam = np.linspace(float(start), float(stop), int(count))
    r, R = reflectance(stack, lam)
    T = transmittance(stack, lam)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["wavelength_nm", "R", "T", "phase_r"])
    for row in zip(lam, R, T, np.angle(r)):
        w.writerow([repr(float(v)) for v in row])
    _output(buf.getvalue().encode(), args.out)
    return EXIT_OK


def _read_qdata(path) -> list[QDataPoint]:
    points = []
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    for lineno, row in enumerate(rows, start=1):
        if len(row) < 3:
            raise ParseError("expected diameter_um,Q,method[,sigma]", lineno)
        try:
            sigma = float(row[3]) if len(row) > 3 and row[3].strip() else None
            points.append(QDataPoint(float(row[0]), float(row[1]), Method.parse(row[2]), sigma))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    return points


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def cmd_loss_fit(args) -> int:
    data = _read_qdata(args.qdata)
    kind, _, value = args.qint.partition(":")
    if kind == "const":
        if not _is_number(value):
            raise InputError(f"bad --qint value {value!r}")
        source = ConstantQInt(float(value))
    elif kind == "stack":
        source = StackQInt(load_stack(value), args.index, label=f"stack:{value}")
    else:
        raise InputError("--qint must be const:VALUE or stack:FILE")
    digest = file_digest(args.qdata)
    reports = []
    methods = [Method.parse(args.method)] if args.method else list(Method)
    for method in methods:
        subset = [p for p in data if p.method is method]
        if not subset:
            continue
        res = fit_loss_params(subset, source, args.wavelength, args.index)
        ks, as_ = res.sigmas
        report = LossFitReport(
            input_digest=digest,
            method=method.value,
            kappa_m=res.params.kappa,
            kappa_sigma=ks,
            alpha_per_cm=res.params.alpha,
            alpha_sigma=as_,
            q_int=source.describe(),
            wavelength_nm=args.wavelength,
            index=args.index,
            n_points=len(subset),
            diameters_um=[p.diameter for p in subset],
            q_measured=[p.q_measured for p in subset],
            q_model=[q_total(p.diameter, res.params, args.wavelength, args.index) for p in subset],
        )
        reports.append(report)
    if not reports:
        raise InputError("no data points for the requested method")
    _output(emit_report(reports if len(reports) > 1 else reports[0], args.format), args.out)
    return EXIT_OK


def cmd_anticross(args) -> int:
    peaks = read_peaks(args.peaks)
    res = fit_anticrossing(peaks, args.gamma_cavity, args.gamma_exciton)
    model = res.model
    verdict = is_strong_coupling(model)
    report = AnticrossReport(
        input_digest=file_digest(args.peaks),
        g_ueV=model.g,
        g_sigma=res.g_sigma,
        cavity_offset_ueV=res.cavity_offset,
        cavity_slope=res.cavity_slope,
        exciton_offset_ueV=res.exciton_offset,
        exciton_slope=res.exciton_slope,
        gamma_cavity_ueV=args.gamma_cavity,
        gamma_exciton_ueV=args.gamma_exciton,
        rabi_splitting_ueV=rabi_splitting(model),
        strong_coupling=verdict.strong,
        coupling_margin_ueV=verdict.margin,
        visibility_broadened=visibility(model.g, args.gamma_cavity, args.gamma_exciton),
        visibility_dephasing=(
            None if args.gamma_star is None else visibility(model.g, args.gamma_cavity, args.gamma_star)
        ),
    )
    _output(emit_report(report, args.format), args.out)
    return EXIT_OK


def cmd_convert(args) -> int:
    ref = None
    if args.ref:
        rv, ru = _floats(args.ref, 2, "--ref")
        ref = SpectralValue(float(rv), Unit.parse(ru))
    value = SpectralValue(args.value, Unit.parse(args.source), width=ref is not None or args.width)
    out = convert(value, args.target, ref)
    sys.stdout.write(f"{out.magnitude!r} {out.unit.value}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="micropillar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a lineshape model to a spectrum file")
    p.add_argument("model", choices=list(ls.PARAMS_BY_KIND))
    p.add_argument("spectrum")
    p.add_argument("--fix", action="append", metavar="NAME=VALUE")
    p.add_argument("--init", action="append", metavar="NAME=VALUE")
    p.add_argument("--out")
    p.add_argument("--format", choices=("table", "struct"), default="table")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tolerance", type=float, default=1e-10)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synth", help="write a seeded synthetic spectrum")
    p.add_argument("model", choices=list(ls.PARAMS_BY_KIND))
    p.add_argument("--params", required=True, help="k=v,... in ueV")
    p.add_argument("--axis", required=True, help="start,stop,count,unit")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("tmm", help="transfer-matrix sweep or cavity mode of a stack file")
    p.add_argument("stack")
    p.add_argument("--sweep", help="start,stop,count in nm")
    p.add_argument("--mode", action="store_true")
    p.add_argument("--window", help="lo,hi search window in nm for --mode")
    p.add_argument("--out")
    p.set_defaults(func=cmd_tmm)

    p = sub.add_parser("loss-fit", help="fit kappa and alpha to Q-versus-diameter data")
    p.add_argument("qdata")
    p.add_argument("--qint", default="const:2600000")
    p.add_argument("--wavelength", type=float, default=941.0)
    p.add_argument("--index", type=float, default=3.46)
    p.add_argument("--method", help="fit only this method (PL or PR); default fits each present")
    p.add_argument("--out")
    p.add_argument("--format", choices=("table", "struct"), default="table")
    p.set_defaults(func=cmd_loss_fit)

    p = sub.add_parser("anticross", help="fit a polariton anticrossing")
    p.add_argument("peaks")
    p.add_argument("--gamma-cavity", type=float, required=True)
    p.add_argument("--gamma-exciton", type=float, required=True)
    p.add_argument("--gamma-star", type=float)
    p.add_argument("--out")
    p.add_argument("--format", choices=("table", "struct"), default="table")
    p.set_defaults(func=cmd_anticross)

    p = sub.add_parser("convert", help="convert a spectral value between units")
    p.add_argument("value", type=float)
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--ref", help="line center value,unit; marks VALUE as a linewidth")
    p.add_argument("--width", action="store_true", help="treat VALUE as a linewidth")
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
