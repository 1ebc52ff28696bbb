import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from micropillar import cli
from micropillar.coupling import CoupledOscillator, polariton_branches
from micropillar.dataio import parse_report
from micropillar.loss import ConstantQInt, LossParams, q_total

FANO_ARGS = ["r0=0.8,a0=0.1,q=2,omega0=1313200,gamma_c=4.9", "1313102,1313298,512,ueV"]


@pytest.fixture
def spectrum(tmp_path):
    path = tmp_path / "fano.csv"
    code = cli.main(["synth", "fano", "--params", FANO_ARGS[0], "--axis", FANO_ARGS[1],
                     "--noise", "0.001", "--seed", "1", "--out", str(path)])
    assert code == 0
    return path


STACK = """
ambient_index: 1.0
substrate_index: 3.46
layers:
  - repeat: 32
    layers:
      - {index: 3.46, thickness_nm: 68.0}
      - {index: 2.89, thickness_nm: 81.5}
  - {index: 3.46, thickness_nm: 272.0, cavity: true}
  - repeat: 36
    layers:
      - {index: 2.89, thickness_nm: 81.5}
      - {index: 3.46, thickness_nm: 68.0}
"""


def test_fit_struct_is_deterministic(spectrum, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(["fit", "fano", str(spectrum), "--format", "struct", "--out", str(a)]) == 0
    assert cli.main(["fit", "fano", str(spectrum), "--format", "struct", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    report = parse_report(a.read_bytes())
    assert report.q_factor == pytest.approx(268000, rel=5e-3)


def test_fit_table_to_stdout(spectrum, capsys):
    assert cli.main(["fit", "fano", str(spectrum)]) == 0
    out = capsys.readouterr().out
    assert "Q-factor" in out and "photon lifetime [ps]" in out


def test_fit_with_fix_and_init(tmp_path, capsys):
    path = tmp_path / "v.csv"
    assert cli.main(["synth", "voigt", "--params", "center=1315600,lorentz_fwhm=7.15,gauss_fwhm=6.2,amplitude=1,offset=0.05",
                     "--axis", "1315540,1315660,512,ueV", "--noise", "0.01", "--seed", "3", "--out", str(path)]) == 0
    assert cli.main(["fit", "voigt", str(path), "--fix", "gauss_fwhm=6.2", "--init", "lorentz_fwhm=5",
                     "--format", "struct"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["params"]["gauss_fwhm"] == 6.2
    assert doc["sigmas"]["gauss_fwhm"] is None
    assert doc["deconvolved_q"] == pytest.approx(184000, rel=0.06)


def test_missing_file_exit_2(tmp_path):
    assert cli.main(["fit", "fano", str(tmp_path / "nope.csv")]) == 2


def test_bad_arguments_exit_2():
    assert cli.main(["fit", "not-a-model", "x.csv"]) == 2
    assert cli.main([]) == 2


def test_too_few_points_exit_2(tmp_path):
    path = tmp_path / "tiny.csv"
    path.write_text("ueV,intensity\n1,2\n")
    assert cli.main(["fit", "lorentzian", str(path)]) == 2


def test_flat_spectrum_exit_2(tmp_path):
    path = tmp_path / "flat.csv"
    path.write_text("ueV,intensity\n" + "".join(f"{i},1.0\n" for i in range(20)))
    assert cli.main(["fit", "lorentzian", str(path)]) == 2


def test_no_convergence_exit_3(spectrum):
    assert cli.main(["fit", "fano", str(spectrum), "--max-iter", "1"]) == 3


def test_internal_error_exit_4(spectrum, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("unexpected")

    monkeypatch.setattr(cli, "fit", boom)
    assert cli.main(["fit", "fano", str(spectrum)]) == 4


def test_synth_is_byte_identical(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        cli.main(["synth", "fano", "--params", FANO_ARGS[0], "--axis", FANO_ARGS[1], "--noise", "0.01",
                  "--seed", "5", "--out", str(path)])
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_synth_bad_params_exit_2():
    assert cli.main(["synth", "fano", "--params", "r0=1,q", "--axis", FANO_ARGS[1]]) == 2
    assert cli.main(["synth", "fano", "--params", FANO_ARGS[0], "--axis", "1,2,3"]) == 2


def test_tmm_mode_and_sweep(tmp_path, capsys):
    path = tmp_path / "stack.yaml"
    path.write_text(STACK)
    assert cli.main(["tmm", str(path), "--mode"]) == 0
    out = dict(line.split() for line in capsys.readouterr().out.splitlines())
    assert float(out["lambda0_nm"]) == pytest.approx(941.0, abs=5.0)
    assert 0.9e6 <= float(out["q_planar"]) <= 8e6
    csv = tmp_path / "sweep.csv"
    assert cli.main(["tmm", str(path), "--sweep", "900,980,41", "--out", str(csv)]) == 0
    data = np.loadtxt(csv, delimiter=",", skiprows=1)
    assert data.shape == (41, 4)
    assert np.allclose(data[:, 1] + data[:, 2], 1.0, atol=1e-9)


def test_tmm_needs_action(tmp_path):
    path = tmp_path / "stack.yaml"
    path.write_text(STACK)
    assert cli.main(["tmm", str(path)]) == 2


def write_qdata(path):
    lines = ["diameter_um,Q,method"]
    for method, (k, a) in (("PR", (6.8e-9, 0.4)), ("PL", (11.2e-9, 0.85))):
        params = LossParams(k, a, ConstantQInt(2.6e6))
        for d in range(1, 9):
            lines.append(f"{d},{q_total(d, params, 941.0, 3.46)!r},{method}")
    path.write_text("\n".join(lines) + "\n")


def test_loss_fit(tmp_path, capsys):
    path = tmp_path / "q.csv"
    write_qdata(path)
    assert cli.main(["loss-fit", str(path), "--format", "struct"]) == 0
    reports = parse_report(capsys.readouterr().out)
    by_method = {r.method: r for r in reports}
    assert by_method["photoreflectance"].kappa_m == pytest.approx(6.8e-9, rel=1e-6)
    assert by_method["photoluminescence"].alpha_per_cm == pytest.approx(0.85, rel=1e-6)
    assert cli.main(["loss-fit", str(path), "--method", "PR", "--format", "struct"]) == 0
    single = parse_report(capsys.readouterr().out)
    assert single.method == "photoreflectance"


def test_loss_fit_bad_qint(tmp_path):
    path = tmp_path / "q.csv"
    write_qdata(path)
    assert cli.main(["loss-fit", str(path), "--qint", "banana"]) == 2
    assert cli.main(["loss-fit", str(path), "--qint", "const:abc"]) == 2


def test_anticross(tmp_path, capsys):
    path = tmp_path / "peaks.csv"
    lines = ["temperature_K,upper_ueV,lower_ueV"]
    for t in np.linspace(12, 28, 9).tolist():
        ec = 1317000 - 5 * (t - 20)
        b = polariton_branches(CoupledOscillator(ec, ec - 25 * (t - 20), 33.05, 53.0, 60.0))
        lines.append(f"{t!r},{b.upper.energy!r},{b.lower.energy!r}")
    path.write_text("\n".join(lines) + "\n")
    assert cli.main(["anticross", str(path), "--gamma-cavity", "53", "--gamma-exciton", "60",
                     "--gamma-star", "7.8", "--format", "struct"]) == 0
    r = parse_report(capsys.readouterr().out)
    assert r.g_ueV == pytest.approx(33.05, rel=1e-6)
    assert r.rabi_splitting_ueV == pytest.approx(66.0, abs=0.1)
    assert r.strong_coupling
    assert r.visibility_dephasing > 0.25 and r.visibility_broadened > 0.25


def test_anticross_bad_row_exit_2(tmp_path):
    path = tmp_path / "peaks.csv"
    path.write_text("t,u,l\n1,2,1\nx,3,1\n")
    assert cli.main(["anticross", str(path), "--gamma-cavity", "53", "--gamma-exciton", "60"]) == 2


def test_anticross_too_few_rows(tmp_path):
    path = tmp_path / "peaks.csv"
    path.write_text("1,2,1\n2,3,1\n")
    assert cli.main(["anticross", str(path), "--gamma-cavity", "53", "--gamma-exciton", "60"]) == 2


def test_convert(capsys):
    assert cli.main(["convert", "1.2", "GHz", "ueV", "--width"]) == 0
    value, unit = capsys.readouterr().out.split()
    assert float(value) == pytest.approx(4.963, abs=5e-4) and unit == "ueV"
    assert cli.main(["convert", "5.14", "pm", "ueV", "--ref", "945.8,nm"]) == 0
    assert float(capsys.readouterr().out.split()[0]) == pytest.approx(7.124, abs=1e-3)
    assert cli.main(["convert", "0", "nm", "eV"]) == 2
    assert cli.main(["convert", "5.14", "pm", "ueV", "--width"]) == 2


@pytest.mark.skipif(shutil.which("micropillar") is None, reason="console script not installed")
def test_console_script_exit_codes(tmp_path):
    ok = subprocess.run(["micropillar", "convert", "941", "nm", "eV"], capture_output=True, text=True)
    assert ok.returncode == 0
    bad = subprocess.run(["micropillar", "convert", "941", "parsec", "eV"], capture_output=True, text=True)
    assert bad.returncode == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "micropillar.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "micropillar" in res.stdout
