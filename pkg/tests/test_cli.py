import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import json

import numpy as np
import pytest

from hecke_trace.cli import main
from hecke_trace.huber import SpectrumPackage, dump_package
from hecke_trace.trace import LengthSpectrum, SpectralData

SLICE = "synthetic_slice.json"


def _run(capsys, *argv: str) -> tuple[int, list[str], str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out.splitlines(), captured.err


def test_transform(capsys):
    code, out, _ = _run(capsys, "transform", "--pair", "heat", "--t", "0.5", "--x", "0", "--lambda", "2", "--check")
    assert code == 0
    assert out[0].startswith("# command=transform radius=none epsrel=")
    assert out[1] == "quantity,argument,value_re,value_im,numerical_re,numerical_im"
    assert out[2].startswith("g,0")
    assert len(out) == 4


def test_decompose(capsys):
    code, out, _ = _run(capsys, "decompose", "--slice", SLICE)
    assert code == 0
    assert out[0].startswith("# command=decompose radius=3 ")
    assert "degree,1" in out
    assert "uncovered,0" in out
    assert "assumption1,True" in out


def test_classes(capsys):
    code, out, _ = _run(capsys, "classes", "--slice", SLICE)
    assert code == 0
    assert out[1] == "kind,trace,N,a_re,a_im,N_T0,m,members_found,resolved"
    rows = out[2:]
    assert len(rows) == 10
    assert sum(r.startswith("loxodromic,") for r in rows) == 8
    assert all(r.endswith(",1,True") for r in rows)


def test_trace_with_representation(capsys):
    code, out, _ = _run(capsys, "--format", "json", "trace", "--slice", SLICE, "--rep", "synthetic_rep.json",
                        "--pair", "heat", "--t", "0.5")
    assert code == 0
    text = "\n".join(out)
    assert '"quantity":"elliptic_number"' in text.replace(" ", "")


def test_trace_with_spectral_file(capsys, tmp_path):
    spec = tmp_path / "spec.csv"
    spec.write_text("lambda,omega_re,omega_im\n0.5,1.0,0.0\n")
    code, out, _ = _run(capsys, "trace", "--slice", SLICE, "--spectral", str(spec), "--t", "0.5")
    assert code == 0
    assert any(line.startswith("spectral,") for line in out)
    assert any(line.startswith("residual,") for line in out)


def test_heat(capsys):
    code, out, _ = _run(capsys, "heat", "--slice", SLICE, "--tgrid", "0.2,0.1,0.05,0.025")
    assert code == 0
    assert out[-2] == "E,norm_gap,slope,passed"
    assert out[-1].endswith(",True")

    code, out, _ = _run(capsys, "heat", "--slice", SLICE, "--tgrid", "0.2,0.1,0.05,0.025", "--E", "5")
    assert code == 0
    assert out[-1].startswith("5,4,")
    assert out[-1].endswith(",False")


def test_factory(capsys, tmp_path):
    target = tmp_path / "units.json"
    code, out, _ = _run(capsys, "factory", "--config", "order_disc6.json", "--radius", "3", "--out", str(target))
    assert code == 0
    assert target.exists()
    assert out[-1] == "10,60,False,3,True,False"


def test_factory_kleinian_order(capsys, tmp_path):
    target = tmp_path / "kleinian.json"
    code, out, _ = _run(capsys, "factory", "--config", "order_kleinian_m2.json", "--radius", "1.5", "--out", str(target))
    assert code == 0
    assert out[-2] == "gamma,double_coset,plumbing,anisotropic_at,anisotropy_passed,kleinian"
    assert out[-1].endswith(",False,3,True,True")
    assert json.loads(target.read_text())["field_m"] == "approx"


def test_validate(capsys):
    code, out, _ = _run(capsys, "validate", "--slice", SLICE)
    assert code == 0
    assert "loxodromic,16" in out
    assert "layer_classes,10" in out


def test_validate_rejects_parabolic(capsys, parabolic_slice_path):
    code, out, err = _run(capsys, "validate", "--slice", str(parabolic_slice_path))
    assert code == 1
    assert out == []
    assert "ERROR: parabolic element double_coset[0]" in err
    assert "dataset invalid" in err


def test_missing_file(capsys):
    code, _, err = _run(capsys, "classes", "--slice", "nowhere.json")
    assert code == 1
    assert "ERROR: no such file: nowhere.json" in err


def test_packages(capsys, tmp_path):
    mu = np.log(np.arange(2.0, 6.0))
    left = SpectrumPackage(SpectralData([2.0], [1.0]), LengthSpectrum(mu, np.ones(4)), 1.0, "left")
    dump_package(left, tmp_path / "left.json")
    dump_package(left, tmp_path / "right.json")

    code, out, _ = _run(capsys, "huber", "--left", str(tmp_path / "left.json"), "--right", str(tmp_path / "right.json"))
    assert code == 0
    assert out[-1].startswith("L,identical,0,False")

    code, out, _ = _run(capsys, "huber", "--left", str(tmp_path / "left.json"), "--right", str(tmp_path / "right.json"),
                        "--corollary")
    assert out[-1] == "True,0,False"

    code, out, _ = _run(capsys, "resolvent", "--package", str(tmp_path / "left.json"))
    assert code == 0
    assert out[1] == "label,s,B,residual_re,residual_im"
    assert out[2].startswith("left,1.5,2.5,")

    code, _, err = _run(capsys, "resolvent", "--package", str(tmp_path / "left.json"), "--s", "0.5")
    assert code == 1
    assert "outside convergence region" in err


@pytest.mark.parametrize("argv", [["transform", "--bogus"], ["classes"], ["nothing"]])
def test_usage_errors_exit_with_one(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1
    assert "ERROR: " in capsys.readouterr().err


def test_decompose_dihedral_with_character(capsys):
    code, out, _ = _run(capsys, "decompose", "--slice", "dihedral_slice.json", "--rep", "dihedral_rep.json")
    assert code == 0
    assert "degree,2" in out
    assert "uncovered,0" in out
    assert "assumption2,True" in out
