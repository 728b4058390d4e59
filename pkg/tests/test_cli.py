import json
import math

import numpy as np
import pytest

from fermisect import cli


CIRCLE = {"kind": "support_fourier", "coeffs": [[0, 1.0, 0.0]]}
PERT = {"kind": "support_fourier",
        "coeffs": [[0, 1.0, 0.0], [3, 0.05, 0.0]]}
ELLIPSE = {"kind": "dispersion", "expr": "k1^2/4 + k2^2 - 1"}


@pytest.fixture
def curve_file(tmp_path):
    def write(data, name="curve.json"):
        p = tmp_path / name
        p.write_text(json.dumps(data))
        return str(p)
    return write


def run(argv):
    return cli.main(argv)


def test_certify_cli(curve_file, tmp_path, capsys):
    path = curve_file(PERT)
    out = tmp_path / "cert.json"
    rc = run(["curve", "certify", "--curve", path, "--nmax", "6",
              "--grid", "512", "--tol", "1e-6", "--out", str(out)])
    assert rc == 0
    cert = json.loads(out.read_text())
    assert cert["symmetric"] is False
    assert cert["n0"] == 3


def test_certify_cli_dispersion(curve_file, capsys):
    path = curve_file(ELLIPSE)
    rc = run(["curve", "certify", "--curve", path, "--grid", "256",
              "--nmax", "4"])
    assert rc == 0
    cert = json.loads(capsys.readouterr().out)
    assert cert["symmetric"] is True
    assert max(abs(c) for c in cert["symmetry_center"]) < 1e-6


def test_sectorize_and_counts(curve_file, tmp_path):
    cpath = curve_file(CIRCLE)
    sig_path = tmp_path / "sig.json"
    rc = run(["sectorize", "--curve", cpath, "--M", "3", "--j", "5",
              "--aleph", "0.6667", "--out", str(sig_path)])
    assert rc == 0
    sig = json.loads(sig_path.read_text())
    assert sig["n_sectors"] == len(sig["sectors"])

    out = tmp_path / "mom.json"
    rc = run(["count", "mom3", "--sig", str(sig_path), "--target-theta",
              "0.7", "--mode", "rect", "--out", str(out)])
    assert rc == 0
    res = json.loads(out.read_text())
    assert res["count"] > 0

    out2 = tmp_path / "pairs.json"
    rc = run(["count", "pairs", "--sig", str(sig_path), "--target-kind",
              "momentum-pair", "--k1", "1,0", "--k2=-1,0",
              "--out", str(out2)])
    assert rc == 0
    assert json.loads(out2.read_text())["count"] > 0


def test_mom3_emit_tuples(curve_file, tmp_path):
    cpath = curve_file(CIRCLE)
    sig_path = tmp_path / "sig.json"
    run(["sectorize", "--curve", cpath, "--M", "3", "--j", "4",
         "--ell", "0.4", "--out", str(sig_path)])
    out = tmp_path / "mom.json"
    rc = run(["count", "mom3", "--sig", str(sig_path), "--target-theta",
              "0.7", "--emit-tuples", "--out", str(out)])
    assert rc == 0
    res = json.loads(out.read_text())
    assert len(res["tuples"]) == res["count"]


def test_norms_cli(curve_file, tmp_path):
    cpath = curve_file(CIRCLE)
    coarse = tmp_path / "coarse.json"
    fine = tmp_path / "fine.json"
    run(["sectorize", "--curve", cpath, "--M", "3", "--j", "4",
         "--ell", str(2 * math.pi / 16 + 1e-12), "--out", str(coarse)])
    run(["sectorize", "--curve", cpath, "--M", "3", "--j", "6",
         "--ell", str(2 * math.pi / 64 + 1e-12), "--out", str(fine)])
    kpath = tmp_path / "k.json"
    kpath.write_text(json.dumps(
        {"legs": 4, "mask": "none",
         "entries": [[[0, 1, 2, 3], 1.5], [[0, 1, 2, 4], 0.5]]}))
    out = tmp_path / "norm.json"
    rc = run(["norms", "eval", "--kernel", str(kpath), "--sig", str(coarse),
              "--p", "1", "--out", str(out)])
    assert rc == 0
    assert json.loads(out.read_text())["value"] == 2.0

    out2 = tmp_path / "resect.json"
    rc = run(["norms", "resectorize", "--kernel", str(kpath),
              "--from", str(coarse), "--to", str(fine), "--out", str(out2)])
    assert rc == 0
    resect = json.loads(out2.read_text())
    assert len(resect["entries"]) > len(json.loads(kpath.read_text())["entries"])


def test_scan_verify_cycle(curve_file, tmp_path):
    cpath = curve_file(CIRCLE)
    cfg = {"curve": CIRCLE, "experiment": "mom3", "j_range": [4, 6],
           "seed": 7}
    cfg_path = tmp_path / "scan.json"
    cfg_path.write_text(json.dumps(cfg))
    csv_path = tmp_path / "report.csv"
    json_path = tmp_path / "report.json"
    rc = run(["scan", "--config", str(cfg_path), "--out", str(csv_path),
              "--json", str(json_path)])
    assert rc == 0
    assert csv_path.exists() and json_path.exists()
    png = tmp_path / "report.png"
    assert png.exists() and png.stat().st_size > 1000

    rc = run(["verify", "--report", str(csv_path), "--band", "4"])
    assert rc == 0
    rc = run(["verify", "--report", str(csv_path), "--band", "1.0000001",
              "--slope", "5.0"])
    assert rc == 1


def test_scan_no_plot(curve_file, tmp_path):
    cfg = {"curve": CIRCLE, "experiment": "mom3", "j_range": [4, 4]}
    cfg_path = tmp_path / "scan.json"
    cfg_path.write_text(json.dumps(cfg))
    csv_path = tmp_path / "r.csv"
    rc = run(["scan", "--config", str(cfg_path), "--out", str(csv_path),
              "--no-plot"])
    assert rc == 0
    assert not (tmp_path / "r.png").exists()


def test_cli_error_paths(curve_file, tmp_path, capsys):
    cpath = curve_file(CIRCLE)
    sig_path = tmp_path / "sig.json"
    rc = run(["sectorize", "--curve", cpath, "--M", "3", "--j", "4",
              "--ell", "5.0", "--out", str(sig_path)])
    assert rc == 1
    assert "coarse" in capsys.readouterr().err
