import json
import math

import numpy as np
import pytest

from nodalq.cli import main
from nodalq.lattice import RectangleSpec
from nodalq.potentials import standard_bump, zero_potential
from nodalq.serialize import mask_to_rle, write_json

A = str(2.0 ** 0.25)


@pytest.fixture
def files(tmp_path):
    rect = RectangleSpec(2.0 ** 0.25)
    write_json(tmp_path / "zero.json", zero_potential(rect).to_dict())
    write_json(tmp_path / "bump.json", standard_bump(rect, 0.2).to_dict())
    return tmp_path


def read(path):
    return path.read_text()


def test_check_a_rational(tmp_path):
    out = tmp_path / "v.json"
    assert main(["check-a", "--a-sq", "1.5", "--out", str(out)]) == 0
    assert json.loads(read(out))["verdict"] == "exact-rational"


def test_check_a_sqrt2(tmp_path):
    out = tmp_path / "v.json"
    assert main(["check-a", "--a-sq", "sqrt(2)", "--out", str(out)]) == 0
    doc = json.loads(read(out))
    assert doc["verdict"] == "accepted"


def test_lattice_csv(tmp_path):
    out = tmp_path / "l.csv"
    assert main(["lattice", "--a", A, "--max-norm", "5", "--out", str(out)]) == 0
    lines = read(out).splitlines()
    assert lines[0] == "n,m,norm_sq,gap,good"
    assert len(lines) > 5


def test_reconstruct_zero_potential(files):
    out = files / "s.csv"
    code = main(["reconstruct", "--a", A, "--potential", str(files / "zero.json"),
                 "--max-norm", "5", "--out", str(out)])
    assert code == 0
    lines = read(out).splitlines()
    assert lines[0] == "n,m,n1,m1,x,y,q_hat,q_true,err_at_point,err_min,bound,status"
    q = [float(r.split(",")[6]) for r in lines[1:]]
    assert q and max(abs(v) for v in q) < 1e-8


def test_sweep_writes_coverage(files):
    out = files / "s.csv"
    assert main(["sweep", "--a", A, "--potential", str(files / "bump.json"), "--max-norm", "5",
                 "--probes", "16", "--out", str(out)]) == 0
    cov = json.loads(read(files / "coverage.json"))
    assert cov["max_norm"] == 5
    assert cov["probes"] == 256
    assert math.isfinite(cov["coverage_radius"])
    assert isinstance(cov["skipped"], list)


def test_nodal_and_lambda1(files):
    out = files / "n.json"
    assert main(["nodal", "--a", A, "--index", "2,3", "--per-cell", "16", "--out", str(out),
                 "--pgm-dir", str(files / "img")]) == 0
    doc = json.loads(read(out))
    assert doc["components"] == doc["expected_components"] == 6
    assert (files / "img" / "signs.pgm").exists()
    mask_file = files / "m.json"
    write_json(mask_file, mask_to_rle(np.ones((31, 31), dtype=bool)))
    out = files / "l.json"
    h = math.pi / 32
    assert main(["lambda1", "--mask", str(mask_file), "--hx", str(h), "--hy", str(h),
                 "--out", str(out)]) == 0
    want = 4 / h ** 2 * 2 * math.sin(h / 2) ** 2
    assert json.loads(read(out))["lambda1"] == pytest.approx(want, rel=1e-10)


def test_spectrum_and_perturb(files):
    out = files / "sp.json"
    assert main(["spectrum", "--a", A, "--potential", str(files / "bump.json"), "--cutoff", "8",
                 "--match", "1,1 2,1", "--out", str(out)]) == 0
    doc = json.loads(read(out))
    assert [p["status"] for p in doc["pairs"]] == ["ok", "ok"]
    out = files / "p.csv"
    assert main(["perturb", "--a", A, "--potential", str(files / "bump.json"),
                 "--indices", "1,1 2,3", "--out", str(out)]) == 0
    assert len(read(out).splitlines()) == 3


def test_config_file_and_override(files):
    cfg = files / "cfg.json"
    write_json(cfg, {"a": 2.0 ** 0.25, "potential": str(files / "zero.json"), "max_norm": 4.0})
    out = files / "s.csv"
    assert main(["reconstruct", "--config", str(cfg), "--max-norm", "5", "--out", str(out)]) == 0
    rows_5 = read(out).splitlines()
    assert main(["reconstruct", "--config", str(cfg), "--out", str(out)]) == 0
    assert len(read(out).splitlines()) < len(rows_5)


def test_config_errors_exit_2(files):
    cfg = files / "cfg.json"
    write_json(cfg, {"a": 1.3, "bogus": 1})
    assert main(["lattice", "--config", str(cfg)]) == 2
    assert main(["reconstruct", "--a", A, "--max-norm", "4"]) == 2
    assert main(["lattice", "--a", "0.5"]) == 2
    assert main(["lattice", "--a", A, "--a-sq", "2"]) == 2
    assert main(["reconstruct", "--a", A, "--potential", str(files / "missing.json")]) == 2
    assert main(["lattice", "--a", A, "--threads", "0"]) == 2


def test_nonconvergence_exit_3(files):
    mask_file = files / "m.json"
    write_json(mask_file, mask_to_rle(np.ones((40, 40), dtype=bool)))
    assert main(["lambda1", "--mask", str(mask_file), "--hx", "0.1", "--hy", "0.1",
                 "--tol", "1e-300"]) == 3


def test_resource_cap_exit_4(files):
    assert main(["reconstruct", "--a", A, "--potential", str(files / "zero.json"),
                 "--max-norm", "5", "--max-axis", "20"]) == 4
    assert main(["spectrum", "--a", A, "--potential", str(files / "zero.json"),
                 "--cutoff", "200"]) == 4


def test_same_config_same_bytes_any_thread_count(files):
    outs = []
    for t in ("1", "3"):
        out = files / f"s{t}.csv"
        cov = files / f"c{t}.json"
        assert main(["sweep", "--a", A, "--potential", str(files / "bump.json"), "--max-norm", "5",
                     "--threads", t, "--probes", "8", "--seed", "7", "--out", str(out),
                     "--coverage", str(cov)]) == 0
        outs.append((out.read_bytes(), cov.read_bytes()))
    assert outs[0] == outs[1]
