import json

import jsonschema
import numpy as np
import pytest

from ausn import schemas
from ausn.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from ausn.formats import load_container, load_tensor
from ausn.samples import sample_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def report(path, command):
    data = json.loads(path.read_text())
    jsonschema.validate(data, schemas.BY_COMMAND[command])
    return data


@pytest.fixture
def containers(tmp_path, capsys):
    w, a = tmp_path / "w.ausn", tmp_path / "a.ausn"
    assert run(capsys, "quantize", "--input", sample_path("weights_16x64.npy"), "--bits", 6,
               "--layout", "3:2", "--out", w, "--quiet")[0] == EXIT_OK
    assert run(capsys, "quantize", "--input", sample_path("activations_64.npy"), "--bits", 6,
               "--layout", "3:2", "--out", a, "--quiet")[0] == EXIT_OK
    return w, a


def test_quantize_auto(tmp_path, capsys):
    out, rep = tmp_path / "n.ausn", tmp_path / "q.json"
    code, stdout, _ = run(capsys, "quantize", "--input", sample_path("normal_4096.f32"),
                          "--bits", 5, "--out", out, "--report", rep, "--hist", tmp_path / "h.csv")
    assert code == EXIT_OK
    data = report(rep, "quantize")
    assert json.loads(stdout) == data
    assert data["search"]["candidates_evaluated"] == 24
    qt = load_container(out)
    assert qt.layout.total_bits == 5 and qt.shape == (64, 64)
    assert (tmp_path / "h.csv").read_text().startswith("level,original,quantized")


def test_quantize_explicit_layout_mismatch(tmp_path, capsys):
    code, _, err = run(capsys, "quantize", "--input", sample_path("normal_4096.npy"), "--bits", 5,
                       "--layout", "3:2", "--out", tmp_path / "x")
    assert code == EXIT_USAGE and "6 bits" in err


def test_search(tmp_path, capsys):
    rep = tmp_path / "s.json"
    code, _, _ = run(capsys, "search", "--input", sample_path("normal_4096.npy"), "--bits", 4,
                     "--report", rep, "--quiet", "--lambda", 2)
    assert code == EXIT_OK
    data = report(rep, "search")
    objs = [c["objective"] for c in data["candidates"]]
    assert objs == sorted(objs) and data["objective"] == objs[0]


def test_analyze(tmp_path, capsys, containers):
    w, _ = containers
    rep = tmp_path / "an.json"
    code, _, _ = run(capsys, "analyze", "--input", sample_path("weights_16x64.npy"), "--quantized", w,
                     "--baselines", "uniform,pow2", "--acc-loss", 0.25, "--report", rep, "--quiet")
    assert code == EXIT_OK
    data = report(rep, "analyze")
    assert set(data["baselines"]) == {"uniform", "pow2"}
    assert data["total_information_loss"] == pytest.approx(data["ausn"]["kl"] + 0.25)


def test_analyze_exact_reconstruction(tmp_path, capsys):
    from ausn.formats import save_tensor
    src = save_tensor(tmp_path / "e.npy", np.array([0.5, -0.25, 0.75], np.float32))
    q = tmp_path / "e.ausn"
    assert run(capsys, "quantize", "--input", src, "--layout", "3:2", "--out", q, "--quiet")[0] == 0
    rep = tmp_path / "r.json"
    assert run(capsys, "analyze", "--input", src, "--quantized", q, "--report", rep, "--quiet")[0] == 0
    data = report(rep, "analyze")
    assert data["ausn"]["sqnr_db"] is None and data["ausn"]["exact_reconstruction"] is True


def test_analyze_size_mismatch(tmp_path, capsys, containers):
    w, _ = containers
    code, _, _ = run(capsys, "analyze", "--input", sample_path("activations_64.npy"), "--quantized", w)
    assert code == EXIT_DATA


@pytest.mark.parametrize("mode", ["exact", "rounded"])
def test_simulate(tmp_path, capsys, containers, mode):
    w, a = containers
    rep, out = tmp_path / "sim.json", tmp_path / "y.ausn"
    code, _, _ = run(capsys, "simulate", "--weights", w, "--activations", a, "--mode", mode,
                     "--out-layout", "3:2,1", "--acc-bits", 32, "--out", out, "--report", rep, "--quiet")
    assert code == EXIT_OK
    data = report(rep, "simulate")
    assert data["rows"] == 16
    y = load_container(out)
    assert y.shape == (16,) and y.power_j == data["output_power_j"]
    exact = np.array([o["exact_float"] for o in data["outputs"]])
    assert np.all(np.abs(y.dequantize()) <= np.abs(exact) * 2 + 1e-12)


def test_cost(tmp_path, capsys):
    code, out, _ = run(capsys, "cost", "--scheme", "shift", "--a-bits", 6, "--w-bits", 6)
    assert code == EXIT_OK and out.strip() == "24"
    rep = tmp_path / "c.json"
    code, out, _ = run(capsys, "cost", "--scheme", "ausn", "--a-bits", 6, "--w-bits", 6, "--report", rep)
    assert out.strip() == "12"
    assert report(rep, "cost")["result_bits"] == 7
    assert run(capsys, "cost", "--scheme", "ausn", "--a-bits", 1, "--w-bits", 6)[0] == EXIT_DATA


def test_roofline(tmp_path, capsys):
    code, out, _ = run(capsys, "roofline", "--ops", 800, "--weight-elems", 50, "--output-elems", 50,
                       "--bytes-per-elem", 2, "--bandwidth", 10, "--peak", 100)
    data = json.loads(out)
    jsonschema.validate(data, schemas.ROOFLINE)
    assert code == EXIT_OK and data["ccr"] == 4.0 and data["attainable"] == 40.0
    assert data["bound"] == "memory"


def test_generate(tmp_path, capsys):
    for seed in (1, 1, 2):
        assert run(capsys, "generate", "--out", tmp_path / f"g{seed}.npy", "--shape", "4x8",
                   "--seed", seed)[0] == EXIT_OK
    a = load_tensor(tmp_path / "g1.npy").array
    assert a.shape == (4, 8)
    assert not np.array_equal(a, load_tensor(tmp_path / "g2.npy").array)


def test_report_dir_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("AUSN_REPORT_DIR", str(tmp_path / "reports"))
    code, _, _ = run(capsys, "roofline", "--ops", 1, "--weight-elems", 1, "--output-elems", 1,
                     "--bandwidth", 1, "--peak", 1, "--report", "r.json", "--quiet")
    assert code == EXIT_OK and (tmp_path / "reports" / "r.json").exists()


@pytest.mark.parametrize("argv,expected", [
    ([], EXIT_USAGE),
    (["bogus"], EXIT_USAGE),
    (["cost", "--scheme", "shift"], EXIT_USAGE),
    (["quantize", "--input", "x.npy", "--out", "y"], EXIT_USAGE),
    (["quantize", "--input", "missing.npy", "--bits", "5", "--out", "y"], EXIT_DATA),
    (["quantize", "--input", "missing.npy", "--layout", "9:9", "--out", "y"], EXIT_USAGE),
    (["--version"], EXIT_OK),
])
def test_exit_codes(capsys, argv, expected):
    assert main(argv) == expected
