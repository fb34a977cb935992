import numpy as np
import pytest

from patrecon import io
from patrecon.cli import main
from patrecon.experiments import relative_error


@pytest.fixture
def phantom64(tmp_path):
    out = tmp_path / "p0.patb"
    assert main(["phantom", "--n", "64", "--preset", "paper-like", "--out", str(out)]) == 0
    return out


def test_phantom_deterministic_and_validated(tmp_path, phantom64):
    again = tmp_path / "again.patb"
    main(["phantom", "--n", "64", "--preset", "paper-like", "--out", str(again)])
    assert phantom64.read_bytes() == again.read_bytes()
    assert io.read_field(phantom64).grid.n == 64
    assert main(["phantom", "--n", "100", "--out", str(tmp_path / "x.patb")]) == 2
    assert main(["phantom", "--circle", "0.5,0.5", "--out", str(tmp_path / "x.patb")]) == 2
    assert io.read_manifest(phantom64)["command"] == "phantom"


def test_simulate_layout_and_determinism(tmp_path, phantom64):
    a, b = tmp_path / "a.patb", tmp_path / "b.patb"
    args = ["simulate", "--in", str(phantom64), "--geometry", "two", "--sensors", "80",
            "--nt", "50", "--dt", "1.6e-7", "--recon-n", "32", "--noise", "0.05", "--seed", "1"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    m = io.read_manifest(a)
    assert (m["sensors_bottom"], m["sensors_other"]) == ("40", "40")
    # inverse-crime guard
    assert main(args[:-4] + ["--recon-n", "64", "--out", str(tmp_path / "c.patb")]) == 2
    assert main(["simulate", "--in", str(tmp_path / "missing.patb"), "--out", str(a)]) == 2


def test_same_grid_pipeline_recovers_phantom(tmp_path):
    p0 = tmp_path / "p0.patb"
    main(["phantom", "--n", "32", "--circle", "0.4,0.5,0.2,1", "--circle", "0.6,0.45,0.15,0.5",
          "--out", str(p0)])
    data = tmp_path / "d.patb"
    assert main(["simulate", "--in", str(p0), "--noise", "0", "--same-grid", "--sensors", "full",
                 "--nt", "300", "--dt", "1.6e-7", "--out", str(data)]) == 0
    est = tmp_path / "e.patb"
    assert main(["reconstruct", "--data", str(data), "--out", str(est), "--s", "0",
                 "--alpha", "1e-8", "--iters", "30", "--truth", str(p0)]) == 0
    assert float(io.read_manifest(est)["relative_error"]) < 0.05


def test_reconstruct_outputs(tmp_path, phantom64):
    data = tmp_path / "d.patb"
    main(["simulate", "--in", str(phantom64), "--geometry", "one", "--sensors", "24", "--nt", "120",
          "--dt", "3.2e-7", "--recon-n", "32", "--out", str(data)])
    w, f = tmp_path / "w.patb", tmp_path / "f.patb"
    assert main(["reconstruct", "--data", str(data), "--out", str(w), "--s", "0", "--backend", "wavelet"]) == 0
    assert main(["reconstruct", "--data", str(data), "--out", str(f), "--s", "0", "--backend", "fourier"]) == 0
    assert np.max(np.abs(io.read_field(w).values - io.read_field(f).values)) < 1e-9
    m = io.read_manifest(w)
    assert m["evaluations"] == "31" and m["alpha"] == "1e-05"
    rows = io.read_csv(str(w) + ".history.csv")
    res = [float(r["residual"]) for r in rows]
    assert len(rows) == 16 and all(b <= a for a, b in zip(res, res[1:]))
    assert main(["reconstruct", "--data", str(data), "--out", str(f), "--s", "3",
                 "--backend", "wavelet", "--wavelet", "db6"]) == 3
    assert main(["reconstruct", "--data", str(data), "--out", str(f), "--s", "1.5",
                 "--backend", "dense", "--memory-budget-gib", "0.001"]) == 4


def test_config_precedence(tmp_path, phantom64):
    data = tmp_path / "d.patb"
    main(["simulate", "--in", str(phantom64), "--sensors", "20", "--nt", "40", "--dt", "3.2e-7",
          "--recon-n", "32", "--out", str(data)])
    cfg = tmp_path / "run.cfg"
    cfg.write_text("s=0\nalpha=1e-3\niters=4\n")
    est = tmp_path / "e.patb"
    assert main(["reconstruct", "--data", str(data), "--out", str(est), "--config", str(cfg),
                 "--alpha", "1e-4"]) == 0
    m = io.read_manifest(est)
    assert (m["s"], m["alpha"], m["iterations"]) == ("0.0", "0.0001", "4")
    cfg.write_text("bogus=1\n")
    assert main(["reconstruct", "--data", str(data), "--out", str(est), "--config", str(cfg)]) == 2


def test_filters_check_and_fault(capsys):
    assert main(["filters-check"]) == 0
    assert "k_{1/2,1}(1) = exp(-1)" in capsys.readouterr().out
    assert main(["filters-check", "--inject", "wrong-constant"]) == 1


def test_conditioning_small(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["conditioning", "--n", "8", "--max-sensors", "28", "--nt", "20", "--out", str(out)]) == 0
    rows = io.read_csv(out)
    assert [int(r["sensors"]) for r in rows] == list(range(1, 29))
    assert main(["conditioning", "--n", "8", "--max-sensors", "28", "--nt", "20",
                 "--memory-budget-gib", "1e-6", "--out", str(out)]) == 4


def test_table_small(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["table", "--sim-n", "64", "--recon-n", "32", "--sensors", "20", "--iters", "3",
                 "--smoothness", "0", "1.5", "--profile-row", "20", "--out", str(out)]) == 0
    rows = io.read_csv(out)
    assert len(rows) == 4 and {r["evaluations"] for r in rows} == {"7"}
    prof = io.read_csv(str(out) + ".profile.csv")
    assert len(prof) == 64
    assert main(["table", "--sim-n", "32", "--recon-n", "32", "--out", str(out)]) == 2
