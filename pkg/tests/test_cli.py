import json
import shutil
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from aesthqr.cli import main, parse_config_file
from conftest import PAYLOAD


@pytest.fixture(scope="module")
def picture(tmp_path_factory, corpus):
    p = tmp_path_factory.mktemp("img") / "astronaut.png"
    Image.fromarray(corpus["astronaut"]).save(p)
    return p


def test_encode_scan_roundtrip(tmp_path, capsys):
    png, pbm = tmp_path / "c.png", tmp_path / "c.pbm"
    assert main(["encode", "--data", "HELLO", "--ec", "Q", "--out", str(png)]) == 0
    assert main(["encode", "--data", "HELLO", "--ec", "Q", "--out", str(pbm)]) == 0
    capsys.readouterr()
    assert main(["scan", str(png), "--truth", str(pbm), "--overlay", str(tmp_path / "o.png"),
                 "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["payload"] == "HELLO" and out["module_errors"] == 0
    assert (tmp_path / "o.png").exists()


def test_beautify_then_scan(tmp_path, picture, capsys):
    out = tmp_path / "qr.png"
    rc = main(["beautify", "--data", PAYLOAD, "--image", str(picture), "--eta", "0.9",
               "--verify", "--out", str(out), "--diag-dir", str(tmp_path / "d"), "--json"])
    assert rc == 0
    diag = json.loads(capsys.readouterr().out)
    assert diag["version"] == 3 and diag["verification"]["outcome"] == "decoded"
    assert main(["scan", str(out)]) == 0
    assert PAYLOAD in capsys.readouterr().out
    assert (tmp_path / "d" / "prob_heatmap.png").exists()


def test_verification_failure_exit(tmp_path, picture):
    rc = main(["beautify", "--data", PAYLOAD, "--image", str(picture), "--eta", "0",
               "--verify", "--out", str(tmp_path / "x.png")])
    assert rc == 2
    assert not (tmp_path / "x.png").exists()


def test_non_image_is_usage_error(tmp_path, capsys):
    bad = tmp_path / "bad.png"
    bad.write_text("not an image")
    assert main(["scan", str(bad)]) == 1
    assert "cannot read image" in capsys.readouterr().err


def test_undecodable_scan_exit(tmp_path):
    blank = tmp_path / "blank.png"
    Image.fromarray(np.full((100, 100), 255, dtype=np.uint8)).save(blank)
    assert main(["scan", str(blank)]) == 2


@pytest.mark.parametrize("argv", [[], ["encode"], ["encode", "--data", "x", "--ec", "Z", "--out", "a.png"],
                                  ["encode", "--data", "x", "--mask", "9", "--out", "a.png"],
                                  ["beautify", "--data", "x", "--out", "a.png"],
                                  ["beautify", "--data", "x", "--image", "a.png", "--eta", "2",
                                   "--out", "b.png"],
                                  ["bench", "--sweep", "shear"]])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 1


def test_capacity_is_domain_error(tmp_path, capsys):
    rc = main(["encode", "--data", "x" * 50, "--version", "1", "--out", str(tmp_path / "a.png")])
    assert rc == 2
    assert "CapacityExceeded" in capsys.readouterr().err


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\ndata = \"FROM CONFIG\"\nec = H\nmask = 5\n")
    assert parse_config_file(cfg) == {"data": "FROM CONFIG", "ec": "H", "mask": "5"}
    out = tmp_path / "a.png"
    assert main(["encode", "--config", str(cfg), "--mask", "2", "--out", str(out), "--json"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["ec_level"] == "H" and info["mask"] == 2
    main(["scan", str(out), "--json"])
    assert json.loads(capsys.readouterr().out)["payload"] == "FROM CONFIG"
    cfg.write_text("colour = red\n")
    assert main(["encode", "--config", str(cfg), "--data", "x", "--out", str(out)]) == 1


def test_beautify_deterministic(tmp_path, picture):
    outs = []
    for name in ("a.png", "b.png"):
        p = tmp_path / name
        assert main(["beautify", "--data", PAYLOAD, "--image", str(picture), "--seed", "7",
                     "--omega-preset", "random", "--out", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_stylize(tmp_path, picture):
    rc = main(["stylize", "--data", PAYLOAD, "--image", str(picture), "--mask-image",
               str(picture), "--eta", "0.9", "--out-dir", str(tmp_path / "s")])
    assert rc == 0
    names = sorted(p.name for p in (tmp_path / "s").iterdir())
    assert names == ["center.png", "constant.png", "edge.png", "gaussian.png", "image.png",
                     "random.png"]


def test_bench_csv(tmp_path, capsys):
    csvs = []
    for name in ("a.csv", "b.csv"):
        p = tmp_path / name
        rc = main(["bench", "--sweep", "brightness", "--standard", "--grid=-40,0,40",
                   "--csv", str(p), "--svg", str(tmp_path / "b.svg"), "--json"])
        assert rc == 0
        csvs.append(p.read_text())
    assert csvs[0] == csvs[1]
    assert csvs[0].splitlines()[0] == "kind,parameter,image_id,outcome,corrections"
    summary = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert summary["success_rate"] == {"-40": 1.0, "0": 1.0, "40": 1.0}


def test_eta_sweep_command(tmp_path, picture, capsys):
    rc = main(["eta-sweep", "--images", str(picture.parent), "--grid", "1.0", "--json"])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["success_rate"] == {"1": 1.0}


def test_console_script():
    exe = shutil.which("aesthqr")
    cmd = [exe] if exe else [sys.executable, "-m", "aesthqr.cli"]
    res = subprocess.run(cmd + ["--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "beautify" in res.stdout
