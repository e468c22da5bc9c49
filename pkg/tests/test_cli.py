import csv

import cv2
import numpy as np
import pytest

from bgsub.cli import main


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "seq"
    assert main(["synth", "--out", str(out), "--kind", "dynamic-texture", "--frames", "56", "--size", "24"]) == 0
    return out


def test_happy_path(synth_dir, tmp_path):
    res = tmp_path / "res"
    code = main(["--input", str(synth_dir / "frames"), "--out", str(res), "--mode", "vks", "--features", "rgb"])
    assert code == 0
    masks = sorted(p.name for p in (res / "masks").iterdir())
    assert masks == [f"{t:05d}.png" for t in range(50, 56)]
    post = cv2.imread(str(res / "posteriors" / "00050.png"), cv2.IMREAD_GRAYSCALE)
    assert post.shape == (24, 24) and post.dtype == np.uint8


def test_missing_input(tmp_path, capsys):
    code = main(["--input", str(tmp_path / "missing"), "--out", str(tmp_path / "o")])
    assert code != 0
    assert "missing" in capsys.readouterr().err


def test_report(synth_dir, tmp_path):
    report = tmp_path / "report.csv"
    code = main([
        "run", "--input", str(synth_dir / "frames"), "--out", str(tmp_path / "res"),
        "--gt", str(synth_dir / "gt"), "--report", str(report), "--mode", "vks-cached",
    ])
    assert code == 0
    rows = list(csv.DictReader(report.open()))
    assert list(rows[0]) == ["frame_index", "tp", "fp", "fn", "precision", "recall", "f_measure"]
    assert rows[-1]["frame_index"] == "mean"
    assert all(0 <= float(r["f_measure"]) <= 1 for r in rows)
    assert len(rows) == 6 + 2


def test_orphan_mask_is_an_error(synth_dir, tmp_path):
    cv2.imwrite(str(synth_dir / "gt" / "99999.png"), np.zeros((24, 24), np.uint8))
    code = main(["--input", str(synth_dir / "frames"), "--out", str(tmp_path / "r"), "--gt", str(synth_dir / "gt")])
    assert code != 0


def test_config_file_and_override(synth_dir, tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("variance_mode = uniform\ninit_frames = 54\n")
    res = tmp_path / "res"
    assert main(["--input", str(synth_dir / "frames"), "--out", str(res), "--config", str(cfg)]) == 0
    assert len(list((res / "masks").iterdir())) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("no_such_key = 1\n")
    assert main(["--input", str(synth_dir / "frames"), "--out", str(res), "--config", str(bad)]) != 0
