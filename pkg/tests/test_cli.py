import subprocess
import sys

import numpy as np
import pytest

from poremine.cli import main
from poremine.filtering import PoreRecord
from poremine.imaging import encode_pgm
from poremine.morphology import PoreFeatures
from poremine.synth import generate_pore_population
from poremine.tables import features_csv, read_features_csv


def run(argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:  # argparse errors and --help
        return exc.code


@pytest.fixture
def population_csv(tmp_path):
    records, _ = generate_pore_population(seed=0)
    p = tmp_path / "pop.csv"
    p.write_text(features_csv(records))
    labels = tmp_path / "labels.csv"
    labels.write_text(
        "image_id,pore_id,label\n" + "".join(f"{r.image_id},{r.pore_id},{r.label.value}\n" for r in records)
    )
    return p, labels


def test_missing_scale_is_usage_error(tmp_path):
    assert run(["segment", "--input", tmp_path / "a.pgm", "--out", tmp_path / "m.pgm"]) == 3


def test_bad_scale_and_k(tmp_path, population_csv):
    assert run(["segment", "--input", tmp_path / "a.pgm", "--scale", "-1", "--out", tmp_path / "m.pgm"]) == 3
    feats, _ = population_csv
    assert run(["mine", "--features", feats, "--k", "zero", "--out-dir", tmp_path / "o"]) == 3


def test_missing_input_is_io_error(tmp_path):
    code = run(["segment", "--input", tmp_path / "nope.pgm", "--scale", "0.05", "--out", tmp_path / "m.pgm"])
    assert code == 2
    assert not (tmp_path / "m.pgm").exists()


def test_help_shows_defaults(capsys):
    assert run(["pores", "--help"]) == 0
    out = capsys.readouterr().out
    assert "(default: 10)" in out
    assert run(["mine", "--help"]) == 0
    out = " ".join(capsys.readouterr().out.split())
    assert "(default: 0.4)" in out and "(default: auto)" in out


def test_segment_then_pores(tmp_path, capsys):
    img = np.full((40, 40), 220, np.uint8)
    img[5:15, 5:15] = 30  # 100 px pore
    img[25:28, 25:28] = 30  # 9 px, below the minimum
    (tmp_path / "a.pgm").write_bytes(encode_pgm(img))
    assert run(["segment", "--input", tmp_path / "a.pgm", "--scale", "0.05", "--out", tmp_path / "m.pgm"]) == 0
    assert run(["pores", "--mask", tmp_path / "m.pgm", "--scale", "0.05", "--out", tmp_path / "f.csv"]) == 0
    (rec,) = read_features_csv(tmp_path / "f.csv")
    assert rec.image_id == "m" and rec.area_px == 100
    assert rec.features.area == pytest.approx(0.25)


def test_small_blob_gives_header_only(tmp_path):
    img = np.full((12, 12), 255, np.uint8)
    img[2:5, 2:5] = 0
    (tmp_path / "m.pgm").write_bytes(encode_pgm(img))
    assert run(["pores", "--mask", tmp_path / "m.pgm", "--scale", "0.05", "--out", tmp_path / "f.csv"]) == 0
    assert len((tmp_path / "f.csv").read_text().splitlines()) == 1


def test_synth_spec_requires_size(tmp_path):
    (tmp_path / "s.txt").write_text("height = 20\n")
    assert run(["synth", "--spec", tmp_path / "s.txt", "--out-dir", tmp_path / "o"]) == 3


def test_synth_writes_truth(tmp_path):
    (tmp_path / "s.txt").write_text("width = 64\nheight = 48\nseed = 2\n")
    assert run(["synth", "--spec", tmp_path / "s.txt", "--out-dir", tmp_path / "o"]) == 0
    assert {p.name for p in (tmp_path / "o").iterdir()} == {"synth.pgm", "synth_truth.pgm", "synth_pores.csv"}


def test_mine_fixed_k(tmp_path, population_csv):
    feats, labels = population_csv
    out = tmp_path / "o"
    assert run(["mine", "--features", feats, "--labels", labels, "--k", "3", "--out-dir", out]) == 0
    assert "k = 3 (fixed)" in (out / "report.txt").read_text()
    assert not (out / "elbow.svg").exists()


def test_mine_same_seed_byte_identical(tmp_path, population_csv):
    feats, labels = population_csv
    for d in ("a", "b"):
        assert run(["mine", "--features", feats, "--labels", labels, "--seed", "7", "--out-dir", tmp_path / d]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_constant_feature_exit_4(tmp_path, capsys):
    recs = [
        PoreRecord("a", i, PoreFeatures(1.0 + i, 4.0 + i, 2.0 + i, 1.0, float(i), 0.8, 2.0 + i, 0.5, 0.9))
        for i in range(1, 8)
    ]
    (tmp_path / "f.csv").write_text(features_csv(recs))
    assert run(["mine", "--features", tmp_path / "f.csv", "--k", "2", "--out-dir", tmp_path / "o"]) == 4
    assert "minor" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_unknown_label_exit_2(tmp_path, population_csv):
    feats, _ = population_csv
    (tmp_path / "l.csv").write_text("image_id,pore_id,label\nsynth,99999,shade\n")
    assert run(["mine", "--features", feats, "--labels", tmp_path / "l.csv", "--out-dir", tmp_path / "o"]) == 2


def test_seed_precedence(tmp_path, population_csv, monkeypatch):
    feats, _ = population_csv
    monkeypatch.setenv("POREMINE_SEED", "5")
    assert run(["mine", "--features", feats, "--out-dir", tmp_path / "env"]) == 0
    monkeypatch.delenv("POREMINE_SEED")
    assert run(["mine", "--features", feats, "--seed", "5", "--out-dir", tmp_path / "flag"]) == 0
    (tmp_path / "c.cfg").write_text("seed = 5\n")
    assert run(["mine", "--features", feats, "--config", tmp_path / "c.cfg", "--out-dir", tmp_path / "cfg"]) == 0
    ref = (tmp_path / "flag" / "clusters.csv").read_bytes()
    assert (tmp_path / "env" / "clusters.csv").read_bytes() == ref
    assert (tmp_path / "cfg" / "clusters.csv").read_bytes() == ref
    (tmp_path / "bad.cfg").write_text("colour = red\n")
    assert run(["mine", "--features", feats, "--config", tmp_path / "bad.cfg", "--out-dir", tmp_path / "x"]) == 3


def test_run_command(tmp_path):
    (tmp_path / "s.txt").write_text("width = 96\nheight = 96\nfiber_count = 10\n")
    for i in range(2):
        (tmp_path / f"s{i}.txt").write_text(f"width = 96\nheight = 96\nfiber_count = 10\nseed = {i}\n")
        assert run(["synth", "--spec", tmp_path / f"s{i}.txt", "--name", f"img{i}", "--out-dir", tmp_path]) == 0
    out = tmp_path / "o"
    code = run(
        ["run", "--images", tmp_path / "img0.pgm", tmp_path / "img1.pgm", "--scale", "0.0447",
         "--cutoff", "0", "--k", "2", "--out-dir", out]
    )
    assert code == 0
    assert (out / "img0_poremap.svg").exists() and (out / "img1_mask.pgm").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "poremine", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "segment" in proc.stdout
