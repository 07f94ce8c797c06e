import json
import subprocess
import sys

import pytest

from hoianomaly.cli import main
from hoianomaly.fileio import load_model, read_flags_csv, read_frame_scores_jsonl, read_scores_csv


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "spec.json").write_text(json.dumps({"seed": 2, "n_videos": 2, "frames_per_video": 300}))
    assert main(["synth", "--spec", str(d / "spec.json"), "--out-dir", str(d / "data")]) == 0
    assert main(["fit", "--train", str(d / "data/train.jsonl"), "--interactions", str(d / "data/interactions.txt"),
                 "--objects", str(d / "data/objects.txt"), "--m-max", "5", "--restarts", "2",
                 "--out", str(d / "model.json")]) == 0
    return d


def test_pipeline(workspace):
    d = workspace
    model = load_model(d / "model.json")
    assert model.metadata["command"]["m_max"] == 5 and len(model.bic_curve) == 5
    assert main(["score", "--model", str(d / "model.json"), "--input", str(d / "data/test.jsonl"),
                 "--threshold", "-10", "--out", str(d / "scores.csv")]) == 0
    scores = read_scores_csv(d / "scores.csv")
    assert len(scores) == 600
    assert main(["eval-auc", "--scores", str(d / "scores.csv"), "--flags", str(d / "data/flags.csv"),
                 "--out", str(d / "auc.json")]) == 0
    report = json.loads((d / "auc.json").read_text())
    assert report["n_frames"] == 600 and report["n_anomalous"] == sum(read_flags_csv(d / "data/flags.csv").values())
    assert 0.5 < report["auc"] <= 1.0
    assert report["config"]["scores"] == str(d / "scores.csv")

    assert main(["explain", "--model", str(d / "model.json"), "--input", str(d / "data/test.jsonl"),
                 "--out-dir", str(d / "expl")]) == 0
    pred = read_frame_scores_jsonl(d / "expl/frame_scores.jsonl")
    assert not (d / "expl/heatmaps").exists()
    (d / "filter.txt").write_text("object:bicycle\nlocation\n")
    assert main(["eval-map", "--pred", str(d / "expl/frame_scores.jsonl"), "--truth", str(d / "data/labels.jsonl"),
                 "--class-filter", str(d / "filter.txt"), "--out", str(d / "map.json")]) == 0
    mreport = json.loads((d / "map.json").read_text())
    assert set(mreport["per_class_ap"]) == {"object:bicycle", "location"}
    assert len(pred) > 500


def test_explain_single_frame_writes_heatmaps(workspace):
    d = workspace
    assert main(["explain", "--model", str(d / "model.json"), "--input", str(d / "data/test.jsonl"),
                 "--video", "video_000", "--frame", "40", "--out-dir", str(d / "one")]) == 0
    rows = [json.loads(l) for l in (d / "one/explanations.jsonl").read_text().splitlines()]
    assert rows and all(r["frame_idx"] == 40 for r in rows)
    for r in rows:
        stem = (d / "one" / r["heatmap"]).with_suffix("")
        for ext in (".csv", ".pgm", ".pgm.scale.txt"):
            assert stem.with_name(stem.name + ext).exists()
    # frame 40 of video 0 holds the injected bicycle
    assert any(r["dominant"] == "object" and r["worst"] for r in rows)


def test_usage_errors(workspace, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    assert "usage" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["score", "--model", "m.json"])
    assert exc.value.code == 1
    d = workspace
    assert main(["fit", "--train", "x", "--interactions", "x", "--objects", "x", "--m-min", "3", "--m-max", "2",
                 "--out", str(d / "never.json")]) == 1
    assert main(["explain", "--model", str(d / "model.json"), "--input", str(d / "data/test.jsonl"),
                 "--frame", "3", "--out-dir", str(d / "x")]) == 1


def test_data_errors(workspace, tmp_path, capsys):
    d = workspace
    # an 80-class object vocabulary gives a model whose layout does not match the test stream
    objs = (d / "data/objects.txt").read_text().splitlines()[:-1]
    (tmp_path / "objects80.txt").write_text("\n".join(objs) + "\n")
    assert main(["fit", "--train", str(d / "data/train.jsonl"), "--interactions", str(d / "data/interactions.txt"),
                 "--objects", str(tmp_path / "objects80.txt"), "--out", str(tmp_path / "m.json")]) == 2
    err = capsys.readouterr().err
    assert "train.jsonl:1:" in err and "objects" in err
    assert main(["score", "--model", str(d / "model.json"), "--input", str(d / "data/test.jsonl"),
                 "--interactions", str(d / "data/interactions.txt"), "--objects", str(tmp_path / "objects80.txt"),
                 "--out", str(tmp_path / "s.csv")]) == 2
    assert main(["score", "--model", str(tmp_path / "missing.json"), "--input", str(d / "data/test.jsonl"),
                 "--out", str(tmp_path / "s.csv")]) == 2
    assert not (tmp_path / "s.csv").exists()


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "hoianomaly.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "kernels" in out.stdout
