import json
import os

import numpy as np
import pytest

from retargetkit import annotstats, imaging, mtlnet
from retargetkit.annotstats import METHODS, DatasetEntry, RatingRecord
from retargetkit.cli import main
from retargetkit.features import extract, export_features


def _write_image(path, seed, h=24, w=36):
    rng = np.random.default_rng(seed)
    img = rng.random((h, w, 3))
    with open(path, "wb") as fh:
        fh.write(imaging.encode_png(img))
    return imaging.decode_image(open(path, "rb").read())


@pytest.fixture
def workspace(tmp_path):
    """Images, a complete manifest, and a matching feature file."""
    images_dir = tmp_path / "imgs"
    images_dir.mkdir()
    entries, table = [], {}
    rng = np.random.default_rng(0)
    levels = ("good", "acceptable", "poor")
    for k in range(4):
        img_id = f"img{k}"
        img = _write_image(images_dir / f"{img_id}.png", seed=k)
        table[img_id] = extract(img)
        ratings = [
            RatingRecord(img_id, m, rater, levels[int(rng.integers(3))])
            for m in METHODS
            for rater in ("r1", "r2")
        ]
        attrs = tuple(int(v) for v in rng.choice([-1, 1], size=14))
        entries.append(DatasetEntry(img_id, file=f"{img_id}.png",
                                    attributes=attrs, ratings=ratings))
    manifest = tmp_path / "manifest.jsonl"
    annotstats.save_manifest(str(manifest), entries)
    feats = tmp_path / "feats.rtft"
    export_features(str(feats), table)
    return {"dir": tmp_path, "images": images_dir, "manifest": manifest, "features": feats}


def test_retarget_halves_long_side(tmp_path):
    src = tmp_path / "a.png"
    _write_image(src, seed=1, h=20, w=40)
    out = tmp_path / "b.png"
    code = main(["retarget", "--in", str(src), "--engine", "crop",
                 "--ratio", "0.5", "--axis", "long", "--out", str(out)])
    assert code == 0
    result = imaging.decode_image(out.read_bytes())
    assert result.shape[:2] == (20, 20)


def test_retarget_missing_file_is_user_error(tmp_path):
    code = main(["retarget", "--in", str(tmp_path / "nope.png"),
                 "--out", str(tmp_path / "o.png")])
    assert code == 1


def test_bad_usage_exits_1(capsys):
    assert main(["retarget"]) == 1
    capsys.readouterr()


def test_importance_output_dimensions(tmp_path):
    src = tmp_path / "a.png"
    _write_image(src, seed=2, h=16, w=24)
    out = tmp_path / "imp.png"
    assert main(["importance", "--in", str(src), "--out", str(out)]) == 0
    imp = imaging.decode_image(out.read_bytes())
    assert imp.shape[:2] == (16, 24)


def test_dataset_init_validate_stats(workspace, tmp_path, capsys):
    fresh = tmp_path / "new.jsonl"
    assert main(["dataset", "init", "--manifest", str(fresh)]) == 0
    assert main(["dataset", "init", "--manifest", str(fresh)]) == 1  # already exists
    assert main(["dataset", "validate", "--manifest", str(workspace["manifest"])]) == 0
    capsys.readouterr()
    csv_out = tmp_path / "corr.csv"
    assert main(["dataset", "stats", "--manifest", str(workspace["manifest"]),
                 "--out", str(csv_out)]) == 0
    text = capsys.readouterr().out
    summary = json.loads(text[: text.rindex("}") + 1])
    assert 0.0 <= summary["kendalls_w"] <= 1.0
    assert set(summary["ridit"]) == set(METHODS)
    assert csv_out.exists()
    assert csv_out.read_text().splitlines()[0].startswith("attribute,")


def test_dataset_validate_incomplete(tmp_path, capsys):
    entry = DatasetEntry("img0", ratings=[RatingRecord("img0", "crop", "r1", "good")])
    manifest = tmp_path / "m.jsonl"
    annotstats.save_manifest(str(manifest), [entry])
    assert main(["dataset", "validate", "--manifest", str(manifest)]) == 1
    capsys.readouterr()


def test_features_extract_and_import(workspace, tmp_path):
    out = tmp_path / "out.rtft"
    code = main(["features", "extract", "--manifest", str(workspace["manifest"]),
                 "--images", str(workspace["images"]), "--out", str(out)])
    assert code == 0
    assert out.read_bytes() == workspace["features"].read_bytes()
    copied = tmp_path / "copy.rtft"
    assert main(["features", "import", "--features", str(out), "--out", str(copied)]) == 0
    assert copied.read_bytes() == out.read_bytes()


def _train(workspace, tmp_path, extra=()):
    model = tmp_path / "model.rtgm"
    config = tmp_path / "hp.json"
    config.write_text(json.dumps({"epochs": 2, "batch_size": 8, "lr": 0.005}))
    code = main(["train", "--manifest", str(workspace["manifest"]),
                 "--features", str(workspace["features"]),
                 "--variant", "full", "--config", str(config),
                 "--model-out", str(model), *extra])
    return code, model


def test_train_predict_evaluate(workspace, tmp_path, capsys):
    code, model = _train(workspace, tmp_path)
    assert code == 0
    capsys.readouterr()

    src = workspace["images"] / "img0.png"
    assert main(["predict", "--model", str(model), "--in", str(src), "--json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert 0.0 <= payload["retargetability"] <= 1.0
    assert len(payload["attributes"]) == 14
    assert all(f in (-1, 1) for f in payload["attributes"])

    assert main(["evaluate", "--model", str(model),
                 "--manifest", str(workspace["manifest"]),
                 "--features", str(workspace["features"]),
                 "--sigma", "0.5"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["rmse"] >= 0.0
    assert len(report["attribute_accuracy"]) == 14


def test_train_deterministic_given_seed(workspace, tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    code1, m1 = _train(workspace, tmp_path / "a", extra=["--seed", "7"])
    code2, m2 = _train(workspace, tmp_path / "b", extra=["--seed", "7"])
    assert code1 == 0 and code2 == 0
    assert m1.read_bytes() == m2.read_bytes()


def test_assess_set_band(tmp_path, capsys):
    # scores: img_hi=1.0, img_mid=0.5, img_lo=0.0 under MAX-De
    def entry(img_id, level):
        ratings = [RatingRecord(img_id, m, "r1", level) for m in METHODS]
        return DatasetEntry(img_id, ratings=ratings)

    manifest = tmp_path / "m.jsonl"
    annotstats.save_manifest(
        str(manifest),
        [entry("img_hi", "good"), entry("img_mid", "acceptable"), entry("img_lo", "poor")],
    )
    out = tmp_path / "kept.txt"
    assert main(["assess-set", "--manifest", str(manifest),
                 "--band", "0.0:0.75", "--out", str(out)]) == 0
    capsys.readouterr()
    assert out.read_text().split() == ["img_mid"]


def test_collage_command(tmp_path, capsys):
    images_dir = tmp_path / "photos"
    images_dir.mkdir()
    for k in range(3):
        _write_image(images_dir / f"p{k}.png", seed=10 + k, h=30 + 2 * k, w=40 - 3 * k)
    out = tmp_path / "collage.png"
    code = main(["collage", "--images", str(images_dir), "--canvas", "96x64",
                 "--seed", "3", "--out", str(out),
                 "--layout-out", str(tmp_path / "layout.json")])
    assert code == 0
    capsys.readouterr()
    result = imaging.decode_image(out.read_bytes())
    assert result.shape[:2] == (64, 96)
    layout = json.loads((tmp_path / "layout.json").read_text())
    assert layout["canvas"] == {"w": 96, "h": 64}
    assert len(layout["regions"]) == 3
