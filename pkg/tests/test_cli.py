import json

import numpy as np
import pytest
from PIL import Image

from dermseg import config as cfgmod
from dermseg.cli import main
from dermseg.dataset import DataError, index_dataset
from dermseg.imgcore import read_mask, write_mask

from .synth import corpus, square_lesion, write_case


@pytest.fixture
def data(tmp_path):
    corpus(tmp_path / "train", n=4, seed=1)
    corpus(tmp_path / "eval", n=6, seed=2)
    return tmp_path


def tree(directory):
    return {p.relative_to(directory).as_posix(): p.read_bytes()
            for p in sorted(directory.rglob("*")) if p.is_file()}


# ---- dataset indexing ----------------------------------------------------------

def test_index_sorted_with_masks_and_labels(tmp_path):
    img, mask = square_lesion(size=16, side=5)
    write_case(tmp_path, "b", img, mask)
    write_case(tmp_path, "a", img)
    (tmp_path / "masks").mkdir()
    write_mask(tmp_path / "masks" / "a_segmentation.png", mask)
    (tmp_path / "labels.csv").write_text("image_id,class\na,melanoma\n")
    entries = index_dataset(tmp_path)
    assert [e.image_id for e in entries] == ["a", "b"]
    assert entries[0].mask_path.parent.name == "masks"
    assert entries[0].class_name == "melanoma" and entries[1].class_name is None


def test_index_sibling_groundtruth_dir(tmp_path):
    img, mask = square_lesion(size=16, side=5)
    write_case(tmp_path / "images", "x", img)
    gt = tmp_path / "Part1_GroundTruth"
    gt.mkdir()
    write_mask(gt / "x_segmentation.png", mask)
    assert index_dataset(tmp_path / "images")[0].mask_path == gt / "x_segmentation.png"


def test_index_errors(tmp_path):
    with pytest.raises(DataError):
        index_dataset(tmp_path / "nope")
    img, _ = square_lesion(size=8, side=3)
    write_case(tmp_path, "dup", img)
    Image.fromarray(img).save(tmp_path / "dup.jpeg")
    with pytest.raises(DataError, match="duplicate"):
        index_dataset(tmp_path)


def test_index_bad_labels(tmp_path):
    write_case(tmp_path, "a", square_lesion(size=8, side=3)[0])
    (tmp_path / "labels.csv").write_text("name,kind\na,x\n")
    with pytest.raises(DataError):
        index_dataset(tmp_path)


# ---- train -----------------------------------------------------------------

def test_train_writes_model(data, capsys):
    out = data / "model.json"
    assert main(["train", "--data", str(data / "train"), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["version"] == 1 and list(doc["per_class"]) == ["unlabeled"]
    lo, hi = doc["combined"]["lo"], doc["combined"]["hi"]
    assert all(a <= 92 + 8 and b >= 44 - 8 for a, b in zip(lo, hi))
    assert "lesion pixels" in capsys.readouterr().out


def test_train_three_classes(tmp_path):
    colors = {"nevus": (120, 80, 60), "melanoma": (60, 40, 30), "keratosis": (150, 120, 90)}
    rows = ["image_id,class"]
    for i, (name, color) in enumerate(colors.items()):
        img, mask = square_lesion(size=32, side=11, lesion=color)
        write_case(tmp_path / "d", f"c{i}", img, mask)
        rows.append(f"c{i},{name}")
    (tmp_path / "d" / "labels.csv").write_text("\n".join(rows) + "\n")
    out = tmp_path / "m.json"
    assert main(["train", "--data", str(tmp_path / "d"), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert sorted(doc["per_class"]) == sorted(colors)
    combined = doc["combined"]
    for rng in doc["per_class"].values():
        assert all(a <= b for a, b in zip(combined["lo"], rng["lo"]))
        assert all(a >= b for a, b in zip(combined["hi"], rng["hi"]))


def test_train_all_empty_masks_is_data_error(tmp_path):
    img, _ = square_lesion(size=16, side=5)
    write_case(tmp_path, "e", img, np.zeros((16, 16), bool))
    assert main(["train", "--data", str(tmp_path), "--out", str(tmp_path / "m.json")]) == 2


def test_train_without_masks_is_data_error(tmp_path):
    write_case(tmp_path, "e", square_lesion(size=16, side=5)[0])
    assert main(["train", "--data", str(tmp_path), "--out", str(tmp_path / "m.json")]) == 2


# ---- segment / evaluate ---------------------------------------------------------

def test_segment_outputs_and_manifest(data):
    model = data / "model.json"
    main(["train", "--data", str(data / "train"), "--out", str(model)])
    out = data / "seg"
    assert main(["segment", "--data", str(data / "eval"), "--model", str(model),
                 "--out", str(out)]) == 0
    ids = [f"ISIC_{i:07d}" for i in range(6)]
    for i in ids:
        assert (out / f"{i}_pred.png").is_file() and (out / f"{i}_overlay.png").is_file()
    man = json.loads((out / "manifest.json").read_text())
    assert [r["image_id"] for r in man["images"]] == ids
    assert man["failures"] == 0 and "workers" not in man["config"]
    assert "output_dir" not in man["config"]
    rec = man["images"][0]
    assert rec["processing_size"] == [64, 64] and rec["seeds"]


def test_segment_unknown_class_fails_images(data):
    model = data / "model.json"
    main(["train", "--data", str(data / "train"), "--out", str(model)])
    code = main(["segment", "--data", str(data / "eval"), "--model", str(model),
                 "--out", str(data / "seg"), "--class", "melanoma"])
    assert code == 3
    man = json.loads((data / "seg" / "manifest.json").read_text())
    assert man["failures"] == 6 and "melanoma" in man["images"][0]["error"]


def test_segment_bad_model_is_data_error(data):
    bad = data / "bad.json"
    bad.write_text("{not json")
    assert main(["segment", "--data", str(data / "eval"), "--model", str(bad),
                 "--out", str(data / "seg")]) == 2


def test_evaluate_perfect(tmp_path, capsys):
    _, mask = square_lesion(size=20, side=7)
    write_mask(tmp_path / "pred" / "a_pred.png", mask) if (tmp_path / "pred").mkdir() is None else None
    (tmp_path / "gt").mkdir()
    write_mask(tmp_path / "gt" / "a_segmentation.png", mask)
    assert main(["evaluate", "--pred", str(tmp_path / "pred"), "--gt", str(tmp_path / "gt"),
                 "--out", str(tmp_path / "m")]) == 0
    doc = json.loads((tmp_path / "m" / "metrics.json").read_text())
    assert doc["overall"] == 1.0
    assert (tmp_path / "m" / "metrics.csv").read_text().startswith("image_id,jaccard")


def test_evaluate_size_mismatch_names_image(tmp_path, capsys):
    (tmp_path / "pred").mkdir()
    (tmp_path / "gt").mkdir()
    write_mask(tmp_path / "pred" / "img42_pred.png", np.ones((5, 5), bool))
    write_mask(tmp_path / "gt" / "img42_segmentation.png", np.ones((6, 5), bool))
    assert main(["evaluate", "--pred", str(tmp_path / "pred"), "--gt", str(tmp_path / "gt"),
                 "--out", str(tmp_path / "m")]) == 2
    assert "img42" in capsys.readouterr().err


def test_evaluate_unmatched_prediction(tmp_path):
    (tmp_path / "pred").mkdir()
    (tmp_path / "gt").mkdir()
    write_mask(tmp_path / "pred" / "lonely_pred.png", np.ones((5, 5), bool))
    assert main(["evaluate", "--pred", str(tmp_path / "pred"), "--gt", str(tmp_path / "gt"),
                 "--out", str(tmp_path / "m")]) == 2


def test_evaluate_downscaled_prediction(tmp_path):
    gt = np.zeros((1600, 1600), bool)
    gt[400:1200, 400:1200] = True
    (tmp_path / "pred").mkdir()
    (tmp_path / "gt").mkdir()
    write_mask(tmp_path / "pred" / "big_pred.png", gt[::4, ::4])
    write_mask(tmp_path / "gt" / "big_segmentation.png", gt)
    for extra in ([], ["--set", "evaluate.score_at_original=true"]):
        assert main(["evaluate", "--pred", str(tmp_path / "pred"), "--gt", str(tmp_path / "gt"),
                     "--out", str(tmp_path / "m"), *extra]) == 0
        assert json.loads((tmp_path / "m" / "metrics.json").read_text())["overall"] == 1.0


# ---- pipeline, determinism, replay ----------------------------------------------

def test_pipeline_layout(data):
    out = data / "run"
    assert main(["pipeline", "--train", str(data / "train"), "--eval", str(data / "eval"),
                 "--out", str(out)]) == 0
    assert (out / "model.json").is_file()
    assert (out / "metrics" / "metrics.csv").is_file()
    doc = json.loads((out / "metrics" / "metrics.json").read_text())
    assert doc["n_images"] == 6 and doc["means"]["jaccard"] >= 0.9
    man = json.loads((out / "manifest.json").read_text())
    assert man["overall"] == pytest.approx(doc["overall"])


def test_pipeline_byte_identical_across_workers(data):
    runs = {}
    for w in (1, 4):
        out = data / f"run{w}"
        assert main(["pipeline", "--train", str(data / "train"), "--eval", str(data / "eval"),
                     "--out", str(out), "--workers", str(w)]) == 0
        runs[w] = tree(out)
    assert runs[1] == runs[4]


def test_workers_env(data, monkeypatch):
    monkeypatch.setenv("DERMSEG_WORKERS", "2")
    out = data / "envrun"
    assert main(["pipeline", "--train", str(data / "train"), "--eval", str(data / "eval"),
                 "--out", str(out)]) == 0
    monkeypatch.setenv("DERMSEG_WORKERS", "many")
    assert main(["pipeline", "--train", str(data / "train"), "--eval", str(data / "eval"),
                 "--out", str(out)]) == 2


def test_replay_reproduces_segment(data):
    model = data / "model.json"
    main(["train", "--data", str(data / "train"), "--out", str(model)])
    main(["segment", "--data", str(data / "eval"), "--model", str(model), "--out",
          str(data / "a"), "--set", "segment.flood.tolerance=25"])
    assert main(["replay", "--manifest", str(data / "a" / "manifest.json"),
                 "--out", str(data / "b")]) == 0
    assert tree(data / "a") == tree(data / "b")


def test_replay_checksum_mismatch(data):
    model = data / "model.json"
    main(["train", "--data", str(data / "train"), "--out", str(model)])
    main(["segment", "--data", str(data / "eval"), "--model", str(model), "--out", str(data / "a")])
    model.write_text(model.read_text().replace('"percentile_hi": 99.0', '"percentile_hi": 98.0'))
    assert main(["replay", "--manifest", str(data / "a" / "manifest.json"),
                 "--out", str(data / "b")]) == 2


# ---- config and usage -------------------------------------------------------

def test_print_defaults_roundtrips(capsys):
    assert main(["config", "--print-defaults"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["segment"]["kmeans"]["k"] == 5
    assert cfgmod.to_dict(cfgmod.from_dict(doc)) == doc


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"segment": {"kmeans": {"k": 3}}}))
    cfg = cfgmod.load(path)
    assert cfg.segment.kmeans.k == 3 and cfg.segment.flood.tolerance == 20
    cfg = cfgmod.apply_overrides(cfg, ["segment.flood.connectivity=8"])
    assert cfg.segment.flood.connectivity == 8
    with pytest.raises(ValueError):
        cfgmod.apply_overrides(cfg, ["segment.nothing=1"])
    with pytest.raises(ValueError):
        cfgmod.from_dict({"bogus": 1})


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1
    code = main(["train", "--data", str(tmp_path), "--out", str(tmp_path / "m.json"),
                 "--set", "segment.kmeans.k=0"])
    assert code == 1


def test_read_mask_roundtrip_from_cli_output(data):
    out = data / "run"
    main(["pipeline", "--train", str(data / "train"), "--eval", str(data / "eval"),
          "--out", str(out)])
    pred = read_mask(out / "masks" / "ISIC_0000000_pred.png")
    assert pred.shape == (64, 64) and pred.any()
