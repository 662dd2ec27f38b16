import json

import numpy as np
import pandas as pd
import pytest

from soundtex.main import main
from soundtex.store import load_model, read_store
from soundtex.texture_stats import TextureLayout
from soundtex.viz import render_centroid_stats, render_texture_stats


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("corpus")
    assert main(["synth", "--out-dir", str(out_dir), "--clips", "6", "--duration", "5", "--short", "1"]) == 0
    return out_dir


@pytest.fixture(scope="module")
def store_path(corpus_dir):
    path = corpus_dir / "features.astx"
    code = main([
        "extract", "--manifest", str(corpus_dir / "manifest.jsonl"), "--out", str(path),
        "--windows", "3", "--workers", "2",
    ])
    assert code == 0
    return path


def run(capsys, argv):
    code = main(argv)
    return code, capsys.readouterr().out


def test_extract_reports_short_clip(capsys, corpus_dir, tmp_path):
    out = tmp_path / "f.astx"
    code, stdout = run(capsys, [
        "extract", "--manifest", str(corpus_dir / "manifest.jsonl"), "--out", str(out), "--windows", "3",
    ])
    assert code == 0
    assert "clips: 7" in stdout
    assert "rows: 18" in stdout
    assert "dim: 502" in stdout
    assert "warnings: 1" in stdout


def test_stats(capsys, store_path):
    code, stdout = run(capsys, ["stats", "--store", str(store_path)])
    assert code == 0
    assert stdout.splitlines()[:3] == ["version: 1", "row_count: 18", "dim: 502"]


def test_cluster_then_probe(capsys, store_path, tmp_path):
    labels = tmp_path / "labels.csv"
    code, stdout = run(capsys, [
        "cluster", "--store", str(store_path), "--k", "3",
        "--out-model", str(tmp_path / "cluster.json"), "--out-labels", str(labels),
        "--exemplars", str(tmp_path / "exemplars.csv"), "--n-exemplars", "2",
    ])
    assert code == 0
    assert "k: 3" in stdout
    table = pd.read_csv(labels)
    assert list(table.columns) == ["clip_id", "window", "cluster", "distance", "pruned"]
    assert len(table) == 18

    report = tmp_path / "report.txt"
    code, stdout = run(capsys, [
        "probe", "--features", str(store_path), "--labels", str(labels),
        "--epochs", "50", "--out", str(report),
    ])
    assert code == 0
    assert "examples: 18" in stdout
    assert any(line.startswith("chance: ") for line in stdout.splitlines())
    assert report.read_text() == stdout


def test_pca_fit_and_encode(capsys, store_path, tmp_path):
    model = tmp_path / "pca.json"
    code, stdout = run(capsys, ["pca-fit", "--store", str(store_path), "--components", "8", "--out-model", str(model)])
    assert code == 0
    assert "components: 8" in stdout
    codes = tmp_path / "codes.csv"
    code, _ = run(capsys, ["encode", "--store", str(store_path), "--model", str(model), "--out", str(codes)])
    assert code == 0
    table = pd.read_csv(codes, dtype={"code": str})
    assert all(len(c) == 8 and set(c) <= {"0", "1"} for c in table["code"])


def test_sweep(capsys, store_path, tmp_path):
    code, stdout = run(capsys, ["sweep", "--store", str(store_path), "--ks", "2,4", "--out", str(tmp_path / "s.csv")])
    assert code == 0
    assert stdout.splitlines()[0].startswith("k=2 ")
    assert list(pd.read_csv(tmp_path / "s.csv")["k"]) == [2, 4]


@pytest.fixture(scope="module")
def corpus20_dir(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("corpus20")
    assert main(["synth", "--out-dir", str(out_dir), "--clips", "20", "--duration", "5", "--seed", "0"]) == 0
    return out_dir


def run_pipeline(capsys, corpus_dir, out_dir, workers):
    """extract -> cluster -> pca-fit -> encode -> probe; returns every output in order."""
    out_dir.mkdir()
    store, labels, codes = out_dir / "f.astx", out_dir / "labels.csv", out_dir / "codes.csv"
    steps = [
        ["extract", "--manifest", str(corpus_dir / "manifest.jsonl"), "--out", str(store),
         "--windows", "2", "--seed", "0", "--workers", workers],
        ["cluster", "--store", str(store), "--k", "4", "--seed", "0",
         "--out-model", str(out_dir / "cluster.json"), "--out-labels", str(labels)],
        ["pca-fit", "--store", str(store), "--components", "16", "--out-model", str(out_dir / "pca.json")],
        ["encode", "--store", str(store), "--model", str(out_dir / "pca.json"), "--out", str(codes)],
        ["probe", "--features", str(store), "--labels", str(labels), "--epochs", "30", "--seed", "0",
         "--out", str(out_dir / "report.txt")],
    ]
    outputs = []
    for argv in steps:
        code, stdout = run(capsys, argv)
        assert code == 0, argv[0]
        outputs.append(stdout)
    for name in ["f.astx", "labels.csv", "cluster.json", "pca.json", "codes.csv", "report.txt"]:
        outputs.append((out_dir / name).read_bytes())
    return outputs


def test_pipeline_is_deterministic(capsys, corpus20_dir, tmp_path):
    first = run_pipeline(capsys, corpus20_dir, tmp_path / "a", "1")
    second = run_pipeline(capsys, corpus20_dir, tmp_path / "b", "3")
    assert "rows: 40" in first[0]
    assert first == second


def test_thirty_clusters_give_chance_line(capsys, corpus20_dir, tmp_path):
    store, labels = tmp_path / "f.astx", tmp_path / "labels.csv"
    assert main(["extract", "--manifest", str(corpus20_dir / "manifest.jsonl"), "--out", str(store),
                 "--windows", "2"]) == 0
    assert main(["cluster", "--store", str(store), "--k", "30",
                 "--out-model", str(tmp_path / "m.json"), "--out-labels", str(labels)]) == 0
    assert pd.read_csv(labels)["cluster"].nunique() == 30
    capsys.readouterr()
    code, stdout = run(capsys, ["probe", "--features", str(store), "--labels", str(labels), "--epochs", "20"])
    assert code == 0
    assert "chance: 3.3%" in stdout.splitlines()


def test_probe_rejects_non_integer_label_columns(capsys, store_path, tmp_path):
    labels = tmp_path / "labels.csv"
    assert main(["cluster", "--store", str(store_path), "--k", "3",
                 "--out-model", str(tmp_path / "m.json"), "--out-labels", str(labels)]) == 0
    assert main(["probe", "--features", str(store_path), "--labels", str(labels),
                 "--label-column", "distance"]) == 2

    assert main(["pca-fit", "--store", str(store_path), "--components", "4",
                 "--out-model", str(tmp_path / "pca.json")]) == 0
    codes = tmp_path / "codes.csv"
    assert main(["encode", "--store", str(store_path), "--model", str(tmp_path / "pca.json"),
                 "--out", str(codes)]) == 0
    assert main(["probe", "--features", str(store_path), "--labels", str(codes),
                 "--label-column", "code"]) == 2


def test_viz_follows_the_extraction_rescaling(capsys, corpus_dir, tmp_path):
    store, model_path = tmp_path / "f.astx", tmp_path / "m.json"
    assert main(["extract", "--manifest", str(corpus_dir / "manifest.jsonl"), "--out", str(store),
                 "--windows", "2", "--rescale", "sqrtdim"]) == 0
    assert main(["cluster", "--store", str(store), "--k", "3", "--rescale", "sqrtdim",
                 "--out-model", str(model_path), "--out-labels", str(tmp_path / "l.csv")]) == 0
    assert json.loads(model_path.read_text())["feature_rescale"] == "sqrtdim"
    layout = TextureLayout(rescale="sqrtdim")

    svg = tmp_path / "c.svg"
    assert main(["viz", "--kind", "centroid", "--model", str(model_path), "--out", str(svg)]) == 0
    assert svg.read_bytes() == render_centroid_stats(load_model(model_path, "cluster"), 0, layout)

    assert main(["viz", "--kind", "texture", "--store", str(store), "--row", "1", "--rescale", "sqrtdim",
                 "--out", str(svg)]) == 0
    features = read_store(store)
    clip_id, window = features.ids[1]
    expected = render_texture_stats(features.matrix[1].astype(np.float64), layout, title=f"{clip_id} window {window}")
    assert svg.read_bytes() == expected



def test_viz_outputs(capsys, corpus_dir, store_path, tmp_path):
    wav = sorted(corpus_dir.glob("clip000_*.wav"))[0]
    pgm = tmp_path / "c.pgm"
    code, _ = run(capsys, ["viz", "--kind", "cochleagram", "--wav", str(wav), "--duration", "1", "--out", str(pgm)])
    assert code == 0
    assert pgm.read_bytes().startswith(b"P5 400 32 255\n")

    svg = tmp_path / "t.svg"
    code, _ = run(capsys, ["viz", "--kind", "texture", "--store", str(store_path), "--row", "1", "--out", str(svg)])
    assert code == 0
    assert svg.read_text().startswith("<svg")

    code, _ = run(capsys, ["viz", "--kind", "texture", "--store", str(store_path), "--row", "99", "--out", str(svg)])
    assert code == 2


def test_unknown_flag_is_usage_error(capsys):
    assert main(["stats", "--frobnicate"]) == 1
    assert main([]) == 1


def test_missing_file_exits_2(tmp_path):
    assert main(["stats", "--store", str(tmp_path / "nope.astx")]) == 2
    assert main(["extract", "--manifest", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "x")]) == 2


def test_store_rows_match_manifest_order(store_path):
    store = read_store(store_path)
    clip_ids = store.clip_ids
    assert clip_ids == sorted(clip_ids)
    assert np.all(np.isfinite(store.matrix))
