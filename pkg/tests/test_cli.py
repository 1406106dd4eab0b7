"""End-to-end tests of the command-line surface."""

import json

import numpy as np
import pytest

from lorentzseg import hyperbolicity as hyp
from lorentzseg import segtoy as st
from lorentzseg.cli import main
from lorentzseg.fileio import read_json, read_pgm, write_embedding_csv


def run(argv):
    return main(argv)


SMALL_TRAIN = [
    "--parents", "3", "--children", "3", "--height", "16", "--width", "16",
    "--epochs", "200", "--embed-dim", "8",
]


@pytest.fixture(scope="module")
def trained_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli_runs")
    assert run(["train", "--head", "pixel", *SMALL_TRAIN, "--out-dir", str(d / "pix")]) == 0
    assert run(["euclid-baseline", *SMALL_TRAIN, "--out-dir", str(d / "euc")]) == 0
    return d


class TestDeltahyp:
    def test_collinear_points_are_tree_like(self, tmp_path):
        # integer points on a line metrize a path tree exactly in float
        # arithmetic: delta_rel must be 0
        pts = np.zeros((12, 3))
        pts[:, 0] = np.arange(12.0)
        path = tmp_path / "line.csv"
        write_embedding_csv(path, pts)
        out = tmp_path / "rep.json"
        assert run(["deltahyp", "--input", str(path), "--batch-size", "12",
                    "--batches", "1", "--seed", "0", "--out", str(out)]) == 0
        rep = read_json(out)
        assert rep["delta_rel"] == 0.0

    def test_same_seed_identical_json(self, tmp_path):
        rng = np.random.default_rng(130)
        path = tmp_path / "e.csv"
        write_embedding_csv(path, rng.normal(size=(60, 4)))
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert run(["deltahyp", "--input", str(path), "--batch-size", "20",
                        "--batches", "4", "--seed", "5", "--out", str(out)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_cli_matches_library_on_exported_embeddings(self, tmp_path):
        # tangent embeddings exported from a trained scene encoder
        scene = st.generate_scene(st.SceneConfig(height=16, width=16))
        bank = st.DescriptorBank.fit(scene, 8)
        res = st.train(scene, bank, st.TrainConfig(epochs=30, lr=0.5))
        tangents = st.encoder_forward(res.params, scene.features).reshape(-1, 8)
        path = tmp_path / "e.csv"
        write_embedding_csv(path, tangents)
        out = tmp_path / "r.json"
        assert run(["deltahyp", "--input", str(path), "--metric", "lorentz",
                    "--batch-size", "64", "--batches", "3", "--seed", "9",
                    "--out", str(out)]) == 0
        rep = read_json(out)
        lib = hyp.batched_delta_rel_from_points(tangents, 64, 3, seed=9, metric="lorentz")
        assert rep["delta_rel"] == lib.delta_rel

    def test_missing_file_exits_3(self, tmp_path):
        assert run(["deltahyp", "--input", str(tmp_path / "nope.csv"),
                    "--out", str(tmp_path / "r.json")]) == 3

    def test_malformed_file_exits_3(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("dim=2\n1.0,2.0\n3.0\n")
        assert run(["deltahyp", "--input", str(bad), "--out", str(tmp_path / "r.json")]) == 3


class TestGradcheck:
    def test_default_run_passes(self, tmp_path):
        out = tmp_path / "g.json"
        assert run(["gradcheck", "--samples", "50", "--seed", "3", "--out", str(out)]) == 0
        rep = read_json(out)
        assert rep["max_rel_error"] <= 1e-5
        assert rep["sign_agreement_rate"] == 1.0

    def test_injected_error_exits_1(self, tmp_path):
        out = tmp_path / "g.json"
        assert run(["gradcheck", "--samples", "5", "--seed", "3",
                    "--inject-error", "--out", str(out)]) == 1

    def test_single_sample(self, tmp_path):
        out = tmp_path / "g.json"
        assert run(["gradcheck", "--samples", "1", "--seed", "4", "--out", str(out)]) == 0
        assert len(read_json(out)["samples"]) == 1


@pytest.fixture(scope="module")
def field(tmp_path_factory):
    d = tmp_path_factory.mktemp("gradfield")
    out = d / "f.csv"
    assert run(["gradfield", "--grid-extent", "1.2", "--resolution", "7",
                "--target", "0.6,0.3", "--out", str(out)]) == 0
    rows = [
        line.split(",")
        for line in out.read_text().splitlines()
        if line and not line.startswith("#")
    ]
    return rows[0], [[float(x) for x in r] for r in rows[1:]]


class TestGradfield:
    def test_row_count(self, field):
        header, data = field
        assert len(data) == 49

    def test_target_row_zeroed(self, field):
        header, data = field
        col = {name: i for i, name in enumerate(header)}
        for row in data:
            if row[col["v1"]] == 0.6 and row[col["v2"]] == 0.3:
                assert row[col["ld_mag"]] == 0.0
                assert row[col["sign"]] == 0

    def test_euclid_orthogonality_per_row(self, field):
        header, data = field
        col = {name: i for i, name in enumerate(header)}
        checked = 0
        for row in data:
            if row[col["euclid_d_mag"]] > 0:
                assert abs(row[col["euclid_cos"]]) < 1e-8
                checked += 1
        assert checked > 40

    def test_sign_column_matches_recomputed_cosine(self, field):
        header, data = field
        col = {name: i for i, name in enumerate(header)}
        for row in data:
            gd = np.array([row[col["ld_dx"]], row[col["ld_dy"]]])
            ga = np.array([row[col["lext_dx"]], row[col["lext_dy"]]])
            if np.linalg.norm(gd) == 0 or np.linalg.norm(ga) == 0:
                continue
            cos = float(gd @ ga / (np.linalg.norm(gd) * np.linalg.norm(ga)))
            if abs(cos) > 1e-8:
                assert (1 if cos > 0 else -1) == int(row[col["sign"]])


class TestTrainInferUncertainty:
    def test_pixel_train_reaches_perfect_miou(self, trained_dir):
        metrics = read_json(trained_dir / "pix" / "metrics.json")
        assert metrics["train_miou_distance"] == 1.0
        assert metrics["distance_angle_agreement"] > 0.9

    def test_infer_modes_agree_and_log(self, trained_dir, tmp_path):
        out = tmp_path / "inf"
        assert run(["infer", "--model", str(trained_dir / "pix" / "model"),
                    "--mode", "angle", "--out-dir", str(out)]) == 0
        metrics = read_json(out / "metrics.json")
        assert metrics["miou_angle"] == 1.0
        assert metrics["distance_angle_agreement"] > 0.9
        pgm = read_pgm(out / "pred.pgm")
        assert pgm.shape == (16, 16)
        legend = read_json(out / "pred.legend.json")
        assert legend["0"] == "p0.c0"

    def test_uncertainty_exports(self, trained_dir, tmp_path):
        out = tmp_path / "unc"
        assert run(["uncertainty", "--model", str(trained_dir / "pix" / "model"),
                    "--percentile", "85", "--out-dir", str(out)]) == 0
        for stem in ("radius_uncertainty", "angle_uncertainty", "boundary", "confidence_class0"):
            assert (out / f"{stem}.pgm").exists()
            sidecar = read_json(out / f"{stem}.json")
            assert "min" in sidecar and "max" in sidecar
        bvals = np.loadtxt(out / "boundary.csv", delimiter=",")
        assert set(np.unique(bvals)) <= {0.0, 1.0}

    def test_train_outputs_reproducible(self, trained_dir, tmp_path):
        rerun = tmp_path / "pix2"
        assert run(["train", "--head", "pixel", *SMALL_TRAIN, "--out-dir", str(rerun)]) == 0
        for name in ("model.bin", "model.json", "trace.csv", "metrics.json"):
            assert (rerun / name).read_bytes() == (trained_dir / "pix" / name).read_bytes()

    def test_manifest_written_with_clamp_counter(self, trained_dir):
        manifest = read_json(trained_dir / "pix" / "manifest.json")
        assert manifest["command"].startswith("train")
        assert manifest["tool_version"]
        assert "clamp_events" in manifest and "wall_clock_s" in manifest

    def test_mask_head_cli(self, tmp_path):
        out = tmp_path / "mask"
        assert run(["train", "--head", "mask", "--height", "24", "--width", "24",
                    "--epochs", "250", "--lr", "0.002", "--out-dir", str(out)]) == 0
        metrics = read_json(out / "metrics.json")
        assert metrics["train_miou_semantic"] == 1.0
        inf = tmp_path / "mask_inf"
        assert run(["infer", "--model", str(out / "model"), "--out-dir", str(inf)]) == 0
        assert read_json(inf / "metrics.json")["miou_semantic"] == metrics["train_miou_semantic"]
        un = tmp_path / "mask_unc"
        assert run(["uncertainty", "--model", str(out / "model"), "--out-dir", str(un)]) == 0
        assert (un / "angle_uncertainty.pgm").exists()


class TestLosscape:
    def test_center_cell_equals_final_loss(self, trained_dir, tmp_path):
        out = tmp_path / "ls.csv"
        assert run(["losscape", "--model", str(trained_dir / "pix" / "model"),
                    "--grid", "5", "--extent", "0.5", "--out", str(out)]) == 0
        metrics = read_json(trained_dir / "pix" / "metrics.json")
        center = None
        for line in out.read_text().splitlines():
            if line.startswith("0.0,0.0,"):
                center = float(line.split(",")[2])
        assert center is not None
        assert abs(center - metrics["final_loss"]) <= 1e-12

    def test_deterministic_grid(self, trained_dir, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert run(["losscape", "--model", str(trained_dir / "pix" / "model"),
                        "--grid", "3", "--directions-seed", "7", "--out", str(out)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_euclid_landscape(self, trained_dir, tmp_path):
        out = tmp_path / "e.csv"
        assert run(["losscape", "--model", str(trained_dir / "euc" / "model"),
                    "--grid", "3", "--out", str(out)]) == 0
        metrics = read_json(trained_dir / "euc" / "metrics.json")
        for line in out.read_text().splitlines():
            if line.startswith("0.0,0.0,"):
                assert abs(float(line.split(",")[2]) - metrics["final_loss"]) <= 1e-12


class TestEuclidBaseline:
    def test_perfect_miou_and_no_entailment(self, trained_dir):
        metrics = read_json(trained_dir / "euc" / "metrics.json")
        assert metrics["train_miou_euclid"] == 1.0
        header = (trained_dir / "euc" / "trace.csv").read_text().splitlines()[1]
        assert "entail" not in header
        assert "aper" not in json.dumps(metrics)


class TestExitCodes:
    def test_bad_flag_value_exits_2(self, tmp_path):
        assert run(["deltahyp", "--input", "x.csv", "--metric", "manhattan",
                    "--out", str(tmp_path / "r.json")]) == 2

    def test_bad_config_exits_2(self, tmp_path):
        assert run(["train", "--head", "pixel", "--parents", "0",
                    "--out-dir", str(tmp_path / "o")]) == 2

    def test_batch_size_too_small_exits_2(self, tmp_path):
        path = tmp_path / "e.csv"
        write_embedding_csv(path, np.zeros((8, 2)))
        assert run(["deltahyp", "--input", str(path), "--batch-size", "2",
                    "--out", str(tmp_path / "r.json")]) == 2
