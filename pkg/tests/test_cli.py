import json

import numpy as np
import pytest

from srfeat.cli import dispatch, parse_config_file
from srfeat.data import load_image, save_image
from srfeat.errors import SrfeatError
from srfeat.mos.study import Study, StudyPlan


def test_unknown_subcommand_exits_2(capsys):
    assert dispatch(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_flag_exits_2(capsys):
    assert dispatch(["evaluate", "--nope"]) == 2


def test_parse_config_file(tmp_path):
    cfg = tmp_path / "train.toml"
    cfg.write_text(
        "# desk-scale run\n"
        "preset = \"M_pva\"\n"
        "batch = 4\n"
        "lr0 = 1e-4\n"
        "zero_center = true\n"
        "adam_betas = [0.9, 0.999]\n"
    )
    values = parse_config_file(cfg)
    assert values == {"preset": "M_pva", "batch": 4, "lr0": 1e-4,
                      "zero_center": True, "adam_betas": [0.9, 0.999]}


def test_parse_config_rejects_garbage(tmp_path):
    cfg = tmp_path / "bad.conf"
    cfg.write_text("this is not an assignment\n")
    with pytest.raises(SrfeatError):
        parse_config_file(cfg)


def test_prepare_data(corpus_dir, tmp_path):
    out = tmp_path / "index.json"
    assert dispatch(["prepare-data", "--root", str(corpus_dir),
                     "--split", "train", "--out", str(out)]) == 0
    index = json.loads(out.read_text())
    assert len(index["entries"]) == 4
    assert index["channel_mean"] is not None


def test_evaluate(tmp_path, natural_images):
    sr_dir, hr_dir = tmp_path / "sr", tmp_path / "hr"
    sr_dir.mkdir()
    hr_dir.mkdir()
    for i, img in enumerate(natural_images[:2]):
        save_image(hr_dir / f"im{i}.png", img)
        save_image(sr_dir / f"im{i}.png", img)
    out = tmp_path / "report.json"
    assert dispatch(["evaluate", "--sr-dir", str(sr_dir), "--hr-dir",
                     str(hr_dir), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["n_images"] == 2
    assert out.with_suffix(".csv").exists()


class TestTrainCli:
    def test_train_writes_artifacts(self, corpus_dir, tmp_path):
        index = tmp_path / "index.json"
        dispatch(["prepare-data", "--root", str(corpus_dir), "--out", str(index)])
        run_dir = tmp_path / "run"
        code = dispatch(["train", "--preset", "M_p", "--tiny", "--data",
                         str(index), "--out", str(run_dir), "--updates", "2",
                         "--batch", "4", "--seed", "3"])
        assert code == 0
        assert (run_dir / "checkpoint.srz").exists()
        assert (run_dir / "run_manifest.json").exists()
        lines = (run_dir / "loss_log.jsonl").read_text().splitlines()
        assert len(lines) == 2
        manifest = json.loads((run_dir / "run_manifest.json").read_text())
        assert manifest["command"] == "train"
        assert manifest["wall_clock_s"] is not None

    def test_manifest_replay_reproduces_first_step(self, corpus_dir, tmp_path):
        index = tmp_path / "index.json"
        dispatch(["prepare-data", "--root", str(corpus_dir), "--out", str(index)])
        args = ["--tiny", "--data", str(index), "--updates", "1",
                "--batch", "4", "--seed", "9"]
        dispatch(["train", "--preset", "M_pva", "--out",
                  str(tmp_path / "run_a")] + args)
        # replay from the recorded config snapshot
        manifest = json.loads((tmp_path / "run_a" / "run_manifest.json").read_text())
        from srfeat.data import DatasetIndex
        from srfeat.training import TrainConfig, run_training

        config = TrainConfig.from_dict(manifest["config"])
        run_training(config, DatasetIndex.load(index), tmp_path / "run_b",
                     updates=1)
        first_a = (tmp_path / "run_a" / "loss_log.jsonl").read_text().splitlines()[0]
        first_b = (tmp_path / "run_b" / "loss_log.jsonl").read_text().splitlines()[0]
        assert first_a == first_b

    def test_evaluate_with_checkpoint(self, corpus_dir, tmp_path):
        index = tmp_path / "index.json"
        dispatch(["prepare-data", "--root", str(corpus_dir), "--out", str(index)])
        run_dir = tmp_path / "run"
        dispatch(["train", "--preset", "M_p", "--tiny", "--data", str(index),
                  "--out", str(run_dir), "--updates", "1", "--batch", "4"])
        out = tmp_path / "model_report.json"
        code = dispatch(["evaluate", "--ckpt", str(run_dir / "checkpoint.srz"),
                         "--hr-dir", str(corpus_dir), "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["n_images"] == 4

    def test_evaluate_requires_one_source(self, corpus_dir, tmp_path):
        assert dispatch(["evaluate", "--hr-dir", str(corpus_dir), "--out",
                         str(tmp_path / "r.json")]) == 1

    def test_super_resolve(self, corpus_dir, tmp_path):
        index = tmp_path / "index.json"
        dispatch(["prepare-data", "--root", str(corpus_dir), "--out", str(index)])
        run_dir = tmp_path / "run"
        dispatch(["train", "--preset", "M_p", "--tiny", "--data", str(index),
                  "--out", str(run_dir), "--updates", "1", "--batch", "4"])
        src = tmp_path / "lr.png"
        save_image(src, np.random.default_rng(0).random((16, 12, 3)))
        out = tmp_path / "sr.png"
        code = dispatch(["super-resolve", "--ckpt",
                         str(run_dir / "checkpoint.srz"), "--in", str(src),
                         "--out", str(out)])
        assert code == 0
        assert load_image(out).shape == (64, 48, 3)


def test_mos_report(tmp_path):
    plan = StudyPlan(image_ids=("a", "b"), images_per_rater=2,
                     raters_per_image=1, versions=("NN", "HR"),
                     calibration_low=1, calibration_high=1)
    store = tmp_path / "store"
    store.mkdir()
    (tmp_path / "plan.json").write_text(json.dumps(plan.to_dict()))
    study = Study(plan, log_path=store / "events.jsonl")
    session = study.create_session("r0")
    for it in session.rating_items:
        study.submit_score(session.session_id, it.item_id,
                           5 if it.version == "HR" else 1)
    out = tmp_path / "mos.csv"
    code = dispatch(["mos-report", "--store", str(store), "--plan",
                     str(tmp_path / "plan.json"), "--out", str(out)])
    assert code == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "version,mos,n,ci95_low,ci95_high"
    assert len(rows) == 3


def test_runtime_failure_exits_1(tmp_path):
    assert dispatch(["evaluate", "--sr-dir", str(tmp_path), "--hr-dir",
                     str(tmp_path), "--out", str(tmp_path / "r.json")]) == 1
