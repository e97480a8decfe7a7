"""Toy-scale ablation and pipeline-closure checks.

Trains two surrogates on the shared 200-sample dataset: one with the full
physics loss, one with the velocity term only, then compares test-set
obstacle violation and tortuosity tracking, and closes the loop through the
solver package's CLI (loss scoring and warm-start benchmarking).
"""

import json
import shutil
import subprocess

import numpy as np
import pytest
import torch

from poretrainer.data import load_dataset
from poretrainer.losses import total_loss
from poretrainer.predict import predict_files
from poretrainer.records import read_manifest, read_record
from poretrainer.train import TrainConfig, evaluate, train

FULL_CONFIG = dict(max_epochs=250, patience=20, seed=1,
                   lr_stage2=1e-4, scheduler_step=25)
BASE_CONFIG = dict(max_epochs=250, patience=20, seed=1,
                   alpha=0.0, beta=0.0, gamma=0.0, delta=0.0,
                   two_stage=False, scheduler_step=25)


def r_squared(tau_pred, tau_ref):
    tau_pred = np.asarray(tau_pred)
    tau_ref = np.asarray(tau_ref)
    ss_res = np.sum((tau_pred - tau_ref) ** 2)
    ss_tot = np.sum((tau_ref - tau_ref.mean()) ** 2)
    return 1.0 - ss_res / ss_tot


@pytest.fixture(scope="module")
def trained(dataset_dir):
    full_cfg = TrainConfig(dataset=str(dataset_dir), **FULL_CONFIG)
    full = train(full_cfg)
    base_cfg = TrainConfig(dataset=str(dataset_dir), **BASE_CONFIG)
    base = train(base_cfg)

    samples = load_dataset(dataset_dir)
    by_id = {s.record_id: s for s in samples}
    test_samples = [by_id[i] for i in full.test_ids]
    full_metrics = evaluate(full.model, test_samples, full.scale,
                            full_cfg.stage2_weights(), full_cfg)
    base_metrics = evaluate(base.model, test_samples, base.scale,
                            (1.0, 1.0, 1.0, 1.0), base_cfg)
    return dict(full=full, base=base, full_metrics=full_metrics,
                base_metrics=base_metrics, test_samples=test_samples)


class TestAblation:
    def test_full_loss_beats_velocity_only(self, trained):
        full_obstacle = trained["full_metrics"]["obstacle"]
        base_obstacle = trained["base_metrics"]["obstacle"]
        full_r2 = r_squared(trained["full_metrics"]["tau_pred"],
                            trained["full_metrics"]["tau_ref"])
        base_r2 = r_squared(trained["base_metrics"]["tau_pred"],
                            trained["base_metrics"]["tau_ref"])
        print(f"\nABLATION full: obstacle={full_obstacle:.3e} R2_tau={full_r2:.3f}")
        print(f"ABLATION base: obstacle={base_obstacle:.3e} R2_tau={base_r2:.3f}")
        assert full_obstacle < base_obstacle
        assert full_r2 > base_r2

    def test_stage_two_never_blows_up_obstacle(self, trained):
        metrics = trained["full"].metrics
        stage1_end = [m for m in metrics if m["stage"] == 1][-1]["obstacle"]
        stage2 = [m for m in metrics if m["stage"] == 2]
        assert stage2, "two-stage training must run a second stage"
        assert max(m["obstacle"] for m in stage2) <= 10 * stage1_end

    def test_metrics_log_has_all_components_per_epoch(self, trained):
        for row in trained["full"].metrics:
            for key in ("velocity", "obstacle", "divergence", "periodicity",
                        "tortuosity", "total"):
                assert np.isfinite(row[key])


@pytest.fixture(scope="module")
def predictions(trained, dataset_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("preds")
    rows = read_manifest(dataset_dir / "manifest.csv")
    test_ids = set(trained["full"].test_ids)
    paths = [dataset_dir / row["file"] for row in rows if row["id"] in test_ids]
    written = predict_files(trained["full"].model, trained["full"].scale, paths, out)
    return out, written


class TestPipelineClosure:
    def test_predictions_score_finite_through_primary_cli(self, predictions, dataset_dir):
        pred_dir, written = predictions
        name = written[0].name
        result = subprocess.run(
            ["porelab", "loss",
             "--structure", str(dataset_dir / name),
             "--pred", str(pred_dir / name),
             "--pred-translated", str(pred_dir / name),
             "--ref", str(dataset_dir / name),
             "--tx", "0", "--ty", "0", "--format", "json"],
            capture_output=True, text=True,
        )
        assert result.returncode == 0, result.stderr
        payload = json.loads(result.stdout)
        assert all(np.isfinite(v) for v in payload.values())

    def test_trainer_loss_matches_primary_cli(self, predictions, dataset_dir, trained):
        pred_dir, written = predictions
        half = 32
        for path in written[:3]:
            rec = read_record(dataset_dir / path.name)
            pred = read_record(path)
            result = subprocess.run(
                ["porelab", "loss",
                 "--structure", str(dataset_dir / path.name),
                 "--pred", str(path),
                 "--pred-translated", str(path),
                 "--ref", str(dataset_dir / path.name),
                 "--tx", "0", "--ty", "0", "--format", "json"],
                capture_output=True, text=True,
            )
            assert result.returncode == 0, result.stderr
            expected = json.loads(result.stdout)
            solid = torch.from_numpy(rec.solid.astype(np.float64)[None, None])
            pred_t = torch.from_numpy(np.stack([pred.ux, pred.uy])[None])
            ref_t = torch.from_numpy(np.stack([rec.ux, rec.uy])[None])
            parts = total_loss(pred_t, pred_t, ref_t, solid, (0, 0),
                               (5.0, 1.0, 0.1, 0.01))
            for key in ("velocity", "obstacle", "divergence", "periodicity",
                        "tortuosity", "total"):
                assert float(parts[key][0]) == pytest.approx(expected[key], rel=1e-5), key

    def test_warm_starts_from_predictions_beat_cold_on_majority(
            self, predictions, dataset_dir, trained, tmp_path_factory):
        pred_dir, written = predictions
        bench = tmp_path_factory.mktemp("bench")
        rows = read_manifest(dataset_dir / "manifest.csv")
        test_ids = set(trained["full"].test_ids)
        kept = [row for row in rows if row["id"] in test_ids]
        header = (dataset_dir / "manifest.csv").read_text().splitlines()[0]
        lines = [header]
        raw = (dataset_dir / "manifest.csv").read_text().splitlines()[1:]
        for line in raw:
            if int(line.split(",")[0]) in test_ids:
                lines.append(line)
        (bench / "manifest.csv").write_text("\n".join(lines) + "\n")
        for row in kept:
            shutil.copy(dataset_dir / row["file"], bench / row["file"])
        result = subprocess.run(
            ["porelab", "warmstart", "--dataset", str(bench),
             "--warm-source", f"files:{pred_dir}", "--format", "json"],
            capture_output=True, text=True,
        )
        assert result.returncode == 0, result.stderr
        payload = json.loads(result.stdout)
        print(f"\nWARMSTART from predictions: {payload}")
        assert payload["n_valid"] == len(kept)
        assert payload["n_improved"] > payload["n_valid"] / 2
