"""Two-stage training of the surrogate on exported datasets.

Stage one trains with the obstacle penalty only (alpha, 0, 0, 0); stage two
resumes from the stage-one weights with the full loss. Optimization is Adam
with gradient clipping and a step learning-rate schedule; early stopping
watches the validation loss with a fixed patience. The metrics log records
all five loss components on the validation set every epoch.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .data import Sample, augment, load_dataset, split_ids
from .losses import total_loss, tortuosity
from .model import SurrogateNet


@dataclass
class TrainConfig:
    dataset: str = "data"
    size: int = 64
    alpha: float = 5.0
    beta: float = 1.0
    gamma: float = 0.1
    delta: float = 0.01
    lr_stage1: float = 5e-4
    lr_stage2: float = 1e-5
    clip_stage1: float = 1.0
    clip_stage2: float = 0.1
    scheduler_step: int = 10
    scheduler_gamma: float = 0.8
    batch_size: int = 32
    patience: int = 20
    max_epochs: int = 150
    split_seed: int = 0
    seed: int = 0
    augment: bool = True
    p_flip: float = 0.5
    max_frac: float = 0.3
    base_channels: int = 16
    two_stage: bool = True

    def stage1_weights(self) -> tuple[float, float, float, float]:
        # pilot stage: obstacle term only
        return (self.alpha, 0.0, 0.0, 0.0)

    def stage2_weights(self) -> tuple[float, float, float, float]:
        return (self.alpha, self.beta, self.gamma, self.delta)


@dataclass
class TrainResult:
    model: SurrogateNet
    scale: float
    config: TrainConfig
    metrics: list[dict] = field(default_factory=list)
    train_ids: list[int] = field(default_factory=list)
    val_ids: list[int] = field(default_factory=list)
    test_ids: list[int] = field(default_factory=list)


def _tensors(samples: list[Sample], scale: float,
             rng: np.random.Generator | None, config: TrainConfig):
    xs, ys = [], []
    for s in samples:
        solid, ux, uy = s.solid, s.ux, s.uy
        if rng is not None and config.augment:
            solid, ux, uy = augment(solid, ux, uy, rng, config.p_flip, config.max_frac)
        xs.append(solid.astype(np.float32)[np.newaxis])
        ys.append(np.stack([ux, uy]).astype(np.float32) / scale)
    x = torch.from_numpy(np.stack(xs))
    y = torch.from_numpy(np.stack(ys))
    return x, y


def _forward(model, x, gamma):
    size = x.shape[-1]
    half = size // 2
    pred = model(x)
    pred_ts = None
    if gamma != 0.0:
        x_ts = torch.roll(x, shifts=(half, half), dims=(2, 3))
        pred_ts = model(x_ts)
    return pred, pred_ts


def evaluate(model, samples: list[Sample], scale: float, weights,
             config: TrainConfig) -> dict:
    """Mean loss components over a sample list, plus per-sample tortuosities."""
    model.eval()
    size = samples[0].solid.shape[0]
    half = size // 2
    sums: dict[str, float] = {}
    tau_pred, tau_ref = [], []
    with torch.no_grad():
        for start in range(0, len(samples), config.batch_size):
            chunk = samples[start : start + config.batch_size]
            x, y = _tensors(chunk, scale, None, config)
            pred = model(x)
            pred_ts = model(torch.roll(x, shifts=(half, half), dims=(2, 3)))
            parts = total_loss(pred, pred_ts, y, x, (half, half),
                               (1.0, 1.0, 1.0, 1.0))
            for key in ("velocity", "obstacle", "divergence", "periodicity",
                        "tortuosity"):
                sums[key] = sums.get(key, 0.0) + float(parts[key].sum())
            tau_pred.extend(tortuosity(pred, x).tolist())
            tau_ref.extend(tortuosity(y, x).tolist())
    n = len(samples)
    out = {key: value / n for key, value in sums.items()}
    alpha, beta, gamma, delta = weights
    out["total"] = (out["velocity"] + alpha * out["obstacle"]
                    + beta * out["divergence"] + gamma * out["periodicity"]
                    + delta * out["tortuosity"])
    out["tau_pred"] = tau_pred
    out["tau_ref"] = tau_ref
    return out


def _run_stage(model, stage: int, weights, lr: float, clip: float,
               train_samples, val_samples, scale, config, metrics) -> float:
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    scheduler = torch.optim.lr_scheduler.StepLR(
        optimizer, step_size=config.scheduler_step, gamma=config.scheduler_gamma
    )
    rng = np.random.default_rng(config.seed + stage)
    best = float("inf")
    best_state = {k: v.clone() for k, v in model.state_dict().items()}
    bad_epochs = 0
    gamma_w = weights[2]
    for epoch in range(config.max_epochs):
        model.train()
        order = rng.permutation(len(train_samples))
        for batch_index, start in enumerate(range(0, len(order), config.batch_size)):
            chunk = [train_samples[i] for i in order[start : start + config.batch_size]]
            x, y = _tensors(chunk, scale, rng, config)
            pred, pred_ts = _forward(model, x, gamma_w)
            parts = total_loss(pred, pred_ts, y, x, (x.shape[-1] // 2, x.shape[-1] // 2),
                               weights)
            loss = parts["total"].mean()
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss in stage {stage} "
                    f"epoch {epoch} batch {batch_index}"
                )
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), clip)
            optimizer.step()
        scheduler.step()

        val = evaluate(model, val_samples, scale, weights, config)
        metrics.append({
            "stage": stage, "epoch": epoch,
            **{k: val[k] for k in ("velocity", "obstacle", "divergence",
                                   "periodicity", "tortuosity", "total")},
        })
        if val["total"] < best:
            best = val["total"]
            best_state = {k: v.clone() for k, v in model.state_dict().items()}
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs > config.patience:
                break
    model.load_state_dict(best_state)
    return best


def train(config: TrainConfig) -> TrainResult:
    torch.manual_seed(config.seed)
    samples = load_dataset(config.dataset)
    if not samples:
        raise RuntimeError(f"no records found under {config.dataset}")
    by_id = {s.record_id: s for s in samples}
    train_ids, val_ids, test_ids = split_ids(sorted(by_id), config.split_seed)
    train_samples = [by_id[i] for i in train_ids]
    val_samples = [by_id[i] for i in val_ids]

    speeds = [np.hypot(s.ux, s.uy)[~s.solid].mean() for s in train_samples]
    scale = float(np.mean(speeds))

    model = SurrogateNet(config.base_channels)
    result = TrainResult(model=model, scale=scale, config=config,
                         train_ids=train_ids, val_ids=val_ids, test_ids=test_ids)

    _run_stage(model, 1, config.stage1_weights(), config.lr_stage1,
               config.clip_stage1, train_samples, val_samples, scale, config,
               result.metrics)
    if config.two_stage:
        _run_stage(model, 2, config.stage2_weights(), config.lr_stage2,
                   config.clip_stage2, train_samples, val_samples, scale, config,
                   result.metrics)
    return result


def save_checkpoint(path, result: TrainResult) -> None:
    torch.save(
        {
            "state_dict": result.model.state_dict(),
            "scale": result.scale,
            "base_channels": result.config.base_channels,
            "config": asdict(result.config),
            "splits": {
                "train": result.train_ids,
                "val": result.val_ids,
                "test": result.test_ids,
            },
        },
        path,
    )


def load_checkpoint(path):
    payload = torch.load(path, map_location="cpu", weights_only=False)
    model = SurrogateNet(payload["base_channels"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, float(payload["scale"]), payload


def write_metrics_csv(path, metrics: list[dict]) -> None:
    keys = ["stage", "epoch", "velocity", "obstacle", "divergence",
            "periodicity", "tortuosity", "total"]
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(keys) + "\n")
        for row in metrics:
            fh.write(",".join(repr(row[k]) if isinstance(row[k], float) else str(row[k])
                              for k in keys) + "\n")
