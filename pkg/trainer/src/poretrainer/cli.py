"""Command-line interface: train a surrogate, emit predictions."""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

from .predict import predict_files
from .records import read_manifest
from .train import TrainConfig, load_checkpoint, save_checkpoint, train, write_metrics_csv


def load_config(path) -> TrainConfig:
    config = TrainConfig()
    known = {f.name: type(getattr(config, f.name)) for f in fields(TrainConfig)}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in known:
            raise SystemExit(f"{path}:{lineno}: unknown config key {key!r}")
        kind = known[key]
        if kind is bool:
            value = raw.lower() in ("true", "1", "yes")
        else:
            value = kind(raw)
        setattr(config, key, value)
    return config


def cmd_train(args) -> int:
    config = load_config(args.config) if args.config else TrainConfig()
    if args.dataset:
        config.dataset = args.dataset
    result = train(config)
    save_checkpoint(args.out, result)
    if args.metrics:
        write_metrics_csv(args.metrics, result.metrics)
    last = result.metrics[-1]
    print(f"epochs={len(result.metrics)}")
    print(f"val_total={last['total']!r}")
    print(f"val_obstacle={last['obstacle']!r}")
    return 0


def cmd_predict(args) -> int:
    model, scale, payload = load_checkpoint(args.model)
    dataset = Path(args.dataset)
    rows = read_manifest(dataset / "manifest.csv")
    if args.ids:
        wanted = {int(v) for v in args.ids.split(",")}
        rows = [row for row in rows if row["id"] in wanted]
    elif args.split:
        wanted = set(payload["splits"][args.split])
        rows = [row for row in rows if row["id"] in wanted]
    paths = [dataset / row["file"] for row in rows]
    written = predict_files(model, scale, paths, args.out)
    print(f"predictions={len(written)}")
    return 0


def main() -> None:
    parser = argparse.ArgumentParser(prog="poretrainer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="two-stage training on an exported dataset")
    p.add_argument("--config", help="key=value training configuration")
    p.add_argument("--dataset", help="dataset directory (overrides config)")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--metrics", help="per-epoch loss-component CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write velocity predictions as records")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--ids", help="comma-separated record ids")
    p.add_argument("--split", choices=("train", "val", "test"),
                   help="predict one of the checkpoint's splits")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    args = parser.parse_args()
    sys.exit(args.func(args))
