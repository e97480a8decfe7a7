"""Inference: velocity-field predictions written in the exchange format."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .records import Record, read_record, write_record


def predict_record(model, scale: float, record: Record) -> Record:
    x = torch.from_numpy(record.solid.astype(np.float32)[np.newaxis, np.newaxis])
    with torch.no_grad():
        out = model(x)[0].numpy().astype(np.float64) * scale
    return Record(solid=record.solid, ux=out[0], uy=out[1],
                  tau=record.tau, g_x=record.g_x, g_y=record.g_y, tol=record.tol)


def predict_files(model, scale: float, record_paths, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for path in record_paths:
        path = Path(path)
        record = read_record(path)
        prediction = predict_record(model, scale, record)
        target = out_dir / path.name
        write_record(target, prediction)
        written.append(target)
    return written
