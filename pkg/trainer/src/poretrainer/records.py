"""Reader/writer for the porelab record file format.

Layout (little endian): magic "PFL1", version u16, grid side u16, flags
u32, porosity f32, solver parameters (tau, g_x, g_y, tolerance) as four
f64, bit-packed occupancy (1 = solid, row major), u_x and u_y planes as
f32, trailing CRC32 over everything after the 48-byte header.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"PFL1"
VERSION = 1
HEADER = struct.Struct("<4sHHIf4d")


class RecordError(ValueError):
    pass


@dataclass
class Record:
    solid: np.ndarray  # (L, L) bool, True = solid
    ux: np.ndarray     # (L, L) float64
    uy: np.ndarray
    tau: float
    g_x: float
    g_y: float
    tol: float

    @property
    def size(self) -> int:
        return self.solid.shape[0]

    @property
    def porosity(self) -> float:
        n = self.solid.size
        return float(n - np.count_nonzero(self.solid)) / n


def read_record(path) -> Record:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise RecordError(f"{path}: truncated header")
    magic, version, size, _flags, _phi, tau, gx, gy, tol = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise RecordError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise RecordError(f"{path}: unsupported version {version}")
    n = size * size
    mask_bytes = (n + 7) // 8
    expected = HEADER.size + mask_bytes + 8 * n + 4
    if len(raw) != expected:
        raise RecordError(f"{path}: truncated ({len(raw)} != {expected} bytes)")
    payload = raw[HEADER.size:-4]
    (crc,) = struct.unpack("<I", raw[-4:])
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise RecordError(f"{path}: checksum mismatch")
    bits = np.unpackbits(np.frombuffer(payload[:mask_bytes], dtype=np.uint8))[:n]
    solid = bits.astype(bool).reshape(size, size)
    off = mask_bytes
    ux = np.frombuffer(payload[off : off + 4 * n], dtype="<f4").astype(np.float64)
    uy = np.frombuffer(payload[off + 4 * n : off + 8 * n], dtype="<f4").astype(np.float64)
    return Record(solid=solid, ux=ux.reshape(size, size), uy=uy.reshape(size, size),
                  tau=tau, g_x=gx, g_y=gy, tol=tol)


def write_record(path, record: Record) -> None:
    if not (np.all(np.isfinite(record.ux)) and np.all(np.isfinite(record.uy))):
        raise RecordError("refusing to write non-finite velocity values")
    size = record.size
    header = HEADER.pack(MAGIC, VERSION, size, 0, np.float32(record.porosity),
                         record.tau, record.g_x, record.g_y, record.tol)
    payload = (np.packbits(record.solid, axis=None).tobytes()
               + record.ux.astype("<f4").tobytes()
               + record.uy.astype("<f4").tobytes())
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<I", crc))


def read_manifest(path) -> list[dict]:
    rows = []
    lines = Path(path).read_text(encoding="ascii").strip().splitlines()
    header = lines[0].split(",")
    for line in lines[1:]:
        rows.append(dict(zip(header, line.split(","))))
    for row in rows:
        row["id"] = int(row["id"])
    return rows
