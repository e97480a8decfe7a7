"""Dataset pipeline: record serialization, generation, and splitting.

Record file layout (all little endian):

    offset  size  field
    0       4     magic "PFL1"
    4       2     format version (u16) = 1
    6       2     grid side L (u16)
    8       4     flags (u32, reserved)
    12      4     porosity (f32)
    16      32    solver parameters: tau, g_x, g_y, tolerance (4 x f64)
    48      L*L/8 occupancy bitmask, row major, bit 1 = solid
    ...     4*L*L u_x plane (f32, row major)
    ...     4*L*L u_y plane (f32, row major)
    end     4     CRC32 of everything after the 48-byte header (u32)

The header is 8-byte aligned; payload is bitmask plus the two velocity
planes. Per-record seeds come from a splitmix64-style mix of (master seed,
record index, retry attempt), so parallel generation is order independent.
"""

from __future__ import annotations

import logging
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, DataError, FormatError, ParameterError
from .geometry import (
    StructureGrid,
    add_pipe_walls,
    gen_shapes,
    gen_trig_field,
    percolates,
    sample_wave_spec,
    threshold_to_porosity,
)
from .lbm import LbmParams, VelocityField, init_cold, run_to_convergence
from .properties import MacroProperties, summary

log = logging.getLogger(__name__)

MAGIC = b"PFL1"
VERSION = 1
HEADER = struct.Struct("<4sHHIf4d")  # 48 bytes

GENERATOR_KINDS = ("trig", "shapes", "pipe", "pipe-central")

_MASK64 = (1 << 64) - 1
_PHI_SALT = 0x5851F42D4C957F2D


def _mix64(x: int) -> int:
    """splitmix64 finalizer: a well-scrambled 64-bit permutation."""
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def derive_seed(master: int, index: int, attempt: int = 0) -> int:
    """Per-record seed; independent of generation order, fresh per retry."""
    base = (
        master
        + 0x9E3779B97F4A7C15 * (2 * index + 1)
        + 0xD1B54A32D192ED03 * (attempt + 1)
    ) & _MASK64
    return _mix64(base)


@dataclass(frozen=True)
class Provenance:
    kind: str
    seed: int


@dataclass
class DatasetRecord:
    record_id: int
    grid: StructureGrid
    field: VelocityField
    params: LbmParams
    properties: MacroProperties
    provenance: Provenance
    iterations: int = 0


def write_record(path, grid: StructureGrid, fld: VelocityField, params: LbmParams) -> None:
    """Serialize one (structure, field, params) triple; bit-exact round trip."""
    if grid.size != fld.size:
        raise ParameterError("grid and field sizes differ")
    if not (np.all(np.isfinite(fld.ux)) and np.all(np.isfinite(fld.uy))):
        raise DataError("refusing to write non-finite velocity values")
    size = grid.size
    header = HEADER.pack(
        MAGIC, VERSION, size, 0, np.float32(grid.porosity),
        params.tau, params.gravity[0], params.gravity[1], params.tol,
    )
    bitmask = np.packbits(grid.occupancy, axis=None).tobytes()
    ux = fld.ux.astype("<f4").tobytes()
    uy = fld.uy.astype("<f4").tobytes()
    payload = bitmask + ux + uy
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<I", crc))


def read_record(path) -> tuple[StructureGrid, VelocityField, LbmParams]:
    """Read a record file; raises FormatError on any corruption."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, size, _flags, porosity, tau, gx, gy, tol = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    n = size * size
    mask_bytes = (n + 7) // 8
    expected = HEADER.size + mask_bytes + 8 * n + 4
    if len(raw) != expected:
        raise FormatError(f"{path}: truncated or oversized ({len(raw)} != {expected} bytes)")
    payload = raw[HEADER.size:-4]
    (crc_stored,) = struct.unpack("<I", raw[-4:])
    if zlib.crc32(payload) & 0xFFFFFFFF != crc_stored:
        raise FormatError(f"{path}: checksum mismatch")
    bits = np.unpackbits(np.frombuffer(payload[:mask_bytes], dtype=np.uint8))[:n]
    occupancy = bits.astype(bool).reshape(size, size)
    grid = StructureGrid(occupancy)
    if np.float32(grid.porosity) != np.float32(porosity):
        raise DataError(f"{path}: stored porosity disagrees with the bitmask")
    off = mask_bytes
    ux = np.frombuffer(payload[off : off + 4 * n], dtype="<f4").astype(np.float64)
    off += 4 * n
    uy = np.frombuffer(payload[off : off + 4 * n], dtype="<f4").astype(np.float64)
    fld = VelocityField(ux.reshape(size, size), uy.reshape(size, size))
    params = LbmParams(tau=tau, gravity=(gx, gy), tol=tol)
    return grid, fld, params


@dataclass
class DatasetConfig:
    count: int
    size: int = 256
    porosity_range: tuple[float, float] = (0.70, 0.95)
    kind: str = "trig"
    master_seed: int = 0
    params: LbmParams = field(default_factory=LbmParams)
    p_circle: float = 0.5
    obstacle_size_range: tuple[float, float] = (3.0, 8.0)
    wall_thickness: int = 2
    max_attempts: int = 1000

    def __post_init__(self):
        if self.count < 1:
            raise ParameterError("dataset count must be positive")
        lo, hi = self.porosity_range
        if not 0.0 < lo <= hi <= 1.0:
            raise ParameterError("porosity range must lie in (0, 1]")
        if self.kind not in GENERATOR_KINDS:
            raise ParameterError(f"unknown generator kind {self.kind!r}")


def sample_target_porosity(porosity_range: tuple[float, float], seed: int) -> float:
    """Per-structure porosity target from a dedicated stream of the seed."""
    lo, hi = porosity_range
    return float(np.random.default_rng(_mix64(seed ^ _PHI_SALT)).uniform(lo, hi))


def build_structure(config: DatasetConfig, seed: int) -> StructureGrid:
    """One candidate structure from a derived seed (not yet filtered)."""
    phi_target = sample_target_porosity(config.porosity_range, seed)
    if config.kind == "shapes":
        return gen_shapes(
            seed, phi_target, config.p_circle, config.obstacle_size_range, config.size
        )
    rng = np.random.default_rng(seed)
    spec = sample_wave_spec(rng)
    grid = threshold_to_porosity(gen_trig_field(seed, spec, config.size), phi_target)
    if config.kind.startswith("pipe"):
        grid = add_pipe_walls(grid, config.wall_thickness, central=config.kind == "pipe-central")
    return grid


def make_structure(config: DatasetConfig, index: int) -> tuple[StructureGrid, int]:
    """Percolating structure for a record index, retrying with fresh seeds."""
    for attempt in range(config.max_attempts):
        seed = derive_seed(config.master_seed, index, attempt)
        grid = build_structure(config, seed)
        if percolates(grid, config.params.force_axis):
            return grid, seed
    raise DataError(
        f"no percolating structure for record {index} after {config.max_attempts} attempts"
    )


def simulate_record(config: DatasetConfig, index: int) -> DatasetRecord | None:
    """Generate, filter and solve one record; None if the solver gave up."""
    grid, seed = make_structure(config, index)
    state = init_cold(grid, config.params)
    try:
        fld, iterations = run_to_convergence(state)
    except ConvergenceError as err:
        log.warning("record %d (seed %d) skipped: %s", index, seed, err)
        return None
    # store-and-recompute: properties refer to the f32 field as serialized
    stored = VelocityField(
        fld.ux.astype("<f4").astype(np.float64),
        fld.uy.astype("<f4").astype(np.float64),
    )
    props = summary(stored, grid, config.params)
    return DatasetRecord(
        record_id=index,
        grid=grid,
        field=stored,
        params=config.params,
        properties=props,
        provenance=Provenance(kind=config.kind, seed=seed),
        iterations=iterations,
    )


MANIFEST_COLUMNS = ("id", "file", "phi", "tau", "k", "iterations", "kind", "seed")


def record_filename(record_id: int) -> str:
    return f"rec_{record_id:06d}.pfl"


def generate_dataset(config: DatasetConfig, out_dir, jobs: int = 1) -> list[DatasetRecord]:
    """Generate records, write one file each plus a manifest CSV.

    Record simulations are independent, so ``jobs > 1`` fans them out over
    processes; results are gathered in id order either way, making the
    output independent of the worker count.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        from functools import partial

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            produced = list(pool.map(partial(simulate_record, config), range(config.count)))
    else:
        produced = [simulate_record(config, index) for index in range(config.count)]
    records = []
    for record in produced:
        if record is None:
            continue
        write_record(
            out / record_filename(record.record_id), record.grid, record.field, record.params
        )
        records.append(record)
    with open(out / "manifest.csv", "w", encoding="ascii") as fh:
        fh.write(",".join(MANIFEST_COLUMNS) + "\n")
        for rec in records:
            p = rec.properties
            fh.write(
                f"{rec.record_id},{record_filename(rec.record_id)},"
                f"{p.porosity!r},{p.tortuosity!r},{p.permeability!r},"
                f"{rec.iterations},{rec.provenance.kind},{rec.provenance.seed}\n"
            )
    return records


def read_manifest(path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != MANIFEST_COLUMNS:
            raise FormatError(f"{path}: unexpected manifest columns {header}")
        for line in fh:
            parts = line.strip().split(",")
            rows.append(
                {
                    "id": int(parts[0]),
                    "file": parts[1],
                    "phi": float(parts[2]),
                    "tau": float(parts[3]),
                    "k": float(parts[4]),
                    "iterations": int(parts[5]),
                    "kind": parts[6],
                    "seed": int(parts[7]),
                }
            )
    return rows


def split(ids, seed: int, fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)):
    """Deterministic shuffle into train/validation/test id lists."""
    ids = list(ids)
    if not ids:
        raise ParameterError("cannot split an empty id list")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ParameterError("split fractions must sum to 1")
    perm = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in perm]
    n = len(ids)
    first = round(fractions[0] * n)
    second = round((fractions[0] + fractions[1]) * n)
    return shuffled[:first], shuffled[first:second], shuffled[second:]
