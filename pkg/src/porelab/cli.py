"""Command-line entry point wiring all porelab tools.

Exit codes: 0 success, 1 usage/parameter error, 2 data or file-format
error, 3 solver non-convergence. Machine-readable output is selected with
``--format csv|json`` where applicable.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import augment as augment_mod
from . import dataset as dataset_mod
from . import losses as losses_mod
from . import properties as properties_mod
from . import stats as stats_mod
from . import uncertainty as uncertainty_mod
from . import warmstart as warmstart_mod
from .config import Config
from .errors import ConvergenceError, DataError, ParameterError, PorelabError
from .geometry import (
    StructureGrid,
    add_pipe_walls,
    gen_shapes,
    gen_trig_field,
    percolates,
    sample_wave_spec,
    threshold_to_porosity,
)
from .lbm import LbmParams, VelocityField, init_cold, init_warm, run_to_convergence


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage failures map to exit code 1."""

    def error(self, message):
        raise ParameterError(message)


def _pick(flag, config_value):
    return config_value if flag is None else flag


def _load_config(args) -> Config:
    return Config.from_file(args.config) if args.config else Config()


def _solver_params(args, cfg: Config) -> LbmParams:
    return LbmParams(
        tau=_pick(args.tau, cfg.tau),
        gravity=(_pick(args.force, cfg.g_x), cfg.g_y),
        rho0=cfg.rho0,
        tol=_pick(args.tol, cfg.tol),
        check_interval=_pick(getattr(args, "check_interval", None), cfg.check_interval),
        max_iters=_pick(getattr(args, "max_iters", None), cfg.max_iters),
    )


def _emit(payload: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(payload))
    else:
        keys = list(payload)
        print(",".join(keys))
        print(",".join(repr(payload[k]) if isinstance(payload[k], float) else str(payload[k])
                       for k in keys))


# ---------------------------------------------------------------- gen


def cmd_gen(args) -> int:
    cfg = _load_config(args)
    size = _pick(args.size, cfg.size)
    seed = _pick(args.seed, cfg.seed)
    phi = _pick(args.porosity, cfg.porosity)
    if args.generator == "trig":
        spec = sample_wave_spec(np.random.default_rng(seed))
        grid = threshold_to_porosity(gen_trig_field(seed, spec, size), phi)
    elif args.generator == "shapes":
        p_circle = _pick(args.p_circle, cfg.p_circle)
        grid = gen_shapes(seed, phi, p_circle,
                          (cfg.obstacle_min, cfg.obstacle_max), size)
    else:  # pipe
        spec = sample_wave_spec(np.random.default_rng(seed))
        grid = threshold_to_porosity(gen_trig_field(seed, spec, size), phi)
        thickness = _pick(args.wall_thickness, cfg.wall_thickness)
        grid = add_pipe_walls(grid, thickness, central=args.central or cfg.central)
    dataset_mod.write_record(args.out, grid, VelocityField.zeros(size), cfg.lbm_params())
    print(f"porosity={grid.porosity!r}")
    print(f"percolates_x={int(percolates(grid, 'x'))}")
    return 0


# ---------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    grid, _, _ = dataset_mod.read_record(args.input)
    params = _solver_params(args, cfg)
    if args.warm:
        _, warm_field, _ = dataset_mod.read_record(args.warm)
        state = init_warm(grid, warm_field, params)
    else:
        state = init_cold(grid, params)
    started = time.perf_counter()
    field, iterations = run_to_convergence(state)
    elapsed = time.perf_counter() - started
    if args.output:
        dataset_mod.write_record(args.output, grid, field, params)
    print(f"iterations={iterations}")
    print(f"wall_time_s={elapsed:.3f}")
    return 0


# ---------------------------------------------------------------- props


def cmd_props(args) -> int:
    grid, _, _ = dataset_mod.read_record(args.structure)
    _, field, params = dataset_mod.read_record(args.field)
    props = properties_mod.summary(field, grid, params)
    _emit(
        {
            "phi": props.porosity,
            "tau": props.tortuosity,
            "k": props.permeability,
            "mean_v": props.mean_speed,
            "max_v": props.max_speed,
        },
        args.format,
    )
    return 0


# ---------------------------------------------------------------- loss


def cmd_loss(args) -> int:
    cfg = _load_config(args)
    grid, _, _ = dataset_mod.read_record(args.structure)
    _, pred, _ = dataset_mod.read_record(args.pred)
    _, pred_translated, _ = dataset_mod.read_record(args.pred_translated)
    _, ref, _ = dataset_mod.read_record(args.ref)
    weights = losses_mod.LossWeights(
        alpha=_pick(args.alpha, cfg.alpha),
        beta=_pick(args.beta, cfg.beta),
        gamma=_pick(args.gamma, cfg.gamma),
        delta=_pick(args.delta, cfg.delta),
    )
    shift = losses_mod.default_translation(grid.size)
    shift = (_pick(args.tx, shift[0]), _pick(args.ty, shift[1]))
    report = losses_mod.total_loss(pred, pred_translated, ref, grid, shift, weights)
    _emit(
        {
            "velocity": report.velocity,
            "obstacle": report.obstacle,
            "divergence": report.divergence,
            "periodicity": report.periodicity,
            "tortuosity": report.tortuosity,
            "total": report.total,
        },
        args.format,
    )
    return 0


# ---------------------------------------------------------------- augment


def cmd_augment(args) -> int:
    cfg = _load_config(args)
    grid, field, params = dataset_mod.read_record(args.input)
    plan = augment_mod.sample_augmentation(
        _pick(args.seed, cfg.seed), grid.size,
        p_flip=args.p_flip, max_frac=args.max_frac,
    )
    grid, field = augment_mod.apply_plan(grid, field, plan)
    dataset_mod.write_record(args.out or args.input, grid, field, params)
    print(f"flip={int(plan.flip)}")
    print(f"shift_x={plan.shift_x}")
    print(f"shift_y={plan.shift_y}")
    return 0


# ---------------------------------------------------------------- dataset


def _dataset_config(args, cfg: Config) -> dataset_mod.DatasetConfig:
    return dataset_mod.DatasetConfig(
        count=_pick(args.count, cfg.count),
        size=_pick(args.size, cfg.size),
        porosity_range=(
            _pick(args.porosity_min, cfg.porosity_min),
            _pick(args.porosity_max, cfg.porosity_max),
        ),
        kind=_pick(args.kind, cfg.kind),
        master_seed=_pick(args.seed, cfg.seed),
        params=_solver_params(args, cfg),
        p_circle=_pick(args.p_circle, cfg.p_circle),
        obstacle_size_range=(cfg.obstacle_min, cfg.obstacle_max),
        wall_thickness=cfg.wall_thickness,
    )


def cmd_dataset_gen(args) -> int:
    cfg = _load_config(args)
    config = _dataset_config(args, cfg)
    records = dataset_mod.generate_dataset(config, args.out, jobs=_pick(args.jobs, cfg.jobs))
    print(f"records={len(records)}")
    print(f"skipped={config.count - len(records)}")
    return 0


def cmd_dataset_split(args) -> int:
    cfg = _load_config(args)
    rows = dataset_mod.read_manifest(Path(args.dataset) / "manifest.csv")
    ids = [row["id"] for row in rows]
    fractions = tuple(float(v) for v in args.fractions.split(","))
    if len(fractions) != 3:
        raise ParameterError("fractions must be three comma-separated numbers")
    train, val, test = dataset_mod.split(ids, _pick(args.seed, cfg.seed), fractions)
    print(json.dumps({"train": train, "val": val, "test": test}))
    return 0


# ---------------------------------------------------------------- warmstart


def _load_records(directory) -> list[dataset_mod.DatasetRecord]:
    rows = dataset_mod.read_manifest(Path(directory) / "manifest.csv")
    records = []
    for row in rows:
        grid, field, params = dataset_mod.read_record(Path(directory) / row["file"])
        records.append(
            dataset_mod.DatasetRecord(
                record_id=row["id"], grid=grid, field=field, params=params,
                properties=properties_mod.summary(field, grid, params),
                provenance=dataset_mod.Provenance(kind=row["kind"], seed=row["seed"]),
                iterations=row["iterations"],
            )
        )
    return records


def _warm_summary_payload(summary: warmstart_mod.WarmStartSummary) -> dict:
    return {
        "n_valid": summary.n_valid,
        "n_improved": summary.n_improved,
        "median_reduction": summary.median_reduction,
        "q1": summary.q1,
        "q3": summary.q3,
        "ci_low": summary.ci_low,
        "ci_high": summary.ci_high,
        "wilcoxon_w": summary.wilcoxon.statistic,
        "wilcoxon_p": summary.wilcoxon.p_value,
    }


def _run_warm_suite(records, source: str, seed: int, out, fmt: str, jobs: int) -> int:
    kind, _, value = source.partition(":")
    if kind == "noise":
        warm = warmstart_mod.noise_fields(records, float(value), master_seed=seed)
    elif kind == "files":
        warm = warmstart_mod.fields_from_dir(records, value)
    else:
        raise ParameterError("warm source must be noise:<sigma> or files:<dir>")
    summary = warmstart_mod.bench_suite(records, warm, bootstrap_seed=seed, jobs=jobs)
    if out:
        warmstart_mod.write_suite_csv(summary, out)
    payload = _warm_summary_payload(summary)
    if fmt == "json":
        print(json.dumps(payload))
    else:
        for key, value in payload.items():
            print(f"{key}={value}")
    return 0


def cmd_warmstart(args) -> int:
    cfg = _load_config(args)
    records = _load_records(args.dataset)
    return _run_warm_suite(
        records, args.warm_source, _pick(args.seed, cfg.seed), args.out,
        args.format, _pick(args.jobs, cfg.jobs),
    )


# ---------------------------------------------------------------- stats


def _csv_column(path, name) -> np.ndarray:
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.dtype.names is None or name not in data.dtype.names:
        raise DataError(f"{path}: no column named {name!r}")
    return np.atleast_1d(data[name]).astype(np.float64)


def cmd_stats(args) -> int:
    cfg = _load_config(args)
    xs = _csv_column(args.csv, args.column)
    payload: dict = {"n": int(xs.size)}
    for p in (float(v) for v in args.quantiles.split(",")):
        payload[f"q{p:g}"] = stats_mod.quantile(xs, p)
    if xs.size >= 5:
        lo, hi = stats_mod.bootstrap_ci_median(
            xs, level=args.level, seed=_pick(args.seed, cfg.seed)
        )
        payload["ci_low"] = lo
        payload["ci_high"] = hi
    if args.paired_with:
        ys = _csv_column(args.csv, args.paired_with)
        try:
            result = stats_mod.wilcoxon_signed_rank(xs, ys)
        except ParameterError:
            result = stats_mod.WilcoxonResult(0.0, 1.0, degenerate=True)
        payload["wilcoxon_w"] = result.statistic
        payload["wilcoxon_p"] = result.p_value
        payload["wilcoxon_degenerate"] = result.degenerate
    if args.format == "json":
        print(json.dumps(payload))
    else:
        for key, value in payload.items():
            print(f"{key}={value}")
    return 0


# ---------------------------------------------------------------- band


def cmd_band_residuals(args) -> int:
    grid, _, _ = dataset_mod.read_record(args.structure)
    _, pred, _ = dataset_mod.read_record(args.pred)
    _, ref, _ = dataset_mod.read_record(args.ref)
    x, r = uncertainty_mod.residuals(pred, ref, grid, args.component)
    with open(args.out, "w", encoding="ascii") as fh:
        fh.write("x,r\n")
        for xi, ri in zip(x, r):
            fh.write(f"{float(xi)!r},{float(ri)!r}\n")
    print(f"pairs={x.size}")
    return 0


def _parse_levels(raw: str) -> tuple[float, float]:
    parts = [float(v) for v in raw.split(",")]
    if len(parts) != 2:
        raise ParameterError("levels must be two comma-separated numbers")
    return parts[0], parts[1]


def cmd_band_fit(args) -> int:
    cfg = _load_config(args)
    x = _csv_column(args.pairs, "x")
    r = _csv_column(args.pairs, "r")
    band = uncertainty_mod.QuantileBand.fit(
        x, r, n_bins=_pick(args.bins, cfg.bins), levels=_parse_levels(args.levels)
    )
    uncertainty_mod.write_band(band, args.out)
    print(f"bins={band.centers.size}")
    return 0


def cmd_band_eval(args) -> int:
    band = uncertainty_mod.read_band(args.band)
    points = np.array([float(v) for v in args.at.split(",")])
    lower, upper = uncertainty_mod.band_eval(band, points)
    print("x,lower,upper")
    for x, lo, hi in zip(points, lower, upper):
        print(f"{float(x)!r},{float(lo)!r},{float(hi)!r}")
    return 0


def cmd_band_coverage(args) -> int:
    band = uncertainty_mod.read_band(args.band)
    grid, _, _ = dataset_mod.read_record(args.structure)
    _, pred, _ = dataset_mod.read_record(args.pred)
    _, ref, _ = dataset_mod.read_record(args.ref)
    value = uncertainty_mod.coverage(band, pred, ref, grid, args.component)
    print(f"coverage={value!r}")
    return 0


# ---------------------------------------------------------------- repro


def cmd_repro(args) -> int:
    # defaults follow the calibrated warm-start study: open structures and a
    # development-phase tolerance, where initialization actually matters
    cfg = _load_config(args)
    out_dir = Path(args.out)
    config = dataset_mod.DatasetConfig(
        count=_pick(args.count, cfg.count),
        size=_pick(args.size, 64),
        porosity_range=(
            _pick(args.porosity_min, 0.92),
            _pick(args.porosity_max, 0.97),
        ),
        kind="trig",
        master_seed=_pick(args.seed, cfg.seed),
        params=LbmParams(
            tau=cfg.tau, gravity=(cfg.g_x, cfg.g_y), rho0=cfg.rho0,
            tol=_pick(args.tol, 1e-5), check_interval=_pick(args.check_interval, 10),
            max_iters=cfg.max_iters,
        ),
    )
    jobs = _pick(args.jobs, cfg.jobs)
    records = dataset_mod.generate_dataset(config, out_dir / "data", jobs=jobs)
    print(f"records={len(records)}")
    return _run_warm_suite(
        records, f"noise:{_pick(args.noise, cfg.noise)}",
        _pick(args.seed, cfg.seed), out_dir / "report.csv", args.format, jobs,
    )


# ---------------------------------------------------------------- parser


def build_parser() -> _Parser:
    parser = _Parser(prog="porelab", description=__doc__)
    parser.add_argument("--config", help="key=value config file; flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a porous structure file")
    p.add_argument("generator", choices=("trig", "shapes", "pipe"))
    p.add_argument("--seed", type=int)
    p.add_argument("--porosity", type=float)
    p.add_argument("--size", type=int)
    p.add_argument("--p-circle", type=float, dest="p_circle")
    p.add_argument("--wall-thickness", type=int, dest="wall_thickness")
    p.add_argument("--central", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("simulate", help="run the flow solver on a structure")
    p.add_argument("--input", required=True)
    p.add_argument("--tau", type=float)
    p.add_argument("--force", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--check-interval", type=int, dest="check_interval")
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--warm", help="velocity record used as warm start")
    p.add_argument("--output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("props", help="macroscopic properties of a solved field")
    p.add_argument("--structure", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_props)

    p = sub.add_parser("loss", help="score a prediction with the five-term loss")
    p.add_argument("--structure", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--pred-translated", required=True, dest="pred_translated")
    p.add_argument("--ref", required=True)
    for name in ("alpha", "beta", "gamma", "delta"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--tx", type=int)
    p.add_argument("--ty", type=int)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("augment", help="apply a sampled flip/roll to a record")
    p.add_argument("--input", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--p-flip", type=float, default=0.5, dest="p_flip")
    p.add_argument("--max-frac", type=float, default=0.3, dest="max_frac")
    p.add_argument("--out", help="defaults to rewriting the input")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("dataset", help="dataset pipeline")
    dsub = p.add_subparsers(dest="dataset_command", required=True)
    d = dsub.add_parser("gen", help="generate, filter, solve and record")
    d.add_argument("--count", type=int)
    d.add_argument("--size", type=int)
    d.add_argument("--porosity-min", type=float, dest="porosity_min")
    d.add_argument("--porosity-max", type=float, dest="porosity_max")
    d.add_argument("--kind", choices=dataset_mod.GENERATOR_KINDS)
    d.add_argument("--seed", type=int)
    d.add_argument("--p-circle", type=float, dest="p_circle")
    d.add_argument("--tau", type=float)
    d.add_argument("--force", type=float)
    d.add_argument("--tol", type=float)
    d.add_argument("--check-interval", type=int, dest="check_interval")
    d.add_argument("--max-iters", type=int, dest="max_iters")
    d.add_argument("--jobs", type=int)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_dataset_gen)
    d = dsub.add_parser("split", help="deterministic train/val/test id split")
    d.add_argument("--dataset", required=True)
    d.add_argument("--seed", type=int)
    d.add_argument("--fractions", default="0.70,0.15,0.15")
    d.set_defaults(func=cmd_dataset_split)

    p = sub.add_parser("warmstart", help="cold vs warm benchmark over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--warm-source", required=True, dest="warm_source",
                   help="noise:<sigma> or files:<dir>")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", help="per-sample CSV report")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_warmstart)

    p = sub.add_parser("stats", help="quantiles/bootstrap/wilcoxon on CSV columns")
    p.add_argument("--csv", required=True)
    p.add_argument("--column", required=True)
    p.add_argument("--paired-with", dest="paired_with")
    p.add_argument("--quantiles", default="0.25,0.5,0.75")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("band", help="conditional quantile confidence bands")
    bsub = p.add_subparsers(dest="band_command", required=True)
    b = bsub.add_parser("residuals", help="extract (prediction, residual) pairs")
    b.add_argument("--structure", required=True)
    b.add_argument("--pred", required=True)
    b.add_argument("--ref", required=True)
    b.add_argument("--component", choices=("magnitude", "x", "y"), default="magnitude")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_band_residuals)
    b = bsub.add_parser("fit", help="fit a band to (x, r) pairs")
    b.add_argument("--pairs", required=True)
    b.add_argument("--bins", type=int)
    b.add_argument("--levels", default="0.05,0.95")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_band_fit)
    b = bsub.add_parser("eval", help="evaluate band bounds at given predictions")
    b.add_argument("--band", required=True)
    b.add_argument("--at", required=True, help="comma-separated prediction values")
    b.set_defaults(func=cmd_band_eval)
    b = bsub.add_parser("coverage", help="fraction of truth inside the band")
    b.add_argument("--band", required=True)
    b.add_argument("--structure", required=True)
    b.add_argument("--pred", required=True)
    b.add_argument("--ref", required=True)
    b.add_argument("--component", choices=("magnitude", "x", "y"), default="magnitude")
    b.set_defaults(func=cmd_band_coverage)

    p = sub.add_parser("repro", help="dataset generation + warm-start noise sweep")
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--size", type=int)
    p.add_argument("--porosity-min", type=float, dest="porosity_min")
    p.add_argument("--porosity-max", type=float, dest="porosity_max")
    p.add_argument("--tol", type=float)
    p.add_argument("--check-interval", type=int, dest="check_interval")
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_repro)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as err:  # --help and friends
        return int(err.code or 0)
    except ParameterError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except ConvergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (DataError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except PorelabError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
