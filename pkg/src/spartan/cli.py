"""Command-line interface.

Every command writes its main output plus a ``<output>.meta.json`` sidecar
holding the seed, the full configuration and its sha256 hash. Wall times go
to a separate ``<output>.timing.json`` so that the main output and sidecar
are byte-identical across reruns. ``spartan rerun --input SIDECAR`` replays
a recorded run.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .core import DataError, NumericError, RngStream
from .design import EXACT_MAX_DIM, EXACT_MAX_POINTS, star_discrepancy_estimate, star_discrepancy_exact
from .experiments import (
    RAW_COLUMNS,
    SUMMARY_COLUMNS,
    TIMING_COLUMNS,
    BenchConfig,
    run_bench,
    sample_stream,
    score_subsample,
)
from .kde import BandwidthRule
from .select import DesignConfig, METHODS, select
from .synthetic import DISTRIBUTIONS, make_distribution, sample
from .transport import TransportConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


def sidecar_path(output) -> Path:
    return Path(str(output) + ".meta.json")


def timing_path(output) -> Path:
    return Path(str(output) + ".timing.json")


def _abs(path):
    return None if path is None else str(Path(path).resolve())


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def _str_list(text: str) -> list:
    return [t.strip() for t in text.split(",") if t.strip()]


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _write_outputs(output, config: dict, extra: dict, wall_ms: float) -> None:
    config = _hashable(config)
    meta = {"config": config, "config_hash": io.config_hash(config), "seed": config["seed"], **extra}
    io.write_json(sidecar_path(output), meta)
    io.write_json(timing_path(output), {"wall_time_ms": wall_ms})


# --------------------------------------------------------------------- generate

def cmd_generate(cfg: dict) -> int:
    spec = make_distribution(cfg["dist"], cfg["d"])
    if cfg["n"] < 1:
        raise UsageError("--n must be positive")
    t0 = time.perf_counter()
    x, labels = sample(spec, cfg["n"], sample_stream(cfg["seed"], cfg["role"]), return_labels=True)
    io.write_matrix_csv(cfg["output"], x, cfg["format"])
    counts = np.bincount(labels, minlength=len(spec.components)).tolist()
    _write_outputs(cfg["output"], cfg, {"spec": spec.describe(), "component_counts": counts},
                   (time.perf_counter() - t0) * 1e3)
    return EXIT_OK


# -------------------------------------------------------------------- subsample

def cmd_subsample(cfg: dict) -> int:
    x = io.read_matrix_csv(cfg["input"], cfg["columns"])
    n, d = x.shape
    r = cfg["r"]
    if r < 1:
        raise UsageError("--r must be positive")
    if r > n and cfg["replacement"] == "without":
        raise DataError(f"r={r} exceeds the number of rows n={n}")
    if cfg["replacement"] == "with" and cfg["method"] != "spartan":
        raise UsageError("--replacement with is only available for the spartan method")
    tc = TransportConfig(method=cfg["transport"], max_iterations=cfg["max_iter"],
                         tolerance=cfg["tol"], step_damping=cfg["damping"])
    dc = DesignConfig(scramble=cfg["scramble"])
    t0 = time.perf_counter()
    res = select(x, r, cfg["method"], RngStream(cfg["seed"]), tc, dc, cfg["replacement"],
                 cfg["kmedoids_iter"])
    wall = (time.perf_counter() - t0) * 1e3
    io.write_indices(cfg["output"], res.indices, cfg["format"])
    extra = {
        "method": cfg["method"],
        "n": n,
        "d": d,
        "r": r,
        "distinct": int(np.unique(res.indices).size),
        "transport": res.transport_diag,
        "design": None if res.design_used is None else res.design_used.generator_tag,
    }
    extra.update({k: v for k, v in res.extra.items()})
    _write_outputs(cfg["output"], cfg, extra, wall)
    return EXIT_OK


# --------------------------------------------------------------------- evaluate

def cmd_evaluate(cfg: dict) -> int:
    train = io.read_matrix_csv(cfg["input"], cfg["columns"])
    test = io.read_matrix_csv(cfg["test"], cfg["columns"])
    if test.shape[1] != train.shape[1]:
        raise DataError(f"test set has {test.shape[1]} columns, training set has {train.shape[1]}")
    idx = io.read_indices(cfg["indices"])
    d = train.shape[1]
    if cfg["rule"] == "fixed":
        if cfg["h_matrix"] is None:
            raise UsageError("--rule fixed needs --h-matrix")
        H = io.read_matrix_csv(cfg["h_matrix"])
        if H.shape != (d, d):
            raise DataError(f"--h-matrix must be {d}x{d}, got {H.shape[0]}x{H.shape[1]}")
        rule = BandwidthRule("fixed", H)
    else:
        rule = BandwidthRule(cfg["rule"])
    reference = cfg["reference"]
    ref = reference if reference == "full-kde" else make_distribution(reference, d)
    t0 = time.perf_counter()
    score = score_subsample(train, idx, test, ref, rule)
    wall = (time.perf_counter() - t0) * 1e3
    result = {
        "hellinger": score,
        "r": int(idx.size),
        "rule": cfg["rule"],
        "reference_kind": "full-kde" if reference == "full-kde" else "exact",
        "reference": reference,
        "seed": cfg["seed"],
        "config_hash": io.config_hash(_hashable(cfg)),
    }
    _emit_record(cfg["output"], result, cfg["format"])
    _write_outputs(cfg["output"], cfg, {}, wall)
    return EXIT_OK


def _emit_record(output, record: dict, fmt: str) -> None:
    if fmt == "json":
        io.write_json(output, record)
    else:
        keys = sorted(record)
        io.write_table(output, keys, [[record[k] for k in keys]], "csv")


# ------------------------------------------------------------------ discrepancy

def cmd_discrepancy(cfg: dict) -> int:
    x = io.read_matrix_csv(cfg["input"], cfg["columns"])
    r, d = x.shape
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DataError("points must lie in [0, 1]^d; rescale the input first")
    t0 = time.perf_counter()
    if cfg["estimate"]:
        value = star_discrepancy_estimate(x, cfg["n_corners"], RngStream(cfg["seed"]))
        mode = "estimate"
    else:
        if d > EXACT_MAX_DIM or r > EXACT_MAX_POINTS:
            raise UsageError(
                f"exact mode supports d <= {EXACT_MAX_DIM} and r <= {EXACT_MAX_POINTS} (got d={d}, r={r}); "
                "rerun with --estimate [--n-corners K] for a lower bound"
            )
        value = star_discrepancy_exact(x)
        mode = "exact"
    wall = (time.perf_counter() - t0) * 1e3
    record = {"d_star": value, "mode": mode, "r": r, "d": d, "seed": cfg["seed"],
              "config_hash": io.config_hash(_hashable(cfg))}
    if cfg["output"] is None:
        sys.stdout.write(io.canonical_json(record))
        return EXIT_OK
    _emit_record(cfg["output"], record, cfg["format"])
    _write_outputs(cfg["output"], cfg, {}, wall)
    return EXIT_OK


# ------------------------------------------------------------------------ bench

def _summary_path(output) -> Path:
    p = Path(output)
    return p.with_name(p.stem + ".summary" + p.suffix)


def _partial_path(output) -> Path:
    return Path(str(output) + ".partial")


def cmd_bench(cfg: dict) -> int:
    if cfg["format"] != "csv":
        raise UsageError("bench writes CSV only")
    try:
        bc = BenchConfig(
            dists=tuple(cfg["dists"]), dims=tuple(cfg["dims"]), n=cfg["n"],
            n_test=cfg["n_test"] if cfg["n_test"] is not None else cfg["n"],
            r_list=tuple(cfg["r_list"]), methods=tuple(cfg["methods"]),
            replicates=cfg["replicates"], seed=cfg["seed"],
            transport={**TransportConfig().__dict__, "method": cfg["transport"],
                       "max_iterations": cfg["max_iter"], "tolerance": cfg["tol"]},
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    output = Path(cfg["output"])
    partial = _partial_path(output)
    partial.write_text(",".join(RAW_COLUMNS) + "\n")

    def flush(rows, _timings):
        with open(partial, "a") as fh:
            for row in rows:
                fh.write(",".join(io.format_float(v) if isinstance(v, float) else str(v) for v in row) + "\n")

    t0 = time.perf_counter()
    report = run_bench(bc, flush)
    wall = (time.perf_counter() - t0) * 1e3
    io.write_table(output, RAW_COLUMNS, report.rows)
    io.write_table(_summary_path(output), SUMMARY_COLUMNS, report.summary)
    partial.unlink()
    timing_csv = Path(str(output) + ".timing.csv")
    io.write_table(timing_csv, TIMING_COLUMNS, report.timings)
    _write_outputs(output, cfg, {"bench": bc.to_dict(), "rows": len(report.rows)}, wall)
    return EXIT_OK


# ------------------------------------------------------------------------ rerun

COMMANDS = {
    "generate": cmd_generate,
    "subsample": cmd_subsample,
    "evaluate": cmd_evaluate,
    "discrepancy": cmd_discrepancy,
    "bench": cmd_bench,
}


def cmd_rerun(cfg: dict) -> int:
    meta = io.read_json(cfg["input"])
    try:
        recorded = dict(meta["config"])
        command = recorded["command"]
    except (KeyError, TypeError):
        raise DataError(f"{cfg['input']}: not a run sidecar") from None
    if io.config_hash(recorded) != meta.get("config_hash"):
        raise DataError(f"{cfg['input']}: config hash mismatch; the sidecar was edited")
    if command not in COMMANDS:
        raise DataError(f"{cfg['input']}: unknown command {command!r}")
    recorded["output"] = cfg["output"] if cfg["output"] is not None else _recorded_output(cfg["input"])
    return _run(command, recorded)


def _recorded_output(sidecar) -> str:
    name = str(sidecar)
    if not name.endswith(".meta.json"):
        raise UsageError("cannot infer the output path; pass --output")
    return name[: -len(".meta.json")]


# ----------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spartan", description="Space-filling subsampling after optimal transport.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, input_required=True, output_required=True, formats=("csv", "json"), default_format="csv"):
        sp.add_argument("--input", required=input_required, help="input CSV path")
        sp.add_argument("--output", required=output_required, help="output path")
        sp.add_argument("--seed", type=_seed, default=0, help="unsigned 64-bit seed (default 0)")
        sp.add_argument("--format", choices=formats, default=default_format)

    def columns(sp):
        sp.add_argument("--columns", type=_int_list, default=None,
                        help="0-based columns to keep, e.g. 0,1,2,3")

    def transport_flags(sp):
        sp.add_argument("--transport", choices=("auto", "exact", "projection"), default="auto")
        sp.add_argument("--max-iter", type=int, default=64, help="projection iterations (0 disables transport)")
        sp.add_argument("--tol", type=float, default=1e-4, help="relative improvement stopping threshold")

    g = sub.add_parser("generate", help="draw a synthetic sample")
    common(g, input_required=False)
    g.add_argument("--dist", choices=sorted(DISTRIBUTIONS), required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--role", choices=("train", "test"), default="train",
                   help="which stream to draw from (bench uses both per seed)")

    s = sub.add_parser("subsample", help="select r rows of a sample")
    common(s)
    columns(s)
    s.add_argument("--method", choices=METHODS, default="spartan")
    s.add_argument("--r", type=int, required=True)
    transport_flags(s)
    s.add_argument("--damping", type=float, default=1.0, help="projection step damping in (0, 1]")
    s.add_argument("--replacement", choices=("with", "without"), default="without")
    s.add_argument("--scramble", action="store_true", help="digitally shift the Sobol design")
    s.add_argument("--kmedoids-iter", type=int, default=50)

    e = sub.add_parser("evaluate", help="Hellinger score of a subsample KDE")
    common(e, formats=("json", "csv"), default_format="json")
    columns(e)
    e.add_argument("--indices", required=True)
    e.add_argument("--test", required=True)
    e.add_argument("--reference", choices=("d1", "d2", "d3", "full-kde"), required=True)
    e.add_argument("--rule", choices=("scott", "theorem1", "fixed"), default="scott")
    e.add_argument("--h-matrix", default=None, help="CSV d x d bandwidth matrix for --rule fixed")

    dsc = sub.add_parser("discrepancy", help="star discrepancy of a point set in [0,1]^d")
    common(dsc, output_required=False, formats=("json", "csv"), default_format="json")
    columns(dsc)
    dsc.add_argument("--estimate", action="store_true", help="random-corner lower bound instead of exact")
    dsc.add_argument("--n-corners", type=int, default=100_000)

    b = sub.add_parser("bench", help="factorial Hellinger sweep")
    common(b, input_required=False)
    b.add_argument("--dists", type=_str_list, default=["d1"])
    b.add_argument("--dims", type=_int_list, default=[2])
    b.add_argument("--n", type=int, default=10_000)
    b.add_argument("--n-test", type=int, default=None, help="test-set size (default n)")
    b.add_argument("--r-list", type=_int_list, default=[32, 64, 128, 256, 512])
    b.add_argument("--methods", type=_str_list, default=["spartan:scott", "spartan:theorem1", "uniform:scott"],
                   help="method[:rule] tokens; rule is scott or theorem1")
    b.add_argument("--replicates", type=int, default=30)
    transport_flags(b)

    rr = sub.add_parser("rerun", help="replay a run from its .meta.json sidecar")
    rr.add_argument("--input", required=True, help="sidecar path")
    rr.add_argument("--output", default=None, help="output path (default: the recorded one)")
    return p


PATH_KEYS = ("input", "test", "indices", "h_matrix")


def _config_from_args(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items()}
    for key in PATH_KEYS:
        if key in cfg and args.command != "rerun":
            cfg[key] = _abs(cfg[key])
    return cfg


def _run(command: str, cfg: dict) -> int:
    handler = COMMANDS[command]
    output = cfg.get("output")
    stored = {k: v for k, v in cfg.items() if k != "output"}
    stored["command"] = command
    if output is not None:
        Path(output).parent.mkdir(parents=True, exist_ok=True)
    return handler({**stored, "output": output})


def _hashable(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if k != "output"}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = _config_from_args(args)
    try:
        if args.command == "rerun":
            return cmd_rerun(cfg)
        return _run(args.command, cfg)
    except UsageError as exc:
        print(f"spartan: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"spartan: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError) as exc:
        print(f"spartan: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"spartan: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
