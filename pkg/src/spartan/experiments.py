"""Subsample scoring and the benchmark sweep.

A bench *unit* is one (distribution, dimension, replicate) triple. Its seed
is derived from the base seed, and every row it produces can be rebuilt
from that seed with the command-line tools:

    generate --seed S            (training sample)
    generate --seed S --role test
    subsample --seed S
    evaluate
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import (
    DataError,
    RngStream,
    STREAM_SYNTHETIC,
    STREAM_TEST,
    derive_seed,
    empirical_covariance,
)
from .kde import BandwidthRule, bandwidth, hellinger_score, kde_eval, kde_model
from .select import DesignConfig, METHODS, select
from .synthetic import DISTRIBUTIONS, density, make_distribution, sample
from .transport import TransportConfig

DIST_KEYS = {tag: i for i, tag in enumerate(sorted(DISTRIBUTIONS))}
PREFIX_METHODS = ("spartan", "uniform")

RAW_COLUMNS = ("distribution", "d", "n", "r", "method", "rule", "replicate", "hellinger", "seed")
SUMMARY_COLUMNS = ("distribution", "d", "n", "method", "rule", "r", "replicates", "mean", "stderr")
TIMING_COLUMNS = ("distribution", "d", "n", "r", "method", "replicate", "wall_time_ms", "seed")


def sample_stream(seed: int, role: str = "train") -> RngStream:
    """Stream used to draw the training (``train``) or test (``test``) sample."""
    if role == "train":
        return RngStream(seed).spawn(STREAM_SYNTHETIC)
    if role == "test":
        return RngStream(seed).spawn(STREAM_TEST)
    raise ValueError(f"unknown sample role {role!r}")


def score_subsample(train, indices, test, reference, rule="scott", sigma_hat=None) -> float:
    """Hellinger score of the KDE on ``train[indices]`` at the ``test`` rows.

    ``reference`` is either a :class:`DistributionSpec` (exact density) or the
    string ``"full-kde"``, meaning the KDE on the whole training sample with
    the same rule. ``sigma_hat`` defaults to the training covariance.
    """
    train = np.asarray(train, dtype=np.float64)
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise DataError("empty subsample")
    if idx.min() < 0 or idx.max() >= train.shape[0]:
        raise DataError(f"subsample index out of range for {train.shape[0]} training rows")
    if sigma_hat is None:
        sigma_hat = empirical_covariance(train)
    d = train.shape[1]
    rule = BandwidthRule.parse(rule)
    model = kde_model(train[idx], bandwidth(rule, idx.size, d, sigma_hat))
    p_hat = kde_eval(model, test)
    if isinstance(reference, str):
        if reference != "full-kde":
            raise DataError(f"unknown reference {reference!r}")
        full = kde_model(train, bandwidth(rule, train.shape[0], d, sigma_hat))
        p_ref = kde_eval(full, test)
    else:
        p_ref = density(reference, test)
    return hellinger_score(p_hat, p_ref)


def parse_method(token: str):
    """``"spartan:theorem1"`` -> ``("spartan", "theorem1")``; rule defaults to scott."""
    method, _, rule = token.partition(":")
    rule = rule or "scott"
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if rule not in ("scott", "theorem1"):
        raise ValueError(f"bench rule must be scott or theorem1, got {rule!r}")
    return method, rule


@dataclass(frozen=True)
class BenchConfig:
    dists: tuple = ("d1",)
    dims: tuple = (2,)
    n: int = 10_000
    n_test: int = 10_000
    r_list: tuple = (32, 64, 128, 256, 512)
    methods: tuple = ("spartan:scott", "spartan:theorem1", "uniform:scott")
    replicates: int = 30
    seed: int = 0
    transport: dict = field(default_factory=lambda: asdict(TransportConfig()))

    def __post_init__(self):
        for tag in self.dists:
            if tag not in DISTRIBUTIONS:
                raise ValueError(f"unknown distribution {tag!r}")
        if any(int(d) < 1 for d in self.dims):
            raise ValueError("dimensions must be positive")
        r = list(self.r_list)
        if not r or any(b <= a for a, b in zip(r, r[1:])):
            raise ValueError("r-list must be non-empty and strictly increasing")
        if r[0] < 2 or r[-1] > self.n:
            raise ValueError(f"r values must lie in [2, n={self.n}]")
        if self.replicates < 2:
            raise ValueError("standard errors need at least 2 replicates")
        if self.n_test < 1:
            raise ValueError("n_test must be positive")
        for m in self.methods:
            parse_method(m)

    def to_dict(self) -> dict:
        out = asdict(self)
        for k in ("dists", "dims", "r_list", "methods"):
            out[k] = list(out[k])
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "BenchConfig":
        data = dict(data)
        for k in ("dists", "dims", "r_list", "methods"):
            if k in data:
                data[k] = tuple(data[k])
        return cls(**data)


def unit_seed(base: int, dist: str, d: int, replicate: int) -> int:
    return derive_seed(base, DIST_KEYS[dist], d, replicate)


def run_unit(cfg: BenchConfig, dist: str, d: int, replicate: int):
    """All rows for one (distribution, dimension, replicate)."""
    seed = unit_seed(cfg.seed, dist, d, replicate)
    spec = make_distribution(dist, d)
    train = sample(spec, cfg.n, sample_stream(seed, "train"))
    test = sample(spec, cfg.n_test, sample_stream(seed, "test"))
    sigma_hat = empirical_covariance(train)
    p_ref = density(spec, test)
    tc = TransportConfig(**cfg.transport)
    rows, timings = [], []

    by_method = {}
    for token in cfg.methods:
        method, rule = parse_method(token)
        by_method.setdefault(method, []).append(rule)

    for method, rules in by_method.items():
        picks = {}
        if method in PREFIX_METHODS:
            t0 = time.perf_counter()
            top = select(train, cfg.r_list[-1], method, RngStream(seed), tc, DesignConfig()).indices
            ms = (time.perf_counter() - t0) * 1e3
            for r in cfg.r_list:
                picks[r] = top[:r]
            timings.append((dist, d, cfg.n, cfg.r_list[-1], method, replicate, ms, seed))
        else:
            for r in cfg.r_list:
                t0 = time.perf_counter()
                picks[r] = select(train, r, method, RngStream(seed), tc, DesignConfig()).indices
                timings.append((dist, d, cfg.n, r, method, replicate, (time.perf_counter() - t0) * 1e3, seed))
        for rule in rules:
            for r in cfg.r_list:
                model = kde_model(train[picks[r]], bandwidth(rule, r, d, sigma_hat))
                h = hellinger_score(kde_eval(model, test), p_ref)
                rows.append((dist, d, cfg.n, r, method, rule, replicate, h, seed))
    return rows, timings


def _sort_key(row):
    dist, d, n, r, method, rule, replicate = row[:7]
    return (dist, d, n, method, rule, r, replicate)


def summarize(rows) -> list:
    """Per-cell mean and standard error (ddof=1) of the Hellinger scores."""
    cells = {}
    for row in rows:
        dist, d, n, r, method, rule, _, h, _ = row
        cells.setdefault((dist, d, n, method, rule, r), []).append(h)
    out = []
    for key in sorted(cells):
        vals = np.array(cells[key])
        if vals.size < 2:
            raise ValueError("standard errors need at least 2 replicates per cell")
        mean = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / np.sqrt(vals.size))
        out.append((*key, int(vals.size), mean, se))
    return out


def worker_count() -> int:
    raw = os.environ.get("SPARTAN_THREADS", "")
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(1, value)


@dataclass
class BenchReport:
    rows: list
    summary: list
    timings: list


def run_bench(cfg: BenchConfig, on_unit=None) -> BenchReport:
    """Run the full factorial sweep.

    ``on_unit(rows, timings)`` is called after each completed unit, in
    completion order, so callers can flush partial results. The returned
    rows are in canonical order whatever the scheduling.
    """
    units = [(dist, int(d), k) for dist in cfg.dists for d in cfg.dims for k in range(cfg.replicates)]
    rows, timings = [], []

    def done(result):
        r, t = result
        rows.extend(r)
        timings.extend(t)
        if on_unit is not None:
            on_unit(r, t)

    workers = min(worker_count(), len(units))
    if workers <= 1:
        for u in units:
            done(run_unit(cfg, *u))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for result in pool.map(lambda u: run_unit(cfg, *u), units):
                done(result)
    rows.sort(key=_sort_key)
    timings.sort(key=lambda t: (t[0], t[1], t[2], t[4], t[3], t[5]))
    return BenchReport(rows, summarize(rows), timings)
