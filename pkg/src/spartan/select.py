"""Subsample selection: design matching, SPARTAN (batch and sequential) and
the uniform and k-medoids baselines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.spatial.distance import cdist

from .core import (
    DataError,
    STREAM_BASELINE,
    STREAM_DESIGN,
    STREAM_UNIFORM_TARGET,
    as_sample,
    as_stream,
)
from .design import DesignPointSet, SobolSequence, digital_shift, sobol
from .kdtree import KdTree
from .transport import TransportConfig, transport

POLICIES = ("without", "with")


@dataclass(frozen=True)
class DesignConfig:
    """``scramble=True`` applies a digital shift drawn from the run's stream.

    ``synthetic`` picks the uniform reference cloud the sample is transported
    to: ``"random"`` (i.i.d. uniform draws) or the experimental ``"sobol"``
    (the first ``n`` Sobol points).
    """

    scramble: bool = False
    synthetic: str = "random"

    def __post_init__(self):
        if self.synthetic not in ("random", "sobol"):
            raise ValueError(f"unknown synthetic target {self.synthetic!r}")


@dataclass(frozen=True)
class SelectionResult:
    indices: np.ndarray
    method: str
    design_used: Optional[DesignPointSet] = None
    transport_diag: Optional[dict] = None
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.indices)


def _check_policy(policy: str) -> str:
    if policy not in POLICIES:
        raise ValueError(f"replacement policy must be one of {POLICIES}, got {policy!r}")
    return policy


def match_design(cloud, design, policy: str = "without") -> np.ndarray:
    """Nearest cloud point for each design point, in design order.

    Under ``policy="without"`` a chosen point is removed before the next
    design point is matched, so the result has distinct indices.
    """
    _check_policy(policy)
    x = as_sample(cloud, "cloud")
    pts = design.points if isinstance(design, DesignPointSet) else as_sample(design, "design")
    if pts.shape[1] != x.shape[1]:
        raise DataError(f"design dimension {pts.shape[1]} does not match cloud dimension {x.shape[1]}")
    if policy == "without" and pts.shape[0] > x.shape[0]:
        raise DataError(f"cannot match {pts.shape[0]} design points without replacement from {x.shape[0]} rows")
    tree = KdTree(x)
    mask = tree.new_mask() if policy == "without" else None
    out = np.empty(pts.shape[0], dtype=np.int64)
    for k, s in enumerate(pts):
        i = tree.query(s, mask)
        if mask is not None:
            mask.mark(i)
        out[k] = i
    return out


def _uniform_target(n: int, d: int, design_config: DesignConfig, stream) -> np.ndarray:
    if design_config.synthetic == "sobol":
        return sobol(n, d).points
    return stream.spawn(STREAM_UNIFORM_TARGET).generator().random((n, d))


def _design_shift(d: int, design_config: DesignConfig, stream):
    return digital_shift(d, stream.spawn(STREAM_DESIGN)) if design_config.scramble else None


def transform_to_cube(sample, transport_config: TransportConfig, design_config: DesignConfig, rng):
    """Steps 1-3: draw the uniform reference cloud and transport onto it."""
    x = as_sample(sample)
    stream = as_stream(rng)
    u = _uniform_target(x.shape[0], x.shape[1], design_config, stream)
    return transport(x, u, transport_config, stream)


def spartan(
    sample,
    r: int,
    transport_config: TransportConfig = TransportConfig(),
    design_config: DesignConfig = DesignConfig(),
    rng=0,
    policy: str = "without",
) -> SelectionResult:
    """Space-filling after optimal transport.

    Transport the sample onto a uniform reference cloud, match the first
    ``r`` Sobol points against the transported cloud and return the
    original-row indices of the matches.
    """
    x = as_sample(sample)
    n, d = x.shape
    if not 1 <= r <= n and policy == "without":
        raise DataError(f"r must lie in [1, n={n}], got {r}")
    if r < 1:
        raise DataError("r must be at least 1")
    stream = as_stream(rng)
    result = transform_to_cube(x, transport_config, design_config, stream)
    seq = SobolSequence(d, _design_shift(d, design_config, stream))
    tag = "sobol-joe-kuo-shifted" if design_config.scramble else "sobol-joe-kuo"
    design = DesignPointSet(seq.draw(r), tag)
    idx = match_design(result.transformed, design, policy)
    return SelectionResult(idx, "spartan", design, result.diagnostics())


class SequentialState:
    """SPARTAN one pick at a time, for active-learning style querying.

    The k-th call to :meth:`next` returns the k-th index of the batch
    selection with the same inputs and stream. Not safe to share between
    threads (the used-mask is mutated).
    """

    def __init__(self, sample, transport_config=TransportConfig(), design_config=DesignConfig(), rng=0):
        x = as_sample(sample)
        stream = as_stream(rng)
        self.transport_result = transform_to_cube(x, transport_config, design_config, stream)
        self.tree = KdTree(self.transport_result.transformed)
        self.mask = self.tree.new_mask()
        self.sobol = SobolSequence(x.shape[1], _design_shift(x.shape[1], design_config, stream))
        self.selected: list[int] = []

    @property
    def remaining(self) -> int:
        return self.mask.n_available

    def next(self) -> int:
        if self.remaining == 0:
            raise DataError("every row has already been selected")
        s = self.sobol.draw(1)[0]
        i = self.tree.query(s, self.mask)
        self.mask.mark(i)
        self.selected.append(i)
        return i


def spartan_sequential_init(sample, transport_config=TransportConfig(), design_config=DesignConfig(), rng=0):
    return SequentialState(sample, transport_config, design_config, rng)


def spartan_sequential_next(state: SequentialState) -> int:
    return state.next()


def uniform_select(n: int, r: int, rng) -> np.ndarray:
    """Simple random sample of ``r`` distinct indices from ``range(n)``.

    Taken as the first ``r`` entries of one random permutation, so smaller
    ``r`` with the same stream gives a prefix.
    """
    if not 1 <= r <= n:
        raise DataError(f"r must lie in [1, n={n}], got {r}")
    gen = as_stream(rng).spawn(STREAM_BASELINE).generator()
    return gen.permutation(n)[:r].astype(np.int64)


@dataclass(frozen=True)
class KMedoidsResult:
    medoids: np.ndarray
    objective_trace: tuple
    iterations: int
    full_objective: Optional[float] = None  # CLARA: objective on all rows

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]


def _assign(D_med: np.ndarray):
    """Nearest / second-nearest medoid distances from an ``(r, n)`` matrix."""
    if D_med.shape[0] == 1:
        return D_med[0], np.zeros(D_med.shape[1], dtype=np.int64), np.full(D_med.shape[1], np.inf)
    two = np.argpartition(D_med, 1, axis=0)[:2]
    cols = np.arange(D_med.shape[1])
    a, b = D_med[two[0], cols], D_med[two[1], cols]
    swap = b < a
    near = np.where(swap, two[1], two[0])
    return np.minimum(a, b), near, np.maximum(a, b)


def _seed_plusplus(x: np.ndarray, r: int, gen) -> list:
    n = x.shape[0]
    medoids = [int(gen.integers(n))]
    d1 = cdist(x[medoids], x)[0]
    for _ in range(1, r):
        w = d1 ** 2
        total = w.sum()
        if total > 0:
            nxt = int(gen.choice(n, p=w / total))
        else:
            free = np.setdiff1d(np.arange(n), medoids)
            nxt = int(gen.choice(free))
        medoids.append(nxt)
        d1 = np.minimum(d1, cdist(x[[nxt]], x)[0])
    return medoids


def _pam(x: np.ndarray, r: int, max_iter: int, gen, n_candidates: int) -> KMedoidsResult:
    n = x.shape[0]
    medoids = _seed_plusplus(x, r, gen)
    D_med = cdist(x[medoids], x)
    d1, near, d2 = _assign(D_med)
    objective = float(d1.sum())
    trace = [objective]
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        is_medoid = np.zeros(n, dtype=bool)
        is_medoid[medoids] = True
        free = np.flatnonzero(~is_medoid)
        if free.size == 0:
            break
        exhaustive = free.size <= n_candidates
        cand = free if exhaustive else np.sort(gen.choice(free, size=n_candidates, replace=False))
        onehot = sparse.csr_matrix((np.ones(n), (np.arange(n), near)), shape=(n, r))
        best = (0.0, -1, -1)
        for s in range(0, cand.size, 256):
            block = cand[s:s + 256]
            dist_o = cdist(x[block], x)
            gain = np.minimum(dist_o - d1, 0.0)
            # removing medoid i re-homes its points to min(new, second-nearest)
            corr = np.minimum(dist_o, d2) - d1 - gain
            delta = gain.sum(axis=1)[:, None] + np.asarray(corr @ onehot)
            k = np.unravel_index(np.argmin(delta), delta.shape)
            if delta[k] < best[0]:
                best = (float(delta[k]), int(block[k[0]]), int(k[1]))
        _, o, i = best
        if o < 0:
            if exhaustive:
                break
            continue
        new_row = cdist(x[[o]], x)[0]
        old_row = D_med[i].copy()
        D_med[i] = new_row
        nd1, nnear, nd2 = _assign(D_med)
        new_obj = float(nd1.sum())
        if new_obj < objective:
            medoids[i] = o
            d1, near, d2, objective = nd1, nnear, nd2, new_obj
            trace.append(objective)
        else:
            D_med[i] = old_row
            if exhaustive:
                break
    return KMedoidsResult(np.asarray(medoids, dtype=np.int64), tuple(trace), iterations)


def kmedoids(sample, r: int, max_iter: int = 50, rng=0, n_candidates: int = 512,
             clara_threshold: int = 20_000, clara_draws: int = 5) -> KMedoidsResult:
    """k-medoids with k-means++ seeding and a capped PAM swap phase.

    Each swap iteration evaluates swapping every medoid with up to
    ``n_candidates`` non-medoids using nearest/second-nearest bookkeeping
    and applies the best improving swap. Above ``clara_threshold`` rows PAM
    runs on ``clara_draws`` random subsamples and the medoid set with the
    lowest full-data objective wins.
    """
    x = as_sample(sample)
    n = x.shape[0]
    if not 1 <= r <= n:
        raise DataError(f"r must lie in [1, n={n}], got {r}")
    gen = as_stream(rng).spawn(STREAM_BASELINE).generator()
    if r == n:
        return KMedoidsResult(np.arange(n, dtype=np.int64), (0.0,), 0)
    if n <= clara_threshold:
        return _pam(x, r, max_iter, gen, n_candidates)

    size = min(n, max(40 + 2 * r, 5 * r))
    best = None
    for _ in range(clara_draws):
        sub = np.sort(gen.choice(n, size=size, replace=False))
        res = _pam(x[sub], r, max_iter, gen, n_candidates)
        medoids = sub[res.medoids]
        full_obj = 0.0
        for s in range(0, n, 8192):
            full_obj += float(cdist(x[s:s + 8192], x[medoids]).min(axis=1).sum())
        if best is None or full_obj < best[0]:
            best = (full_obj, medoids, res)
    full_obj, medoids, res = best
    return KMedoidsResult(medoids, res.objective_trace, res.iterations, full_obj)


def kmedoids_select(sample, r: int, max_iter: int = 50, rng=0) -> np.ndarray:
    return kmedoids(sample, r, max_iter, rng).medoids


METHODS = ("spartan", "uniform", "kmedoids")


def select(sample, r: int, method: str = "spartan", rng=0,
           transport_config: TransportConfig = TransportConfig(),
           design_config: DesignConfig = DesignConfig(),
           policy: str = "without", max_iter: int = 50) -> SelectionResult:
    """Dispatch to one of :data:`METHODS`."""
    x = as_sample(sample)
    if method == "spartan":
        return spartan(x, r, transport_config, design_config, rng, policy)
    if method == "uniform":
        return SelectionResult(uniform_select(x.shape[0], r, rng), "uniform")
    if method == "kmedoids":
        res = kmedoids(x, r, max_iter, rng)
        return SelectionResult(res.medoids, "kmedoids", extra={"objective": res.objective})
    raise DataError(f"unknown method {method!r}; expected one of {METHODS}")
