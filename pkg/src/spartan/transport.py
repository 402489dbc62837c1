"""Empirical optimal transport from a sample to a uniform reference cloud.

Two routes are offered:

* ``exact``: the minimum squared-distance bijection (linear sum assignment);
  the transformed cloud is the target cloud permuted onto the source rows.
* ``projection``: iterative distribution transfer. Each iteration draws a
  random orthonormal basis and, along each basis direction, moves every
  working point by the gap between its projected quantile and the matching
  target quantile. One iteration costs ``d`` sorts of ``n`` numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import DataError, STREAM_DIAGNOSTIC, STREAM_PROJECTION, as_sample, as_stream

EXACT_MAX_N = 4096


@dataclass(frozen=True)
class TransportConfig:
    """Settings for :func:`transport`.

    ``method`` is ``"auto"``, ``"exact"`` or ``"projection"``; ``auto`` uses
    the exact assignment up to ``EXACT_MAX_N`` rows. ``max_iterations=0``
    means no transport at all (the identity map, clamped to the cube).
    """

    method: str = "auto"
    max_iterations: int = 64
    tolerance: float = 1e-4
    step_damping: float = 1.0
    n_diagnostic_dirs: int = 32
    clamp: bool = True

    def __post_init__(self):
        if self.method not in ("auto", "exact", "projection"):
            raise ValueError(f"unknown transport method {self.method!r}")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be nonnegative")
        if self.tolerance < 0:
            raise ValueError("tolerance must be nonnegative")
        if not 0.0 < self.step_damping <= 1.0:
            raise ValueError("step_damping must lie in (0, 1]")
        if self.n_diagnostic_dirs < 1:
            raise ValueError("n_diagnostic_dirs must be at least 1")

    def resolve(self, n: int) -> str:
        if self.max_iterations == 0:
            return "identity"
        if self.method == "auto":
            return "exact" if n <= EXACT_MAX_N else "projection"
        return self.method


@dataclass(frozen=True)
class TransportResult:
    transformed: np.ndarray
    pairing: Optional[np.ndarray]
    iterations_run: int
    initial_cost: float
    final_cost: float
    method: str = "projection"

    def diagnostics(self) -> dict:
        return {
            "method": self.method,
            "iterations": self.iterations_run,
            "initial_cost": self.initial_cost,
            "final_cost": self.final_cost,
        }


def _check_pair(source, target):
    x = as_sample(source, "source")
    u = as_sample(target, "target")
    if x.shape != u.shape:
        raise DataError(f"source shape {x.shape} does not match target shape {u.shape}")
    return x, u


def ot_pair_1d(source, target) -> np.ndarray:
    """Monotone (rank-matching) pairing of two equal-length 1-D samples.

    Returns ``sigma`` with ``source[i]`` paired to ``target[sigma[i]]``; the
    i-th smallest source value goes to the i-th smallest target value, which
    minimises the summed squared gap among all bijections. Ties keep input
    order.
    """
    a = np.asarray(source, dtype=np.float64).ravel()
    b = np.asarray(target, dtype=np.float64).ravel()
    if a.size != b.size:
        raise DataError(f"length mismatch: {a.size} vs {b.size}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DataError("values must be finite")
    sigma = np.empty(a.size, dtype=np.int64)
    sigma[np.argsort(a, kind="stable")] = np.argsort(b, kind="stable")
    return sigma


def squared_cost_matrix(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    C = np.zeros((x.shape[0], u.shape[0]))
    for j in range(x.shape[1]):
        C += (x[:, j, None] - u[None, :, j]) ** 2
    return C


def assignment_cost(x, u, sigma) -> float:
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if x.ndim == 1:
        x, u = x[:, None], u[:, None]
    return float(np.sum((x - u[sigma]) ** 2))


def assignment_exact(source, target) -> np.ndarray:
    """Optimal bijection minimising ``sum ||x_i - u_sigma(i)||^2``.

    Solved as a dense linear sum assignment (shortest augmenting paths), so
    the cost matrix caps ``n`` at ``EXACT_MAX_N``.
    """
    x, u = _check_pair(source, target)
    n = x.shape[0]
    if n > EXACT_MAX_N:
        raise DataError(
            f"exact assignment is limited to n <= {EXACT_MAX_N} (got {n}); use the projection method"
        )
    rows, cols = linear_sum_assignment(squared_cost_matrix(x, u))
    sigma = np.empty(n, dtype=np.int64)
    sigma[rows] = cols
    return sigma


def random_directions(n_dirs: int, d: int, rng) -> np.ndarray:
    """``(d, n_dirs)`` matrix of unit columns."""
    g = as_stream(rng).generator().standard_normal((d, n_dirs))
    norms = np.linalg.norm(g, axis=0)
    norms[norms == 0.0] = 1.0
    return g / norms


def _sorted_projections(x: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    # (n_dirs, n) so every sort runs over contiguous memory
    return np.sort(dirs.T @ x.T, axis=1)


def _sliced_cost_sorted(pa: np.ndarray, pb: np.ndarray) -> float:
    return float(np.mean((pa - pb) ** 2))


def sliced_cost_dirs(a, b, dirs: np.ndarray) -> float:
    """Sliced squared 1-D transport cost along the given unit columns."""
    return _sliced_cost_sorted(_sorted_projections(a, dirs), _sorted_projections(b, dirs))


def sliced_cost(a, b, n_dirs: int, rng) -> float:
    """Monte-Carlo sliced squared W2 between equal-size clouds.

    Averages, over ``n_dirs`` random unit directions, the mean squared gap
    between the sorted projections of ``a`` and ``b``.
    """
    a, b = _check_pair(a, b)
    if n_dirs < 1:
        raise ValueError("n_dirs must be at least 1")
    return sliced_cost_dirs(a, b, random_directions(n_dirs, a.shape[1], rng))


def random_rotation(d: int, gen: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR of a Gaussian, sign-fixed)."""
    q, r = np.linalg.qr(gen.standard_normal((d, d)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def transform_projection(source, target, config: TransportConfig = TransportConfig(), rng=0) -> TransportResult:
    """Iterative distribution transfer of ``source`` toward ``target``.

    Stops after ``config.max_iterations`` iterations or once an accepted
    step improves the diagnostic sliced cost by less than
    ``config.tolerance`` (relative). A step that would raise the diagnostic
    cost is rejected, so ``final_cost <= initial_cost`` always holds.
    """
    x, u = _check_pair(source, target)
    n, d = x.shape
    if n < 2:
        raise DataError("projection transport needs at least 2 rows")
    stream = as_stream(rng)
    rot_gen = stream.spawn(STREAM_PROJECTION).generator()
    diag_dirs = random_directions(config.n_diagnostic_dirs, d, stream.spawn(STREAM_DIAGNOSTIC))
    target_diag = _sorted_projections(u, diag_dirs)

    work = x.copy()
    cost = initial = _sliced_cost_sorted(_sorted_projections(work, diag_dirs), target_diag)
    iterations = 0
    for _ in range(config.max_iterations):
        iterations += 1
        if d == 1 and config.step_damping == 1.0:
            # 1-D transport is rank matching; place points on the target values
            candidate = np.empty_like(work)
            candidate[np.argsort(work[:, 0], kind="stable"), 0] = np.sort(u[:, 0], kind="stable")
        else:
            Q = random_rotation(d, rot_gen)
            pw = Q.T @ work.T
            pu = np.sort(Q.T @ u.T, axis=1)
            order = np.argsort(pw, axis=1)
            shift = np.empty_like(pw)
            np.put_along_axis(shift, order, pu - np.take_along_axis(pw, order, axis=1), axis=1)
            candidate = work + config.step_damping * (Q @ shift).T
        new_cost = _sliced_cost_sorted(_sorted_projections(candidate, diag_dirs), target_diag)
        if new_cost > cost:
            continue
        improvement = (cost - new_cost) / cost if cost > 0 else 0.0
        work, cost = candidate, new_cost
        if cost == 0.0 or improvement < config.tolerance:
            break

    transformed = np.clip(work, 0.0, 1.0) if config.clamp else work
    return TransportResult(transformed, None, iterations, initial, cost, "projection")


def transform_exact(source, target, config: TransportConfig = TransportConfig(), rng=0) -> TransportResult:
    x, u = _check_pair(source, target)
    diag_dirs = random_directions(config.n_diagnostic_dirs, x.shape[1], as_stream(rng).spawn(STREAM_DIAGNOSTIC))
    sigma = assignment_exact(x, u)
    transformed = u[sigma]
    initial = sliced_cost_dirs(x, u, diag_dirs)
    final = sliced_cost_dirs(transformed, u, diag_dirs)
    if config.clamp:
        transformed = np.clip(transformed, 0.0, 1.0)
    return TransportResult(transformed, sigma, 1, initial, final, "exact")


def transport(source, target, config: TransportConfig = TransportConfig(), rng=0) -> TransportResult:
    """Dispatch on ``config.method`` (resolving ``auto`` by sample size)."""
    x, u = _check_pair(source, target)
    method = config.resolve(x.shape[0])
    if method == "exact":
        return transform_exact(x, u, config, rng)
    if method == "projection":
        return transform_projection(x, u, config, rng)
    diag_dirs = random_directions(config.n_diagnostic_dirs, x.shape[1], as_stream(rng).spawn(STREAM_DIAGNOSTIC))
    cost = sliced_cost_dirs(x, u, diag_dirs)
    transformed = np.clip(x, 0.0, 1.0) if config.clamp else x.copy()
    return TransportResult(transformed, None, 0, cost, cost, "identity")
