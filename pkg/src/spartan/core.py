"""Shared numeric plumbing: sample validation, seeded RNG streams, covariance
and the symmetric PSD square root used by every bandwidth rule."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

# Logical stream labels. Each task draws from its own stream so that adding
# draws in one place never shifts another.
STREAM_SYNTHETIC = 1
STREAM_TEST = 2
STREAM_UNIFORM_TARGET = 3
STREAM_PROJECTION = 4
STREAM_DIAGNOSTIC = 5
STREAM_DESIGN = 6
STREAM_BASELINE = 7
STREAM_REPLICATE = 8


class SpartanError(Exception):
    """Base class for errors raised by this package."""


class DataError(SpartanError, ValueError):
    """Input data is malformed or violates a precondition."""


class NumericError(SpartanError, ArithmeticError):
    """A numerical routine failed (singular matrix, solver failure)."""


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    The generator is Philox (counter based) keyed by ``SeedSequence(seed,
    spawn_key=stream_id)``; identical ``(seed, stream_id)`` pairs give
    bit-identical draws on every platform numpy supports.
    """

    seed: int
    stream_id: Union[int, tuple] = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def key(self) -> tuple:
        sid = self.stream_id
        return tuple(int(s) for s in sid) if isinstance(sid, tuple) else (int(sid),)

    def spawn(self, *ids: int) -> "RngStream":
        """Child stream whose key extends this one."""
        return RngStream(self.seed, self.key + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))


def as_stream(rng) -> RngStream:
    """Accept an ``RngStream`` or a bare integer seed."""
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError(f"expected RngStream or int seed, got {type(rng).__name__}")


def derive_seed(seed: int, *key: int) -> int:
    """Deterministic 64-bit child seed (used for per-replicate seeds)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def as_sample(values, name: str = "sample") -> np.ndarray:
    """Validate and return an ``(n, d)`` float64 sample matrix.

    One-dimensional input is read as a single column.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DataError(f"{name} must be a 2-D matrix, got ndim={x.ndim}")
    if x.shape[0] < 1 or x.shape[1] < 1:
        raise DataError(f"{name} must have at least one row and one column")
    if not np.all(np.isfinite(x)):
        raise DataError(f"{name} contains NaN or infinite values")
    return np.ascontiguousarray(x)


def check_symmetric(S, name: str = "matrix") -> np.ndarray:
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DataError(f"{name} must be square")
    if not np.all(np.isfinite(S)):
        raise DataError(f"{name} has non-finite entries")
    if not np.array_equal(S, S.T):
        raise DataError(f"{name} is not symmetric")
    return S


def empirical_covariance(sample) -> np.ndarray:
    """Unbiased (``n - 1``) sample covariance, exactly symmetric."""
    x = as_sample(sample)
    n = x.shape[0]
    if n < 2:
        raise DataError("insufficient rows for covariance")
    centered = x - x.mean(axis=0)
    S = centered.T @ centered / (n - 1)
    # mirror the upper triangle so S == S.T bit for bit
    upper = np.triu(S)
    return upper + np.triu(S, 1).T


def default_ridge(S) -> float:
    """Ridge used when ``S`` is (numerically) singular, else 0.

    The threshold is ``1e-10 * trace(S) / d``; it is only applied when the
    smallest eigenvalue falls below it.
    """
    S = check_symmetric(S)
    d = S.shape[0]
    threshold = 1e-10 * float(np.trace(S)) / d
    if threshold <= 0.0:
        return 0.0
    smallest = float(np.linalg.eigvalsh(S)[0])
    return threshold if smallest < threshold else 0.0


def sym_psd_sqrt(S, ridge: float = 0.0) -> np.ndarray:
    """Symmetric square root of ``S + ridge * I``.

    Negative eigenvalues (round-off on a PSD input) are clamped to zero.
    """
    S = check_symmetric(S)
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    d = S.shape[0]
    A = S + ridge * np.eye(d)
    try:
        lam, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    lam = np.clip(lam, 0.0, None)
    R = (V * np.sqrt(lam)) @ V.T
    return (R + R.T) / 2.0
