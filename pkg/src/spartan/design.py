"""Low-discrepancy design points and star discrepancy.

The Sobol generator follows Joe & Kuo's construction with 32-bit direction
integers and Gray-code ordering. Point ``i`` is computed directly as the XOR
of the direction integers selected by the bits of ``gray(i)``, so any slice of
the sequence can be produced without replaying the prefix. The all-zero
point ``i = 0`` is skipped: ``sobol(1, d)`` is ``(0.5, ..., 0.5)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._joe_kuo import JOE_KUO_D50, MAX_DIM
from .core import DataError, as_sample, as_stream

BITS = 32
MAX_POINTS = 2**20
EXACT_MAX_DIM = 3
EXACT_MAX_POINTS = 512


@dataclass(frozen=True)
class DesignPointSet:
    points: np.ndarray
    generator_tag: str = "unknown"
    meta: dict = field(default_factory=dict)

    @property
    def r(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def _direction_integers(d: int) -> np.ndarray:
    """``(d, BITS)`` array of direction integers ``v[j, k] = m_k << (BITS-1-k)``."""
    v = np.zeros((d, BITS), dtype=np.uint64)
    v[0] = [1 << (BITS - 1 - k) for k in range(BITS)]
    for j, (dim, s, a, m_init) in zip(range(1, d), JOE_KUO_D50):
        m = list(m_init)
        for k in range(s, BITS):
            new = m[k - s] ^ (m[k - s] << s)
            for ell in range(1, s):
                if (a >> (s - 1 - ell)) & 1:
                    new ^= m[k - ell] << ell
            m.append(new)
        v[j] = [m[k] << (BITS - 1 - k) for k in range(BITS)]
    return v


class SobolSequence:
    """Stateful Sobol stream; successive ``draw`` calls continue the sequence.

    ``shift`` is an optional per-dimension digital shift (XOR) in 32-bit
    integer form.
    """

    def __init__(self, d: int, shift: Optional[np.ndarray] = None):
        if not 1 <= d <= MAX_DIM:
            raise DataError(f"Sobol direction numbers are tabulated for 1 <= d <= {MAX_DIM}, got d={d}")
        self.d = d
        self._v = _direction_integers(d)
        self._shift = None if shift is None else np.asarray(shift, dtype=np.uint64)
        self.cursor = 0  # number of points emitted so far

    def integers(self, start: int, stop: int) -> np.ndarray:
        """Integer form of points with 1-based indices ``start+1 .. stop``."""
        if stop > MAX_POINTS:
            raise DataError(f"at most {MAX_POINTS} Sobol points are supported")
        idx = np.arange(start + 1, stop + 1, dtype=np.uint64)
        gray = idx ^ (idx >> np.uint64(1))
        out = np.zeros((idx.size, self.d), dtype=np.uint64)
        for b in range(MAX_POINTS.bit_length()):
            bit = ((gray >> np.uint64(b)) & np.uint64(1)).astype(bool)
            if bit.any():
                out[bit] ^= self._v[:, b]
        if self._shift is not None:
            out ^= self._shift
        return out

    def draw(self, m: int) -> np.ndarray:
        ints = self.integers(self.cursor, self.cursor + m)
        self.cursor += m
        return ints.astype(np.float64) / float(2**BITS)


def digital_shift(d: int, rng) -> np.ndarray:
    gen = as_stream(rng).generator()
    return gen.integers(0, 2**BITS, size=d, dtype=np.uint64)


def sobol(r: int, d: int, shift_seed=None) -> DesignPointSet:
    """First ``r`` (non-zero) Sobol points in ``[0, 1)^d``.

    Parameters
    ----------
    r, d : int
        Number of points and dimension; ``1 <= d <= 50``, ``1 <= r <= 2**20``.
    shift_seed : int or RngStream, optional
        When given, apply a random digital shift drawn from this stream.
    """
    if not 1 <= r <= MAX_POINTS:
        raise DataError(f"r must lie in [1, {MAX_POINTS}], got {r}")
    shift = None if shift_seed is None else digital_shift(d, shift_seed)
    seq = SobolSequence(d, shift)
    tag = "sobol-joe-kuo" if shift is None else "sobol-joe-kuo-shifted"
    return DesignPointSet(seq.draw(r), tag)


def random_uniform(r: int, d: int, rng) -> DesignPointSet:
    gen = as_stream(rng).generator()
    return DesignPointSet(gen.random((r, d)), "random-uniform")


def _points_of(points) -> np.ndarray:
    if isinstance(points, DesignPointSet):
        points = points.points
    x = as_sample(points, "points")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DataError("points must lie in [0, 1]^d")
    return x


def _grids(x: np.ndarray):
    """Per-axis sorted unique coordinates augmented by 1, and point ranks."""
    grids, ranks = [], []
    for j in range(x.shape[1]):
        g = np.union1d(x[:, j], [1.0])
        grids.append(g)
        ranks.append(np.searchsorted(g, x[:, j]))
    return grids, np.stack(ranks, axis=1)


def star_discrepancy_exact(points) -> float:
    """Exact star discrepancy by critical-corner enumeration.

    For every corner ``a`` on the product grid of point coordinates (each axis
    augmented by 1) the closed-box count gives the upper deviation
    ``count/r - vol`` and the open-box count the lower deviation
    ``vol - count/r``; D* is the largest of these. Counts come from a
    cumulative histogram built slab by slab along the first axis.
    """
    x = _points_of(points)
    r, d = x.shape
    if d > EXACT_MAX_DIM or r > EXACT_MAX_POINTS:
        raise DataError(
            f"exact star discrepancy is limited to d <= {EXACT_MAX_DIM} and r <= {EXACT_MAX_POINTS} "
            f"(got d={d}, r={r}); use star_discrepancy_estimate instead"
        )
    grids, ranks = _grids(x)
    rest_shape = tuple(g.size for g in grids[1:])
    rest_vol = np.ones(rest_shape)
    for j, g in enumerate(grids[1:]):
        shape = [1] * (d - 1)
        shape[j] = g.size
        rest_vol = rest_vol * g.reshape(shape)

    running = np.zeros(rest_shape, dtype=np.int64)
    prev_closed = np.zeros(rest_shape, dtype=np.int64)
    order = np.argsort(ranks[:, 0], kind="stable")
    bounds = np.searchsorted(ranks[order, 0], np.arange(grids[0].size + 1))
    best = 0.0
    for i, a0 in enumerate(grids[0]):
        rows = order[bounds[i]:bounds[i + 1]]
        if d == 1:
            running = running + rows.size
        elif rows.size:
            np.add.at(running, tuple(ranks[rows, 1:].T), 1)
        closed = running
        for axis in range(d - 1):
            closed = np.cumsum(closed, axis=axis)
        # open count at index k uses closed counts at k-1 on every axis
        open_ = np.zeros(rest_shape, dtype=np.int64)
        if d == 1:
            open_ = prev_closed
        else:
            open_[(slice(1, None),) * (d - 1)] = prev_closed[(slice(None, -1),) * (d - 1)]
        vol = a0 * rest_vol
        best = max(best, float(np.max(closed / r - vol)), float(np.max(vol - open_ / r)))
        prev_closed = closed
    return min(best, 1.0)


def local_discrepancies(x: np.ndarray, corners: np.ndarray) -> np.ndarray:
    """Max of upper (closed) and lower (open) deviation at each corner."""
    r = x.shape[0]
    out = np.empty(corners.shape[0])
    chunk = max(1, 2_000_000 // max(1, r * x.shape[1]))
    for s in range(0, corners.shape[0], chunk):
        c = corners[s:s + chunk]
        le = np.all(x[None, :, :] <= c[:, None, :], axis=2).sum(axis=1)
        lt = np.all(x[None, :, :] < c[:, None, :], axis=2).sum(axis=1)
        vol = np.prod(c, axis=1)
        out[s:s + chunk] = np.maximum(le / r - vol, vol - lt / r)
    return out


def star_discrepancy_estimate(points, n_corners: int, rng) -> float:
    """Lower bound on D* from ``n_corners`` corners of the coordinate grid.

    Corners are drawn row by row from one stream, so a larger ``n_corners``
    evaluates a superset of the corners of a smaller one. When ``n_corners``
    covers the whole grid every corner is evaluated and the result is exact.
    """
    if n_corners < 1:
        raise ValueError("n_corners must be at least 1")
    x = _points_of(points)
    grids, _ = _grids(x)
    sizes = np.array([g.size for g in grids])
    total = float(np.prod(sizes.astype(np.float64)))
    if n_corners >= total:
        corners = np.array(list(itertools.product(*grids)), dtype=np.float64)
    else:
        u = as_stream(rng).generator().random((n_corners, x.shape[1]))
        idx = np.minimum((u * sizes).astype(np.int64), sizes - 1)
        corners = np.stack([grids[j][idx[:, j]] for j in range(x.shape[1])], axis=1)
    return float(min(1.0, max(0.0, local_discrepancies(x, corners).max())))
