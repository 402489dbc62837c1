"""k-d tree for exact nearest-neighbour queries with point exclusion.

Nodes split at the median of their widest coordinate, so the tree is
balanced and built in O(n log n). Points are stored in tree order; every
node owns a contiguous slice ``[lo, hi)`` of that order and a tight bounding
box used for pruning.

Ties are broken by the lowest original row index, matching a linear scan
with ``argmin``.
"""

from __future__ import annotations

import numpy as np

from .core import DataError, as_sample


def squared_distances(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    return ((points - q) ** 2).sum(axis=1)


def linear_scan_nn(points, q, exclude=None) -> int:
    """Reference nearest neighbour by brute force (lowest index on ties)."""
    dist = squared_distances(np.asarray(points, dtype=np.float64), np.asarray(q, dtype=np.float64))
    if exclude is not None:
        dist = np.where(exclude, np.inf, dist)
        if np.all(exclude):
            raise DataError("all points are excluded")
    return int(np.argmin(dist))


class KdTree:
    """Immutable k-d tree over an ``(n, d)`` point set."""

    def __init__(self, points, leaf_size: int = 16):
        x = as_sample(points, "points")
        self.n, self.d = x.shape
        self.leaf_size = max(1, int(leaf_size))
        self.perm = np.arange(self.n)
        lo, hi, left, right, box_lo, box_hi = [], [], [], [], [], []
        parent = []
        leaf_of = np.empty(self.n, dtype=np.int64)

        stack = [(0, self.n, -1, None)]
        while stack:
            a, b, par, side = stack.pop()
            node = len(lo)
            if par >= 0:
                (left if side == 0 else right)[par] = node
            idx = self.perm[a:b]
            block = x[idx]
            lo.append(a)
            hi.append(b)
            left.append(-1)
            right.append(-1)
            parent.append(par)
            box_lo.append(block.min(axis=0))
            box_hi.append(block.max(axis=0))
            if b - a <= self.leaf_size:
                leaf_of[a:b] = node
                continue
            dim = int(np.argmax(box_hi[node] - box_lo[node]))
            mid = (b - a) // 2
            part = np.argpartition(block[:, dim], mid, kind="introselect")
            self.perm[a:b] = idx[part]
            stack.append((a + mid, b, node, 1))
            stack.append((a, a + mid, node, 0))

        self.data = np.ascontiguousarray(x[self.perm])
        self.lo, self.hi = lo, hi
        self.left, self.right, self.parent = left, right, parent
        self.box_lo, self.box_hi = box_lo, box_hi
        self.leaf_of = leaf_of  # tree position -> leaf node
        self.position = np.empty(self.n, dtype=np.int64)  # original index -> tree position
        self.position[self.perm] = np.arange(self.n)

    @property
    def n_nodes(self) -> int:
        return len(self.lo)

    def new_mask(self, exclude=None) -> "ExclusionMask":
        return ExclusionMask(self, exclude)

    def _bound(self, node: int, q: np.ndarray) -> float:
        gap = np.maximum(self.box_lo[node] - q, 0.0) + np.maximum(q - self.box_hi[node], 0.0)
        return float((gap * gap).sum())

    def query(self, q, mask: "ExclusionMask | None" = None) -> int:
        """Original index of the nearest non-excluded point."""
        q = np.asarray(q, dtype=np.float64).ravel()
        if q.size != self.d:
            raise DataError(f"query has dimension {q.size}, tree has {self.d}")
        avail = None if mask is None else mask.available
        used = None if mask is None else mask.used
        if avail is not None and avail[0] == 0:
            raise DataError("all points are excluded")

        best_d, best_i = np.inf, self.n
        stack = [(0.0, 0)]
        while stack:
            bound, node = stack.pop()
            if bound > best_d or (avail is not None and avail[node] == 0):
                continue
            a, b = self.lo[node], self.hi[node]
            if self.left[node] < 0:
                dist = squared_distances(self.data[a:b], q)
                if avail is not None and avail[node] < b - a:
                    dist = np.where(used[a:b], np.inf, dist)
                m = dist.min()
                if m > best_d:
                    continue
                cand = self.perm[a:b][dist == m].min()
                if m < best_d or cand < best_i:
                    best_d, best_i = m, int(cand)
                continue
            children = []
            for child in (self.left[node], self.right[node]):
                children.append((self._bound(child, q), child))
            children.sort(reverse=True)
            for bnd, child in children:
                if bnd <= best_d:
                    stack.append((bnd, child))
        return best_i


class ExclusionMask:
    """Mutable used-mask over a :class:`KdTree` with per-node availability."""

    def __init__(self, tree: KdTree, exclude=None):
        self.tree = tree
        if exclude is None:
            used = np.zeros(tree.n, dtype=bool)
        else:
            exclude = np.asarray(exclude, dtype=bool)
            if exclude.shape != (tree.n,):
                raise DataError("exclude mask must have one entry per point")
            used = exclude[tree.perm]
        self.used = used  # tree order
        cs = np.concatenate([[0], np.cumsum(~used)])
        self.available = list((cs[tree.hi] - cs[tree.lo]).tolist())

    @property
    def n_available(self) -> int:
        return self.available[0]

    def mark(self, index: int) -> None:
        """Exclude original row ``index`` from future queries."""
        pos = self.tree.position[index]
        if self.used[pos]:
            return
        self.used[pos] = True
        node = int(self.tree.leaf_of[pos])
        while node >= 0:
            self.available[node] -= 1
            node = self.tree.parent[node]


def kdtree_build(points, leaf_size: int = 16) -> KdTree:
    return KdTree(points, leaf_size)


def kdtree_nn(tree: KdTree, query, exclude=None) -> int:
    """Nearest non-excluded point; ``exclude`` is a boolean array or mask."""
    if exclude is not None and not isinstance(exclude, ExclusionMask):
        exclude = tree.new_mask(exclude)
    return tree.query(query, exclude)
