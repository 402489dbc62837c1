import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spartan.core import DataError
from spartan.kdtree import KdTree, kdtree_build, kdtree_nn, linear_scan_nn


def test_matches_linear_scan_on_random_triples():
    g = np.random.default_rng(0)
    for _ in range(300):
        n, d = int(g.integers(1, 300)), int(g.integers(1, 6))
        pts = g.normal(size=(n, d))
        q = g.normal(size=d)
        exclude = g.random(n) < 0.3
        exclude[int(g.integers(n))] = False
        tree = kdtree_build(pts, leaf_size=int(g.integers(1, 20)))
        assert kdtree_nn(tree, q) == linear_scan_nn(pts, q)
        assert kdtree_nn(tree, q, exclude) == linear_scan_nn(pts, q, exclude)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 40), st.integers(1, 3))
def test_ties_break_to_lowest_index(seed, n, d):
    g = np.random.default_rng(seed)
    pts = g.integers(0, 3, size=(n, d)).astype(float)  # many duplicates
    q = g.integers(0, 3, size=d).astype(float)
    tree = KdTree(pts, leaf_size=2)
    assert tree.query(q) == linear_scan_nn(pts, q)


def test_mask_sequence_matches_scan():
    g = np.random.default_rng(1)
    pts = g.random((500, 3))
    tree = KdTree(pts)
    mask = tree.new_mask()
    used = np.zeros(500, bool)
    for _ in range(500):
        q = g.random(3)
        i = tree.query(q, mask)
        assert i == linear_scan_nn(pts, q, used)
        mask.mark(i)
        used[i] = True
    assert mask.n_available == 0
    with pytest.raises(DataError):
        tree.query(g.random(3), mask)


def test_mark_is_idempotent():
    tree = KdTree(np.random.default_rng(2).random((50, 2)))
    mask = tree.new_mask()
    mask.mark(3)
    mask.mark(3)
    assert mask.n_available == 49


def test_all_excluded_and_bad_inputs():
    pts = np.zeros((4, 2))
    tree = KdTree(pts)
    with pytest.raises(DataError):
        kdtree_nn(tree, [0.0, 0.0], np.ones(4, bool))
    with pytest.raises(DataError):
        tree.query([0.0, 0.0, 0.0])
    with pytest.raises(DataError):
        tree.new_mask(np.ones(3, bool))


def test_permutation_bookkeeping():
    tree = KdTree(np.random.default_rng(3).random((1000, 4)), leaf_size=8)
    assert sorted(tree.perm.tolist()) == list(range(1000))
    assert np.array_equal(tree.position[tree.perm], np.arange(1000))
