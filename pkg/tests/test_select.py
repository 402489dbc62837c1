import numpy as np
import pytest
from scipy.spatial.distance import cdist

from spartan.core import DataError, RngStream
from spartan.design import sobol
from spartan.kdtree import linear_scan_nn
from spartan.select import (
    DesignConfig,
    SequentialState,
    kmedoids,
    match_design,
    select,
    spartan,
    uniform_select,
)
from spartan.synthetic import make_distribution, sample
from spartan.transport import TransportConfig


def test_match_design_without_replacement_matches_greedy_scan():
    g = np.random.default_rng(0)
    cloud = g.random((300, 2))
    design = sobol(100, 2)
    idx = match_design(cloud, design)
    used = np.zeros(300, bool)
    for k, s in enumerate(design.points):
        i = linear_scan_nn(cloud, s, used)
        assert idx[k] == i
        used[i] = True


def test_match_design_with_replacement_allows_repeats():
    cloud = np.array([[0.5, 0.5], [0.0, 0.0]])
    idx = match_design(cloud, sobol(3, 2), policy="with")
    assert idx.tolist() == [0, 0, 0]
    with pytest.raises(DataError):
        match_design(cloud, sobol(3, 2))
    with pytest.raises(ValueError):
        match_design(cloud, sobol(1, 2), policy="maybe")


def test_spartan_distinct_and_deterministic():
    x = sample(make_distribution("d2", 3), 1500, RngStream(1))
    a = spartan(x, 80, rng=RngStream(5))
    b = spartan(x, 80, rng=RngStream(5))
    assert np.array_equal(a.indices, b.indices)
    assert len(set(a.indices.tolist())) == 80
    assert a.transport_diag["method"] == "exact"
    assert a.design_used.r == 80


def test_spartan_prefix_property():
    x = sample(make_distribution("d1", 2), 1000, RngStream(2))
    big = spartan(x, 200, rng=RngStream(3)).indices
    for r in (1, 10, 57):
        assert np.array_equal(spartan(x, r, rng=RngStream(3)).indices, big[:r])


def test_sequential_equals_batch():
    x = sample(make_distribution("d3", 2), 800, RngStream(4))
    tc = TransportConfig(method="projection")
    batch = spartan(x, 50, tc, rng=RngStream(6)).indices
    state = SequentialState(x, tc, rng=RngStream(6))
    picks = [state.next() for _ in range(50)]
    assert picks == batch.tolist()
    assert state.remaining == 750


def test_scrambled_design_differs_but_is_valid():
    x = sample(make_distribution("d1", 2), 500, RngStream(7))
    a = spartan(x, 40, design_config=DesignConfig(scramble=True), rng=RngStream(1)).indices
    b = spartan(x, 40, rng=RngStream(1)).indices
    assert len(set(a.tolist())) == 40
    assert not np.array_equal(a, b)


def test_spartan_identity_on_cube_data():
    # with no transport the selection is plain design matching on the clamped data
    g = np.random.default_rng(8)
    x = g.random((400, 2))
    res = spartan(x, 30, TransportConfig(max_iterations=0), rng=RngStream(0))
    assert np.array_equal(res.indices, match_design(x, sobol(30, 2)))


def test_spartan_rejects_bad_r():
    x = np.random.default_rng(0).random((10, 2))
    with pytest.raises(DataError):
        spartan(x, 11)
    with pytest.raises(DataError):
        spartan(x, 0)


def test_uniform_select():
    idx = uniform_select(50, 50, RngStream(1))
    assert sorted(idx.tolist()) == list(range(50))
    assert np.array_equal(uniform_select(50, 10, RngStream(1)), idx[:10])
    with pytest.raises(DataError):
        uniform_select(5, 6, RngStream(1))


def objective(x, medoids):
    return float(cdist(x, x[medoids]).min(axis=1).sum())


def test_kmedoids_trace_monotone_and_consistent():
    x = sample(make_distribution("d2", 2), 600, RngStream(9))
    res = kmedoids(x, 12, rng=RngStream(2))
    assert len(set(res.medoids.tolist())) == 12
    assert all(b <= a + 1e-9 for a, b in zip(res.objective_trace, res.objective_trace[1:]))
    assert res.objective == pytest.approx(objective(x, res.medoids), rel=1e-9)


def test_kmedoids_finds_obvious_clusters():
    g = np.random.default_rng(3)
    centres = np.array([[0, 0], [10, 0], [0, 10]], float)
    x = np.vstack([c + 0.1 * g.normal(size=(30, 2)) for c in centres])
    med = kmedoids(x, 3, rng=RngStream(0)).medoids
    assert sorted((med // 30).tolist()) == [0, 1, 2]


def test_kmedoids_local_optimality_small():
    # no single swap improves the objective (exhaustive check)
    x = np.random.default_rng(4).normal(size=(40, 2))
    med = kmedoids(x, 4, rng=RngStream(1), n_candidates=10_000).medoids.tolist()
    base = objective(x, med)
    for pos in range(4):
        for h in range(40):
            if h in med:
                continue
            trial = med.copy()
            trial[pos] = h
            assert objective(x, trial) >= base - 1e-9


def test_kmedoids_clara_path():
    x = np.random.default_rng(5).normal(size=(3000, 2))
    res = kmedoids(x, 5, rng=RngStream(0), clara_threshold=1000, clara_draws=2)
    assert res.full_objective == pytest.approx(objective(x, res.medoids), rel=1e-9)


def test_select_dispatch():
    x = np.random.default_rng(6).normal(size=(200, 2))
    for m in ("spartan", "uniform", "kmedoids"):
        res = select(x, 10, m, RngStream(1))
        assert res.method == m and len(res) == 10
    with pytest.raises(DataError):
        select(x, 10, "grid")
