import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import closure_partition, history_from_labels
from stclust.errors import ContractViolation
from stclust.trajectory_clustering import (
    WholeClustering,
    WindowParams,
    clustering_from_labels,
    count_summary,
    partitions_equal,
    sub_trajectory_clusters,
    whole_trajectory_clusters,
    window_schedule,
)


def test_single_interval_range_equals_that_interval():
    labels = [[0, 1], [0, 1], [1, 1], [-1, 0]]
    h = history_from_labels(labels)
    w = whole_trajectory_clusters(h, (1, 1))
    assert w.clusters == ((0, 1),) and w.outliers == (2, 3)
    w2 = whole_trajectory_clusters(h, (2, 2))
    assert w2.clusters == ((0, 1, 2),) and w2.outliers == (3,)


def test_always_together():
    h = history_from_labels([[0] * 5, [0] * 5, [-1] * 5])
    assert whole_trajectory_clusters(h).clusters == ((0, 1),)


def test_range_validation():
    h = history_from_labels([[0, 0], [0, 0]])
    with pytest.raises(ContractViolation):
        whole_trajectory_clusters(h, (2, 1))
    with pytest.raises(ContractViolation):
        whole_trajectory_clusters(h, (1, 3))


def test_partitions_equal():
    a = WholeClustering(((0, 1), (2, 3)), (4,))
    b = WholeClustering(((2, 3), (0, 1)), (4,))
    c = WholeClustering(((0, 1, 2), (3, 4)), ())
    assert partitions_equal(a, a) and partitions_equal(a, b)
    assert not partitions_equal(a, c)
    with pytest.raises(ContractViolation):
        partitions_equal(a, WholeClustering(((0, 1),), ()))


def test_whole_clustering_rejects_singleton_cluster():
    with pytest.raises(ContractViolation):
        WholeClustering(((0,),), ())


def test_window_schedule_examples():
    # clamped final window [37, 50] follows the 12 full windows starting 1..34
    sched = window_schedule(50, WindowParams(15, 3))
    assert [s for s, _ in sched[:12]] == list(range(1, 35, 3))
    assert sched[-1] == (37, 50)
    assert window_schedule(15, WindowParams(5, 2)) == [(1, 5), (3, 7), (5, 9), (7, 11), (9, 13), (11, 15)]
    assert window_schedule(10, WindowParams(10, 10)) == [(1, 10)]
    assert window_schedule(10, WindowParams(4, 4)) == [(1, 4), (5, 8), (9, 10)]
    with pytest.raises(ContractViolation):
        window_schedule(5, WindowParams(6, 1))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 60), st.integers(1, 60), st.integers(1, 60))
def test_schedule_covers_all_intervals(m, W, S):
    if W > m:
        return
    sched = window_schedule(m, WindowParams(W, S))
    assert sched[0][0] == 1
    covered = set()
    for s, e in sched:
        assert 1 <= s <= e <= m
        covered.update(range(s, e + 1))
    # a step longer than the window skips intervals by construction
    if S <= W:
        assert sched[-1][1] == m
        assert covered == set(range(1, m + 1))


def test_constant_comovement_gives_one_range():
    h = history_from_labels([[0] * 12, [0] * 12, [1] * 12, [1] * 12])
    out = sub_trajectory_clusters(h, WindowParams(3, 2))
    assert len(out) == 1 and out[0].range == (1, 12)
    assert count_summary(out) == {"ranges": 1, "clusters": 2}


def test_isolated_window_kept_alone():
    # windows [1,2], [3,4], [5,6]; only the middle one differs
    cols = [[0, 0, 0, 0]] * 2 + [[0, 0, 1, 1]] * 2 + [[0, 0, 0, 0]] * 2
    h = history_from_labels(np.array(cols).T)
    out = sub_trajectory_clusters(h, WindowParams(2, 2))
    assert [rc.range for rc in out] == [(1, 2), (3, 4), (5, 6)]


def test_full_window_equals_whole():
    rng = np.random.default_rng(5)
    h = history_from_labels(rng.integers(-1, 2, size=(8, 6)))
    (rc,) = sub_trajectory_clusters(h, WindowParams(6, 6))
    assert rc.range == (1, 6)
    assert partitions_equal(rc.clustering, whole_trajectory_clusters(h))


def test_clustering_from_labels():
    w = clustering_from_labels({5: 1, 3: 1, 1: 7, 2: -1})
    assert w.clusters == ((3, 5),) and w.outliers == (1, 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 15), st.integers(1, 10), st.integers(1, 4))
def test_matches_transitive_closure(seed, n, m, k):
    labels = np.random.default_rng(seed).integers(-1, k, size=(n, m))
    w = whole_trajectory_clusters(history_from_labels(labels))
    clusters, outliers = closure_partition(labels)
    assert set(map(frozenset, w.clusters)) == clusters
    assert set(w.outliers) == outliers


def test_large_history_uses_streamed_counts(monkeypatch):
    import stclust.segment_clustering as sc

    labels = np.random.default_rng(2).integers(-1, 2, size=(10, 7))
    want = whole_trajectory_clusters(history_from_labels(labels), (2, 6))
    monkeypatch.setattr(sc, "PREFIX_CELL_LIMIT", 0)
    got = whole_trajectory_clusters(history_from_labels(labels), (2, 6))
    assert got == want
