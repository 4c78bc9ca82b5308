import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import random_trajectories
from stclust.errors import ContractViolation, NoOutliers
from stclust.evaluation import silhouette, trajectory_distance_matrix
from stclust.segment_clustering import DbscanParams, evolve
from stclust.stability import (
    adjusted_distance_series,
    assign_outliers,
    deviation_sums,
    lmd_rmd,
    mean_absolute_deviation,
    mu_min,
    pair_max,
    stabilize,
)
from stclust.synthetic import CaseSpec, generate_case
from stclust.trajectory import SegmentSet, segmentize
from stclust.trajectory_clustering import WholeClustering, whole_trajectory_clusters

P = DbscanParams(1.0, 2)


def pools_from_x(xs):
    """One interval per column; every segment is vertical, so distances are |dx| exactly."""
    xs = np.asarray(xs, dtype=float)
    n, m = xs.shape
    return [
        SegmentSet(i + 1, list(range(n)), np.column_stack([xs[:, i], np.zeros(n)]),
                   np.column_stack([xs[:, i], np.ones(n)]))
        for i in range(m)
    ]


def run(xs, params=P):
    h = evolve(pools_from_x(xs), params)
    return h, whole_trajectory_clusters(h)


def probe_scene(normal=0.375, spike=1.5, spikes=(3, 4), m=20):
    """Members 0..2 at x = 0, -0.125, -0.25; probe 3 at ``normal`` except at ``spikes``."""
    probe = np.full(m, normal)
    probe[list(spikes)] = spike
    xs = np.vstack([np.zeros(m), np.full(m, -0.125), np.full(m, -0.25), probe])
    return run(xs)


def test_co_clustered_profile_is_raw():
    xs = np.vstack([np.zeros(5), np.full(5, 0.5), np.full(5, 0.25)])
    h, _ = run(xs)
    prof = adjusted_distance_series(2, 0, (0, 1), h, 1.0)
    assert all(r.in_cluster and r.delta == 0 for r in prof.records)
    assert prof.distances.tolist() == [0.25] * 5


def test_nearest_at_exactly_eps_gives_zero_delta():
    xs = np.array([[0.0, 0.0], [-0.5, -0.5], [0.5, 1.0]])
    h = evolve(pools_from_x(xs), DbscanParams(0.9, 2))
    prof = adjusted_distance_series(2, 1, (0, 1), h, 0.9)
    # in interval 2 the probe is 1.0 from member 0 and eps is 0.9
    assert prof.records[1].delta == pytest.approx(0.1)
    prof = adjusted_distance_series(2, 1, (0, 1), h, 1.0)
    assert not prof.records[1].in_cluster
    assert prof.records[1].delta == 0.0


def test_spike_profile_deltas():
    h, w = probe_scene()
    assert w.clusters == ((0, 1, 2),) and w.outliers == (3,)
    prof = adjusted_distance_series(3, 0, (0, 1, 2), h, 1.0)
    deltas = [r.delta for r in prof.records]
    assert deltas[3] == deltas[4] == 0.5
    assert sum(deltas) == 1.0
    assert prof.distances[3] == 1.0
    # the adjustment removes the spikes, so M is the worst in-cluster value
    assert pair_max(adjusted_distance_series(3, 2, (0, 1, 2), h, 1.0)) == 1.25


def test_profile_requires_member():
    h, _ = probe_scene()
    with pytest.raises(ContractViolation):
        adjusted_distance_series(3, 3, (0, 1, 2), h, 1.0)


def test_pair_max_examples():
    assert pair_max([0.0, 0.0]) == 0.0
    assert pair_max([1, 3, 2]) == 3.0
    with pytest.raises(ContractViolation):
        pair_max([])


def test_mu_min():
    h, _ = probe_scene()
    assert mu_min((0,), (3,), h, 1.0) == 1.0
    assert mu_min((0, 1, 2), (3,), h, 1.0) == 1.0
    with pytest.raises(NoOutliers):
        mu_min((0, 1, 2), (), h, 1.0)


def test_mu_min_takes_smallest_outlier():
    # 3 is chained to the cluster through 2, 1.25 from the nearest member
    m = 6
    xs = np.vstack([np.zeros(m), np.full(m, 0.25),
                    [0.5, 0.5, 3, 0.5, 0.5, 0.5],
                    np.full(m, 1.5)])
    h, w = run(xs)
    assert w.outliers == (2, 3)
    per = [mu_min((0, 1), (o,), h, 1.0) for o in (2, 3)]
    assert per == [1.0, 1.25]
    assert mu_min((0, 1), (2, 3), h, 1.0) == 1.0


def test_deviation_sums_examples():
    assert deviation_sums([2.0, 2.0], 2.0) == (0.0, 0.0)
    assert deviation_sums([1.0, 4.0], 2.0) == (1.0, 2.0)
    with pytest.raises(ContractViolation):
        deviation_sums([1.0], float("inf"))


def test_lmd_rmd_uses_raw_distances():
    h, _ = probe_scene()
    lmd, rmd = lmd_rmd(3, 0, 1.0, h)
    assert lmd == pytest.approx(18 * 0.625)
    assert rmd == pytest.approx(2 * 0.5)


def test_mean_absolute_deviation():
    assert mean_absolute_deviation([1, 2, 3]) == pytest.approx(2 / 3)
    assert mean_absolute_deviation([1, 3], mu=0) == 2.0


def test_no_outliers_is_identity():
    xs = np.vstack([np.zeros(4), np.full(4, 0.5)])
    h, w = run(xs)
    out, reports = stabilize(w, h, P)
    assert out == w
    assert [(r.cluster_id, r.mu_min, r.outliers) for r in reports] == [(0, None, ())]


def test_short_spike_absorbed_long_one_kept_out():
    h, w = probe_scene(spikes=(3, 4))
    out, reports = stabilize(w, h, P)
    assert out.clusters == ((0, 1, 2, 3),) and out.outliers == ()
    d = reports[0].outliers[0]
    assert d.absorbed and d.best_member_id == 0 and d.placed_cluster == 0
    h, w = probe_scene(spikes=range(2, 17), spike=3.0)
    out, reports = stabilize(w, h, P)
    assert out == w
    assert not reports[0].outliers[0].absorbed


def test_ties_do_not_absorb():
    # every raw distance equals mu, so LMD == RMD == 0
    m = 4
    xs = np.vstack([np.zeros(m), np.zeros(m), [1.0, 1.0, 1.0, 2.0]])
    h, w = run(xs)
    out, reports = stabilize(w, h, P)
    assert w.outliers == (2,)
    assert reports[0].mu_min == 1.0
    assert out == w


@pytest.mark.parametrize("case_id,absorbed", [(1, False), (2, False), (3, False), (4, True)])
def test_case_fixtures(case_id, absorbed):
    eps = 1.5
    members, probe = generate_case(CaseSpec(case_id, seed=0), eps)
    h = evolve(segmentize(members + [probe]), DbscanParams(eps, 2))
    w = whole_trajectory_clusters(h)
    assert w.outliers == (probe.traj_id,)
    out, reports = stabilize(w, h, DbscanParams(eps, 2))
    assert reports[0].mu_min == pytest.approx(eps)
    assert reports[0].outliers[0].absorbed is absorbed
    assert (out.outliers == ()) is absorbed


def test_stabilize_is_idempotent_on_fixtures():
    eps = 1.5
    for case_id in (1, 4):
        members, probe = generate_case(CaseSpec(case_id, seed=3), eps)
        h = evolve(segmentize(members + [probe]), DbscanParams(eps, 2))
        once, _ = stabilize(whole_trajectory_clusters(h), h, DbscanParams(eps, 2))
        twice, _ = stabilize(once, h, DbscanParams(eps, 2))
        assert once == twice


def _two_cluster_scene():
    # A = {0, 1} near x = 0, B = {2, 3} near x = 2; probe 4 sits between them
    m = 20
    probe = np.full(m, 1.0)
    probe[18], probe[19] = -1.25, 3.25
    xs = np.vstack([np.zeros(m), np.full(m, 0.125), np.full(m, 2.0), np.full(m, 1.875), probe])
    return run(xs)


def test_assignment_is_nearest_on_average():
    h, w = _two_cluster_scene()
    assert w.clusters == ((0, 1), (2, 3)) and w.outliers == (4,)
    assert assign_outliers(w, h) == {4: 0}


def test_arbitration_picks_best_silhouette():
    h, w = _two_cluster_scene()
    plain, _ = stabilize(w, h, P, arbitrate=False)
    assert plain.clusters == ((0, 1, 4), (2, 3))
    out, reports = stabilize(w, h, P, arbitrate=True)
    dmat = trajectory_distance_matrix(h)
    scores = []
    for k in range(2):
        labels = w.labels()
        labels[4] = k
        scores.append(silhouette(labels, dmat, h.traj_ids)[0])
    placed = reports[0].outliers[0].placed_cluster
    assert scores[placed] == max(scores)
    assert 4 in out.clusters[placed]


def test_global_scope_uses_smallest_mu():
    h, w = _two_cluster_scene()
    _, per = stabilize(w, h, P, mu_min_scope="per-cluster")
    _, glob = stabilize(w, h, P, mu_min_scope="global")
    mus = [r.mu_min for r in per if r.mu_min is not None]
    assert all(r.mu_min in (None, min(mus)) for r in glob)
    with pytest.raises(ContractViolation):
        stabilize(w, h, P, mu_min_scope="nope")


def test_universe_must_match():
    h, w = probe_scene()
    with pytest.raises(ContractViolation):
        stabilize(WholeClustering(((0, 1),), (2,)), h, P)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 14), st.integers(3, 8), st.floats(0.5, 5),
       st.sampled_from(["per-cluster", "global"]))
def test_structural_invariants(seed, n, T, eps, scope):
    rng = np.random.default_rng(seed)
    h = evolve(segmentize(random_trajectories(rng, n, T, step=1.0)), DbscanParams(eps, 2))
    w = whole_trajectory_clusters(h)
    out, reports = stabilize(w, h, DbscanParams(eps, 2), mu_min_scope=scope)
    assert len(out.clusters) == len(w.clusters)
    assert set(out.outliers) <= set(w.outliers)
    assert out.universe == w.universe
    for k, c in enumerate(w.clusters):
        assert set(c) <= set(out.clusters[k])
    for o in w.outliers:
        for c in w.clusters:
            for member in c:
                prof = adjusted_distance_series(o, member, c, h, eps)
                assert np.all(prof.distances <= prof.raw)
                for r in prof.records:
                    if r.in_cluster:
                        assert r.distance == r.raw
