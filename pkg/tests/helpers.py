"""Shared builders and brute-force oracles for the test suite."""

import numpy as np

from stclust.geometry import segment_distance_oracle
from stclust.segment_clustering import ClusterHistory, Density, IntervalClustering, SegmentCluster
from stclust.trajectory import Trajectory, segmentize


def history_from_labels(labels, ids=None):
    """ClusterHistory from an (n, m) label matrix; -1 and singletons become outliers."""
    labels = np.asarray(labels)
    n, m = labels.shape
    ids = list(range(n)) if ids is None else list(ids)
    intervals = []
    for i in range(m):
        groups = {}
        for k, lab in enumerate(labels[:, i]):
            groups.setdefault(int(lab), []).append(ids[k])
        outliers = list(groups.pop(-1, []))
        clusters = []
        for members in groups.values():
            if len(members) == 1:
                outliers.extend(members)
            else:
                clusters.append(SegmentCluster(tuple(members), Density.DENSE))
        clusters.sort(key=lambda c: c.members[0])
        intervals.append(IntervalClustering(i + 1, tuple(clusters), tuple(sorted(outliers))))
    return ClusterHistory(tuple(ids), tuple(intervals))


def random_trajectories(rng, n, T, spread=10.0, step=2.0, groups=3):
    centres = rng.uniform(-spread, spread, size=(groups, 2))
    out = []
    for k in range(n):
        g = rng.integers(groups)
        start = centres[g] + rng.normal(scale=1.0, size=2)
        steps = rng.normal(scale=step, size=(T - 1, 2))
        out.append(Trajectory(k, np.vstack([start, start + np.cumsum(steps, axis=0)])))
    return out


def bfs_partition(pool, eps):
    """Connected components of the eps-graph, distances from the quadrature oracle."""
    segs = pool.segments
    n = len(segs)
    near = [[segment_distance_oracle(segs[a], segs[b], 2001) <= eps if a != b else True
             for b in range(n)] for a in range(n)]
    seen, comps = set(), []
    for root in range(n):
        if root in seen:
            continue
        comp, frontier = {root}, [root]
        seen.add(root)
        while frontier:
            v = frontier.pop(0)
            for w in range(n):
                if near[v][w] and w not in seen:
                    seen.add(w)
                    comp.add(w)
                    frontier.append(w)
        comps.append(frozenset(pool.traj_ids[k] for k in comp))
    return comps


def closure_partition(labels):
    """Transitive closure (Floyd-Warshall) of 'co-clustered in every column'."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    reach = np.zeros((n, n), dtype=bool)
    for a in range(n):
        for b in range(n):
            reach[a, b] = a == b or all(labels[a, t] == labels[b, t] and labels[a, t] >= 0
                                        for t in range(labels.shape[1]))
    for k in range(n):
        for a in range(n):
            for b in range(n):
                reach[a, b] = reach[a, b] or (reach[a, k] and reach[k, b])
    groups = {frozenset(np.flatnonzero(reach[a]).tolist()) for a in range(n)}
    clusters = {g for g in groups if len(g) >= 2}
    outliers = {next(iter(g)) for g in groups if len(g) == 1}
    return clusters, outliers
