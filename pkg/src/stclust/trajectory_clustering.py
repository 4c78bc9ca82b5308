"""Whole-trajectory clustering and sliding-window sub-trajectory clustering."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractViolation
from .segment_clustering import ClusterHistory, components


@dataclass(frozen=True)
class WholeClustering:
    clusters: tuple[tuple, ...]
    outliers: tuple

    def __post_init__(self):
        for c in self.clusters:
            if len(c) < 2:
                raise ContractViolation("whole-trajectory clusters need at least 2 members")

    @property
    def universe(self) -> frozenset:
        return frozenset(self.outliers).union(*map(frozenset, self.clusters))

    def labels(self) -> dict:
        """traj_id -> cluster index, -1 for outliers."""
        out = {t: -1 for t in self.outliers}
        for k, c in enumerate(self.clusters):
            out.update((t, k) for t in c)
        return out


@dataclass(frozen=True)
class WindowParams:
    window: int
    step: int

    def __post_init__(self):
        if self.window < 1 or self.step < 1:
            raise ContractViolation("window and step must be positive")


@dataclass(frozen=True)
class RangedClustering:
    range: tuple[int, int]
    clustering: WholeClustering


def _check_range(history: ClusterHistory, rng) -> tuple[int, int]:
    start, end = int(rng[0]), int(rng[1])
    if start > end:
        raise ContractViolation(f"empty interval range [{start}, {end}]")
    if start < 1 or end > history.m:
        raise ContractViolation(f"range [{start}, {end}] outside [1, {history.m}]")
    return start, end


def whole_trajectory_clusters(history: ClusterHistory, rng: tuple[int, int] | None = None) -> WholeClustering:
    """Group trajectories whose segments share a cluster in every interval of ``rng``.

    An edge joins two trajectories when their co-membership count over the
    range equals its length; clusters are the connected components with at
    least two members, ordered by smallest member.
    """
    start, end = _check_range(history, rng if rng is not None else (1, history.m))
    count = history.comembership(start, end)
    adj = count == (end - start + 1)
    np.fill_diagonal(adj, True)
    ids = history.traj_ids
    clusters, outliers = [], []
    for comp in components(adj):
        members = tuple(sorted(ids[k] for k in comp))
        if len(members) >= 2:
            clusters.append(members)
        else:
            outliers.append(members[0])
    clusters.sort(key=lambda c: c[0])
    return WholeClustering(tuple(clusters), tuple(sorted(outliers)))


def partitions_equal(a: WholeClustering, b: WholeClustering) -> bool:
    if a.universe != b.universe:
        raise ContractViolation("clusterings cover different trajectory sets")
    return (frozenset(map(frozenset, a.clusters)) == frozenset(map(frozenset, b.clusters))
            and frozenset(a.outliers) == frozenset(b.outliers))


def window_schedule(m: int, params: WindowParams) -> list[tuple[int, int]]:
    """Window ranges [i, i + W - 1] for i = 1, 1 + S, ... while the window fits.

    If the last full window stops short of m, one extra window starting at the
    next scheduled position is emitted, clamped to end at m.
    """
    W, S = params.window, params.step
    if W > m:
        raise ContractViolation(f"window {W} exceeds the number of intervals {m}")
    windows = []
    i = 1
    while i <= m - W + 1:
        windows.append((i, i + W - 1))
        i += S
    if windows[-1][1] < m and i <= m:
        windows.append((i, m))
    return windows


def sub_trajectory_clusters(history: ClusterHistory, params: WindowParams) -> list[RangedClustering]:
    """Cluster each window, then fuse runs of consecutive identical partitions.

    A run of similar windows becomes one range from its first window's start
    to its last window's end; a window unlike both neighbours stands alone.
    """
    windows = window_schedule(history.m, params)
    results = [whole_trajectory_clusters(history, w) for w in windows]
    out = []
    k = 0
    while k < len(windows):
        j = k
        while j + 1 < len(windows) and partitions_equal(results[j], results[j + 1]):
            j += 1
        if j == k:
            out.append(RangedClustering(windows[k], results[k]))
        else:
            span = (windows[k][0], windows[j][1])
            out.append(RangedClustering(span, whole_trajectory_clusters(history, span)))
        k = j + 1
    return out


def clustering_from_labels(labels: dict) -> WholeClustering:
    """Build a WholeClustering from traj_id -> label (-1 or a singleton means outlier)."""
    groups: dict = {}
    for t, lab in labels.items():
        groups.setdefault(lab, []).append(t)
    clusters, outliers = [], list(groups.pop(-1, []))
    for members in groups.values():
        if len(members) >= 2:
            clusters.append(tuple(sorted(members)))
        else:
            outliers.extend(members)
    clusters.sort(key=lambda c: c[0])
    return WholeClustering(tuple(clusters), tuple(sorted(outliers)))


def count_summary(clusterings: Sequence[RangedClustering]) -> dict:
    return {
        "ranges": len(clusterings),
        "clusters": sum(len(rc.clustering.clusters) for rc in clusterings),
    }
