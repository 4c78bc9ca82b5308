"""Per-interval clustering of segments and its evolution via split/merge events.

Membership follows the eps-neighbourhood graph: a cluster is a connected
component with at least two segments.  Dense / low-density is a label that
records whether the component holds a core segment (one with at least
``min_lns`` neighbours, itself included).  Singleton components are outliers.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import ContractViolation, InvariantViolation
from .geometry import Segment
from .trajectory import SegmentSet

logger = logging.getLogger(__name__)

# Above this many cells (n * n * (m + 1)) co-membership counts are summed per
# range instead of read from a cached prefix table.
PREFIX_CELL_LIMIT = 64_000_000


class Density(Enum):
    DENSE = "dense"
    LOW = "low_density"


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_lns: int

    def __post_init__(self):
        if not (self.eps > 0 and np.isfinite(self.eps)):
            raise ContractViolation(f"eps must be positive and finite, got {self.eps}")
        if int(self.min_lns) != self.min_lns or self.min_lns < 1:
            raise ContractViolation(f"min_lns must be a positive integer, got {self.min_lns}")


@dataclass(frozen=True)
class SegmentCluster:
    members: tuple
    density: Density

    def __post_init__(self):
        if not self.members:
            raise ContractViolation("a segment cluster needs at least one member")
        object.__setattr__(self, "members", tuple(sorted(self.members)))

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class IntervalClustering:
    interval_index: int
    clusters: tuple[SegmentCluster, ...]
    outliers: tuple

    @cached_property
    def _labels(self) -> dict:
        lab = {t: -1 for t in self.outliers}
        for k, c in enumerate(self.clusters):
            for t in c.members:
                lab[t] = k
        return lab

    def label_of(self, traj_id) -> int:
        """Cluster index of a trajectory's segment, -1 for an outlier."""
        return self._labels[traj_id]

    def partition(self) -> frozenset:
        return frozenset(frozenset(c.members) for c in self.clusters)


@dataclass(frozen=True)
class ClusterHistory:
    """Interval clusterings 1..m, plus the segment sets they were computed from.

    ``pools`` may be None for histories assembled by hand (e.g. in tests); the
    stability pass and the metrics need them for distances.
    """

    traj_ids: tuple
    intervals: tuple[IntervalClustering, ...]
    pools: tuple[SegmentSet, ...] | None = None

    def __post_init__(self):
        for k, ic in enumerate(self.intervals, start=1):
            if ic.interval_index != k:
                raise InvariantViolation(f"interval {k} recorded as {ic.interval_index}")

    @property
    def m(self) -> int:
        return len(self.intervals)

    def interval(self, index: int) -> IntervalClustering:
        return self.intervals[index - 1]

    def pool(self, index: int) -> SegmentSet:
        if self.pools is None:
            raise ContractViolation("history carries no segment sets")
        return self.pools[index - 1]

    @cached_property
    def labels(self) -> np.ndarray:
        """(n, m) matrix of per-interval cluster indices, -1 for outliers."""
        out = np.empty((len(self.traj_ids), self.m), dtype=np.int64)
        for k, ic in enumerate(self.intervals):
            out[:, k] = [ic.label_of(t) for t in self.traj_ids]
        out.setflags(write=False)
        return out

    @cached_property
    def _comembership_prefix(self):
        n, m = self.labels.shape
        if n * n * (m + 1) > PREFIX_CELL_LIMIT:
            return None
        prefix = np.zeros((m + 1, n, n), dtype=np.uint16 if m < 2**16 else np.uint32)
        for t in range(m):
            prefix[t + 1] = prefix[t] + _same_cluster(self.labels[:, t])
        return prefix

    def comembership(self, start: int, end: int) -> np.ndarray:
        """(n, n) count of intervals in [start, end] where two trajectories share a cluster."""
        prefix = self._comembership_prefix
        if prefix is not None:
            return prefix[end].astype(np.int64) - prefix[start - 1]
        total = np.zeros((len(self.traj_ids),) * 2, dtype=np.int64)
        for t in range(start - 1, end):
            total += _same_cluster(self.labels[:, t])
        return total


def _same_cluster(labels: np.ndarray) -> np.ndarray:
    return (labels[:, None] == labels[None, :]) & (labels >= 0)[:, None]


def components(adj: np.ndarray) -> list[list[int]]:
    """Connected components of a boolean adjacency matrix, seeded in index order."""
    n = len(adj)
    seen = np.zeros(n, dtype=bool)
    comps = []
    for root in range(n):
        if seen[root]:
            continue
        seen[root] = True
        comp, stack = [root], [root]
        while stack:
            v = stack.pop()
            for w in np.flatnonzero(adj[v] & ~seen):
                seen[w] = True
                comp.append(int(w))
                stack.append(int(w))
        comps.append(sorted(comp))
    return comps


def _density(sub_adj: np.ndarray, min_lns: int) -> Density:
    return Density.DENSE if (sub_adj.sum(axis=1) >= min_lns).any() else Density.LOW


def neighborhood(seg: Segment, pool: SegmentSet, params: DbscanParams, fast_path: bool = True) -> set:
    """Trajectories whose segment lies within eps of ``seg`` (``seg`` included)."""
    if seg.interval_index != pool.interval_index:
        raise ContractViolation("segment and pool belong to different intervals")
    row = pool.adjacency(params.eps, fast_path)[pool.row(seg.traj_id)]
    return {pool.traj_ids[k] for k in np.flatnonzero(row)}


def is_core(seg: Segment, pool: SegmentSet, params: DbscanParams) -> bool:
    return len(neighborhood(seg, pool, params)) >= params.min_lns


def segment_roles(pool: SegmentSet, params: DbscanParams) -> dict:
    """Per-segment role: 'core', 'border' or 'outlier' (classical DBSCAN terms).

    Roles are informational; cluster membership is decided by components.
    """
    adj = pool.adjacency(params.eps)
    core = adj.sum(axis=1) >= params.min_lns
    roles = {}
    for k, tid in enumerate(pool.traj_ids):
        if core[k]:
            roles[tid] = "core"
        elif (adj[k] & core).any():
            roles[tid] = "border"
        else:
            roles[tid] = "outlier"
    return roles


def _clusters_from_rows(pool, adj, row_groups, min_lns):
    out = []
    for rows in row_groups:
        rows = np.asarray(rows, dtype=np.intp)
        sub = adj[np.ix_(rows, rows)]
        out.append(SegmentCluster(tuple(pool.traj_ids[r] for r in rows), _density(sub, min_lns)))
    return out


def _finalize(interval_index, pieces) -> IntervalClustering:
    clusters = sorted((p for p in pieces if len(p) >= 2), key=lambda c: c.members[0])
    outliers = tuple(sorted(p.members[0] for p in pieces if len(p) == 1))
    return IntervalClustering(interval_index, tuple(clusters), outliers)


def dbscan_initial(pool: SegmentSet, params: DbscanParams, fast_path: bool = True) -> IntervalClustering:
    """Cluster one interval from scratch."""
    if len(pool) == 0:
        raise ContractViolation("empty segment set")
    adj = pool.adjacency(params.eps, fast_path)
    pieces = _clusters_from_rows(pool, adj, components(adj), params.min_lns)
    return _finalize(pool.interval_index, pieces)


def split(prev_cluster_members: Iterable[Hashable], pool: SegmentSet, params: DbscanParams,
          fast_path: bool = True) -> list[SegmentCluster]:
    """Re-examine a previous cluster's members in the current interval.

    Members are partitioned into the connected components of the eps-graph
    restricted to them; each component is labelled by whether it contains a
    core segment counted within the restricted set.  Lone members come back as
    low-density singletons for the merge phase.
    """
    members = sorted(set(prev_cluster_members))
    if not members:
        raise ContractViolation("split needs at least one member")
    rows = pool.rows(members)
    adj = pool.adjacency(params.eps, fast_path)
    sub = adj[np.ix_(rows, rows)]
    out = []
    for comp in components(sub):
        if len(comp) == 1:
            out.append(SegmentCluster((members[comp[0]],), Density.LOW))
        else:
            comp_rows = rows[comp]
            density = _density(adj[np.ix_(comp_rows, comp_rows)], params.min_lns)
            out.append(SegmentCluster(tuple(members[k] for k in comp), density))
    return out


def _bbox(pool: SegmentSet, members) -> np.ndarray:
    rows = pool.rows(members)
    pts = np.concatenate([pool.starts[rows], pool.ends[rows]])
    return np.concatenate([pts.min(axis=0), pts.max(axis=0)])


def _boxes_touch(b1, b2, eps) -> bool:
    return bool(np.all(b1[:2] - eps <= b2[2:] + eps) and np.all(b2[:2] - eps <= b1[2:] + eps))


def is_mergeable(c1: SegmentCluster, c2: SegmentCluster, pool: SegmentSet, params: DbscanParams) -> bool:
    """Cheap prefilter: endpoint bounding boxes, each grown by eps, intersect.

    Sound because a pair within average distance eps must be within eps at
    some instant, and positions stay inside their box.
    """
    return _boxes_touch(_bbox(pool, c1.members), _bbox(pool, c2.members), params.eps)


def merge(c1: SegmentCluster, c2: SegmentCluster, pool: SegmentSet, params: DbscanParams,
          fast_path: bool = True) -> SegmentCluster | None:
    """Union of two clusters if any cross pair is within eps, else None."""
    if set(c1.members) & set(c2.members):
        raise ContractViolation("merge needs disjoint clusters")
    adj = pool.adjacency(params.eps, fast_path)
    r1, r2 = pool.rows(c1.members), pool.rows(c2.members)
    if not adj[np.ix_(r1, r2)].any():
        return None
    rows = np.concatenate([r1, r2])
    merged = SegmentCluster(c1.members + c2.members, _density(adj[np.ix_(rows, rows)], params.min_lns))
    if len(merged) != len(c1) + len(c2):
        raise InvariantViolation("merged cluster lost members")
    return merged


def _merge_to_fixed_point(pieces, pool, params, fast_path):
    pieces = sorted(pieces, key=lambda p: p.members[0])
    boxes = [_bbox(pool, p.members) for p in pieces]
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(pieces):
            j = i + 1
            while j < len(pieces):
                merged = None
                if _boxes_touch(boxes[i], boxes[j], params.eps):
                    merged = merge(pieces[i], pieces[j], pool, params, fast_path)
                if merged is None:
                    j += 1
                    continue
                pieces[i] = merged
                boxes[i] = np.concatenate([np.minimum(boxes[i][:2], boxes[j][:2]),
                                           np.maximum(boxes[i][2:], boxes[j][2:])])
                del pieces[j], boxes[j]
                changed = True
            i += 1
    return pieces


def _check_partition(ic: IntervalClustering, traj_ids) -> None:
    seen = [t for c in ic.clusters for t in c.members] + list(ic.outliers)
    if len(seen) != len(traj_ids) or set(seen) != set(traj_ids):
        raise InvariantViolation(f"interval {ic.interval_index}: clusters and outliers do not partition the ids")


def evolve(segment_sets: Sequence[SegmentSet], params: DbscanParams, fast_path: bool = True,
           threads: int = 1) -> ClusterHistory:
    """Cluster interval 1 from scratch, then carry clusters forward.

    For every later interval each previous cluster is split, previous
    outliers join as singleton candidates, and candidates are merged pairwise
    until no pair merges.
    """
    if not segment_sets:
        raise ContractViolation("evolve needs at least one interval")
    traj_ids = segment_sets[0].traj_ids
    for pool in segment_sets:
        if pool.traj_ids != traj_ids:
            raise ContractViolation(f"interval {pool.interval_index} has a different trajectory set")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(lambda p: p.adjacency(params.eps, fast_path), segment_sets))

    current = dbscan_initial(segment_sets[0], params, fast_path)
    _check_partition(current, traj_ids)
    history = [current]
    for pool in segment_sets[1:]:
        pieces = []
        for c in current.clusters:
            pieces.extend(split(c.members, pool, params, fast_path))
        pieces.extend(SegmentCluster((t,), Density.LOW) for t in current.outliers)
        pieces = _merge_to_fixed_point(pieces, pool, params, fast_path)
        current = _finalize(pool.interval_index, pieces)
        _check_partition(current, traj_ids)
        history.append(current)
    logger.debug("evolved %d intervals over %d trajectories", len(history), len(traj_ids))
    return ClusterHistory(tuple(traj_ids), tuple(history), tuple(segment_sets))
