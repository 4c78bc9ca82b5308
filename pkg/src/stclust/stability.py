"""Stability post-process: reabsorb outlier trajectories whose deviation is transient.

For an outlier ``o`` and a member ``c`` of the cluster ``o`` was assigned to,
the per-interval adjusted distance discounts the part of the gap that lies
beyond eps of the cluster (``delta``).  The per-pair maximum ``M`` of those
adjusted distances, minimised over all (outlier, member) pairs, gives the
threshold ``mu_min``.  Raw distances above ``mu_min`` add to RMD, those below
add to LMD; an outlier joins the cluster at the first member (ascending id)
where LMD > RMD.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .errors import ContractViolation, InvariantViolation, NoOutliers, UndefinedMetric
from .segment_clustering import ClusterHistory, DbscanParams
from .trajectory_clustering import WholeClustering

logger = logging.getLogger(__name__)

MU_SCOPES = ("per-cluster", "global")


@dataclass(frozen=True)
class DeviationRecord:
    interval_index: int
    in_cluster: bool
    distance: float
    delta: float
    raw: float

    def __post_init__(self):
        if self.distance < 0 or self.delta < 0:
            raise ContractViolation("distance and delta must be non-negative")
        if self.in_cluster and self.delta != 0:
            raise ContractViolation("delta must be 0 where the pair is co-clustered")


@dataclass(frozen=True)
class DeviationProfile:
    outlier: Hashable
    member: Hashable
    records: tuple[DeviationRecord, ...]

    @property
    def distances(self) -> np.ndarray:
        return np.array([r.distance for r in self.records])

    @property
    def raw(self) -> np.ndarray:
        return np.array([r.raw for r in self.records])


@dataclass(frozen=True)
class OutlierDecision:
    traj_id: Hashable
    best_member_id: Hashable | None
    lmd: float
    rmd: float
    absorbed: bool
    placed_cluster: int | None = None
    mad: float | None = None


@dataclass(frozen=True)
class StabilityReport:
    cluster_id: int
    mu_min: float | None
    outliers: tuple[OutlierDecision, ...] = ()


class _Distances:
    """Per-interval raw distances between trajectories, read from the history's pools."""

    def __init__(self, history: ClusterHistory):
        self.history = history
        self.row = {t: k for k, t in enumerate(history.traj_ids)}
        self._stack = None

    @property
    def stack(self) -> np.ndarray:
        # (m, n, n); pools are ordered by traj_id exactly like history.traj_ids
        if self._stack is None:
            self._stack = np.stack([self.history.pool(i).distances() for i in range(1, self.history.m + 1)])
        return self._stack

    def rows(self, ids) -> np.ndarray:
        try:
            return np.array([self.row[t] for t in ids], dtype=np.intp)
        except KeyError as exc:
            raise ContractViolation(f"traj_id {exc.args[0]!r} not in history") from None

    def to_members(self, outlier, members) -> np.ndarray:
        """(m, len(members)) raw distances from the outlier."""
        return self.stack[:, self.row[outlier], :][:, self.rows(members)]


def _adjusted(history, dist, outlier, members, eps):
    """Raw, adjusted, delta and co-clustered arrays, each (m, len(members))."""
    raw = dist.to_members(outlier, members)
    lab = history.labels
    lo = lab[dist.row[outlier]][:, None]
    lm = lab[dist.rows(members)].T
    together = (lo == lm) & (lo >= 0)
    delta = np.maximum(raw.min(axis=1) - eps, 0.0)[:, None]
    delta = np.where(together, 0.0, np.broadcast_to(delta, raw.shape))
    adjusted = np.where(together, raw, np.maximum(raw - delta, 0.0))
    return raw, adjusted, delta, together


def adjusted_distance_series(outlier, member, cluster_members: Sequence, history: ClusterHistory,
                             eps: float, cache: _Distances | None = None) -> DeviationProfile:
    """Per-interval adjusted distance between an outlier and one cluster member.

    Where the two segments share a segment cluster the raw distance is kept.
    Elsewhere ``delta`` is how far the outlier's nearest cluster segment lies
    beyond eps, and the distance is reduced by it (clamped at 0).
    """
    members = tuple(cluster_members)
    if member not in members:
        raise ContractViolation(f"{member!r} is not a member of the cluster")
    dist = cache or _Distances(history)
    raw, adj, delta, together = _adjusted(history, dist, outlier, members, eps)
    k = members.index(member)
    records = tuple(
        DeviationRecord(i + 1, bool(together[i, k]), float(adj[i, k]), float(delta[i, k]), float(raw[i, k]))
        for i in range(history.m)
    )
    return DeviationProfile(outlier, member, records)


def pair_max(profile: DeviationProfile | Sequence[float]) -> float:
    values = profile.distances if isinstance(profile, DeviationProfile) else np.asarray(profile, dtype=float)
    if values.size == 0:
        raise ContractViolation("empty deviation profile")
    return float(values.max())


def mu_min(members: Sequence, outliers: Sequence, history: ClusterHistory, eps: float,
           cache: _Distances | None = None) -> float:
    """Smallest per-pair maximum adjusted distance over (outlier, member) pairs."""
    if not outliers:
        raise NoOutliers("no outliers assigned to this cluster")
    if not members:
        raise ContractViolation("cluster has no members")
    dist = cache or _Distances(history)
    best = np.inf
    for o in outliers:
        _, adj, _, _ = _adjusted(history, dist, o, tuple(members), eps)
        best = min(best, float(adj.max(axis=0).min()))
    return best


def deviation_sums(distances, mu: float) -> tuple[float, float]:
    """Left and right deviation sums of raw distances around mu (ties count for neither)."""
    if not np.isfinite(mu):
        raise ContractViolation("mu must be finite")
    d = np.asarray(distances, dtype=float)
    lmd = float(np.sum(mu - d[d < mu]))
    rmd = float(np.sum(d[d > mu] - mu))
    return lmd, rmd


def lmd_rmd(outlier, member, mu: float, history: ClusterHistory,
            cache: _Distances | None = None) -> tuple[float, float]:
    """(LMD, RMD) of an outlier against one member, over raw per-interval distances."""
    dist = cache or _Distances(history)
    return deviation_sums(dist.to_members(outlier, [member])[:, 0], mu)


def mean_absolute_deviation(values, mu: float | None = None) -> float:
    """(1/n) sum |mu - x_i|; mu defaults to the sample mean."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ContractViolation("no values")
    centre = float(x.mean()) if mu is None else mu
    return float(np.mean(np.abs(centre - x)))


def assign_outliers(whole: WholeClustering, history: ClusterHistory,
                    cache: _Distances | None = None) -> dict:
    """outlier -> index of the cluster nearest on average (ties go to the lower index)."""
    dist = cache or _Distances(history)
    out = {}
    for o in whole.outliers:
        scores = [float(dist.to_members(o, c).min(axis=1).mean()) for c in whole.clusters]
        out[o] = int(np.argmin(scores))
    return out


def _candidate_clusters(o, assigned, whole, history, dist) -> list[int]:
    lab = history.labels
    lo = lab[dist.row[o]]
    cands = {assigned}
    for k, members in enumerate(whole.clusters):
        lm = lab[dist.rows(members)]
        if np.any((lm == lo[None, :]) & (lo >= 0)[None, :]):
            cands.add(k)
    return sorted(cands)


def _scan(o, members, mu, dist):
    """First member with LMD > RMD, else the member with the best margin."""
    raw = dist.to_members(o, members)
    best = None
    for k, c in enumerate(members):
        lmd, rmd = deviation_sums(raw[:, k], mu)
        if lmd > rmd:
            return c, lmd, rmd, True
        if best is None or lmd - rmd > best[1] - best[2]:
            best = (c, lmd, rmd, False)
    return best


def _silhouette_with(whole, o, k, dmat_ids, dmat):
    from .evaluation import silhouette

    labels = whole.labels()
    labels[o] = k
    try:
        return silhouette(labels, dmat, dmat_ids)[0]
    except UndefinedMetric:
        return -np.inf


def stabilize(whole: WholeClustering, history: ClusterHistory, params: DbscanParams,
              mu_min_scope: str = "per-cluster", arbitrate: bool = True):
    """Reabsorb transient outliers into their clusters; returns (clustering, reports).

    The number of clusters never changes.  Decisions are taken against the
    input clustering and committed together in ascending outlier order.
    """
    if mu_min_scope not in MU_SCOPES:
        raise ContractViolation(f"mu_min_scope must be one of {MU_SCOPES}")
    if whole.universe != frozenset(history.traj_ids):
        raise ContractViolation("clustering and history cover different trajectories")
    empty = [StabilityReport(k, None) for k in range(len(whole.clusters))]
    if not whole.outliers or not whole.clusters:
        return whole, empty

    dist = _Distances(history)
    eps = params.eps
    assigned = assign_outliers(whole, history, dist)
    by_cluster = {k: [o for o in whole.outliers if assigned[o] == k] for k in range(len(whole.clusters))}

    mus = {}
    for k, members in enumerate(whole.clusters):
        try:
            mus[k] = mu_min(members, by_cluster[k], history, eps, dist)
        except NoOutliers:
            mus[k] = None
    if mu_min_scope == "global":
        g = min(v for v in mus.values() if v is not None)
        mus = {k: (g if v is not None else None) for k, v in mus.items()}

    dmat = None
    placement = {}
    decisions = {k: [] for k in mus}
    for o in whole.outliers:
        k = assigned[o]
        best, lmd, rmd, absorbed = _scan(o, whole.clusters[k], mus[k], dist)
        target = k if absorbed else None
        if absorbed and arbitrate:
            options = [k]
            for j in _candidate_clusters(o, k, whole, history, dist):
                if j == k:
                    continue
                mu_j = mus[j] if mus[j] is not None else mu_min(whole.clusters[j], [o], history, eps, dist)
                if _scan(o, whole.clusters[j], mu_j, dist)[3]:
                    options.append(j)
            if len(options) > 1:
                if dmat is None:
                    from .evaluation import trajectory_distance_matrix

                    dmat = trajectory_distance_matrix(history)
                scores = [_silhouette_with(whole, o, j, history.traj_ids, dmat) for j in options]
                target = options[int(np.argmax(scores))]
                logger.debug("outlier %r absorbable into %s, placed in %d", o, options, target)
        if target is not None:
            placement[o] = target
        raw = dist.to_members(o, whole.clusters[k])
        mad = mean_absolute_deviation(raw.min(axis=1), mus[k])
        decisions[k].append(OutlierDecision(o, best, lmd, rmd, absorbed, target, mad))

    clusters = [list(c) for c in whole.clusters]
    for o, j in placement.items():
        clusters[j].append(o)
    new = WholeClustering(
        tuple(tuple(sorted(c)) for c in clusters),
        tuple(o for o in whole.outliers if o not in placement),
    )
    if len(new.clusters) != len(whole.clusters):
        raise InvariantViolation("stabilize changed the number of clusters")
    reports = [StabilityReport(k, mus[k], tuple(decisions[k])) for k in sorted(mus)]
    logger.info("stability: %d of %d outliers absorbed", len(placement), len(whole.outliers))
    return new, reports
