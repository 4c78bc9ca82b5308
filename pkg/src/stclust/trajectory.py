"""Trajectory representation, preprocessing and segmentation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import ContractViolation, DegenerateTrack
from .geometry import Point2, Segment, neighbor_matrix, pairwise_distances

logger = logging.getLogger(__name__)

MAX_DEFAULT_T = 512


def _frozen(arr, dtype=float):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class RawTrack:
    """Timestamped samples of one moving object, as ingested."""

    traj_id: Hashable
    times: np.ndarray
    xy: np.ndarray

    def __post_init__(self):
        times = _frozen(self.times)
        xy = _frozen(self.xy).reshape(-1, 2)
        if len(times) != len(xy):
            raise ContractViolation(f"track {self.traj_id!r}: {len(times)} timestamps for {len(xy)} positions")
        if len(times) < 2:
            raise ContractViolation(f"track {self.traj_id!r} needs at least 2 samples")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(xy))):
            raise ContractViolation(f"track {self.traj_id!r} has non-finite values")
        if np.any(np.diff(times) <= 0):
            raise ContractViolation(f"track {self.traj_id!r}: timestamps must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "xy", xy)

    @property
    def samples(self) -> list[tuple[float, Point2]]:
        return [(float(t), Point2(float(x), float(y))) for t, (x, y) in zip(self.times, self.xy)]

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Positions at virtual timestamps 1..T."""

    traj_id: Hashable
    positions: np.ndarray

    def __post_init__(self):
        pos = _frozen(self.positions).reshape(-1, 2)
        if len(pos) < 2:
            raise ContractViolation(f"trajectory {self.traj_id!r} needs T >= 2")
        if not np.all(np.isfinite(pos)):
            raise ContractViolation(f"trajectory {self.traj_id!r} has non-finite positions")
        object.__setattr__(self, "positions", pos)

    @property
    def T(self) -> int:
        return len(self.positions)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.traj_id == other.traj_id and np.array_equal(self.positions, other.positions)

    __hash__ = None


def deduplicate(track: RawTrack) -> RawTrack:
    """Collapse runs of consecutive identical positions onto their first sample."""
    xy = track.xy
    keep = np.ones(len(xy), dtype=bool)
    keep[1:] = np.any(xy[1:] != xy[:-1], axis=1)
    if keep.sum() < 2:
        raise DegenerateTrack(track.traj_id)
    if keep.all():
        return track
    return RawTrack(track.traj_id, track.times[keep], xy[keep])


def resample_uniform(track: RawTrack, T: int) -> Trajectory:
    """Linear interpolation at T equally spaced timestamps over the track's span.

    The interpolation parameter is the real timestamp, so unevenly sampled
    tracks keep their kinematics.  Both endpoints are reproduced exactly.
    """
    if T < 2:
        raise ContractViolation(f"T must be >= 2, got {T}")
    t = np.linspace(track.times[0], track.times[-1], T)
    x = np.interp(t, track.times, track.xy[:, 0])
    y = np.interp(t, track.times, track.xy[:, 1])
    pos = np.column_stack([x, y])
    pos[0] = track.xy[0]
    pos[-1] = track.xy[-1]
    return Trajectory(track.traj_id, pos)


def default_length(tracks: Sequence[RawTrack]) -> int:
    """Median sample count, clamped to [2, 512]."""
    if not tracks:
        return 2
    med = float(np.median([len(t) for t in tracks]))
    return int(min(max(round(med), 2), MAX_DEFAULT_T))


@dataclass
class PreprocessResult:
    trajectories: list[Trajectory]
    T: int
    dropped: list[dict] = field(default_factory=list)


def preprocess(tracks: Iterable[RawTrack], T: int | None = None) -> PreprocessResult:
    """Deduplicate every track, drop degenerate ones, resample to a common T."""
    kept, dropped = [], []
    for track in tracks:
        try:
            kept.append(deduplicate(track))
        except DegenerateTrack as exc:
            logger.warning("dropping track %r: %s", track.traj_id, exc)
            dropped.append({"traj_id": track.traj_id, "reason": "degenerate"})
    if T is None:
        T = default_length(kept)
    trajectories = [resample_uniform(t, T) for t in kept]
    trajectories.sort(key=lambda tr: tr.traj_id)
    return PreprocessResult(trajectories, T, dropped)


class SegmentSet:
    """All segments of one interval, one per trajectory, ordered by traj_id.

    Pairwise distances and eps-adjacency are memoised here so that split,
    merge, the stability pass and the metrics share one computation.
    """

    def __init__(self, interval_index: int, traj_ids: Sequence[Hashable], starts, ends):
        if interval_index < 1:
            raise ContractViolation("interval_index must be >= 1")
        order = sorted(range(len(traj_ids)), key=lambda k: traj_ids[k])
        self.interval_index = interval_index
        self.traj_ids = tuple(traj_ids[k] for k in order)
        if len(set(self.traj_ids)) != len(self.traj_ids):
            raise ContractViolation("duplicate traj_id in segment set")
        self.starts = _frozen(np.asarray(starts, dtype=float).reshape(-1, 2)[order])
        self.ends = _frozen(np.asarray(ends, dtype=float).reshape(-1, 2)[order])
        self._row = {tid: k for k, tid in enumerate(self.traj_ids)}
        self._distances = None
        self._adjacency = {}

    def __len__(self):
        return len(self.traj_ids)

    def __contains__(self, traj_id):
        return traj_id in self._row

    def row(self, traj_id) -> int:
        try:
            return self._row[traj_id]
        except KeyError:
            raise ContractViolation(f"traj_id {traj_id!r} not in interval {self.interval_index}") from None

    def rows(self, traj_ids) -> np.ndarray:
        return np.fromiter((self.row(t) for t in traj_ids), dtype=np.intp)

    def segment(self, traj_id) -> Segment:
        k = self.row(traj_id)
        return Segment(traj_id, self.interval_index, Point2(*self.starts[k]), Point2(*self.ends[k]))

    @property
    def segments(self) -> list[Segment]:
        return [self.segment(t) for t in self.traj_ids]

    def distances(self) -> np.ndarray:
        if self._distances is None:
            d = pairwise_distances(self.starts, self.ends)
            d.setflags(write=False)
            self._distances = d
        return self._distances

    def distance(self, a, b) -> float:
        return float(self.distances()[self.row(a), self.row(b)])

    def adjacency(self, eps: float, fast_path: bool = True) -> np.ndarray:
        key = (float(eps), bool(fast_path))
        adj = self._adjacency.get(key)
        if adj is None:
            adj = neighbor_matrix(self.starts, self.ends, eps, fast_path=fast_path, distances=self._distances)
            adj.setflags(write=False)
            self._adjacency[key] = adj
        return adj


def segmentize(trajectories: Sequence[Trajectory]) -> list[SegmentSet]:
    """Cut every trajectory into its T-1 interval segments."""
    if not trajectories:
        raise ContractViolation("no trajectories to segmentize")
    lengths = {tr.T for tr in trajectories}
    if len(lengths) != 1:
        raise ContractViolation(f"trajectories have mixed lengths {sorted(lengths)}")
    ids = [tr.traj_id for tr in trajectories]
    stack = np.stack([tr.positions for tr in trajectories])  # (n, T, 2)
    m = stack.shape[1] - 1
    return [SegmentSet(i + 1, ids, stack[:, i, :], stack[:, i + 1, :]) for i in range(m)]
