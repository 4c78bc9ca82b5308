"""Average Euclidean distance between two co-temporal moving line segments.

Two objects moving with constant velocity over the same interval have a
relative position ``d(tau) = d0 + tau * v`` for ``tau`` in [0, 1], where
``d0`` is the start offset and ``v`` the change in offset.  The distance we
cluster on is the time average of ``|d(tau)|``, i.e. the integral of
``sqrt(a tau^2 + b tau + c)`` over the unit interval with

    a = |v|^2,   b = 2 d0.v,   c = |d0|^2.

Coordinates are treated as planar; project lon/lat data before use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from enum import Enum
from typing import Hashable, NamedTuple

import numpy as np

from .errors import ContractViolation

# a <= A_RTOL * c: integrand is nearly constant, use a second-order series.
A_RTOL = 1e-8
# 4ac - b^2 <= DISC_RTOL * 4ac (sin^2 of the angle between d0 and v): double root.
DISC_RTOL = 1e-24
FALLBACK_POINTS = 10001


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Segment:
    """Motion of one trajectory over one interval (1-based index)."""

    traj_id: Hashable
    interval_index: int
    start: Point2
    end: Point2

    def __post_init__(self):
        if self.interval_index < 1:
            raise ContractViolation(f"interval_index must be >= 1, got {self.interval_index}")
        start, end = Point2(*map(float, self.start)), Point2(*map(float, self.end))
        if not all(math.isfinite(v) for v in (*start, *end)):
            raise ContractViolation(f"non-finite coordinate in segment of {self.traj_id!r}")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)


class QuadraticCoeffs(NamedTuple):
    a: float
    b: float
    c: float


class FastPath(Enum):
    NEIGHBOR = "neighbor"
    UNKNOWN = "unknown"


def _offsets(s1: Segment, s2: Segment):
    if s1.interval_index != s2.interval_index:
        raise ContractViolation(
            f"segments belong to different intervals ({s1.interval_index} != {s2.interval_index})"
        )
    d0x = s1.start.x - s2.start.x
    d0y = s1.start.y - s2.start.y
    vx = (s1.end.x - s2.end.x) - d0x
    vy = (s1.end.y - s2.end.y) - d0y
    return d0x, d0y, vx, vy


def relative_coeffs(s1: Segment, s2: Segment) -> QuadraticCoeffs:
    d0x, d0y, vx, vy = _offsets(s1, s2)
    return QuadraticCoeffs(
        a=vx * vx + vy * vy,
        b=2.0 * (d0x * vx + d0y * vy),
        c=d0x * d0x + d0y * d0y,
    )


@lru_cache(maxsize=8)
def _simpson_grid(n_points):
    tau = np.linspace(0.0, 1.0, n_points)
    w = np.full(n_points, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    w *= 1.0 / (3.0 * (n_points - 1))
    tau.setflags(write=False)
    w.setflags(write=False)
    return tau, w


def _simpson_mean_norm(d0x, d0y, vx, vy, n_points):
    tau, w = _simpson_grid(n_points)
    x = d0x + vx * tau
    y = d0y + vy * tau
    return float(np.sqrt(x * x + y * y) @ w)


def mean_offset_norm(d0x, d0y, vx, vy) -> np.ndarray:
    """Vectorised average of ``|d0 + tau v|`` over tau in [0, 1].

    All arguments are broadcastable float arrays.  Three regimes:

    * ``a`` negligible against ``c``: the offset is (almost) constant and
      ``sqrt(c)`` is refined with a second-order series in ``(b tau + a tau^2)/c``;
    * ``d0`` parallel to ``v``: the integrand is ``sqrt(a) |tau - tau0|`` and is
      integrated piecewise;
    * otherwise the closed-form antiderivative
      ``(2a tau + b) sqrt(q) / 4a + D ln(2 sqrt(a) sqrt(q) + 2a tau + b) / 8a^(3/2)``
      with ``D = 4ac - b^2``.  When ``2a tau + b < 0`` the log argument is
      rewritten as ``D / (2 sqrt(a) sqrt(q) - (2a tau + b))`` to avoid cancellation.
    """
    d0x, d0y, vx, vy = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (d0x, d0y, vx, vy)))
    a = vx * vx + vy * vy
    b = 2.0 * (d0x * vx + d0y * vy)
    c = d0x * d0x + d0y * d0y
    cross = d0x * vy - d0y * vx
    disc = 4.0 * cross * cross  # == 4ac - b^2 without cancellation

    out = np.empty(a.shape)
    flat = a <= A_RTOL * c
    double_root = ~flat & (disc <= DISC_RTOL * 4.0 * a * c)
    general = ~flat & ~double_root

    if flat.any():
        af, bf, cf = a[flat], b[flat], c[flat]
        with np.errstate(divide="ignore", invalid="ignore"):
            first = (bf / 2.0 + af / 3.0) / cf
            second = (bf * bf / 3.0 + af * bf / 2.0 + af * af / 5.0) / (cf * cf)
            val = np.sqrt(cf) * (1.0 + first / 2.0 - second / 8.0)
        out[flat] = np.where(cf > 0.0, val, 0.0)

    if double_root.any():
        ad, bd = a[double_root], b[double_root]
        t0 = -bd / (2.0 * ad)
        inside = (t0 * t0 + (1.0 - t0) ** 2) / 2.0
        area = np.where(t0 <= 0.0, 0.5 - t0, np.where(t0 >= 1.0, t0 - 0.5, inside))
        out[double_root] = np.sqrt(ad) * area

    if general.any():
        ag, bg, cg, dg = a[general], b[general], c[general], disc[general]
        sa = np.sqrt(ag)
        r0 = np.sqrt(cg)
        r1 = np.sqrt(np.maximum(ag + bg + cg, 0.0))
        g0, g1 = bg, 2.0 * ag + bg
        with np.errstate(divide="ignore", invalid="ignore"):
            l0 = np.where(g0 >= 0.0, 2.0 * sa * r0 + g0, dg / (2.0 * sa * r0 - g0))
            l1 = np.where(g1 >= 0.0, 2.0 * sa * r1 + g1, dg / (2.0 * sa * r1 - g1))
            val = (g1 * r1 - g0 * r0) / (4.0 * ag) + dg * (np.log(l1) - np.log(l0)) / (8.0 * ag * sa)
        bad = ~(np.isfinite(l0) & np.isfinite(l1) & (l0 > 0.0) & (l1 > 0.0) & np.isfinite(val))
        if bad.any():
            where = np.flatnonzero(general)
            for k in np.flatnonzero(bad):
                src = where[k]
                val[k] = _simpson_mean_norm(
                    d0x.flat[src], d0y.flat[src], vx.flat[src], vy.flat[src], FALLBACK_POINTS
                )
        out[general] = val

    return np.maximum(out, 0.0)


def segment_distance(s1: Segment, s2: Segment) -> float:
    """Time-averaged Euclidean distance between two segments of the same interval."""
    d0x, d0y, vx, vy = _offsets(s1, s2)
    return float(mean_offset_norm(d0x, d0y, vx, vy))


def segment_distance_oracle(s1: Segment, s2: Segment, n_points: int = 10001) -> float:
    """Composite Simpson estimate of :func:`segment_distance` (test oracle)."""
    if n_points < 3 or n_points % 2 == 0:
        raise ContractViolation(f"n_points must be odd and >= 3, got {n_points}")
    d0x, d0y, vx, vy = _offsets(s1, s2)
    return float(_simpson_mean_norm(d0x, d0y, vx, vy, n_points))


def endpoint_fast_path(s1: Segment, s2: Segment, eps: float) -> FastPath:
    """NEIGHBOR when both endpoint gaps are within eps.

    The norm is convex, so the averaged distance is bounded by the mean of the
    two endpoint gaps; anything else needs the full integral.
    """
    if eps < 0:
        raise ContractViolation("eps must be non-negative")
    _offsets(s1, s2)
    start_gap = math.hypot(s1.start.x - s2.start.x, s1.start.y - s2.start.y)
    end_gap = math.hypot(s1.end.x - s2.end.x, s1.end.y - s2.end.y)
    if start_gap <= eps and end_gap <= eps:
        return FastPath.NEIGHBOR
    return FastPath.UNKNOWN


def pairwise_distances(starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Symmetric matrix of segment distances for n segments of one interval.

    ``starts`` and ``ends`` are (n, 2) arrays.  Only the upper triangle is
    evaluated, so ``D[i, j] == D[j, i]`` holds exactly.
    """
    n = len(starts)
    out = np.zeros((n, n))
    if n < 2:
        return out
    iu, ju = np.triu_indices(n, 1)
    vals = _pair_values(starts, ends, iu, ju)
    out[iu, ju] = vals
    out[ju, iu] = vals
    return out


def _pair_values(starts, ends, i, j):
    d0 = starts[i] - starts[j]
    d1 = ends[i] - ends[j]
    v = d1 - d0
    return mean_offset_norm(d0[:, 0], d0[:, 1], v[:, 0], v[:, 1])


def neighbor_matrix(starts: np.ndarray, ends: np.ndarray, eps: float, fast_path: bool = True,
                    distances: np.ndarray | None = None) -> np.ndarray:
    """Boolean eps-adjacency (diagonal True).

    With ``fast_path`` the integral is skipped for pairs whose start and end
    gaps are both within eps.  A precomputed distance matrix is used when given.
    """
    n = len(starts)
    adj = np.eye(n, dtype=bool)
    if n < 2:
        return adj
    iu, ju = np.triu_indices(n, 1)
    if distances is not None:
        near = distances[iu, ju] <= eps
    else:
        near = np.zeros(len(iu), dtype=bool)
        todo = np.ones(len(iu), dtype=bool)
        if fast_path:
            gs = np.hypot(*(starts[iu] - starts[ju]).T)
            ge = np.hypot(*(ends[iu] - ends[ju]).T)
            near = (gs <= eps) & (ge <= eps)
            todo = ~near
        if todo.any():
            near[todo] = _pair_values(starts, ends, iu[todo], ju[todo]) <= eps
    adj[iu, ju] = near
    adj[ju, iu] = near
    return adj
