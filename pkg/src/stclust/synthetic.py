"""Deterministic fixture generators: the crossed-corridor scene and the four stability cases.

All randomness goes through ``numpy.random.Generator(PCG64(seed))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .trajectory import Trajectory


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class CorridorSpec:
    """Six objects moving top to bottom in vertical lanes ``lane_gap`` apart.

    Lane order from left to right is top group, deviators, bottom group.
    The deviators are shifted right by ``deviation_offset`` at timestamps
    ``deviation_start + 1 .. deviation_end``.  Interval k joins timestamps k
    and k + 1, so the deviators' segments are displaced, fully or while
    moving out and back, exactly on intervals ``deviation_start..deviation_end``.
    """

    n_straight_top: int = 2
    n_deviators: int = 2
    n_straight_bottom: int = 2
    T: int = 50
    deviation_start: int = 20
    deviation_end: int = 30
    deviation_offset: float = 7.0
    lane_gap: float = 1.0
    jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.n_straight_top, self.n_deviators, self.n_straight_bottom) < 0:
            raise ContractViolation("lane counts must be non-negative")
        if self.T < 3:
            raise ContractViolation("T must be at least 3")
        if not (1 <= self.deviation_start < self.deviation_end <= self.T - 1):
            raise ContractViolation("need 1 <= deviation_start < deviation_end <= T - 1")
        if self.deviation_offset < 0 or self.lane_gap <= 0 or self.jitter < 0:
            raise ContractViolation("offsets must be non-negative and lane_gap positive")

    @property
    def n(self) -> int:
        return self.n_straight_top + self.n_deviators + self.n_straight_bottom

    def groups(self) -> dict:
        """traj_id -> 'top' | 'deviator' | 'bottom'."""
        names = (["top"] * self.n_straight_top + ["deviator"] * self.n_deviators
                 + ["bottom"] * self.n_straight_bottom)
        return dict(enumerate(names))


def generate_corridor(spec: CorridorSpec = CorridorSpec()) -> list[Trajectory]:
    rng = _rng(spec.seed)
    p = np.arange(1, spec.T + 1)
    y = (spec.T - p).astype(float)
    shifted = (p > spec.deviation_start) & (p <= spec.deviation_end)
    out = []
    for tid, group in spec.groups().items():
        x = np.full(spec.T, tid * spec.lane_gap)
        if group == "deviator":
            x = x + spec.deviation_offset * shifted
        pos = np.column_stack([x, y])
        if spec.jitter > 0:
            pos = pos + rng.normal(scale=spec.jitter, size=pos.shape)
        out.append(Trajectory(tid, pos))
    return out


# few / many intervals, small / large deviation
CASES = {
    1: ("few", "large"),
    2: ("many", "large"),
    3: ("many", "small"),
    4: ("few", "small"),
}
FRACTIONS = {"few": 0.1, "many": 0.6}
MAGNITUDES = {"small": 1.2, "large": 5.0}


@dataclass(frozen=True)
class CaseSpec:
    """One cluster of parallel members plus a probe that leaves it for a while.

    Members sit at ``x = -j * member_gap * eps``; the probe normally runs
    ``normal_offset * eps`` to the right of member 0 and, during a contiguous
    block of ``round(deviation_fraction * (T - 1))`` intervals, at
    ``deviation_magnitude * eps``.  The seed picks where the block sits.
    """

    case_id: int = 4
    n_cluster_members: int = 20
    T: int = 21
    deviation_fraction: float | None = None
    deviation_magnitude: float | None = None
    normal_offset: float = 0.75
    member_gap: float = 0.04
    seed: int = 0

    def __post_init__(self):
        if self.case_id not in CASES:
            raise ContractViolation(f"case_id must be one of {sorted(CASES)}")
        few_many, size = CASES[self.case_id]
        if self.deviation_fraction is None:
            object.__setattr__(self, "deviation_fraction", FRACTIONS[few_many])
        if self.deviation_magnitude is None:
            object.__setattr__(self, "deviation_magnitude", MAGNITUDES[size])
        if not 0 <= self.deviation_fraction <= 1:
            raise ContractViolation("deviation_fraction must lie in [0, 1]")
        if self.n_cluster_members < 2 or self.T < 3:
            raise ContractViolation("need at least 2 members and T >= 3")
        if (self.n_cluster_members - 1) * self.member_gap > 1:
            raise ContractViolation("members would not all lie within eps of each other")

    @property
    def deviating_intervals(self) -> int:
        return int(round(self.deviation_fraction * (self.T - 1)))

    @property
    def probe_id(self) -> int:
        return self.n_cluster_members


def case_window(spec: CaseSpec) -> tuple[int, int] | None:
    """1-based interval block [s, e] where the probe is displaced, or None."""
    F = spec.deviating_intervals
    m = spec.T - 1
    if F == 0:
        return None
    s = int(_rng(spec.seed).integers(1, m - F + 2))
    return s, s + F - 1


def generate_case(spec: CaseSpec, eps: float) -> tuple[list[Trajectory], Trajectory]:
    if eps <= 0:
        raise ContractViolation("eps must be positive")
    y = (spec.T - np.arange(1, spec.T + 1)).astype(float)
    members = [
        Trajectory(j, np.column_stack([np.full(spec.T, -j * spec.member_gap * eps), y]))
        for j in range(spec.n_cluster_members)
    ]
    x = np.full(spec.T, spec.normal_offset * eps)
    window = case_window(spec)
    if window is not None:
        s, e = window
        # interval k spans points k..k+1, so points s..e+1 (1-based) move out
        x[s - 1:e + 1] = spec.deviation_magnitude * eps
    probe = Trajectory(spec.probe_id, np.column_stack([x, y]))
    return members, probe


def generate_random_walks(n: int, T: int, seed: int = 0, spread: float = 10.0,
                          step: float = 1.0, groups: int = 4) -> list[Trajectory]:
    """Grouped noisy walks for scaling and determinism runs."""
    rng = _rng(seed)
    centres = rng.uniform(-spread, spread, size=(groups, 2))
    headings = rng.normal(size=(groups, T - 1, 2)) * step
    out = []
    for k in range(n):
        g = k % groups
        start = centres[g] + rng.normal(scale=0.3, size=2)
        steps = headings[g] + rng.normal(scale=0.1 * step, size=(T - 1, 2))
        out.append(Trajectory(k, np.vstack([start, start + np.cumsum(steps, axis=0)])))
    return out
