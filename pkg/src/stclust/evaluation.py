"""Clustering quality: silhouette over trajectory distances, NMI and ARI against labels."""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .errors import ContractViolation, UndefinedMetric
from .segment_clustering import ClusterHistory


def trajectory_distance(a, b, history: ClusterHistory) -> float:
    """Mean over intervals of the segment distance between two trajectories."""
    if a == b:
        return 0.0
    vals = [history.pool(i).distance(a, b) for i in range(1, history.m + 1)]
    return float(np.mean(vals))


def trajectory_distance_matrix(history: ClusterHistory) -> np.ndarray:
    """(n, n) trajectory distances, rows ordered like ``history.traj_ids``."""
    n = len(history.traj_ids)
    total = np.zeros((n, n))
    for i in range(1, history.m + 1):
        total += history.pool(i).distances()
    out = total / history.m
    out = (out + out.T) / 2.0
    np.fill_diagonal(out, 0.0)
    return out


def silhouette(labels: Mapping, dmat: np.ndarray, ids: Sequence):
    """Mean and population std of silhouette scores, plus the per-trajectory scores.

    ``labels`` maps traj_id -> cluster label (-1 = outlier, not scored).
    ``dmat`` rows follow ``ids``.  Members of singleton clusters score 0.
    """
    ids = list(ids)
    if set(labels) != set(ids):
        raise ContractViolation("labels and distance matrix cover different trajectories")
    lab = np.array([labels[t] for t in ids])
    scored = np.flatnonzero(lab != -1)
    classes = sorted(set(lab[scored].tolist()))
    if len(classes) < 2:
        raise UndefinedMetric("silhouette needs at least two clusters")
    d = np.asarray(dmat, dtype=float)
    masks = {c: (lab == c) for c in classes}
    sizes = {c: int(masks[c].sum()) for c in classes}
    scores = {}
    for i in scored:
        own = lab[i]
        if sizes[own] == 1:
            scores[ids[i]] = 0.0
            continue
        a = d[i, masks[own]].sum() / (sizes[own] - 1)
        b = min(d[i, masks[c]].mean() for c in classes if c != own)
        denom = max(a, b)
        scores[ids[i]] = 0.0 if denom == 0 else float((b - a) / denom)
    vals = np.array(list(scores.values()))
    return float(vals.mean()), float(vals.std()), scores


def format_silhouette(mean: float, std: float) -> str:
    return f"{mean:.3f} ± {std:.3f}"


def _contingency(pred: Mapping, truth: Mapping) -> np.ndarray:
    if set(pred) != set(truth):
        raise ContractViolation("pred and truth cover different trajectories")
    keys = sorted(pred, key=repr)
    p = [pred[k] for k in keys]
    t = [truth[k] for k in keys]
    _, pi = np.unique(np.array(p, dtype=object).astype(str), return_inverse=True)
    _, ti = np.unique(np.array(t, dtype=object).astype(str), return_inverse=True)
    table = np.zeros((pi.max() + 1, ti.max() + 1), dtype=np.int64)
    np.add.at(table, (pi, ti), 1)
    return table


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(pred: Mapping, truth: Mapping, average: str = "arithmetic") -> float:
    """Normalised mutual information; -1 (outlier) is an ordinary class here."""
    if average not in ("arithmetic", "max"):
        raise ContractViolation("average must be 'arithmetic' or 'max'")
    table = _contingency(pred, truth)
    n = table.sum()
    if n == 0:
        raise ContractViolation("empty labelling")
    hp = _entropy(table.sum(axis=1))
    ht = _entropy(table.sum(axis=0))
    if hp == 0 and ht == 0:
        return 1.0
    nz = table > 0
    outer = np.outer(table.sum(axis=1), table.sum(axis=0))
    mi = float((table[nz] / n * np.log(table[nz] * n / outer[nz])).sum())
    norm = (hp + ht) / 2.0 if average == "arithmetic" else max(hp, ht)
    return float(min(max(mi / norm, 0.0), 1.0))


def _pairs(x):
    return x * (x - 1) / 2.0


def ari(pred: Mapping, truth: Mapping) -> float:
    """Adjusted Rand index from pair counts."""
    table = _contingency(pred, truth)
    n = int(table.sum())
    index = _pairs(table).sum()
    rows = _pairs(table.sum(axis=1)).sum()
    cols = _pairs(table.sum(axis=0)).sum()
    total = _pairs(n)
    expected = rows * cols / total if total else 0.0
    top = (rows + cols) / 2.0
    if math.isclose(top, expected):
        return 1.0
    return float((index - expected) / (top - expected))
