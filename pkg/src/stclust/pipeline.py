"""End-to-end run: preprocess, evolve, whole/sub clustering, stability pass, metrics, outputs."""

from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io
from .errors import ConfigError, UndefinedMetric
from .evaluation import ari, format_silhouette, nmi, silhouette, trajectory_distance_matrix
from .segment_clustering import ClusterHistory, DbscanParams, evolve
from .stability import MU_SCOPES, stabilize
from .trajectory import RawTrack, Trajectory, preprocess, segmentize
from .trajectory_clustering import (
    WholeClustering,
    WindowParams,
    count_summary,
    sub_trajectory_clusters,
    whole_trajectory_clusters,
)

logger = logging.getLogger(__name__)

MODES = ("whole", "sub", "both")


@dataclass
class PipelineConfig:
    input: str | None = None
    out: str | None = None
    eps: float = 1.0
    min_lns: int = 2
    T: int | None = None
    window: int | None = None
    step: int | None = None
    mode: str = "whole"
    stc_enabled: bool = True
    mu_min_scope: str = "per-cluster"
    truth: str | None = None
    seed: int = 0
    threads: int = 1
    fast_path: bool = True
    nmi_average: str = "arithmetic"
    include_timings: bool = False

    def validate(self) -> "PipelineConfig":
        if not (isinstance(self.eps, (int, float)) and np.isfinite(self.eps) and self.eps > 0):
            raise ConfigError(f"eps must be a positive number, got {self.eps!r}")
        if int(self.min_lns) != self.min_lns or self.min_lns < 1:
            raise ConfigError(f"min_lns must be a positive integer, got {self.min_lns!r}")
        if self.T is not None and self.T < 2:
            raise ConfigError(f"resample length T must be >= 2, got {self.T}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.mode in ("sub", "both"):
            if self.window is None or self.step is None:
                raise ConfigError("sub-trajectory mode needs --window and --step")
            if self.window < 1 or self.step < 1:
                raise ConfigError("window and step must be positive")
        if self.mu_min_scope not in MU_SCOPES:
            raise ConfigError(f"mu_min_scope must be one of {MU_SCOPES}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.nmi_average not in ("arithmetic", "max"):
            raise ConfigError("nmi_average must be 'arithmetic' or 'max'")
        return self


@dataclass
class RunReport:
    config: dict
    timings: dict = field(default_factory=dict)
    n_trajectories: int = 0
    T: int = 0
    m: int = 0
    dropped: list = field(default_factory=list)
    n_clusters: int | None = None
    outliers_pre_stc: int | None = None
    outliers_post_stc: int | None = None
    absorbed: list = field(default_factory=list)
    sub: dict | None = None
    metrics: dict = field(default_factory=dict)

    def to_dict(self, include_timings: bool = False) -> dict:
        d = asdict(self)
        if not include_timings:
            d.pop("timings")
        return d


@dataclass
class RunResult:
    """Everything a run produced, for callers that want more than the report."""

    report: RunReport
    trajectories: list
    history: ClusterHistory
    whole_pre: WholeClustering | None = None
    whole: WholeClustering | None = None
    sub: list | None = None
    stability: list | None = None


class _Clock:
    def __init__(self):
        self.timings = {}
        self.stage = None

    @contextmanager
    def __call__(self, name):
        self.stage = name
        t0 = time.perf_counter()
        try:
            yield
        except Exception as exc:
            exc.stage = name
            raise
        self.timings[name] = time.perf_counter() - t0
        logger.info("stage %s took %.3fs", name, self.timings[name])


# Settings that may differ between runs without changing any result.
_UNREPORTED = ("out", "threads", "include_timings")


def _report_config(config: PipelineConfig) -> dict:
    return {k: v for k, v in asdict(config).items() if k not in _UNREPORTED}


def _silhouette_entry(labels, dmat, ids):
    try:
        mean, std, _ = silhouette(labels, dmat, ids)
    except UndefinedMetric:
        return None
    return {"mean": mean, "std": std, "display": format_silhouette(mean, std)}


def run_pipeline(config: PipelineConfig, tracks: Sequence[RawTrack] | None = None,
                 trajectories: Sequence[Trajectory] | None = None, write: bool = True) -> RunResult:
    """Run every stage in order; artifacts go to ``config.out`` when ``write`` is set.

    Input comes from ``trajectories`` (already resampled), ``tracks`` or the
    CSV at ``config.input``, in that order of preference.
    """
    config.validate()
    clock = _Clock()
    params = DbscanParams(float(config.eps), int(config.min_lns))
    report = RunReport(config=_report_config(config))

    with clock("preprocess"):
        if trajectories is None:
            if tracks is None:
                if config.input is None:
                    raise ConfigError("no input given")
                tracks = io.ingest_csv(config.input, report.dropped)
            prep = preprocess(tracks, config.T)
            trajectories = prep.trajectories
            report.dropped.extend(prep.dropped)
        trajectories = sorted(trajectories, key=lambda tr: tr.traj_id)
        if not trajectories:
            raise ConfigError("no usable trajectories")

    with clock("segmentize"):
        sets = segmentize(trajectories)
    report.n_trajectories, report.m = len(trajectories), len(sets)
    report.T = report.m + 1

    with clock("split_merge"):
        history = evolve(sets, params, fast_path=config.fast_path, threads=config.threads)

    result = RunResult(report, list(trajectories), history)
    truth = io.read_labels_csv(config.truth) if config.truth else None

    if config.mode in ("whole", "both"):
        with clock("whole"):
            whole = whole_trajectory_clusters(history)
        result.whole_pre = result.whole = whole
        report.n_clusters = len(whole.clusters)
        report.outliers_pre_stc = len(whole.outliers)
        if config.stc_enabled:
            with clock("stc"):
                post, reports = stabilize(whole, history, params, mu_min_scope=config.mu_min_scope)
            result.whole, result.stability = post, reports
            report.absorbed = sorted(set(whole.outliers) - set(post.outliers))
        report.outliers_post_stc = len(result.whole.outliers)

    if config.mode in ("sub", "both"):
        if config.window > history.m:
            raise ConfigError(f"window {config.window} exceeds the {history.m} available intervals")
        with clock("sub"):
            result.sub = sub_trajectory_clusters(history, WindowParams(config.window, config.step))
        report.sub = count_summary(result.sub)

    if result.whole is not None:
        with clock("metrics"):
            ids = history.traj_ids
            dmat = trajectory_distance_matrix(history)
            m = {"silhouette_pre_stc": _silhouette_entry(result.whole_pre.labels(), dmat, ids)}
            if config.stc_enabled:
                m["silhouette_post_stc"] = _silhouette_entry(result.whole.labels(), dmat, ids)
            if truth is not None:
                pred = result.whole.labels()
                missing = set(pred) - set(truth)
                if missing:
                    raise ConfigError(f"truth file lacks {len(missing)} trajectories, e.g. {sorted(missing)[:3]}")
                sub_truth = {t: truth[t] for t in pred}
                m["nmi"] = nmi(pred, sub_truth, average=config.nmi_average)
                m["ari"] = ari(pred, sub_truth)
            report.metrics = m

    report.timings = clock.timings
    if write and config.out:
        with clock("write"):
            write_outputs(result, config.out, include_timings=config.include_timings)
    return result


def _history_rows(history: ClusterHistory):
    for ic in history.intervals:
        yield {
            "interval": ic.interval_index,
            "clusters": [
                {"id": k, "density": c.density.value, "members": list(c.members)}
                for k, c in enumerate(ic.clusters)
            ],
            "outliers": list(ic.outliers),
        }


def _stability_json(reports):
    out = []
    for r in reports:
        out.append({
            "cluster_id": r.cluster_id,
            "mu_min": r.mu_min,
            "outliers": [
                {
                    "traj_id": d.traj_id,
                    "best_member_id": d.best_member_id,
                    "lmd": d.lmd,
                    "rmd": d.rmd,
                    "absorbed": d.absorbed,
                    "placed_cluster": d.placed_cluster,
                    "mad": d.mad,
                }
                for d in r.outliers
            ],
        })
    return out


def _write_plotdata(result: RunResult, folder: Path):
    import csv

    folder.mkdir(parents=True, exist_ok=True)
    history = result.history
    with (folder / "membership_grid.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["traj_id"] + [f"i{k}" for k in range(1, history.m + 1)])
        for tid, row in zip(history.traj_ids, history.labels):
            w.writerow([tid] + [int(v >= 0) for v in row])

    if result.stability is None:
        return
    pre = result.whole_pre
    with (folder / "outlier_distances.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["traj_id", "cluster_id", "interval", "member_id", "distance"])
        for rep in result.stability:
            members = pre.clusters[rep.cluster_id]
            for d in rep.outliers:
                for i in range(1, history.m + 1):
                    pool = history.pool(i)
                    for c in members:
                        w.writerow([d.traj_id, rep.cluster_id, i, c, io.fmt_float(pool.distance(d.traj_id, c))])


def write_outputs(result: RunResult, out_dir, include_timings: bool = False):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if result.whole is not None:
        io.write_labels_csv(out / "assignments.csv", result.whole.labels())
        if result.stability is not None:
            io.write_labels_csv(out / "assignments_pre_stc.csv", result.whole_pre.labels())
            io.write_json(out / "stability.json", _stability_json(result.stability))
    io.write_jsonl(out / "history.jsonl", _history_rows(result.history))
    if result.sub is not None:
        io.write_json(out / "subclusters.json", [
            {"range": list(rc.range), "clusters": [list(c) for c in rc.clustering.clusters],
             "outliers": list(rc.clustering.outliers)}
            for rc in result.sub
        ])
    io.write_json(out / "report.json", result.report.to_dict(include_timings))
    _write_plotdata(result, out / "plotdata")
