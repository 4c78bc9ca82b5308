"""Command line entry point.

Exit codes: 0 ok, 2 bad configuration, 3 bad input data, 4 internal
invariant violation, 1 anything else (e.g. unwritable output).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import io
from .errors import ConfigError, ContractViolation, DataError, DegenerateTrack, InvariantViolation
from .evaluation import ari, nmi
from .pipeline import MODES, PipelineConfig, run_pipeline
from .stability import MU_SCOPES
from .synthetic import CaseSpec, CorridorSpec, generate_case, generate_corridor, generate_random_walks
from .trajectory import preprocess

logger = logging.getLogger("stclust")

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3, 4
LOG_LEVELS = {"error": logging.ERROR, "warning": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = os.environ.get("TRAJ_LOG", "error").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def _add_clustering_args(p, window=False):
    p.add_argument("input", help="CSV with columns traj_id,t,x,y")
    p.add_argument("--eps", type=float, required=True, help="neighbourhood radius")
    p.add_argument("--min-lns", type=int, default=2, help="neighbours (self included) for a core segment")
    p.add_argument("--resample-T", type=int, default=None, help="points per trajectory after resampling")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth", default=None, help="ground-truth labels traj_id,cluster_id")
    p.add_argument("--no-fast-path", action="store_true", help="always evaluate the distance integral")
    p.add_argument("--timings", action="store_true", help="write stage timings into report.json")
    if window:
        p.add_argument("--window", type=int, required=True)
        p.add_argument("--step", type=int, required=True)


def _add_stc_args(p):
    p.add_argument("--mu-min-scope", choices=MU_SCOPES, default="per-cluster")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stclust", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="deduplicate and resample tracks")
    p.add_argument("input")
    p.add_argument("--resample-T", type=int, default=None)
    p.add_argument("--out", default="out")

    p = sub.add_parser("cluster", help="whole-trajectory clustering, no stability pass")
    _add_clustering_args(p)

    p = sub.add_parser("subcluster", help="sliding-window sub-trajectory clustering")
    _add_clustering_args(p, window=True)

    p = sub.add_parser("stabilize", help="whole-trajectory clustering followed by the stability pass")
    _add_clustering_args(p)
    _add_stc_args(p)

    p = sub.add_parser("metrics", help="NMI and ARI of an assignment file against ground truth")
    p.add_argument("assignments")
    p.add_argument("--truth", required=True)
    p.add_argument("--nmi-average", choices=("arithmetic", "max"), default="arithmetic")

    p = sub.add_parser("generate", help="write a synthetic fixture as CSV")
    p.add_argument("kind", choices=("corridor", "case", "walks"))
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--case-id", type=int, default=4)
    p.add_argument("--eps", type=float, default=1.5)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--T", type=int, default=51)
    p.add_argument("--jitter", type=float, default=0.0)

    p = sub.add_parser("run", help="full pipeline")
    _add_clustering_args(p)
    _add_stc_args(p)
    p.add_argument("--mode", choices=MODES, default=None,
                   help="default: both when --window is given, else whole")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--step", type=int, default=None)
    p.add_argument("--no-stc", action="store_true")
    return parser


def _config(args, mode, stc) -> PipelineConfig:
    return PipelineConfig(
        input=args.input,
        out=args.out,
        eps=args.eps,
        min_lns=args.min_lns,
        T=args.resample_T,
        window=getattr(args, "window", None),
        step=getattr(args, "step", None),
        mode=mode,
        stc_enabled=stc,
        mu_min_scope=getattr(args, "mu_min_scope", "per-cluster"),
        truth=args.truth,
        seed=args.seed,
        threads=args.threads,
        fast_path=not args.no_fast_path,
        include_timings=args.timings,
    )


def _summary(result) -> str:
    r = result.report
    parts = [f"{r.n_trajectories} trajectories, m={r.m}"]
    if r.n_clusters is not None:
        parts.append(f"{r.n_clusters} clusters, outliers {r.outliers_pre_stc} -> {r.outliers_post_stc}")
    if r.sub is not None:
        parts.append(f"{r.sub['ranges']} ranges / {r.sub['clusters']} sub-clusters")
    return "; ".join(parts)


def _generate(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "corridor":
        spec = CorridorSpec(seed=args.seed, jitter=args.jitter)
        trajs = generate_corridor(spec)
        groups = {"top": 0, "deviator": 1, "bottom": 2}
        io.write_labels_csv(out / "truth.csv", {t: groups[g] for t, g in spec.groups().items()})
    elif args.kind == "case":
        members, probe = generate_case(CaseSpec(args.case_id, seed=args.seed), args.eps)
        trajs = members + [probe]
    else:
        trajs = generate_random_walks(args.n, args.T, seed=args.seed)
    io.write_tracks_csv(out / "tracks.csv", trajs)
    print(f"wrote {len(trajs)} trajectories to {out / 'tracks.csv'}")


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "preprocess":
        dropped = []
        prep = preprocess(io.ingest_csv(args.input, dropped), args.resample_T)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        io.write_tracks_csv(out / "preprocessed.csv", prep.trajectories)
        print(f"{len(prep.trajectories)} trajectories resampled to T={prep.T}, {len(dropped) + len(prep.dropped)} dropped")
        return EXIT_OK
    if cmd == "metrics":
        pred, truth = io.read_labels_csv(args.assignments), io.read_labels_csv(args.truth)
        if set(pred) != set(truth):
            raise DataError("assignments and truth cover different trajectories")
        print(io.dumps({"nmi": nmi(pred, truth, args.nmi_average), "ari": ari(pred, truth)}))
        return EXIT_OK
    if cmd == "generate":
        _generate(args)
        return EXIT_OK

    if cmd == "cluster":
        config = _config(args, "whole", False)
    elif cmd == "subcluster":
        config = _config(args, "sub", False)
    elif cmd == "stabilize":
        config = _config(args, "whole", True)
    else:
        mode = args.mode or ("both" if args.window is not None else "whole")
        config = _config(args, mode, not args.no_stc)
    result = run_pipeline(config)
    print(_summary(result))
    return EXIT_OK


def _classify(exc) -> tuple[int, str]:
    if isinstance(exc, (ConfigError, ContractViolation)):
        return EXIT_CONFIG, "configuration error"
    if isinstance(exc, (DataError, DegenerateTrack)):
        return EXIT_DATA, "data error"
    if isinstance(exc, InvariantViolation):
        return EXIT_INVARIANT, "internal error"
    return EXIT_OTHER, "I/O error"


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, ContractViolation, DataError, DegenerateTrack, InvariantViolation, OSError) as exc:
        code, kind = _classify(exc)
        stage = getattr(exc, "stage", None)
        where = f" [{stage}]" if stage else ""
        print(f"stclust: {kind}{where}: {exc}", file=sys.stderr)
        return code

if __name__ == "__main__":
    sys.exit(main())
