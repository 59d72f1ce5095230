"""Command-line driver for the build pipeline and the performance service.

Every subcommand exits 0 on success; failures print a machine-readable JSON
object to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline as pl


def _load_config(args) -> pl.PipelineConfig:
    if not args.config:
        raise ValueError("--config <path> is required for this command")
    cfg = pl.PipelineConfig.from_file(args.config)
    if args.seed is not None:
        d = cfg.to_dict()
        d["master_seed"] = args.seed
        cfg = pl.PipelineConfig.from_dict(d)
    if args.out is not None:
        d = cfg.to_dict()
        d["out_dir"] = args.out
        cfg = pl.PipelineConfig.from_dict(d)
    return cfg


def cmd_ingest(args) -> int:
    # per-file problems are reported in the index, not as a command failure
    index = pl.ingest_dataset(args.directory)
    print(json.dumps(index, indent=1, sort_keys=True))
    return 0


def cmd_audition(args) -> int:
    cfg = _load_config(args)
    p = pl.Pipeline(cfg)
    result = p.run_stage("audition-latents", force=args.force)
    print(json.dumps(result, indent=1))
    return 0


def _run_single(args, stage: str) -> int:
    cfg = _load_config(args)
    p = pl.Pipeline(cfg)
    result = p.run_stage(stage, force=args.force)
    print(json.dumps(result, indent=1))
    return 0


def cmd_run(args) -> int:
    cfg = _load_config(args)
    p = pl.Pipeline(cfg)
    if args.stage:
        result = p.run_stage(args.stage, force=args.force)
        print(json.dumps(result, indent=1))
        return 0
    results = p.run(force=args.force)
    print(json.dumps(results, indent=1))
    return 0


def cmd_serve(args) -> int:
    from . import service

    cfg = _load_config(args) if args.config else None
    root = Path(args.out) if args.out else (Path(cfg.out_dir) if cfg else Path("."))
    service.serve_forever(root, host=args.host, http_port=args.port, ws_port=args.ws_port)
    return 0


def main(argv=None) -> int:
    # the shared flags are accepted both before and after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="pipeline configuration file (JSON)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override master seed")
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help="override output directory")
    common.add_argument("--force", action="store_true", default=argparse.SUPPRESS,
                        help="re-run stages even if cached")

    parser = argparse.ArgumentParser(
        prog="soundmesh",
        description="Build and serve playable sound models from a latent-space mesh.",
    )
    parser.add_argument("--config", default=None, help=argparse.SUPPRESS)
    parser.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    parser.add_argument("--out", default=None, help=argparse.SUPPRESS)
    parser.add_argument("--force", action="store_true", default=False, help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", parents=[common],
                              help="validate a WAV dataset directory")
    p_ingest.add_argument("directory")

    sub.add_parser("audition", parents=[common], help="render random-latent audition WAVs")
    sub.add_parser("mesh", parents=[common], help="build the corner mesh")
    sub.add_parser("smooth", parents=[common], help="adapt the mesh for perceptual uniformity")
    sub.add_parser("render", parents=[common], help="render sound grids from the mesh")
    sub.add_parser("train", parents=[common], help="train the performer model on rendered grids")
    sub.add_parser("eval", parents=[common], help="run the evaluation suite on the trained model")

    p_run = sub.add_parser("run", parents=[common], help="run the full pipeline")
    p_run.add_argument("--stage", choices=pl.STAGES, default=None,
                       help="run a single named stage")

    p_serve = sub.add_parser("serve", parents=[common],
                             help="serve models and grids for live performance")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--ws-port", type=int, default=8766)

    args = parser.parse_args(argv)
    stage_map = {
        "mesh": "build-mesh",
        "smooth": "smooth",
        "render": "render-grid",
        "train": "train-rnn",
        "eval": "evaluate",
    }
    try:
        if args.command == "ingest":
            return cmd_ingest(args)
        if args.command == "audition":
            return cmd_audition(args)
        if args.command in stage_map:
            return _run_single(args, stage_map[args.command])
        if args.command == "run":
            return cmd_run(args)
        if args.command == "serve":
            return cmd_serve(args)
        raise ValueError(f"unknown command {args.command}")
    except Exception as exc:  # contract: machine-readable error on stderr
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
