"""Command-line interface.

    hazardscope synth   --out DIR [--seed N]
    hazardscope signals --config cfg.json --out DIR [--kinds object_size,optical_flow]
    hazardscope react   --config cfg.json --out DIR [--strategy NAME]
    hazardscope hazards --config cfg.json --out DIR
    hazardscope caption --config cfg.json --out DIR
    hazardscope run     --config cfg.json --out DIR [--strategy NAME]
    hazardscope eval    --submission sub.csv --ground-truth gt.json [--out DIR]

Exit codes: 0 success, 2 validation error, 3 backend failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import PipelineConfig, check_reaction_strategy
from .errors import BackendError, ValidationError
from .ingest import parse_ground_truth
from .pipeline import StageError, run_captions, run_hazards, run_pipeline, run_react, run_signals
from .submission import evaluate_submission, read_submission
from .synth import generate_synthetic

log = logging.getLogger("hazardscope")

EXIT_OK, EXIT_VALIDATION, EXIT_BACKEND = 0, 2, 3


def _load_config(args) -> PipelineConfig:
    if not args.config:
        raise ValidationError("--config is required for this subcommand")
    cfg = PipelineConfig.load(args.config)
    strategy = getattr(args, "strategy", None)
    if strategy:
        check_reaction_strategy(strategy)
    return cfg.override(jobs=args.jobs, reaction=strategy)


def cmd_synth(args) -> int:
    paths = generate_synthetic(args.out, seed=args.seed, n_videos=args.n_videos, n_frames=args.n_frames)
    print(json.dumps({k: str(v) for k, v in paths.items()}, indent=2))
    return EXIT_OK


def cmd_signals(args) -> int:
    cfg = _load_config(args)
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    written = run_signals(cfg, args.out, kinds, args.videos, plots=not args.no_plots)
    print(f"wrote {len(written)} files to {args.out}")
    return EXIT_OK


def cmd_react(args) -> int:
    cfg = _load_config(args)
    out = run_react(cfg, args.out, args.videos)
    for vid, r in out.items():
        print(f"{vid}\treaction_frame={r.step}")
    return EXIT_OK


def cmd_hazards(args) -> int:
    doc = run_hazards(_load_config(args), args.out, args.videos)
    for vid, frames in doc.items():
        tracks = sorted({h["track_id"] for f in frames for h in f})
        print(f"{vid}\t{len(tracks)} hazard tracks: {' '.join(tracks)}")
    return EXIT_OK


def cmd_caption(args) -> int:
    doc = run_captions(_load_config(args), args.out, args.videos)
    for vid, caps in doc.items():
        for tid, text in sorted(caps.items()):
            print(f"{vid}\t{tid}\t{text}")
    return EXIT_OK


def _print_report(report) -> None:
    o = report.overall
    print(f"A_reaction={o.a_reaction:.6f} A_detection={o.a_detection:.6f} "
          f"A_classific={o.a_classific:.6f} A_macro={o.a_macro:.6f}")


def cmd_run(args) -> int:
    cfg = _load_config(args)
    result = run_pipeline(cfg, args.out, args.videos)
    print(f"wrote {Path(args.out) / 'submission.csv'} ({len(result.table.rows)} rows)")
    if result.report is not None:
        _print_report(result.report)
    return EXIT_OK


def cmd_eval(args) -> int:
    table = read_submission(args.submission)
    truths = parse_ground_truth(args.ground_truth)
    vids = {r.video_id for r in table.rows}
    report = evaluate_submission(table, {k: v for k, v in truths.items() if k in vids})
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report.write_json(out / "report.json")
        report.write_csv(out / "report.csv")
    _print_report(report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON")
    common.add_argument("--videos", help="glob over video ids")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=42, help="random seed (synth)")
    common.add_argument("--jobs", type=int, default=None, help="videos processed in parallel")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="hazardscope", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    s.add_argument("--n-videos", type=int, default=3)
    s.add_argument("--n-frames", type=int, default=60)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("signals", parents=[common], help="export motion signals and plots")
    s.add_argument("--kinds", default="object_size,median_distance",
                   help="comma list of object_size, optical_flow, median_distance")
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_signals)

    s = sub.add_parser("react", parents=[common], help="driver reaction series")
    s.add_argument("--strategy", help="object_size | optical_flow | baseline | ensemble(or|and|mean)")
    s.set_defaults(func=cmd_react)

    s = sub.add_parser("hazards", parents=[common], help="hazard track selection")
    s.set_defaults(func=cmd_hazards)

    s = sub.add_parser("caption", parents=[common], help="caption selected hazard tracks")
    s.set_defaults(func=cmd_caption)

    s = sub.add_parser("run", parents=[common], help="full pipeline: submission (+ report)")
    s.add_argument("--strategy", help="reaction strategy override")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("eval", parents=[common], help="score a submission file")
    s.add_argument("--submission", required=True)
    s.add_argument("--ground-truth", required=True)
    s.set_defaults(func=cmd_eval, out=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND if isinstance(exc.cause, BackendError) else EXIT_VALIDATION
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
