"""Command-line entry points.

Subcommands: track (run a tracker over a manifest), eval (turn a results CSV
into a report), synth (generate a synthetic sequence), flops (print the
depth-allocation cost table), encode (emit the robustness-study histograms).
Exit codes: 0 success, 2 input error, 3 numeric abort.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .config import load_synth_params, load_tracker_spec
from .core import ingest_sequence, write_sequence
from .errors import NonFiniteActivationError, PillarSotError
from .flops import CONVENTION, ablation_table, marginal_costs, model_flops
from .backbone import BackboneConfig
from .metrics import (
    frame_results_from_csv,
    frame_results_to_csv,
    ope_report,
    summary_to_csv,
    summary_to_json,
)
from .robustness import histogram_table, perturbation_study
from .tracking import TrackerSpec, run_tracker, synth_sequence

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _cmd_track(args) -> int:
    spec = load_tracker_spec(args.config) if args.config else TrackerSpec()
    all_results = []
    for manifest in args.manifest:
        seq = ingest_sequence(manifest)
        _, results, _ = run_tracker(seq, spec)
        all_results.extend(results)
    Path(args.out).write_text(frame_results_to_csv(all_results))
    print(f"wrote {len(all_results)} frame results to {args.out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    results = frame_results_from_csv(Path(args.results).read_text())
    summary = ope_report(results)
    Path(args.report).write_text(summary_to_json(summary))
    print(summary_to_csv(summary), end="")
    return EXIT_OK


def _cmd_synth(args) -> int:
    params = load_synth_params(args.params)
    seq = synth_sequence(params)
    manifest = write_sequence(seq, args.out)
    print(f"wrote {len(seq)} frames, manifest {manifest}")
    return EXIT_OK


def _cmd_flops(args) -> int:
    writer = csv.writer(sys.stdout)
    if args.depths:
        depths = tuple(int(v) for v in args.depths.split(","))
        cfg = BackboneConfig(depths=depths)
        report = model_flops(cfg)
        deltas = marginal_costs(cfg)
        writer.writerow(["depths", "gflops", "delta1", "delta2", "delta3", "delta4"])
        writer.writerow([
            "-".join(map(str, depths)), f"{report.gflops:.3f}",
            *(f"{d:.3f}" for d in deltas)])
    else:
        writer.writerow(["depths", "gflops", "delta_vs_first", "published_gflops"])
        for row in ablation_table():
            writer.writerow([
                "-".join(map(str, row["depths"])), f"{row['gflops']:.3f}",
                f"{row['delta_vs_first']:.3f}", f"{row['published_gflops']:.2f}"])
    print(f"# convention: {CONVENTION}", file=sys.stderr)
    return EXIT_OK


def _cmd_encode(args) -> int:
    if not args.demo:
        print("encode currently only supports --demo", file=sys.stderr)
        return EXIT_INPUT
    rows = histogram_table(seed=args.seed)
    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    study = perturbation_study(seed=args.seed)
    print(json.dumps(study, indent=2))
    print(f"wrote histograms to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pillarsot")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="run a tracker over sequence manifests")
    p.add_argument("--config", help="run config TOML", default=None)
    p.add_argument("--manifest", nargs="+", required=True, help="sequence manifest(s)")
    p.add_argument("--out", required=True, help="output results CSV")
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("eval", help="aggregate a results CSV into a report")
    p.add_argument("--results", required=True)
    p.add_argument("--report", required=True, help="output report JSON")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic sequence")
    p.add_argument("--params", required=True, help="synth params TOML")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("flops", help="print the depth-allocation cost table")
    p.add_argument("--depths", default=None, help="comma-separated stage depths")
    p.set_defaults(func=_cmd_flops)

    p = sub.add_parser("encode", help="emit robustness-study histograms as CSV")
    p.add_argument("--demo", action="store_true")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", default="encode_demo.csv")
    p.set_defaults(func=_cmd_encode)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NonFiniteActivationError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (PillarSotError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
