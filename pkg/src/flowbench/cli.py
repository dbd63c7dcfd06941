"""Command-line entry point.

    flowbench ingest   --config run.ini          validate and normalise inputs
    flowbench ingest   flows.csv --profile nprobe
    flowbench features --config run.ini          per-dataset feature samples
    flowbench compare  --config run.ini          distance matrices, tests, scatter
    flowbench embed    --config run.ini          2-D embeddings
    flowbench report   --config run.ini          everything, plus SVG figures
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .features import samples_to_csv
from .flow_model import Label
from .ingest import IngestError, filter_benign, open_text, parse_flows, resolve_profile, write_flows
from .report.config import ConfigError, load_config, parse_features
from .report.pipeline import FORMATS, PipelineError, analyse, finalize, write_tree

log = logging.getLogger("flowbench")


def _formats(value: str | None, default: tuple) -> tuple:
    if not value:
        return default
    chosen = tuple(v.strip() for v in value.split(",") if v.strip())
    bad = [f for f in chosen if f not in FORMATS]
    if bad:
        raise ConfigError(f"unknown format(s) {bad}; choose from {FORMATS}")
    return chosen


def _config(args):
    if not args.config:
        raise ConfigError("--config is required")
    cfg = load_config(args.config)
    return cfg.with_overrides(
        seed=args.seed,
        sample_size=args.sample_size,
        normalize=args.normalize,
        features=parse_features(args.feature) if args.feature else None,
        out=str(Path(args.out).resolve()) if args.out else None,
    )


def cmd_ingest(args) -> int:
    jobs = []
    if args.inputs:
        for path in args.inputs:
            jobs.append((Path(path).stem, Path(path), resolve_profile(args.profile or "nprobe"), args.assume_benign))
        out_dir = Path(args.out or "normalized")
    else:
        cfg = _config(args)
        for d in cfg.datasets:
            jobs.append((d.name, cfg.resolve(d.path), resolve_profile(d.profile, Path(cfg.base_dir)), d.assume_benign))
        out_dir = Path(args.out) if args.out else cfg.out_dir / "ingest"

    files = {}
    for name, path, profile, assume in jobs:
        try:
            with open_text(path) as fh:
                records, report = parse_flows(fh, profile, name=str(path))
                if args.benign_only:
                    records = filter_benign(records, profile, assume_benign=assume)
                kept = list(records)
        except (OSError, IngestError) as exc:
            raise PipelineError("ingest", str(exc), name) from exc
        buf = io.StringIO()
        write_flows(kept, buf)
        files[f"{name}.csv"] = buf.getvalue()
        files[f"{name}.parse_report.json"] = json.dumps(report.to_dict(), indent=1) + "\n"
        benign = sum(r.label is Label.BENIGN for r in kept)
        print(f"{name}: accepted={report.accepted} rejected={report.rejected} "
              f"degenerate={report.degenerate} written={len(kept)} benign_labelled={benign}")
    write_tree(files, out_dir)
    print(f"wrote {out_dir}")
    return 0


def cmd_features(args) -> int:
    cfg = _config(args)
    bundle = analyse(cfg, "features")
    fmts = _formats(args.format, ("json",))
    files = {}
    for f, per in bundle.samples.items():
        if "json" in fmts:
            files[f"features/{f.value}.json"] = json.dumps([s.to_dict() for s in per.values()]) + "\n"
        if "csv" in fmts:
            files[f"features/{f.value}.csv"] = samples_to_csv(list(per.values()))
    out = cfg.out_dir / "features" if not args.out else Path(args.out)
    write_tree({k.split("/", 1)[1]: v for k, v in files.items()}, out)
    for w in bundle.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {out}")
    return 0


def _run_stage(args, stage: str, default_formats: tuple) -> int:
    cfg = _config(args)
    bundle = analyse(cfg, stage)
    files = finalize(bundle, _formats(args.format, default_formats))
    for w in bundle.warnings:
        print(f"warning: {w}", file=sys.stderr)
    comp = bundle.comparison
    if comp is not None and "averaged" in comp.matrices:
        avg = comp.matrices["averaged"]
        width = max(len(l) for l in avg.labels)
        print("averaged distance matrix:")
        for label, row in zip(avg.labels, avg.entries):
            print(f"  {label:>{width}}  " + "  ".join(f"{v:.3f}" for v in row))
    print(f"wrote {len(files)} files to {cfg.out_dir}")
    return 0


def cmd_compare(args) -> int:
    return _run_stage(args, "compare", ("json", "csv"))


def cmd_embed(args) -> int:
    return _run_stage(args, "embed", ("json", "csv"))


def cmd_report(args) -> int:
    return _run_stage(args, "all", FORMATS)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--sample-size", type=int, dest="sample_size")
    common.add_argument("--feature", action="append", help="restrict to a feature (repeatable)")
    common.add_argument("--normalize", choices=("minmax", "none"))
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", help="comma-separated subset of json,csv,svg")

    parser = argparse.ArgumentParser(prog="flowbench", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("--version", action="version", version=f"flowbench {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="validate and normalise flow files")
    p.add_argument("inputs", nargs="*", help="flow files (instead of --config)")
    p.add_argument("--profile", help="schema profile for positional inputs (default nprobe)")
    p.add_argument("--assume-benign", action="store_true", help="treat unlabeled inputs as benign-only")
    p.add_argument("--benign-only", action="store_true", help="drop non-benign records")
    p.set_defaults(func=cmd_ingest)

    for name, func, text in (
        ("features", cmd_features, "emit per-dataset feature samples"),
        ("compare", cmd_compare, "distance matrices, Kruskal-Wallis tests, reference scatter"),
        ("embed", cmd_embed, "2-D embeddings of per-flow feature vectors"),
        ("report", cmd_report, "full pipeline with SVG figures"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 2
    except (ConfigError, IngestError) as exc:
        print(f"error [stage=config] {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
