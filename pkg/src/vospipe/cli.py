"""Command-line entry point.

Subcommands mirror the pipeline stages: ``evaluate``, ``keyframes``,
``propagate``, ``fuse``, ``pseudo-label`` and the composed ``pipeline``.
Flags beat config-file values beat defaults. Logs go to stderr; stdout
carries data (report tables) only. Exit codes: 2 usage/config, 3 data,
4 adapter.
"""

from __future__ import annotations

import argparse
import json
import logging
import shlex
import sys
from pathlib import Path

from vospipe.dataio import read_dataset, read_predictions
from vospipe.errors import ConfigError, DataError, ParseError, PropagatorFailure, VospipeError
from vospipe.metrics import format_report
from vospipe.pipeline import (
    PipelineConfig,
    _assemble_jobs,
    _json_bytes,
    choices_document,
    load_config_file,
    run_pipeline,
    run_pseudo_label,
    sequences_from_archive,
    stage_evaluate,
    stage_fuse,
    stage_keyframes,
    stage_propagate,
    write_candidate_archives,
)

log = logging.getLogger("vospipe")

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_ADAPTER = 4


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", help="dataset manifest (file or directory)")
    parser.add_argument("--predictions", help="prediction manifest path")
    parser.add_argument("--adapter-cmd", help="propagation adapter command line")
    parser.add_argument("--n", type=int, help="number of key frames / candidates")
    parser.add_argument(
        "--include-source-voter",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="let the original sequence vote in fusion (default: yes)",
    )
    parser.add_argument("--tolerance", type=float, help="boundary F tolerance override, pixels")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--jobs", type=int, help="parallel (video, expression) jobs")
    parser.add_argument("--seed", type=int, help="seed recorded for stub sampling")
    parser.add_argument("--frame-root", help="root directory of frame images for adapters")
    parser.add_argument("--format", dest="dataset_format", choices=["native", "mevis"],
                        help="dataset manifest format")
    parser.add_argument(
        "--post-process",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="run propagation + fusion (default: yes)",
    )
    parser.add_argument("--config", help="flat key = value config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vospipe",
        description="Key-frame selection, mask propagation, majority fusion, "
        "J/F evaluation and pseudo-label export for VOS pipelines.",
    )
    parser.add_argument("--verbose", action="store_true", help="chatty diagnostics on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    _add_common_flags(p)
    p.add_argument("--baseline-jf", type=float, help="render a J&F delta against this percentage")

    p = sub.add_parser("keyframes", help="select top-N key frames per expression")
    _add_common_flags(p)

    p = sub.add_parser("propagate", help="run VOS propagation for every candidate key frame")
    _add_common_flags(p)

    p = sub.add_parser("fuse", help="majority-fuse candidate archives with the source")
    _add_common_flags(p)
    p.add_argument("--candidates", help="directory produced by the propagate stage")

    p = sub.add_parser("pseudo-label", help="export fused masks as pseudo ground truth")
    _add_common_flags(p)
    p.add_argument("--split", help="manifest of the unlabeled split the fused masks cover")
    p.add_argument("--fused", help="fused archive for the split")
    p.add_argument("--min-confidence", type=float, help="optional confidence gate in [0, 1]")

    p = sub.add_parser("pipeline", help="keyframes + propagate + fuse (+ evaluate)")
    _add_common_flags(p)
    return parser


_CONFIG_FIELD_NAMES = (
    "dataset",
    "predictions",
    "n",
    "include_source_voter",
    "tolerance",
    "out",
    "jobs",
    "seed",
    "dataset_format",
    "frame_root",
    "post_process",
)


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    """flags > config file > defaults."""
    values: dict = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for name in _CONFIG_FIELD_NAMES:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    adapter_cmd = getattr(args, "adapter_cmd", None)
    if adapter_cmd is not None:
        values["adapter_cmd"] = tuple(shlex.split(adapter_cmd))
    return PipelineConfig(**values)


def _require_out(config: PipelineConfig) -> Path:
    if not config.out:
        raise ConfigError("an output directory is required (--out)")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _prepare_stages(config: PipelineConfig):
    if not config.dataset:
        raise ConfigError("a dataset manifest is required (--dataset)")
    if not config.predictions:
        raise ConfigError("a prediction manifest is required (--predictions)")
    dataset = read_dataset(config.dataset, fmt=config.dataset_format)
    predictions = read_predictions(config.predictions)
    jobs = _assemble_jobs(dataset, predictions)
    return dataset, predictions, jobs


def cmd_evaluate(args) -> int:
    config = resolve_config(args)
    if not config.dataset:
        raise ConfigError("a dataset manifest is required (--dataset)")
    if not config.predictions:
        raise ConfigError("predictions are required (--predictions: archive, manifest or mask dir)")
    dataset = read_dataset(config.dataset, fmt=config.dataset_format)
    pred_path = Path(config.predictions)
    if pred_path.suffix == ".zip":
        sequences = sequences_from_archive(pred_path, dataset)
    elif pred_path.is_dir() and not (pred_path / "predictions.json").exists():
        # A directory of <video>/<expression>/<frame>.png files.
        sequences = _sequences_from_mask_dir(pred_path, dataset)
    else:
        predictions = read_predictions(pred_path)
        sequences = {}
        for key, entry in predictions.entries.items():
            try:
                video = dataset.video(key[0])
            except KeyError:
                raise ParseError(
                    f"prediction entry {key[0]}/{key[1]} references a video "
                    "not in the dataset",
                    str(pred_path),
                )
            sequences[key] = entry.sequence(video)
    report = stage_evaluate(sequences, dataset, config.tolerance)
    sys.stdout.write(format_report(report, baseline_jf=getattr(args, "baseline_jf", None)))
    if config.out:
        out = _require_out(config)
        (out / "report.json").write_bytes(_json_bytes(report.to_document()))
        (out / "report.txt").write_text(format_report(report), encoding="utf-8")
        log.info("wrote %s and report.txt", out / "report.json")
    return 0


def _sequences_from_mask_dir(root: Path, dataset):
    from vospipe.dataio import read_mask_png
    from vospipe.masks import MaskSequence

    sequences = {}
    for vid, eid in dataset.expression_keys():
        video = dataset.video(vid)
        directory = root / vid / eid
        if not directory.is_dir():
            continue
        frames = []
        for name in video.frame_names:
            path = directory / f"{name}.png"
            if not path.exists():
                raise ParseError(f"missing mask for frame {name!r}", str(directory))
            frames.append(read_mask_png(path))
        sequences[(vid, eid)] = MaskSequence(vid, eid, tuple(frames))
    return sequences


def cmd_keyframes(args) -> int:
    config = resolve_config(args)
    out = _require_out(config)
    _, _, jobs = _prepare_stages(config)
    choices = stage_keyframes(jobs, config.n)
    path = out / "choices.json"
    path.write_bytes(_json_bytes(choices_document(choices)))
    log.info("wrote %s (%d expressions)", path, len(choices))
    return 0


def cmd_propagate(args) -> int:
    config = resolve_config(args)
    out = _require_out(config)
    _, _, jobs = _prepare_stages(config)
    choices = stage_keyframes(jobs, config.n)
    results = stage_propagate(jobs, choices, config)
    (out / "choices.json").write_bytes(_json_bytes(choices_document(choices)))
    written = write_candidate_archives(results, out / "candidates", config.n)
    log.info("wrote %d candidate archives under %s", len(written) - 1, out / "candidates")
    return 0


def cmd_fuse(args) -> int:
    from vospipe.fusion import PredictionSet, fuse_or_fallback
    from vospipe.dataio import write_archive

    config = resolve_config(args)
    out = _require_out(config)
    dataset, _, jobs = _prepare_stages(config)
    candidates_dir = Path(args.candidates) if args.candidates else out / "candidates"
    if not candidates_dir.is_dir():
        raise ConfigError(f"candidate directory not found: {candidates_dir}")

    ranked = sorted(candidates_dir.glob("candidate_*.zip"))
    per_key: dict[tuple[str, str], list] = {}
    for archive_path in ranked:
        for key, sequence in sequences_from_archive(archive_path, dataset).items():
            per_key.setdefault(key, []).append(sequence)

    fused = {}
    for job in jobs:
        key = (job.video.video_id, job.expression_id)
        pred_set = PredictionSet(job.source, tuple(per_key.get(key, ())))
        fused_seq = fuse_or_fallback(
            pred_set,
            post_process_enabled=config.post_process,
            include_source=config.include_source_voter,
        )
        fused[key] = (fused_seq, job.video.frame_names)
    path = write_archive(fused, out / "fused.zip")
    log.info("wrote %s", path)
    return 0


def cmd_pseudo_label(args) -> int:
    config = resolve_config(args)
    if not config.dataset:
        raise ConfigError("the labeled manifest is required (--dataset)")
    if not args.split:
        raise ConfigError("the unlabeled split manifest is required (--split)")
    if not args.fused:
        raise ConfigError("the fused archive is required (--fused)")
    manifest_path, recipe_path = run_pseudo_label(
        config,
        labeled_path=config.dataset,
        split_path=args.split,
        fused_path=args.fused,
        min_confidence=args.min_confidence,
    )
    log.info("wrote %s and %s", manifest_path, recipe_path)
    return 0


def cmd_pipeline(args) -> int:
    config = resolve_config(args)
    archive_path, report = run_pipeline(config)
    log.info("wrote %s", archive_path)
    if report is not None:
        sys.stdout.write(format_report(report))
    return 0


_HANDLERS = {
    "evaluate": cmd_evaluate,
    "keyframes": cmd_keyframes,
    "propagate": cmd_propagate,
    "fuse": cmd_fuse,
    "pseudo-label": cmd_pseudo_label,
    "pipeline": cmd_pipeline,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handler = _HANDLERS[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except PropagatorFailure as exc:
        log.error("adapter failure: %s", exc)
        return EXIT_ADAPTER
    except DataError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except VospipeError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
