"""End-to-end pipeline stages: keyframes -> propagate -> fuse -> evaluate.

Every stage is callable on its own and the composed pipeline is
bit-identical to running the stages manually with the same config.
Distinct (video, expression) jobs may run on a thread pool; results are
merged in manifest order, so outputs do not depend on scheduling.
"""

from __future__ import annotations

import hashlib
import json
import logging
import shlex
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from vospipe.adapter import SubprocessPropagator
from vospipe.dataio import (
    DatasetManifest,
    PredictionManifest,
    read_archive,
    read_dataset,
    read_predictions,
    write_archive,
)
from vospipe.errors import (
    ConfigError,
    DimensionMismatch,
    MissingPrediction,
    ParseError,
    PropagatorFailure,
)
from vospipe.fusion import PredictionSet, fuse_or_fallback
from vospipe.keyframes import ConfidenceTrack, KeyframeChoice, select_top_n
from vospipe.masks import MaskSequence, VideoRef
from vospipe.metrics import EvalReport, aggregate, format_report, score_sequence
from vospipe.propagation import Propagator, builtin_identity_propagator, run_candidates
from vospipe.pseudo import RunProvenance, build_pseudo_labels, merge_manifests, write_recipe

log = logging.getLogger(__name__)

__all__ = [
    "PipelineConfig",
    "load_config_file",
    "stage_keyframes",
    "stage_propagate",
    "stage_fuse",
    "stage_evaluate",
    "run_pipeline",
    "run_pseudo_label",
]


@dataclass(frozen=True)
class PipelineConfig:
    """Every free parameter of a pipeline run."""

    dataset: str | None = None
    predictions: str | None = None
    adapter_cmd: tuple[str, ...] | None = None  # None: builtin identity propagator
    n: int = 5
    include_source_voter: bool = True
    tolerance: float | None = None
    out: str | None = None
    jobs: int = 1
    seed: int = 0
    dataset_format: str = "native"
    frame_root: str | None = None
    post_process: bool = True

    def __post_init__(self):
        if not 1 <= self.n <= 9:
            raise ConfigError(f"n must lie in 1..9, got {self.n}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        if self.tolerance is not None and self.tolerance < 0:
            raise ConfigError(f"tolerance must be >= 0, got {self.tolerance}")

    def semantic_key(self) -> str:
        """Canonical string of everything that affects outputs.

        Execution details (jobs) are excluded: parallelism must never
        change a byte of output.
        """
        fields = {
            "dataset": self.dataset,
            "predictions": self.predictions,
            "adapter_cmd": list(self.adapter_cmd) if self.adapter_cmd else None,
            "n": self.n,
            "include_source_voter": self.include_source_voter,
            "tolerance": self.tolerance,
            "seed": self.seed,
            "dataset_format": self.dataset_format,
            "frame_root": self.frame_root,
            "post_process": self.post_process,
        }
        return json.dumps(fields, sort_keys=True)

    def config_hash(self) -> str:
        return hashlib.sha256(self.semantic_key().encode("utf-8")).hexdigest()[:12]


_CONFIG_BOOLEANS = ("include_source_voter", "post_process")
_CONFIG_INTEGERS = ("n", "jobs", "seed")
_CONFIG_REALS = ("tolerance",)
_CONFIG_STRINGS = ("dataset", "predictions", "out", "dataset_format", "frame_root")


def load_config_file(path) -> dict:
    """Flat ``key = value`` file mirroring PipelineConfig fields."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values: dict = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in _CONFIG_BOOLEANS:
            if value.lower() not in ("true", "false"):
                raise ConfigError(f"{path}:{lineno}: {key} must be true or false")
            values[key] = value.lower() == "true"
        elif key in _CONFIG_INTEGERS:
            try:
                values[key] = int(value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: {key} must be an integer")
        elif key in _CONFIG_REALS:
            try:
                values[key] = float(value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: {key} must be a number")
        elif key in _CONFIG_STRINGS:
            values[key] = value
        elif key == "adapter_cmd":
            values[key] = tuple(shlex.split(value))
        else:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
    return values


@dataclass
class PipelineJob:
    video: VideoRef
    expression_id: str
    source: MaskSequence
    track: ConfidenceTrack


@dataclass
class JobResult:
    video: VideoRef
    expression_id: str
    choices: list[KeyframeChoice]
    candidates: tuple[MaskSequence, ...]
    fused: MaskSequence
    fallback: bool


def _assemble_jobs(dataset: DatasetManifest, predictions: PredictionManifest) -> list[PipelineJob]:
    jobs = []
    for vid, eid in dataset.expression_keys():
        entry = predictions.entries.get((vid, eid))
        if entry is None:
            raise MissingPrediction(f"predictions carry no entry for {vid}/{eid}")
        video = dataset.video(vid)
        jobs.append(
            PipelineJob(
                video=video,
                expression_id=eid,
                source=entry.sequence(video),
                track=entry.confidence_track(),
            )
        )
    return jobs


def stage_keyframes(jobs: list[PipelineJob], n: int) -> dict[tuple[str, str], list[KeyframeChoice]]:
    """Top-N choices per job; N is clamped to the video length."""
    choices = {}
    for job in jobs:
        effective = min(n, len(job.track))
        choices[(job.video.video_id, job.expression_id)] = select_top_n(job.track, effective)
    return choices


class _PropagatorPool:
    """One propagator per worker thread; the builtin identity is shared."""

    def __init__(self, config: PipelineConfig):
        self._config = config
        self._local = threading.local()
        self._instances: list[SubprocessPropagator] = []
        self._lock = threading.Lock()
        self._identity = builtin_identity_propagator()
        if config.adapter_cmd:
            # Fail fast on spawn/handshake problems before any job runs.
            probe = self._spawn()
            self._local.propagator = probe

    def _spawn(self) -> SubprocessPropagator:
        assert self._config.adapter_cmd
        propagator = SubprocessPropagator(
            list(self._config.adapter_cmd), frame_root=self._config.frame_root
        )
        with self._lock:
            self._instances.append(propagator)
        return propagator

    def get(self) -> Propagator:
        if not self._config.adapter_cmd:
            return self._identity
        propagator = getattr(self._local, "propagator", None)
        if propagator is None:
            propagator = self._spawn()
            self._local.propagator = propagator
        return propagator

    def close(self) -> None:
        with self._lock:
            instances, self._instances = self._instances, []
        for propagator in instances:
            propagator.close()


def _run_job(job: PipelineJob, choices: list[KeyframeChoice], pool: _PropagatorPool,
             config: PipelineConfig) -> JobResult:
    candidates: tuple[MaskSequence, ...] = ()
    fallback = False
    if config.post_process:
        try:
            pred_set = run_candidates(pool.get(), job.video, choices, job.source)
            candidates = pred_set.candidates
        except (PropagatorFailure, DimensionMismatch) as exc:
            # One failed run degrades the whole job to the raw source.
            log.warning(
                "propagation failed for %s/%s, falling back to source: %s",
                job.video.video_id, job.expression_id, exc,
            )
            fallback = True
    fused = fuse_or_fallback(
        PredictionSet(job.source, candidates),
        post_process_enabled=config.post_process and not fallback,
        include_source=config.include_source_voter,
    )
    return JobResult(
        video=job.video,
        expression_id=job.expression_id,
        choices=choices,
        candidates=candidates,
        fused=fused,
        fallback=fallback,
    )


def stage_propagate(
    jobs: list[PipelineJob],
    choices: dict[tuple[str, str], list[KeyframeChoice]],
    config: PipelineConfig,
) -> list[JobResult]:
    """Propagate and fuse every job, preserving manifest order."""
    pool = _PropagatorPool(config)
    try:
        if config.jobs == 1:
            return [
                _run_job(job, choices[(job.video.video_id, job.expression_id)], pool, config)
                for job in jobs
            ]
        with ThreadPoolExecutor(max_workers=config.jobs) as executor:
            futures = [
                executor.submit(
                    _run_job, job, choices[(job.video.video_id, job.expression_id)], pool, config
                )
                for job in jobs
            ]
            return [future.result() for future in futures]
    finally:
        pool.close()


def stage_fuse(results: list[JobResult]) -> dict[tuple[str, str], tuple[MaskSequence, tuple[str, ...]]]:
    return {
        (r.video.video_id, r.expression_id): (r.fused, r.video.frame_names)
        for r in results
    }


def stage_evaluate(
    sequences: dict[tuple[str, str], MaskSequence],
    dataset: DatasetManifest,
    tolerance: float | None = None,
) -> EvalReport:
    """Score predictions against every annotated expression of the split."""
    scores = {}
    for key in dataset.expression_keys():
        if key not in dataset.annotations:
            continue
        if key not in sequences:
            raise MissingPrediction(f"no predicted sequence for annotated pair {key[0]}/{key[1]}")
        gt = dataset.annotation_sequence(*key)
        scores[key] = score_sequence(sequences[key], gt, tolerance)
    return aggregate(scores)


def _json_bytes(document) -> bytes:
    return (json.dumps(document, indent=1) + "\n").encode("utf-8")


def choices_document(choices: dict[tuple[str, str], list[KeyframeChoice]]) -> dict:
    return {
        "schema": 1,
        "choices": [
            {
                "video_id": vid,
                "expression_id": eid,
                "indices": [c.index for c in selected],
                "scores": [c.score for c in selected],
            }
            for (vid, eid), selected in choices.items()
        ],
    }


def write_candidate_archives(results: list[JobResult], out_dir: Path, n: int) -> list[Path]:
    """One archive per candidate rank, plus a job summary."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for rank in range(n):
        sequences = {
            (r.video.video_id, r.expression_id): (r.candidates[rank], r.video.frame_names)
            for r in results
            if rank < len(r.candidates)
        }
        if not sequences:
            continue
        written.append(write_archive(sequences, out_dir / f"candidate_{rank}.zip"))
    summary = {
        "schema": 1,
        "jobs": [
            {
                "video_id": r.video.video_id,
                "expression_id": r.expression_id,
                "candidates": len(r.candidates),
                "fallback": r.fallback,
            }
            for r in results
        ],
    }
    summary_path = out_dir / "summary.json"
    summary_path.write_bytes(_json_bytes(summary))
    written.append(summary_path)
    return written


def provenance_for(config: PipelineConfig, *input_paths) -> RunProvenance:
    digest = hashlib.sha256(config.semantic_key().encode("utf-8"))
    for path in input_paths:
        if path is None:
            continue
        path = Path(path)
        if path.is_file():
            digest.update(path.read_bytes())
    return RunProvenance(run_id=digest.hexdigest()[:12], config_hash=config.config_hash())


def _load_inputs(config: PipelineConfig) -> tuple[DatasetManifest, PredictionManifest]:
    if not config.dataset:
        raise ConfigError("a dataset manifest is required (--dataset)")
    if not config.predictions:
        raise ConfigError("a prediction manifest is required (--predictions)")
    dataset = read_dataset(config.dataset, fmt=config.dataset_format)
    predictions = read_predictions(config.predictions)
    return dataset, predictions


def run_pipeline(config: PipelineConfig) -> tuple[Path, EvalReport | None]:
    """Full chain: keyframes, propagation, fusion, archive and report."""
    if not config.out:
        raise ConfigError("an output directory is required (--out)")
    dataset, predictions = _load_inputs(config)
    jobs = _assemble_jobs(dataset, predictions)
    choices = stage_keyframes(jobs, config.n)
    results = stage_propagate(jobs, choices, config)

    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "choices.json").write_bytes(_json_bytes(choices_document(choices)))
    archive_path = write_archive(stage_fuse(results), out_dir / "fused.zip")

    report = None
    if any(key in dataset.annotations for key in dataset.expression_keys()):
        fused_sequences = {
            (r.video.video_id, r.expression_id): r.fused for r in results
        }
        report = stage_evaluate(fused_sequences, dataset, config.tolerance)
        (out_dir / "report.json").write_bytes(_json_bytes(report.to_document()))
        (out_dir / "report.txt").write_text(format_report(report), encoding="utf-8")
    return archive_path, report


def sequences_from_archive(path, dataset: DatasetManifest) -> dict[tuple[str, str], MaskSequence]:
    """Reorder archive masks by each video's frame order."""
    grouped = read_archive(path)
    sequences = {}
    for (vid, eid), frames in grouped.items():
        try:
            video = dataset.video(vid)
        except KeyError:
            raise ParseError(f"archive entry {vid}/{eid} references unknown video", str(path))
        by_name = dict(frames)
        missing = [n for n in video.frame_names if n not in by_name]
        if missing:
            raise ParseError(
                f"archive entry {vid}/{eid} is missing frames {missing[:3]}", str(path)
            )
        sequences[(vid, eid)] = MaskSequence(
            vid, eid, tuple(by_name[n] for n in video.frame_names)
        )
    return sequences


def run_pseudo_label(
    config: PipelineConfig,
    labeled_path,
    split_path,
    fused_path,
    min_confidence: float | None = None,
) -> tuple[Path, Path]:
    """Merged manifest plus run recipe from a fused archive."""
    from vospipe.pseudo import filter_by_confidence
    from vospipe.dataio import write_dataset

    if not config.out:
        raise ConfigError("an output directory is required (--out)")
    labeled = read_dataset(labeled_path, fmt=config.dataset_format)
    split = read_dataset(split_path, fmt=config.dataset_format)
    fused = sequences_from_archive(fused_path, split)
    provenance = provenance_for(config, labeled_path, split_path, fused_path)
    pseudo = build_pseudo_labels(fused, split, provenance)
    if min_confidence is not None:
        if not config.predictions:
            raise ConfigError("--min-confidence needs --predictions for the tracks")
        predictions = read_predictions(config.predictions)
        tracks = {
            key: entry.confidence_track() for key, entry in predictions.entries.items()
        }
        pseudo = filter_by_confidence(pseudo, tracks, min_confidence)

    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    merged = merge_manifests(labeled, pseudo)
    manifest_path = write_dataset(merged, out_dir / "merged_manifest.json")
    recipe_path = write_recipe(
        out_dir / "recipe.txt",
        pseudo,
        merged_manifest=manifest_path.name,
        extra={
            "labeled_manifest": str(labeled_path),
            "split_manifest": str(split_path),
            "fused_archive": str(fused_path),
            "merged_videos": str(len(merged.videos)),
            "merged_annotations": str(len(merged.annotations)),
        },
    )
    return manifest_path, recipe_path
