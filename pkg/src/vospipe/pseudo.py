"""Pseudo ground-truth export and manifest merging for the re-finetune round.

Fused predictions on an unlabeled split become annotations tagged
``origin="pseudo"``, stored in the same manifest format as human labels
so an external trainer consumes them unchanged. The actual re-finetuning
is out of scope; the run recipe records the semi-supervised round's
advisory trainer settings as metadata only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from vospipe.dataio import Annotation, DatasetManifest
from vospipe.errors import ConflictingAnnotation, DimensionMismatch, MissingPrediction
from vospipe.keyframes import ConfidenceTrack
from vospipe.masks import MaskSequence

__all__ = [
    "RunProvenance",
    "PseudoLabelSet",
    "build_pseudo_labels",
    "merge_manifests",
    "filter_by_confidence",
    "write_recipe",
    "FINETUNE_ADVISORY",
]

# Advisory metadata for the external trainer; recorded in the recipe,
# never executed here.
FINETUNE_ADVISORY = {
    "finetune.optimizer": "adamw",
    "finetune.learning_rate": "1e-4",
    "finetune.batch_size": "8",
    "finetune.weight_decay": "0.05",
    "finetune.iterations": "50000",
    "finetune.lr_drop_iteration": "40000",
    "finetune.lr_drop_factor": "0.1",
    "finetune.visual_encoder": "frozen",
    "finetune.text_encoder": "frozen",
}


@dataclass(frozen=True)
class RunProvenance:
    run_id: str
    config_hash: str


@dataclass(frozen=True)
class PseudoLabelSet:
    """Fused sequences promoted to supervision, keyed like annotations.

    Carries the split manifest the entries were built against so a merge
    can reproduce the split's video and expression structure.
    """

    entries: dict[tuple[str, str], MaskSequence]
    provenance: RunProvenance
    split: DatasetManifest = field(default_factory=lambda: DatasetManifest((), ()))


def build_pseudo_labels(
    fused: Mapping[tuple[str, str], MaskSequence] | Iterable[MaskSequence],
    split: DatasetManifest,
    provenance: RunProvenance,
) -> PseudoLabelSet:
    """Key fused sequences against a split and dimension-check each one."""
    if isinstance(fused, Mapping):
        by_key = dict(fused)
    else:
        by_key = {(s.video_id, s.expression_id): s for s in fused}

    entries: dict[tuple[str, str], MaskSequence] = {}
    for key in split.expression_keys():
        if key not in by_key:
            raise MissingPrediction(f"no fused sequence for {key[0]}/{key[1]}")
        sequence = by_key[key]
        video = split.video(key[0])
        if sequence.frame_count != video.frame_count:
            raise DimensionMismatch(
                f"{key[0]}/{key[1]}: {sequence.frame_count} frames, video has "
                f"{video.frame_count}"
            )
        if (sequence.width, sequence.height) != (video.width, video.height):
            raise DimensionMismatch(
                f"{key[0]}/{key[1]}: {sequence.width}x{sequence.height}, video is "
                f"{video.width}x{video.height}"
            )
        entries[key] = sequence
    return PseudoLabelSet(entries=entries, provenance=provenance, split=split)


def _merge_unique(label: str, existing, incoming):
    if existing == incoming:
        return existing
    raise ConflictingAnnotation(f"{label} differs between the merged manifests")


def merge_manifests(labeled: DatasetManifest, pseudo: PseudoLabelSet) -> DatasetManifest:
    """Union of the labeled annotations and the pseudo entries.

    Videos and expressions shared by both sides must be identical; the
    same (video, expression) key bound to differing masks is a conflict.
    """
    videos = {v.video_id: v for v in labeled.videos}
    for video in pseudo.split.videos:
        if video.video_id in videos:
            _merge_unique(f"video {video.video_id!r}", videos[video.video_id], video)
        else:
            videos[video.video_id] = video

    expressions = {(e.video_id, e.expression_id): e for e in labeled.expressions}
    for expression in pseudo.split.expressions:
        key = (expression.video_id, expression.expression_id)
        if key in expressions:
            _merge_unique(f"expression {key}", expressions[key], expression)
        else:
            expressions[key] = expression

    annotations = dict(labeled.annotations)
    for key, sequence in pseudo.entries.items():
        video = videos.get(key[0])
        if video is None:
            raise MissingPrediction(f"pseudo entry {key} has no video in either manifest")
        frames = {name: mask for name, mask in zip(video.frame_names, sequence.frames)}
        incoming = Annotation(
            video_id=key[0], expression_id=key[1], origin="pseudo", frames=frames
        )
        existing = annotations.get(key)
        if existing is not None:
            if existing.frames != incoming.frames:
                raise ConflictingAnnotation(
                    f"{key[0]}/{key[1]} is bound to differing masks in the labeled "
                    "and pseudo sets"
                )
            continue  # identical: keep the original (human) binding
        annotations[key] = incoming

    return DatasetManifest(
        videos=tuple(videos.values()),
        expressions=tuple(expressions.values()),
        annotations=annotations,
    )


def filter_by_confidence(
    pseudo: PseudoLabelSet,
    tracks: Mapping[tuple[str, str], ConfidenceTrack],
    threshold: float,
) -> PseudoLabelSet:
    """Optional quality gate: keep entries whose peak confidence clears
    the threshold. Entries without a track count as confidence 0."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    kept = {}
    for key, sequence in pseudo.entries.items():
        track = tracks.get(key)
        best = max(track.scores) if track is not None and len(track) else 0.0
        if best >= threshold:
            kept[key] = sequence
    return PseudoLabelSet(entries=kept, provenance=pseudo.provenance, split=pseudo.split)


def write_recipe(
    path,
    pseudo: PseudoLabelSet,
    merged_manifest: str,
    extra: Mapping[str, str] | None = None,
) -> Path:
    """Flat key-value run recipe for the external trainer."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = {
        "run_id": pseudo.provenance.run_id,
        "config_hash": pseudo.provenance.config_hash,
        "merged_manifest": merged_manifest,
        "pseudo_entries": str(len(pseudo.entries)),
    }
    lines.update(FINETUNE_ADVISORY)
    if extra:
        lines.update(extra)
    with open(path, "w", encoding="utf-8") as handle:
        for key, value in lines.items():
            handle.write(f"{key} = {value}\n")
    return path
