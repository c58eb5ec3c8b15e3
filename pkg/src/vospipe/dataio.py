"""On-disk formats: dataset/prediction manifests, mask PNGs, archives.

Readers reject malformed inputs, never repair them. Writers are
deterministic: fixed entry ordering and fixed timestamps so identical
inputs produce byte-identical files.

Native dataset manifest (single JSON document, schema 1)::

    {"schema": 1,
     "videos": [{"id", "frames": [names], "width", "height"}],
     "expressions": [{"id", "video_id", "text"}],
     "annotations": [{"video_id", "expression_id",
                      "origin": "human"|"pseudo",
                      "frames": {name: RLE record | png path}}]}

Prediction manifest::

    {"schema": 1,
     "entries": [{"video_id", "expression_id",
                  "track": [real...], "track_kind": "per_frame"|"broadcast",
                  "frames": {name: RLE record}}]}

Mask files are 8-bit palette PNGs (index 0 background, 1 foreground);
archives are zip containers laid out ``<video_id>/<expression_id>/<frame_name>.png``.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from PIL import Image

from vospipe.errors import (
    DimensionMismatch,
    MalformedRle,
    NotFound,
    ParseError,
)
from vospipe.keyframes import ConfidenceTrack
from vospipe.masks import (
    BinaryMask,
    ExpressionRef,
    MaskSequence,
    VideoRef,
    rle_decode,
    rle_encode,
    rle_from_record,
    rle_to_record,
)

__all__ = [
    "Annotation",
    "DatasetManifest",
    "PredictionEntry",
    "PredictionManifest",
    "read_dataset",
    "write_dataset",
    "read_predictions",
    "write_predictions",
    "write_masks",
    "read_mask_png",
    "mask_png_bytes",
    "write_archive",
    "read_archive",
]

SCHEMA_VERSION = 1
ORIGINS = ("human", "pseudo")


@dataclass(frozen=True)
class Annotation:
    """Ground-truth (or pseudo ground-truth) masks for one expression."""

    video_id: str
    expression_id: str
    origin: str
    frames: dict[str, BinaryMask]

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValueError(f"origin must be one of {ORIGINS}, got {self.origin!r}")


@dataclass(frozen=True)
class DatasetManifest:
    """Videos, expressions and their mask bindings for one split."""

    videos: tuple[VideoRef, ...]
    expressions: tuple[ExpressionRef, ...]
    annotations: dict[tuple[str, str], Annotation] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "videos", tuple(self.videos))
        object.__setattr__(self, "expressions", tuple(self.expressions))
        by_id = {}
        for video in self.videos:
            if video.video_id in by_id:
                raise ValueError(f"duplicate video id {video.video_id!r}")
            by_id[video.video_id] = video
        for expression in self.expressions:
            if expression.video_id not in by_id:
                raise ValueError(
                    f"expression {expression.expression_id!r} references unknown "
                    f"video {expression.video_id!r}"
                )

    def video(self, video_id: str) -> VideoRef:
        for video in self.videos:
            if video.video_id == video_id:
                return video
        raise KeyError(video_id)

    def expression_keys(self) -> list[tuple[str, str]]:
        return [(e.video_id, e.expression_id) for e in self.expressions]

    def annotation_sequence(self, video_id: str, expression_id: str) -> MaskSequence:
        """Annotation masks in video frame order; requires full coverage."""
        annotation = self.annotations[(video_id, expression_id)]
        video = self.video(video_id)
        frames = []
        for name in video.frame_names:
            if name not in annotation.frames:
                raise ParseError(
                    f"annotation {video_id}/{expression_id} has no mask for frame {name!r}"
                )
            frames.append(annotation.frames[name])
        return MaskSequence(video_id, expression_id, tuple(frames))


@dataclass(frozen=True)
class PredictionEntry:
    """One expression's predicted masks and per-frame confidence track."""

    video_id: str
    expression_id: str
    track: tuple[float, ...]
    track_kind: str
    frames: dict[str, BinaryMask]

    def __post_init__(self):
        if self.track_kind not in ("per_frame", "broadcast"):
            raise ValueError(f"track_kind must be per_frame or broadcast, got {self.track_kind!r}")
        if self.track_kind == "broadcast" and len(set(self.track)) > 1:
            raise ValueError("broadcast track carries unequal values")
        if len(self.track) != len(self.frames):
            raise ValueError(
                f"track has {len(self.track)} scores for {len(self.frames)} frames"
            )

    def confidence_track(self) -> ConfidenceTrack:
        return ConfidenceTrack(self.track)

    def sequence(self, video: VideoRef) -> MaskSequence:
        """Masks in the video's frame order; names must match exactly."""
        if set(self.frames) != set(video.frame_names):
            missing = sorted(set(video.frame_names) - set(self.frames))[:3]
            extra = sorted(set(self.frames) - set(video.frame_names))[:3]
            raise ParseError(
                f"prediction {self.video_id}/{self.expression_id} frame names do not "
                f"match video (missing {missing}, unexpected {extra})"
            )
        if len(self.track) != video.frame_count:
            raise ParseError(
                f"prediction {self.video_id}/{self.expression_id} track length "
                f"{len(self.track)} != video frame count {video.frame_count}"
            )
        ordered = tuple(self.frames[name] for name in video.frame_names)
        sequence = MaskSequence(self.video_id, self.expression_id, ordered)
        if (sequence.width, sequence.height) != (video.width, video.height):
            raise DimensionMismatch(
                f"prediction {self.video_id}/{self.expression_id} is "
                f"{sequence.width}x{sequence.height}, video is {video.width}x{video.height}"
            )
        return sequence


@dataclass(frozen=True)
class PredictionManifest:
    entries: dict[tuple[str, str], PredictionEntry]


def _load_json(path: Path):
    if not path.exists():
        raise NotFound(f"no such file: {path}")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(path))


def _require(condition: bool, message: str, path: Path) -> None:
    if not condition:
        raise ParseError(message, str(path))


def _decode_mask_binding(value, base_dir: Path, context: str, path: Path) -> BinaryMask:
    if isinstance(value, dict):
        try:
            return rle_decode(rle_from_record(value))
        except MalformedRle as exc:
            raise ParseError(f"{context}: {exc}", str(path))
    if isinstance(value, str):
        mask_path = base_dir / value
        if not mask_path.exists():
            raise ParseError(f"{context}: mask file not found: {mask_path}", str(path))
        return read_mask_png(mask_path)
    raise ParseError(f"{context}: binding must be an RLE record or a path, got {type(value).__name__}", str(path))


def _resolve_manifest_path(root, default_name: str) -> Path:
    path = Path(root)
    if path.is_dir():
        path = path / default_name
    return path


def read_dataset(root, fmt: str = "native") -> DatasetManifest:
    """Read a split manifest; ``fmt="mevis"`` accepts the public
    meta-expressions layout on a best-effort basis."""
    if fmt == "mevis":
        return _read_mevis_dataset(Path(root))
    if fmt != "native":
        raise ValueError(f"unknown dataset format {fmt!r}")
    path = _resolve_manifest_path(root, "manifest.json")
    doc = _load_json(path)
    _require(isinstance(doc, dict), "manifest must be a JSON object", path)
    _require(doc.get("schema") == SCHEMA_VERSION, f"unsupported schema {doc.get('schema')!r}", path)

    videos = []
    for i, video_doc in enumerate(doc.get("videos", [])):
        context = f"videos[{i}]"
        _require(isinstance(video_doc, dict), f"{context} must be an object", path)
        for key in ("id", "frames", "width", "height"):
            _require(key in video_doc, f"{context} missing {key!r}", path)
        frames = video_doc["frames"]
        _require(
            isinstance(frames, list) and all(isinstance(n, str) for n in frames) and frames,
            f"{context}.frames must be a non-empty list of names",
            path,
        )
        _require(len(set(frames)) == len(frames), f"{context}.frames contains duplicates", path)
        try:
            videos.append(
                VideoRef(
                    video_id=video_doc["id"],
                    frame_count=len(frames),
                    width=int(video_doc["width"]),
                    height=int(video_doc["height"]),
                    frame_names=tuple(frames),
                )
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{context}: {exc}", str(path))

    expressions = []
    for i, expr_doc in enumerate(doc.get("expressions", [])):
        context = f"expressions[{i}]"
        _require(isinstance(expr_doc, dict), f"{context} must be an object", path)
        for key in ("id", "video_id", "text"):
            _require(key in expr_doc, f"{context} missing {key!r}", path)
        try:
            expressions.append(
                ExpressionRef(
                    expression_id=expr_doc["id"],
                    text=expr_doc["text"],
                    video_id=expr_doc["video_id"],
                )
            )
        except ValueError as exc:
            raise ParseError(f"{context}: {exc}", str(path))

    try:
        manifest = DatasetManifest(tuple(videos), tuple(expressions))
    except ValueError as exc:
        raise ParseError(str(exc), str(path))

    video_by_id = {v.video_id: v for v in manifest.videos}
    expression_keys = set(manifest.expression_keys())
    annotations: dict[tuple[str, str], Annotation] = {}
    for i, ann_doc in enumerate(doc.get("annotations", [])):
        context = f"annotations[{i}]"
        _require(isinstance(ann_doc, dict), f"{context} must be an object", path)
        for key in ("video_id", "expression_id", "origin", "frames"):
            _require(key in ann_doc, f"{context} missing {key!r}", path)
        key = (ann_doc["video_id"], ann_doc["expression_id"])
        _require(key in expression_keys, f"{context} references unknown expression {key}", path)
        _require(key not in annotations, f"{context} duplicates annotation for {key}", path)
        _require(ann_doc["origin"] in ORIGINS, f"{context}.origin must be human or pseudo", path)
        video = video_by_id[key[0]]
        frame_docs = ann_doc["frames"]
        _require(isinstance(frame_docs, dict), f"{context}.frames must be an object", path)
        masks: dict[str, BinaryMask] = {}
        for name, value in frame_docs.items():
            _require(
                name in video.frame_names,
                f"{context} binds unknown frame {name!r} of video {video.video_id!r}",
                path,
            )
            mask = _decode_mask_binding(value, path.parent, f"{context}.frames[{name!r}]", path)
            if (mask.width, mask.height) != (video.width, video.height):
                raise ParseError(
                    f"{context}.frames[{name!r}] is {mask.width}x{mask.height}, video is "
                    f"{video.width}x{video.height}",
                    str(path),
                )
            masks[name] = mask
        annotations[key] = Annotation(
            video_id=key[0], expression_id=key[1], origin=ann_doc["origin"], frames=masks
        )
    return DatasetManifest(manifest.videos, manifest.expressions, annotations)


def _read_mevis_dataset(root: Path) -> DatasetManifest:
    """Best-effort reader for the public meta-expressions layout.

    Image dimensions are probed from the first frame image because the
    meta file does not carry them.
    """
    meta_path = root / "meta_expressions.json" if root.is_dir() else root
    base = meta_path.parent
    doc = _load_json(meta_path)
    _require(isinstance(doc, dict) and isinstance(doc.get("videos"), dict), "expected {'videos': {...}}", meta_path)

    videos = []
    expressions = []
    for video_id, video_doc in doc["videos"].items():
        _require(isinstance(video_doc, dict), f"videos[{video_id!r}] must be an object", meta_path)
        frames = video_doc.get("frames")
        _require(
            isinstance(frames, list) and frames and all(isinstance(n, str) for n in frames),
            f"videos[{video_id!r}].frames must be a non-empty list",
            meta_path,
        )
        width = height = None
        for suffix in (".jpg", ".png"):
            probe = base / "JPEGImages" / video_id / f"{frames[0]}{suffix}"
            if probe.exists():
                with Image.open(probe) as img:
                    width, height = img.size
                break
        if width is None:
            raise ParseError(
                f"videos[{video_id!r}]: cannot determine dimensions (no frame image under "
                f"{base / 'JPEGImages' / video_id})",
                str(meta_path),
            )
        videos.append(VideoRef(video_id, len(frames), width, height, tuple(frames)))
        expr_docs = video_doc.get("expressions", {})
        _require(isinstance(expr_docs, dict), f"videos[{video_id!r}].expressions must be an object", meta_path)
        for expression_id, expr_doc in expr_docs.items():
            text = expr_doc.get("exp") if isinstance(expr_doc, dict) else None
            _require(
                isinstance(text, str) and bool(text),
                f"videos[{video_id!r}].expressions[{expression_id!r}] missing 'exp' text",
                meta_path,
            )
            expressions.append(ExpressionRef(expression_id, text, video_id))
    return DatasetManifest(tuple(videos), tuple(expressions))


def write_dataset(manifest: DatasetManifest, path, masks_inline: bool = True) -> Path:
    """Write a native manifest; ``masks_inline=False`` stores annotation
    masks as PNG files under ``<manifest dir>/masks/``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    annotations_doc = []
    for (video_id, expression_id), annotation in manifest.annotations.items():
        frames_doc: dict[str, object] = {}
        for name, mask in annotation.frames.items():
            if masks_inline:
                frames_doc[name] = rle_to_record(rle_encode(mask))
            else:
                rel = Path("masks") / video_id / expression_id / f"{name}.png"
                target = path.parent / rel
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_bytes(mask_png_bytes(mask))
                frames_doc[name] = str(rel)
        annotations_doc.append(
            {
                "video_id": video_id,
                "expression_id": expression_id,
                "origin": annotation.origin,
                "frames": frames_doc,
            }
        )
    doc = {
        "schema": SCHEMA_VERSION,
        "videos": [
            {
                "id": v.video_id,
                "frames": list(v.frame_names),
                "width": v.width,
                "height": v.height,
            }
            for v in manifest.videos
        ],
        "expressions": [
            {"id": e.expression_id, "video_id": e.video_id, "text": e.text}
            for e in manifest.expressions
        ],
        "annotations": annotations_doc,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle, indent=1)
        handle.write("\n")
    return path


def read_predictions(path) -> PredictionManifest:
    path = _resolve_manifest_path(path, "predictions.json")
    doc = _load_json(path)
    _require(isinstance(doc, dict), "prediction manifest must be a JSON object", path)
    _require(doc.get("schema") == SCHEMA_VERSION, f"unsupported schema {doc.get('schema')!r}", path)
    _require(isinstance(doc.get("entries"), list), "prediction manifest missing 'entries' list", path)

    entries: dict[tuple[str, str], PredictionEntry] = {}
    for i, entry_doc in enumerate(doc["entries"]):
        context = f"entries[{i}]"
        _require(isinstance(entry_doc, dict), f"{context} must be an object", path)
        for key in ("video_id", "expression_id", "track", "track_kind", "frames"):
            _require(key in entry_doc, f"{context} missing {key!r}", path)
        key = (entry_doc["video_id"], entry_doc["expression_id"])
        _require(key not in entries, f"{context} duplicates entry for {key}", path)
        track = entry_doc["track"]
        _require(
            isinstance(track, list) and all(isinstance(s, (int, float)) and not isinstance(s, bool) for s in track),
            f"{context}.track must be a list of reals",
            path,
        )
        frames_doc = entry_doc["frames"]
        _require(isinstance(frames_doc, dict) and frames_doc, f"{context}.frames must be a non-empty object", path)
        masks: dict[str, BinaryMask] = {}
        dims = None
        for name, value in frames_doc.items():
            _require(isinstance(value, dict), f"{context}.frames[{name!r}] must be an RLE record", path)
            mask = _decode_mask_binding(value, path.parent, f"{context}.frames[{name!r}]", path)
            if dims is None:
                dims = (mask.width, mask.height)
            elif (mask.width, mask.height) != dims:
                raise ParseError(f"{context}.frames[{name!r}] disagrees on dimensions", str(path))
            masks[name] = mask
        try:
            entry = PredictionEntry(
                video_id=key[0],
                expression_id=key[1],
                track=tuple(float(s) for s in track),
                track_kind=entry_doc["track_kind"],
                frames=masks,
            )
            entry.confidence_track()  # validate score range now, not at use
        except ValueError as exc:
            raise ParseError(f"{context}: {exc}", str(path))
        entries[key] = entry
    return PredictionManifest(entries)


def write_predictions(manifest: PredictionManifest, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "schema": SCHEMA_VERSION,
        "entries": [
            {
                "video_id": entry.video_id,
                "expression_id": entry.expression_id,
                "track": list(entry.track),
                "track_kind": entry.track_kind,
                "frames": {
                    name: rle_to_record(rle_encode(mask)) for name, mask in entry.frames.items()
                },
            }
            for entry in manifest.entries.values()
        ],
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle, indent=1)
        handle.write("\n")
    return path


_PALETTE = [0, 0, 0, 255, 255, 255] + [0] * (254 * 3)


def mask_png_bytes(mask: BinaryMask) -> bytes:
    """Encode as an 8-bit palette PNG: index 0 background, 1 foreground."""
    image = Image.fromarray(mask.pixels.astype(np.uint8), mode="P")
    image.putpalette(_PALETTE)
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    return buffer.getvalue()


def read_mask_png(path) -> BinaryMask:
    path = Path(path)
    if not path.exists():
        raise NotFound(f"no such mask file: {path}")
    try:
        with Image.open(path) as image:
            array = np.array(image)
    except Exception as exc:
        raise ParseError(f"cannot read mask image: {exc}", str(path))
    if array.ndim == 3:  # RGB(A): any nonzero channel means foreground
        array = array.max(axis=2)
    return BinaryMask(array != 0)


def write_masks(sequence: MaskSequence, out_root, frame_names: Iterable[str]) -> list[Path]:
    """One PNG per frame under ``<out_root>/<video_id>/<expression_id>/``."""
    names = list(frame_names)
    if len(names) != sequence.frame_count:
        raise ValueError(f"{len(names)} names for {sequence.frame_count} frames")
    directory = Path(out_root) / sequence.video_id / sequence.expression_id
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, mask in zip(names, sequence.frames):
        target = directory / f"{name}.png"
        target.write_bytes(mask_png_bytes(mask))
        written.append(target)
    return written


# Fixed zip timestamp: the archive must be byte-identical across runs.
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def write_archive(
    sequences: Mapping[tuple[str, str], tuple[MaskSequence, tuple[str, ...]]],
    out_path,
) -> Path:
    """Deterministic zip of ``{(video, expression): (sequence, frame_names)}``."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(out_path, "w") as archive:
        for video_id, expression_id in sorted(sequences):
            sequence, frame_names = sequences[(video_id, expression_id)]
            if len(frame_names) != sequence.frame_count:
                raise ValueError(
                    f"{video_id}/{expression_id}: {len(frame_names)} names for "
                    f"{sequence.frame_count} frames"
                )
            for name, mask in zip(frame_names, sequence.frames):
                info = zipfile.ZipInfo(
                    f"{video_id}/{expression_id}/{name}.png", date_time=_ZIP_EPOCH
                )
                info.compress_type = zipfile.ZIP_DEFLATED
                info.external_attr = 0o644 << 16
                archive.writestr(info, mask_png_bytes(mask))
    return out_path


def read_archive(path) -> dict[tuple[str, str], list[tuple[str, BinaryMask]]]:
    """Masks grouped by (video, expression), in archive entry order."""
    path = Path(path)
    if not path.exists():
        raise NotFound(f"no such archive: {path}")
    result: dict[tuple[str, str], list[tuple[str, BinaryMask]]] = {}
    try:
        with zipfile.ZipFile(path, "r") as archive:
            for entry in archive.infolist():
                if entry.is_dir():
                    continue
                parts = Path(entry.filename).parts
                if len(parts) != 3 or not parts[2].endswith(".png"):
                    raise ParseError(
                        f"unexpected archive entry {entry.filename!r} "
                        "(want <video>/<expression>/<frame>.png)",
                        str(path),
                    )
                video_id, expression_id, frame_file = parts
                data = archive.read(entry)
                try:
                    with Image.open(io.BytesIO(data)) as image:
                        array = np.array(image)
                except Exception as exc:
                    raise ParseError(f"{entry.filename}: cannot decode PNG: {exc}", str(path))
                if array.ndim == 3:
                    array = array.max(axis=2)
                mask = BinaryMask(array != 0)
                result.setdefault((video_id, expression_id), []).append(
                    (frame_file[: -len(".png")], mask)
                )
    except zipfile.BadZipFile as exc:
        raise ParseError(f"not a zip archive: {exc}", str(path))
    return result
