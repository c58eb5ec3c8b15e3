"""Bidirectional mask propagation orchestration over pluggable propagators.

The orchestrator seeds a propagator at a key frame, runs it backward to
frame 0 and forward to the last frame, keeps the original key mask at
the key index (both runs anchor there; the duplicate is dropped), and
stitches the pieces into a full-length sequence. Concrete neural
propagators live outside the process behind the wire protocol in
:mod:`vospipe.adapter`; the builtin identity propagator stands in for
them in tests and offline runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

from vospipe.errors import DimensionMismatch, PropagatorFailure
from vospipe.fusion import PredictionSet
from vospipe.keyframes import KeyframeChoice
from vospipe.masks import BinaryMask, MaskSequence, VideoRef

__all__ = [
    "PropagationRequest",
    "Propagator",
    "IdentityPropagator",
    "builtin_identity_propagator",
    "propagate_bidirectional",
    "run_candidates",
]


@dataclass(frozen=True)
class PropagationRequest:
    """One directional run: seed mask at the key frame, walk to an end."""

    video: VideoRef
    key_index: int
    key_mask: BinaryMask
    direction: str  # "forward" | "backward"

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise ValueError(f"direction must be forward or backward, got {self.direction!r}")
        if not 0 <= self.key_index < self.video.frame_count:
            raise ValueError(
                f"key index {self.key_index} outside video {self.video.video_id} "
                f"({self.video.frame_count} frames)"
            )
        if (self.key_mask.width, self.key_mask.height) != (self.video.width, self.video.height):
            raise DimensionMismatch(
                f"key mask {self.key_mask.width}x{self.key_mask.height} vs video "
                f"{self.video.width}x{self.video.height}"
            )

    @property
    def frame_indices(self) -> tuple[int, ...]:
        """Requested frame indices in propagation order, key frame first."""
        if self.direction == "forward":
            return tuple(range(self.key_index, self.video.frame_count))
        return tuple(range(self.key_index, -1, -1))


@runtime_checkable
class Propagator(Protocol):
    """Anything that can walk a seed mask across a frame range."""

    name: str
    version: str

    def propagate(self, request: PropagationRequest) -> list[BinaryMask]:
        """Return one mask per requested frame, in request order."""


class IdentityPropagator:
    """Returns the key mask unchanged for every requested frame."""

    name = "identity"
    version = "builtin"

    def propagate(self, request: PropagationRequest) -> list[BinaryMask]:
        return [request.key_mask] * len(request.frame_indices)


def builtin_identity_propagator() -> Propagator:
    return IdentityPropagator()


def _run_directional(propagator: Propagator, request: PropagationRequest) -> list[BinaryMask]:
    masks = propagator.propagate(request)
    expected = len(request.frame_indices)
    if len(masks) != expected:
        raise PropagatorFailure(
            f"{propagator.name}: returned {len(masks)} masks for a "
            f"{expected}-frame {request.direction} run"
        )
    for i, mask in enumerate(masks):
        if (mask.width, mask.height) != (request.video.width, request.video.height):
            raise DimensionMismatch(
                f"{propagator.name}: mask {i} is {mask.width}x{mask.height}, video "
                f"{request.video.video_id} is {request.video.width}x{request.video.height}"
            )
    return masks


def propagate_bidirectional(
    propagator: Propagator,
    video: VideoRef,
    key_index: int,
    key_mask: BinaryMask,
    expression_id: str = "",
) -> MaskSequence:
    """Full-length sequence from one key mask: backward run, key, forward run.

    The key frame always carries ``key_mask`` bit-exactly, whatever the
    propagator returns for its anchor.
    """
    frames: list[BinaryMask | None] = [None] * video.frame_count
    frames[key_index] = key_mask

    if key_index > 0:
        request = PropagationRequest(video, key_index, key_mask, "backward")
        masks = _run_directional(propagator, request)
        for offset, mask in enumerate(masks[1:], start=1):
            frames[key_index - offset] = mask
    if key_index < video.frame_count - 1:
        request = PropagationRequest(video, key_index, key_mask, "forward")
        masks = _run_directional(propagator, request)
        for offset, mask in enumerate(masks[1:], start=1):
            frames[key_index + offset] = mask

    assert all(f is not None for f in frames)
    return MaskSequence(video.video_id, expression_id, tuple(frames))


def run_candidates(
    propagator: Propagator,
    video: VideoRef,
    choices: list[KeyframeChoice],
    source: MaskSequence,
) -> PredictionSet:
    """One propagated sequence per key-frame choice, plus the source as voter.

    Propagation errors surface to the caller; the pipeline degrades the
    whole (video, expression) to the raw source rather than fusing a
    partial voter set.
    """
    if not choices:
        raise ValueError("choices must be non-empty")
    if source.frame_count != video.frame_count:
        raise DimensionMismatch(
            f"source has {source.frame_count} frames, video {video.video_id} "
            f"has {video.frame_count}"
        )
    if (source.width, source.height) != (video.width, video.height):
        raise DimensionMismatch(
            f"source is {source.width}x{source.height}, video {video.video_id} "
            f"is {video.width}x{video.height}"
        )
    candidates = tuple(
        propagate_bidirectional(
            propagator,
            video,
            choice.index,
            source.frames[choice.index],
            expression_id=source.expression_id,
        )
        for choice in choices
    )
    return PredictionSet(source=source, candidates=candidates)
