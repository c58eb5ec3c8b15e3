"""Pixel-level binary majority voting over candidate mask sequences.

The voter pool is the original model output plus the propagated
candidates; a pixel becomes foreground iff strictly more than half of
the voters mark it. With an even pool ties go to background, the
conservative choice for precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vospipe.errors import InconsistentSet
from vospipe.masks import BinaryMask, MaskSequence

__all__ = ["PredictionSet", "majority_fuse", "fuse_or_fallback"]


@dataclass(frozen=True)
class PredictionSet:
    """The original sequence and its propagated candidates, pre-fusion."""

    source: MaskSequence
    candidates: tuple[MaskSequence, ...]

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        for i, candidate in enumerate(self.candidates):
            if (candidate.video_id, candidate.expression_id) != (
                self.source.video_id,
                self.source.expression_id,
            ):
                raise InconsistentSet(
                    f"candidate {i} is for {candidate.video_id}/{candidate.expression_id}, "
                    f"set is for {self.source.video_id}/{self.source.expression_id}"
                )
            if candidate.frame_count != self.source.frame_count:
                raise InconsistentSet(
                    f"candidate {i} has {candidate.frame_count} frames, "
                    f"source has {self.source.frame_count}"
                )
            if (candidate.width, candidate.height) != (self.source.width, self.source.height):
                raise InconsistentSet(
                    f"candidate {i} is {candidate.width}x{candidate.height}, "
                    f"source is {self.source.width}x{self.source.height}"
                )


def majority_fuse(prediction_set: PredictionSet, include_source: bool = True) -> MaskSequence:
    """Strict per-pixel majority over all voters.

    ``include_source`` controls whether the original sequence votes
    alongside the propagated candidates.
    """
    voters: list[MaskSequence] = []
    if include_source:
        voters.append(prediction_set.source)
    voters.extend(prediction_set.candidates)
    if not voters:
        raise InconsistentSet("no voters: source excluded and no candidates")

    total = len(voters)
    fused_frames = []
    for t in range(prediction_set.source.frame_count):
        votes = np.zeros(
            (prediction_set.source.height, prediction_set.source.width), dtype=np.int32
        )
        for voter in voters:
            votes += voter.frames[t].pixels
        # Strict majority: votes > total/2, integer-exact on both parities.
        fused_frames.append(BinaryMask(votes * 2 > total))
    return MaskSequence(
        video_id=prediction_set.source.video_id,
        expression_id=prediction_set.source.expression_id,
        frames=tuple(fused_frames),
    )


def fuse_or_fallback(
    prediction_set: PredictionSet,
    post_process_enabled: bool = True,
    include_source: bool = True,
) -> MaskSequence:
    """Majority fusion, or the untouched source when disabled or voterless."""
    if not post_process_enabled or not prediction_set.candidates:
        return prediction_set.source
    return majority_fuse(prediction_set, include_source=include_source)
