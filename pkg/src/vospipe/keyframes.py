"""Key-frame selection from per-frame confidence tracks.

The key frame is the argmax of the track; the top-N variant feeds one
propagation run per selected frame. Ties break toward the lowest index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from vospipe.errors import EmptyTrack, NTooLarge

__all__ = ["ConfidenceTrack", "KeyframeChoice", "select_keyframe", "select_top_n"]


@dataclass(frozen=True)
class ConfidenceTrack:
    """Per-frame scalar confidences, one per video frame."""

    scores: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        for i, s in enumerate(self.scores):
            if not math.isfinite(s):
                raise ValueError(f"score {i} is not finite ({s})")
            if not 0.0 <= s <= 1.0:
                # Out-of-range scores are upstream bugs; reject, never clamp.
                raise ValueError(f"score {i} out of [0, 1]: {s}")

    def __len__(self) -> int:
        return len(self.scores)


@dataclass(frozen=True)
class KeyframeChoice:
    index: int
    score: float


def select_keyframe(track: ConfidenceTrack) -> KeyframeChoice:
    """Index of the maximum score, lowest index on ties."""
    if len(track) == 0:
        raise EmptyTrack("cannot select a key frame from an empty track")
    best = 0
    for i, s in enumerate(track.scores):
        if s > track.scores[best]:
            best = i
    return KeyframeChoice(index=best, score=track.scores[best])


def select_top_n(track: ConfidenceTrack, n: int) -> list[KeyframeChoice]:
    """The n highest-scoring frame indices, by score desc then index asc."""
    if len(track) == 0:
        raise EmptyTrack("cannot select key frames from an empty track")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n > len(track):
        raise NTooLarge(f"requested {n} key frames from a {len(track)}-frame track")
    order = sorted(range(len(track)), key=lambda i: (-track.scores[i], i))
    return [KeyframeChoice(index=i, score=track.scores[i]) for i in order[:n]]
