"""Binary mask types, run-length codec, set operations and morphology.

Masks are stored as read-only boolean arrays of shape (height, width).
The run-length codec is column-major with a leading background run
(possibly zero-length), matching the dominant segmentation-dataset
convention, and is the interchange form used in manifests and on the
adapter wire: ``{"size": [height, width], "counts": [int...]}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from vospipe.errors import DimensionMismatch, MalformedRle

__all__ = [
    "BinaryMask",
    "RleMask",
    "MaskSequence",
    "VideoRef",
    "ExpressionRef",
    "rle_encode",
    "rle_decode",
    "rle_to_record",
    "rle_from_record",
    "area",
    "intersection_area",
    "union_area",
    "dilate",
    "boundary",
]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """One frame's foreground/background bitmap."""

    pixels: np.ndarray  # bool, shape (height, width), read-only

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask dimensions must be >= 1, got {arr.shape}")
        # Own the buffer: callers keep their array writable, we freeze ours.
        arr = np.array(arr, dtype=bool, copy=True, order="C")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def from_array(cls, array) -> "BinaryMask":
        return cls(np.asarray(array) != 0)

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.ones((height, width), dtype=bool))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __repr__(self) -> str:
        return f"BinaryMask({self.width}x{self.height}, area={area(self)})"


@dataclass(frozen=True)
class RleMask:
    """Run-length encoded mask: column-major, background run first.

    Invariants (checked at construction): all counts are non-negative,
    only the first count may be zero, and the counts sum to
    width * height.
    """

    width: int
    height: int
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if self.width < 1 or self.height < 1:
            raise MalformedRle(f"dimensions must be >= 1, got {self.width}x{self.height}")
        for i, c in enumerate(self.counts):
            if c < 0:
                raise MalformedRle(f"count {i} is negative ({c})")
            if c == 0 and i > 0:
                raise MalformedRle(f"zero-length run at position {i} (only the first may be 0)")
        total = sum(self.counts)
        expected = self.width * self.height
        if total != expected:
            raise MalformedRle(f"counts sum to {total}, expected {expected} for {self.width}x{self.height}")


@dataclass(frozen=True)
class MaskSequence:
    """Per-expression, per-video ordered mask track."""

    video_id: str
    expression_id: str
    frames: tuple[BinaryMask, ...]

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if len(self.frames) < 1:
            raise ValueError("mask sequence must have at least one frame")
        w, h = self.frames[0].width, self.frames[0].height
        for t, frame in enumerate(self.frames):
            if frame.width != w or frame.height != h:
                raise DimensionMismatch(
                    f"frame {t} of {self.video_id}/{self.expression_id} is "
                    f"{frame.width}x{frame.height}, expected {w}x{h}"
                )

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height


@dataclass(frozen=True)
class VideoRef:
    """A video's identity, geometry and ordered frame names."""

    video_id: str
    frame_count: int
    width: int
    height: int
    frame_names: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "frame_names", tuple(self.frame_names))
        if len(self.frame_names) != self.frame_count:
            raise ValueError(
                f"video {self.video_id}: {len(self.frame_names)} frame names "
                f"for frame_count {self.frame_count}"
            )


@dataclass(frozen=True)
class ExpressionRef:
    """A referring sentence bound to one video."""

    expression_id: str
    text: str
    video_id: str

    def __post_init__(self):
        if not self.text:
            raise ValueError(f"expression {self.expression_id}: text is empty")


def _require_same_dims(a: BinaryMask, b: BinaryMask) -> None:
    if a.pixels.shape != b.pixels.shape:
        raise DimensionMismatch(
            f"{a.width}x{a.height} vs {b.width}x{b.height}"
        )


def rle_encode(mask: BinaryMask) -> RleMask:
    """Encode a mask as alternating run lengths, background first."""
    flat = mask.pixels.ravel(order="F")
    # Run boundaries: indices where the value changes, plus both ends.
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(edges)
    counts = runs.tolist()
    if flat[0]:
        counts.insert(0, 0)
    return RleMask(width=mask.width, height=mask.height, counts=tuple(counts))


def rle_decode(rle: RleMask) -> BinaryMask:
    """Exact inverse of :func:`rle_encode`."""
    counts = np.asarray(rle.counts, dtype=np.int64)
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    return BinaryMask(flat.reshape((rle.height, rle.width), order="F"))


def rle_to_record(rle: RleMask) -> dict:
    """Interchange record used in files and on the adapter wire."""
    return {"size": [rle.height, rle.width], "counts": list(rle.counts)}


def rle_from_record(record) -> RleMask:
    """Parse and validate an interchange record."""
    if not isinstance(record, dict):
        raise MalformedRle(f"RLE record must be an object, got {type(record).__name__}")
    size = record.get("size")
    counts = record.get("counts")
    if (
        not isinstance(size, (list, tuple))
        or len(size) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in size)
    ):
        raise MalformedRle(f"RLE record 'size' must be [height, width], got {size!r}")
    if not isinstance(counts, (list, tuple)) or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in counts
    ):
        raise MalformedRle("RLE record 'counts' must be a list of integers")
    height, width = size
    return RleMask(width=width, height=height, counts=tuple(counts))


def area(a: BinaryMask) -> int:
    return int(np.count_nonzero(a.pixels))


def intersection_area(a: BinaryMask, b: BinaryMask) -> int:
    _require_same_dims(a, b)
    return int(np.count_nonzero(a.pixels & b.pixels))


def union_area(a: BinaryMask, b: BinaryMask) -> int:
    _require_same_dims(a, b)
    return int(np.count_nonzero(a.pixels | b.pixels))


def _disk_footprint(radius: float) -> np.ndarray:
    # Integer offsets within Euclidean distance <= radius.
    r = int(radius)
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
    return (dx * dx + dy * dy) <= radius * radius


def dilate(mask: BinaryMask, radius: float) -> BinaryMask:
    """Dilate by a Euclidean disk of the given real radius.

    A pixel is foreground in the result iff some foreground pixel of the
    input lies within distance ``radius`` of it. Radius 0 is the identity.
    """
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    if radius < 1 or area(mask) == 0:
        return mask
    footprint = _disk_footprint(radius)
    dilated = ndimage.binary_dilation(mask.pixels, structure=footprint)
    return BinaryMask(dilated)


def boundary(mask: BinaryMask) -> BinaryMask:
    """Foreground pixels with a background 4-neighbor or on the image border."""
    m = mask.pixels
    # Padding with background makes border pixels boundary automatically.
    padded = np.pad(m, 1, mode="constant", constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return BinaryMask(m & ~interior)
