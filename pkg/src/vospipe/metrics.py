"""Region similarity J, contour accuracy F, and their mean J&F.

Per-frame scores are fractions in [0, 1]; reports render percentages at
two decimals with round-half-up, which is what makes the global J&F the
exact mean of the rendered J and F columns (62.57 from 58.98/66.15).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping

from vospipe.errors import EmptyInput, SequenceMismatch
from vospipe.masks import (
    BinaryMask,
    MaskSequence,
    area,
    boundary,
    dilate,
    intersection_area,
    union_area,
)

__all__ = [
    "FrameScore",
    "ReportRow",
    "EvalReport",
    "region_similarity",
    "contour_accuracy",
    "default_tolerance",
    "score_frame",
    "score_sequence",
    "aggregate",
    "format_report",
]

_TWO_PLACES = Decimal("0.01")


@dataclass(frozen=True)
class FrameScore:
    """One frame's region and contour scores."""

    j: float
    f: float

    def __post_init__(self):
        if not (0.0 <= self.j <= 1.0 and 0.0 <= self.f <= 1.0):
            raise ValueError(f"scores must lie in [0, 1], got j={self.j}, f={self.f}")


def _round2(value: Decimal) -> Decimal:
    return value.quantize(_TWO_PLACES, rounding=ROUND_HALF_UP)


def _as_percent(fraction: float) -> Decimal:
    return _round2(Decimal(repr(float(fraction))) * 100)


@dataclass(frozen=True)
class ReportRow:
    """Rendered percentages for one table row, in table column order."""

    jf: Decimal
    j: Decimal
    f: Decimal

    @classmethod
    def from_fractions(cls, j: float, f: float) -> "ReportRow":
        j_pct = _as_percent(j)
        f_pct = _as_percent(f)
        # J&F is the mean of the *rendered* J and F, like the tables it mirrors.
        jf_pct = _round2((j_pct + f_pct) / 2)
        return cls(jf=jf_pct, j=j_pct, f=f_pct)

    def to_record(self) -> dict:
        return {"jf": float(self.jf), "j": float(self.j), "f": float(self.f)}


@dataclass(frozen=True)
class EvalReport:
    """Per-sequence and global scores, raw and rendered."""

    per_sequence: dict[tuple[str, str], ReportRow]
    overall: ReportRow
    mean_j: float
    mean_f: float

    @property
    def mean_jf(self) -> float:
        return (self.mean_j + self.mean_f) / 2

    def to_document(self) -> dict:
        rows = [
            {"video_id": vid, "expression_id": eid, **row.to_record()}
            for (vid, eid), row in self.per_sequence.items()
        ]
        return {"schema": 1, "overall": self.overall.to_record(), "per_sequence": rows}


def region_similarity(pred: BinaryMask, gt: BinaryMask) -> float:
    """Intersection over union; both-empty counts as a perfect 1.0."""
    union = union_area(pred, gt)
    if union == 0:
        return 1.0
    return intersection_area(pred, gt) / union


def default_tolerance(width: int, height: int) -> int:
    """Boundary match tolerance: 0.8% of the image diagonal, at least 1 px."""
    if width < 1 or height < 1:
        raise ValueError(f"invalid dimensions {width}x{height}")
    return max(1, int(math.floor(0.008 * math.hypot(width, height) + 0.5)))


def contour_accuracy(pred: BinaryMask, gt: BinaryMask, tolerance: float) -> float:
    """Boundary F-measure under a pixel distance tolerance.

    Precision counts predicted boundary pixels within ``tolerance`` of the
    ground-truth boundary (via disk dilation), recall the converse, and the
    result is their harmonic mean.
    """
    if tolerance < 0:
        raise ValueError(f"tolerance must be >= 0, got {tolerance}")
    pred_boundary = boundary(pred)
    gt_boundary = boundary(gt)
    n_pred = area(pred_boundary)
    n_gt = area(gt_boundary)
    if n_pred == 0 and n_gt == 0:
        return 1.0
    if n_pred == 0 or n_gt == 0:
        return 0.0
    precision = intersection_area(pred_boundary, dilate(gt_boundary, tolerance)) / n_pred
    recall = intersection_area(gt_boundary, dilate(pred_boundary, tolerance)) / n_gt
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def score_frame(pred: BinaryMask, gt: BinaryMask, tolerance: float | None = None) -> FrameScore:
    if tolerance is None:
        tolerance = default_tolerance(gt.width, gt.height)
    return FrameScore(
        j=region_similarity(pred, gt),
        f=contour_accuracy(pred, gt, tolerance),
    )


def score_sequence(
    pred: MaskSequence, gt: MaskSequence, tolerance: float | None = None
) -> tuple[float, float]:
    """Arithmetic mean of per-frame J and F over all frames."""
    if pred.frame_count != gt.frame_count:
        raise SequenceMismatch(
            f"{pred.video_id}/{pred.expression_id}: {pred.frame_count} predicted "
            f"frames vs {gt.frame_count} ground-truth frames"
        )
    if (pred.width, pred.height) != (gt.width, gt.height):
        raise SequenceMismatch(
            f"{pred.video_id}/{pred.expression_id}: predicted {pred.width}x{pred.height} "
            f"vs ground-truth {gt.width}x{gt.height}"
        )
    if tolerance is None:
        tolerance = default_tolerance(gt.width, gt.height)
    j_total = 0.0
    f_total = 0.0
    for pred_frame, gt_frame in zip(pred.frames, gt.frames):
        score = score_frame(pred_frame, gt_frame, tolerance)
        j_total += score.j
        f_total += score.f
    t = pred.frame_count
    return j_total / t, f_total / t


def aggregate(
    per_sequence_scores: Mapping[tuple[str, str], tuple[float, float]]
    | Iterable[tuple[tuple[str, str], tuple[float, float]]],
) -> EvalReport:
    """Unweighted mean over (video, expression) pairs, rendered as percents."""
    items = (
        list(per_sequence_scores.items())
        if isinstance(per_sequence_scores, Mapping)
        else list(per_sequence_scores)
    )
    if not items:
        raise EmptyInput("no sequence scores to aggregate")
    rows: dict[tuple[str, str], ReportRow] = {}
    j_total = 0.0
    f_total = 0.0
    for key, (j, f) in items:
        rows[tuple(key)] = ReportRow.from_fractions(j, f)
        j_total += j
        f_total += f
    n = len(items)
    mean_j = j_total / n
    mean_f = f_total / n
    return EvalReport(
        per_sequence=rows,
        overall=ReportRow.from_fractions(mean_j, mean_f),
        mean_j=mean_j,
        mean_f=mean_f,
    )


def _format_jf_cell(row: ReportRow, baseline_jf: Decimal | None) -> str:
    if baseline_jf is None:
        return f"{row.jf}"
    delta = row.jf - _round2(baseline_jf)
    return f"{row.jf}({delta:+.2f})"


def format_report(report: EvalReport, baseline_jf: Decimal | float | None = None) -> str:
    """Plain-text table in leaderboard column order (J&F, J, F).

    ``baseline_jf`` is a J&F percentage; when given, the overall row renders
    an ablation-style signed delta, e.g. ``55.34(+4.83)``.
    """
    if baseline_jf is not None and not isinstance(baseline_jf, Decimal):
        baseline_jf = Decimal(repr(float(baseline_jf)))
    header = f"{'sequence':<40} {'J&F':>12} {'J':>7} {'F':>7}"
    lines = [header, "-" * len(header)]
    for (vid, eid), row in report.per_sequence.items():
        lines.append(f"{vid + '/' + eid:<40} {row.jf!s:>12} {row.j!s:>7} {row.f!s:>7}")
    lines.append("-" * len(header))
    overall_cell = _format_jf_cell(report.overall, baseline_jf)
    lines.append(f"{'overall':<40} {overall_cell:>12} {report.overall.j!s:>7} {report.overall.f!s:>7}")
    return "\n".join(lines) + "\n"
