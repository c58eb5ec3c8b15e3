"""Brute-force reference implementations used to check the real kernels.

Everything in here is deliberately written as plain loops over pixels,
frames or voters, independent of the vectorized code paths under test.
Slow and obvious beats fast and clever for an oracle.
"""

from __future__ import annotations

import math

import numpy as np


def oracle_area(pixels: np.ndarray) -> int:
    total = 0
    for row in pixels:
        for v in row:
            if v:
                total += 1
    return total


def oracle_intersection_area(a: np.ndarray, b: np.ndarray) -> int:
    h, w = a.shape
    total = 0
    for y in range(h):
        for x in range(w):
            if a[y, x] and b[y, x]:
                total += 1
    return total


def oracle_union_area(a: np.ndarray, b: np.ndarray) -> int:
    h, w = a.shape
    total = 0
    for y in range(h):
        for x in range(w):
            if a[y, x] or b[y, x]:
                total += 1
    return total


def oracle_dilate(pixels: np.ndarray, radius: float) -> np.ndarray:
    """O(H*W*r^2) scan: output on iff an input fg pixel is within radius."""
    h, w = pixels.shape
    out = np.zeros_like(pixels, dtype=bool)
    r = int(math.floor(radius))
    for y in range(h):
        for x in range(w):
            hit = False
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    if dx * dx + dy * dy > radius * radius:
                        continue
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and pixels[ny, nx]:
                        hit = True
                        break
                if hit:
                    break
            out[y, x] = hit
    return out


def oracle_boundary(pixels: np.ndarray) -> np.ndarray:
    """Foreground pixel kept iff a 4-neighbor is background or off-image."""
    h, w = pixels.shape
    out = np.zeros_like(pixels, dtype=bool)
    for y in range(h):
        for x in range(w):
            if not pixels[y, x]:
                continue
            for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                ny, nx = y + dy, x + dx
                if ny < 0 or ny >= h or nx < 0 or nx >= w or not pixels[ny, nx]:
                    out[y, x] = True
                    break
    return out


def oracle_iou(pred: np.ndarray, gt: np.ndarray) -> float:
    inter = oracle_intersection_area(pred, gt)
    union = oracle_union_area(pred, gt)
    if union == 0:
        return 1.0
    return inter / union


def _boundary_points(pixels: np.ndarray) -> list[tuple[int, int]]:
    b = oracle_boundary(pixels)
    return [(y, x) for y in range(b.shape[0]) for x in range(b.shape[1]) if b[y, x]]


def oracle_contour_accuracy(pred: np.ndarray, gt: np.ndarray, tolerance: float) -> float:
    """Boundary F-measure by explicit pairwise distance matching."""
    bp = _boundary_points(pred)
    bg = _boundary_points(gt)
    if not bp and not bg:
        return 1.0
    if not bp or not bg:
        return 0.0

    def matched(points, targets):
        count = 0
        for (y, x) in points:
            for (ty, tx) in targets:
                if (y - ty) ** 2 + (x - tx) ** 2 <= tolerance * tolerance:
                    count += 1
                    break
        return count

    precision = matched(bp, bg) / len(bp)
    recall = matched(bg, bp) / len(bg)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def oracle_argmax(scores) -> int:
    """Linear scan keeping the first (lowest-index) maximum."""
    best_index = 0
    best = scores[0]
    for i, s in enumerate(scores):
        if s > best:
            best = s
            best_index = i
    return best_index


def oracle_top_n(scores, n: int) -> list[int]:
    """Full sort by (score desc, index asc), then prefix."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return order[:n]


def oracle_majority(voter_frames: list[np.ndarray]) -> np.ndarray:
    """Per-pixel vote count; foreground iff strictly more than half vote 1."""
    v = len(voter_frames)
    h, w = voter_frames[0].shape
    out = np.zeros((h, w), dtype=bool)
    for y in range(h):
        for x in range(w):
            votes = 0
            for frame in voter_frames:
                if frame[y, x]:
                    votes += 1
            out[y, x] = votes * 2 > v
    return out


def random_mask(rng: np.random.Generator, width: int, height: int, density: float | None = None) -> np.ndarray:
    if density is None:
        density = rng.uniform(0.0, 1.0)
    return rng.random((height, width)) < density
