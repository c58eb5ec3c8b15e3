"""Key-frame selection against linear-scan and sort oracles."""

from __future__ import annotations

import numpy as np
import pytest

from vospipe.errors import EmptyTrack, NTooLarge
from vospipe.keyframes import ConfidenceTrack, KeyframeChoice, select_keyframe, select_top_n

from oracles import oracle_argmax, oracle_top_n


def random_track(rng, length):
    # Quantized scores so ties actually happen.
    return ConfidenceTrack(tuple(float(s) for s in rng.integers(0, 10, size=length) / 10))


class TestSelectKeyframe:
    def test_argmax(self):
        assert select_keyframe(ConfidenceTrack((0.1, 0.9, 0.4))) == KeyframeChoice(1, 0.9)

    def test_tie_breaks_low_index(self):
        assert select_keyframe(ConfidenceTrack((0.5, 0.5))).index == 0

    def test_empty_rejected(self):
        with pytest.raises(EmptyTrack):
            select_keyframe(ConfidenceTrack(()))

    def test_matches_linear_scan(self):
        rng = np.random.default_rng(71)
        for _ in range(1000):
            track = random_track(rng, int(rng.integers(1, 60)))
            choice = select_keyframe(track)
            assert choice.index == oracle_argmax(track.scores)
            assert choice.score == track.scores[choice.index]


class TestSelectTopN:
    def test_example(self):
        choices = select_top_n(ConfidenceTrack((0.1, 0.9, 0.4)), 2)
        assert [c.index for c in choices] == [1, 2]

    def test_full_length_is_sorted_permutation(self):
        track = ConfidenceTrack((0.3, 0.9, 0.3, 0.1))
        choices = select_top_n(track, len(track))
        assert [c.index for c in choices] == [1, 0, 2, 3]

    def test_first_equals_keyframe(self):
        rng = np.random.default_rng(73)
        for _ in range(200):
            track = random_track(rng, int(rng.integers(1, 40)))
            n = int(rng.integers(1, len(track) + 1))
            assert select_top_n(track, n)[0] == select_keyframe(track)

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(79)
        for _ in range(300):
            track = random_track(rng, int(rng.integers(1, 40)))
            n = int(rng.integers(1, len(track) + 1))
            assert [c.index for c in select_top_n(track, n)] == oracle_top_n(track.scores, n)

    def test_n_too_large(self):
        with pytest.raises(NTooLarge):
            select_top_n(ConfidenceTrack((0.5,)), 2)

    def test_empty_rejected(self):
        with pytest.raises(EmptyTrack):
            select_top_n(ConfidenceTrack(()), 1)


class TestProperties:
    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(83)
        for _ in range(100):
            track = random_track(rng, int(rng.integers(1, 30)))
            squeezed = ConfidenceTrack(tuple(s * 0.5 + 0.25 for s in track.scores))
            assert select_keyframe(track).index == select_keyframe(squeezed).index
            n = int(rng.integers(1, len(track) + 1))
            assert [c.index for c in select_top_n(track, n)] == [
                c.index for c in select_top_n(squeezed, n)
            ]

    def test_out_of_range_scores_rejected(self):
        with pytest.raises(ValueError):
            ConfidenceTrack((0.5, 1.5))
        with pytest.raises(ValueError):
            ConfidenceTrack((-0.1,))
        with pytest.raises(ValueError):
            ConfidenceTrack((float("nan"),))
