from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupwin.masking import Mask, TokenVisibility, expand_to_tokens, gen_batch_mask
from groupwin.windowing import (
    StageGeometry,
    nonempty,
    partition_windows,
    visible_counts,
    with_visibility,
)


def _label_oracle(n, p, shift):
    # band index of each coordinate: windows start at shift + k*p
    return [(i + (p - shift)) // p if shift else i // p for i in range(n)]


def _oracle_windows(h, w, p, shift):
    rows = _label_oracle(h, p, shift[0])
    cols = _label_oracle(w, p, shift[1])
    groups = {}
    for r in range(h):
        for c in range(w):
            groups.setdefault((rows[r], cols[c]), []).append((r, c))
    return [groups[k] for k in sorted(groups)]


class TestPartition:
    def test_stage1_regular(self):
        layout = partition_windows(StageGeometry(56, 56, 7))
        assert len(layout) == 64
        assert all(w.n_tokens == 49 for w in layout)

    def test_stage3_and_stage4(self):
        assert len(partition_windows(StageGeometry(14, 14, 7))) == 4
        assert len(partition_windows(StageGeometry(7, 7, 7))) == 1

    def test_shifted_small(self):
        layout = partition_windows(StageGeometry(8, 8, 4, shift=(2, 2)))
        assert [w.n_tokens for w in layout] == [4, 8, 4, 8, 16, 8, 4, 8, 4]

    def test_row_major_order(self):
        layout = partition_windows(StageGeometry(14, 14, 7, shift=(3, 3)))
        origins = [w.origin for w in layout]
        assert origins == sorted(origins)
        for w in layout:
            keys = [tuple(c) for c in w.coords]
            assert keys == sorted(keys)

    def test_zero_shift_needs_divisible_grid(self):
        with pytest.raises(ValueError, match="divisible"):
            StageGeometry(10, 10, 7)

    def test_shift_range(self):
        with pytest.raises(ValueError):
            StageGeometry(14, 14, 7, shift=(7, 0))

    @given(
        h=st.integers(1, 30),
        w=st.integers(1, 30),
        p=st.integers(1, 8),
        data=st.data(),
    )
    @settings(max_examples=150, deadline=None)
    def test_matches_enumeration(self, h, w, p, data):
        dy = data.draw(st.integers(0, p - 1))
        dx = data.draw(st.integers(0, p - 1))
        if (dy, dx) == (0, 0) and (h % p or w % p):
            dy = 1 if p > 1 else 0
            if (dy, dx) == (0, 0):
                return
        layout = partition_windows(StageGeometry(h, w, p, (dy, dx)))
        got = [[tuple(map(int, c)) for c in win.coords] for win in layout]
        assert got == _oracle_windows(h, w, p, (dy, dx))
        # tiling: every token exactly once
        flat = Counter(c for win in got for c in win)
        assert len(flat) == h * w and set(flat.values()) == {1}
        assert all(len(win) <= p * p for win in got)


class TestVisibleCounts:
    def test_all_visible(self):
        layout = partition_windows(StageGeometry(56, 56, 7))
        vis = TokenVisibility(56, 56, np.ones((56, 56), bool))
        assert visible_counts(layout, vis) == [49] * 64

    def test_all_hidden(self):
        layout = partition_windows(StageGeometry(56, 56, 7))
        vis = TokenVisibility(56, 56, np.zeros((56, 56), bool))
        assert visible_counts(layout, vis) == [0] * 64

    def test_single_unit_overlap(self):
        grid = np.zeros((7, 7), bool)
        grid[0, 0] = True
        vis = expand_to_tokens(Mask(7, 7, grid, 0.75), 8)
        counts = visible_counts(partition_windows(StageGeometry(56, 56, 7)), vis)
        expected = [0] * 64
        expected[0], expected[1], expected[8], expected[9] = 49, 7, 7, 1
        assert counts == expected

    def test_dimension_mismatch(self):
        layout = partition_windows(StageGeometry(14, 14, 7))
        vis = TokenVisibility(7, 7, np.ones((7, 7), bool))
        with pytest.raises(ValueError, match="does not match"):
            visible_counts(layout, vis)

    def test_empty_windows_kept_then_dropped(self):
        grid = np.zeros((7, 7), bool)
        grid[0, 0] = True
        vis = expand_to_tokens(Mask(7, 7, grid, 0.75), 8)
        layout = with_visibility(partition_windows(StageGeometry(56, 56, 7)), vis)
        assert len(layout) == 64
        assert sum(w.empty for w in layout) == 60
        ids, sizes = nonempty(layout.counts)
        assert ids == [0, 1, 8, 9]
        assert sizes == [49, 7, 7, 1]

    @given(seed=st.integers(0, 10_000), shift=st.sampled_from([(0, 0), (3, 3), (2, 5)]),
           r=st.sampled_from([0.0, 0.5, 0.75, 0.85]))
    @settings(max_examples=60, deadline=None)
    def test_conservation(self, seed, shift, r):
        for tokens, span in [(56, 8), (28, 4), (14, 2), (7, 1)]:
            vis = expand_to_tokens(gen_batch_mask(seed, 7, 7, r), span)
            layout = partition_windows(StageGeometry(tokens, tokens, 7, shift))
            assert sum(visible_counts(layout, vis)) == vis.n_visible
