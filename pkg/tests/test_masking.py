import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupwin.masking import Mask, expand_to_tokens, gen_batch_mask

# seed=0, 7x7, r=0.75; frozen from the first run of the generator
SEED0_PATTERN = """\
.....#.
#....##
##.....
.......
.#.#.#.
....#.#
...#..#"""


def _shuffle_oracle(seed, n, n_mask):
    order = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    hidden = np.zeros(n, dtype=bool)
    hidden[order[:n_mask]] = True
    return ~hidden


class TestGenBatchMask:
    def test_stage_default(self):
        m = gen_batch_mask(0, 7, 7, 0.75)
        assert m.n_hidden == 36
        assert m.n_visible == 13
        assert m.to_ascii() == SEED0_PATTERN
        np.testing.assert_array_equal(m.visible.ravel(), _shuffle_oracle(0, 49, 36))

    @pytest.mark.parametrize("seed", [0, 3, 17])
    def test_zero_ratio_keeps_everything(self, seed):
        m = gen_batch_mask(seed, 7, 7, 0.0)
        assert m.visible.all()
        assert m.n_visible == 49

    def test_repeatable(self):
        a = gen_batch_mask(5, 4, 4, 0.5)
        b = gen_batch_mask(5, 4, 4, 0.5)
        assert a.n_hidden == 8
        np.testing.assert_array_equal(a.visible, b.visible)

    def test_seed_changes_pattern(self):
        a = gen_batch_mask(1, 7, 7, 0.75)
        b = gen_batch_mask(2, 7, 7, 0.75)
        assert not np.array_equal(a.visible, b.visible)

    @pytest.mark.parametrize("r", [-0.1, 1.0, 1.5])
    def test_bad_ratio(self, r):
        with pytest.raises(ValueError, match="ratio"):
            gen_batch_mask(0, 7, 7, r)

    def test_bad_dims(self):
        with pytest.raises(ValueError):
            gen_batch_mask(0, 0, 7, 0.5)

    def test_immutable(self):
        m = gen_batch_mask(0, 7, 7, 0.75)
        with pytest.raises(ValueError):
            m.visible[0, 0] = True

    @given(
        seed=st.integers(0, 2**32 - 1),
        h=st.integers(1, 20),
        w=st.integers(1, 20),
        r=st.floats(0.0, 1.0, exclude_max=True),
    )
    @settings(max_examples=200, deadline=None)
    def test_hidden_count_is_floor(self, seed, h, w, r):
        m = gen_batch_mask(seed, h, w, r)
        assert m.n_hidden == math.floor(r * h * w)


class TestExpandToTokens:
    def test_identity_block(self):
        m = Mask(1, 1, np.ones((1, 1), bool), 0.0)
        vis = expand_to_tokens(m, 8)
        assert vis.visible.shape == (8, 8)
        assert vis.visible.all()

    def test_single_corner_unit(self):
        grid = np.zeros((2, 2), bool)
        grid[0, 0] = True
        vis = expand_to_tokens(Mask(2, 2, grid, 0.75), 2)
        expected = np.zeros((4, 4), bool)
        expected[:2, :2] = True
        np.testing.assert_array_equal(vis.visible, expected)

    def test_popcount(self):
        m = gen_batch_mask(0, 7, 7, 0.75)
        vis = expand_to_tokens(m, 8)
        assert vis.visible.shape == (56, 56)
        assert vis.n_visible == 64 * m.n_visible == 832

    def test_bad_span(self):
        with pytest.raises(ValueError):
            expand_to_tokens(gen_batch_mask(0, 2, 2, 0.5), 0)

    @given(seed=st.integers(0, 10_000), span=st.integers(1, 6), r=st.sampled_from([0.0, 0.5, 0.75]))
    @settings(max_examples=50, deadline=None)
    def test_blocks_constant(self, seed, span, r):
        m = gen_batch_mask(seed, 5, 4, r)
        vis = expand_to_tokens(m, span).visible
        for i in range(5):
            for j in range(4):
                block = vis[i * span:(i + 1) * span, j * span:(j + 1) * span]
                assert (block == m.visible[i, j]).all()
