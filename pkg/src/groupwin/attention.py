"""Group window attention on visible tokens, plus the per-window reference.

The grouped path gathers the visible tokens of the windows in each group
into one fixed-size slab, runs multi-head attention with a block-diagonal
mask (tokens only attend within their own window, padding attends nowhere),
and scatters the results back. The reference path runs plain attention on
each window separately. Both use the same relative position bias table,
looked up from the tokens' absolute positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grouping import GroupPlan
from .masking import TokenVisibility
from .windowing import WindowLayout

PAD_ID = -1


@dataclass(frozen=True)
class TokenArray:
    values: np.ndarray  # (L, C)
    positions: np.ndarray  # (L, 2) absolute (row, col)
    window_id: np.ndarray  # (L,)

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError("values must be (L, C)")
        L = len(self.values)
        if self.positions.shape != (L, 2) or self.window_id.shape != (L,):
            raise ValueError("positions/window_id do not match values")

    def __len__(self):
        return len(self.values)

    @property
    def channels(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class GroupedTokens:
    values: np.ndarray  # (n_g, g_s, C)
    positions: np.ndarray  # (n_g, g_s, 2)
    window_id: np.ndarray  # (n_g, g_s), PAD_ID on padding
    pad: np.ndarray  # (n_g, g_s) bool
    shuffle: np.ndarray  # (n_g * g_s,) token index per slot, -1 on padding
    unshuffle: np.ndarray  # (L,) flat slot index per token

    @property
    def n_groups(self) -> int:
        return self.values.shape[0]

    @property
    def group_size(self) -> int:
        return self.values.shape[1]

    def replace_values(self, values: np.ndarray) -> "GroupedTokens":
        return GroupedTokens(
            values, self.positions, self.window_id, self.pad, self.shuffle, self.unshuffle
        )


@dataclass(frozen=True)
class AttentionParams:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    bias_table: np.ndarray  # (heads, 2p-1, 2p-1)
    heads: int
    window: int

    def __post_init__(self):
        C = self.wq.shape[0]
        for w in (self.wq, self.wk, self.wv, self.wo):
            if w.shape != (C, C):
                raise ValueError("projection matrices must all be C x C")
        if C % self.heads:
            raise ValueError(f"channels {C} not divisible by heads {self.heads}")
        side = 2 * self.window - 1
        if self.bias_table.shape != (self.heads, side, side):
            raise ValueError(
                f"bias table must be {(self.heads, side, side)}, got {self.bias_table.shape}"
            )

    @property
    def channels(self) -> int:
        return self.wq.shape[0]

    @property
    def head_dim(self) -> int:
        return self.channels // self.heads

    @classmethod
    def random(cls, channels, heads, window, seed=0, dtype=np.float64):
        """Gaussian projections (std ``C**-0.5``) and a standard-normal bias table."""
        rng = np.random.default_rng(seed)
        std = channels ** -0.5
        ws = [rng.normal(0.0, std, (channels, channels)).astype(dtype) for _ in range(4)]
        table = rng.standard_normal((heads, 2 * window - 1, 2 * window - 1)).astype(dtype)
        return cls(*ws, table, heads, window)

    def astype(self, dtype) -> "AttentionParams":
        return AttentionParams(
            self.wq.astype(dtype), self.wk.astype(dtype), self.wv.astype(dtype),
            self.wo.astype(dtype), self.bias_table.astype(dtype), self.heads, self.window,
        )


def make_tokens(layout: WindowLayout, vis: TokenVisibility, values: np.ndarray) -> TokenArray:
    """Attach positions and window ids to the visible tokens of a stage.

    Rows of ``values`` correspond to the visible tokens in row-major grid
    order, the order produced by discarding the masked positions.
    """
    rows, cols = np.nonzero(vis.visible)
    if len(values) != len(rows):
        raise ValueError(f"got {len(values)} value rows for {len(rows)} visible tokens")
    owner = layout.window_index()
    pos = np.stack([rows, cols], axis=1)
    return TokenArray(np.asarray(values), pos, owner[rows, cols])


def relative_bias(table: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Bias for relative offsets ``delta`` (..., 2); returns (heads, ...)."""
    side = table.shape[-1]
    p = (side + 1) // 2
    delta = np.asarray(delta)
    if delta.size and np.abs(delta).max() > p - 1:
        raise ValueError(
            f"relative offset {np.abs(delta).max()} exceeds window reach {p - 1}; "
            "two tokens of one window lie too far apart"
        )
    return table[:, delta[..., 0] + p - 1, delta[..., 1] + p - 1]


def relative_bias_lookup(table: np.ndarray, positions_a, positions_b) -> np.ndarray:
    """Bias between tokens at absolute ``positions_a`` and ``positions_b``."""
    return relative_bias(table, np.asarray(positions_a) - np.asarray(positions_b))


def gather_groups(tokens: TokenArray, layout: WindowLayout, plan: GroupPlan) -> GroupedTokens:
    """Lay the visible tokens out as ``n_g`` groups of ``g_s`` slots.

    Group ``j`` holds the windows of ``plan.groups[j]`` back to back, each in
    row-major order of absolute position; leftover slots are zero padding.
    """
    g_s = plan.group_size
    width = layout.geometry.tokens_w
    key = tokens.positions[:, 0] * width + tokens.positions[:, 1]
    order = np.lexsort((key, tokens.window_id))
    sorted_ids = tokens.window_id[order]
    starts = np.searchsorted(sorted_ids, np.arange(len(layout) + 1))

    placed = set(plan.window_ids())
    if len(placed) != len(plan.window_ids()):
        raise ValueError("plan lists a window more than once")
    if np.any((tokens.window_id < 0) | (tokens.window_id >= len(layout))):
        raise ValueError("token window ids fall outside the layout")
    for wid in np.unique(tokens.window_id):
        if int(wid) not in placed:
            raise ValueError(f"window {wid} has tokens but is missing from the plan")

    shuffle = np.full(plan.n_groups * g_s, -1, dtype=np.int64)
    for j, grp in enumerate(plan.groups):
        parts = [order[starts[w]:starts[w + 1]] for w in grp]
        for w, part in zip(grp, parts):
            if len(part) != layout[w].visible_count:
                raise ValueError(
                    f"window {w}: layout counts {layout[w].visible_count} visible tokens, "
                    f"token array has {len(part)}"
                )
        idx = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
        if len(idx) != plan.fill[j] or len(idx) > g_s:
            raise ValueError(f"group {j}: {len(idx)} tokens, plan says fill {plan.fill[j]}")
        shuffle[j * g_s:j * g_s + len(idx)] = idx

    pad = shuffle < 0
    src = np.where(pad, 0, shuffle)
    C = tokens.channels
    values = np.where(pad[:, None], 0, tokens.values[src]).astype(tokens.values.dtype)
    positions = np.where(pad[:, None], 0, tokens.positions[src])
    wids = np.where(pad, PAD_ID, tokens.window_id[src])
    unshuffle = np.empty(len(tokens), dtype=np.int64)
    unshuffle[shuffle[~pad]] = np.flatnonzero(~pad)
    shape = (plan.n_groups, g_s)
    return GroupedTokens(
        values.reshape(*shape, C), positions.reshape(*shape, 2), wids.reshape(shape),
        pad.reshape(shape), shuffle, unshuffle,
    )


def scatter_groups(g: GroupedTokens) -> TokenArray:
    """Inverse of :func:`gather_groups`: drop padding, restore token order."""
    L = len(g.unshuffle)
    n_slots = g.n_groups * g.group_size
    u = g.unshuffle
    if len(g.shuffle) != n_slots or np.any((u < 0) | (u >= n_slots)):
        raise ValueError("corrupted unshuffle index")
    if not np.array_equal(g.shuffle[u], np.arange(L)):
        raise ValueError("shuffle and unshuffle indices are not inverse")
    flat_pad = g.pad.reshape(-1)
    if flat_pad[u].any() or flat_pad.sum() != n_slots - L:
        raise ValueError("unshuffle index points at padding slots")
    C = g.values.shape[-1]
    return TokenArray(
        g.values.reshape(-1, C)[u],
        g.positions.reshape(-1, 2)[u],
        g.window_id.reshape(-1)[u],
    )


def _check_finite(x, what):
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite {what}")


def _split_heads(x, heads):
    *lead, C = x.shape
    return np.moveaxis(x.reshape(*lead, heads, C // heads), -2, -3)


def _merge_heads(x):
    x = np.moveaxis(x, -3, -2)
    return x.reshape(*x.shape[:-2], -1)


def _qkv(x, params):
    h = params.heads
    return (_split_heads(x @ params.wq, h), _split_heads(x @ params.wk, h),
            _split_heads(x @ params.wv, h))


def group_attention_weights(g: GroupedTokens, params: AttentionParams) -> np.ndarray:
    """Masked softmax weights, shape (n_g, heads, g_s, g_s).

    Scores between tokens of different windows, or touching a padding slot,
    are pushed to the most negative finite float before the softmax so they
    get exactly zero weight. Rows belonging to padding slots are all zero.
    """
    x = g.values
    _check_finite(x, "group values")
    dtype = x.dtype
    params = params.astype(dtype)
    q, k, _ = _qkv(x, params)
    scores = (q @ np.swapaxes(k, -1, -2)) * dtype.type(params.head_dim ** -0.5)

    wid = g.window_id
    allowed = (wid[:, :, None] == wid[:, None, :]) & ~g.pad[:, :, None] & ~g.pad[:, None, :]
    delta = g.positions[:, :, None, :] - g.positions[:, None, :, :]
    delta = np.where(allowed[..., None], delta, 0)
    bias = np.moveaxis(relative_bias(params.bias_table, delta), 0, 1)

    allowed = allowed[:, None]
    scores = np.where(allowed, scores + bias, np.finfo(dtype).min)
    scores = scores - scores.max(axis=-1, keepdims=True)
    weights = np.where(allowed, np.exp(scores), 0)
    denom = weights.sum(axis=-1, keepdims=True)
    return weights / np.where(denom > 0, denom, 1)


def masked_group_attention(g: GroupedTokens, params: AttentionParams) -> GroupedTokens:
    """Multi-head attention inside each group, restricted to same-window pairs."""
    weights = group_attention_weights(g, params)
    params = params.astype(g.values.dtype)
    _, _, v = _qkv(g.values, params)
    out = _merge_heads(weights @ v) @ params.wo
    out = np.where(g.pad[..., None], 0, out).astype(g.values.dtype)
    return g.replace_values(out)


def group_window_attention(
    tokens: TokenArray, layout: WindowLayout, plan: GroupPlan, params: AttentionParams
) -> TokenArray:
    """gather -> masked attention -> scatter."""
    return scatter_groups(masked_group_attention(gather_groups(tokens, layout, plan), params))


def _dense_attention(x, pos, params):
    h = params.heads
    d = params.head_dim
    out_heads = []
    for head in range(h):
        sl = slice(head * d, (head + 1) * d)
        q = x @ params.wq[:, sl]
        k = x @ params.wk[:, sl]
        v = x @ params.wv[:, sl]
        s = q @ k.T / np.sqrt(d)
        s = s + relative_bias_lookup(params.bias_table[head:head + 1], pos[:, None], pos[None, :])[0]
        s = np.exp(s - s.max(axis=1, keepdims=True))
        out_heads.append((s / s.sum(axis=1, keepdims=True)) @ v)
    return np.concatenate(out_heads, axis=1) @ params.wo


def reference_window_attention(
    tokens: TokenArray, layout: WindowLayout, params: AttentionParams
) -> TokenArray:
    """Plain window attention: every window attends over its own visible tokens."""
    x = tokens.values
    _check_finite(x, "token values")
    params = params.astype(x.dtype)
    out = np.zeros_like(x)
    for w in layout:
        idx = np.flatnonzero(tokens.window_id == w.id)
        if len(idx):
            out[idx] = _dense_attention(x[idx], tokens.positions[idx], params)
    return TokenArray(out, tokens.positions, tokens.window_id)


def max_relative_error(a: np.ndarray, ref: np.ndarray) -> float:
    """``max|a - ref| / max|ref|`` (0 for empty inputs)."""
    if ref.size == 0:
        return 0.0
    scale = float(np.abs(ref).max())
    return float(np.abs(a - ref).max()) / (scale if scale > 0 else 1.0)
