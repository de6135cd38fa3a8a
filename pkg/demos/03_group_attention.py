# %% [markdown]
# # Grouped attention equals per-window attention
#
# Tokens from several windows share a group; a block-diagonal mask keeps them
# from attending across windows, and the relative position bias is looked up
# from each token's absolute position. The scattered output matches plain
# window attention to rounding error.

# %%
import numpy as np

from groupwin import (
    AttentionParams,
    StageGeometry,
    expand_to_tokens,
    gather_groups,
    gen_batch_mask,
    group_attention_weights,
    group_window_attention,
    make_tokens,
    max_relative_error,
    optimal_grouping,
    partition_windows,
    reference_window_attention,
    with_visibility,
)
from groupwin.windowing import nonempty

C, heads = 64, 4
vis = expand_to_tokens(gen_batch_mask(1, 7, 7, 0.75), 8)
layout = with_visibility(partition_windows(StageGeometry(56, 56, 7, shift=(3, 3))), vis)
ids, sizes = nonempty(layout.counts)
plan, _ = optimal_grouping(sizes, C, ids)

rng = np.random.default_rng(0)
tokens = make_tokens(layout, vis, rng.standard_normal((vis.n_visible, C)))
params = AttentionParams.random(C, heads, window=7, seed=0)

grouped = group_window_attention(tokens, layout, plan, params)
reference = reference_window_attention(tokens, layout, params)
print("groups:", plan.n_groups, "x", plan.group_size)
print("max relative error:", max_relative_error(grouped.values, reference.values))

# %% [markdown]
# The attention map of the first group is block diagonal, one block per
# window, with nothing on padding rows or columns.

# %%
w = group_attention_weights(gather_groups(tokens, layout, plan), params)[0, 0]
print(plan.groups[0], plan.fill[0])
print((w > 0).astype(int)[:: max(1, plan.group_size // 24), :: max(1, plan.group_size // 24)])
