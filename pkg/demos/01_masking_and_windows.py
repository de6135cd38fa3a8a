# %% [markdown]
# # Batch-wise masks and uneven windows
#
# One random mask over a 7x7 grid of 32 px mask units is shared by the whole
# micro-batch. Each encoder stage sees that mask at its own token resolution,
# and its 7x7 local windows end up holding very different numbers of visible
# tokens.

# %%
import numpy as np

from groupwin import StageGeometry, expand_to_tokens, gen_batch_mask, partition_windows, visible_counts

mask = gen_batch_mask(seed=0, units_h=7, units_w=7, r=0.75)
print(mask.to_ascii())
print("hidden units:", mask.n_hidden, "visible units:", mask.n_visible)

# %% [markdown]
# Stage 1 works on a 56x56 token grid (stride 4), so every mask unit covers
# 8x8 tokens. Windows are 7x7 tokens and do not line up with the 8x8 units.

# %%
vis = expand_to_tokens(mask, unit_span=8)
layout = partition_windows(StageGeometry(56, 56, window=7))
counts = np.array(visible_counts(layout, vis)).reshape(8, 8)
print(counts)
print("visible tokens:", counts.sum(), "empty windows:", (counts == 0).sum())

# %% [markdown]
# Shifted windows are just a different tiling: boundaries move by (3, 3) and
# the border windows shrink. Nothing downstream needs to know.

# %%
shifted = partition_windows(StageGeometry(56, 56, window=7, shift=(3, 3)))
print(len(shifted), "windows;", "sizes:", sorted({w.n_tokens for w in shifted}))
print(np.array(visible_counts(shifted, vis)).reshape(9, 9))
