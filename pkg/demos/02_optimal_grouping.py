# %% [markdown]
# # Packing uneven windows into equal groups
#
# For a group size g_s, windows are packed by repeatedly taking the fullest
# subset that fits (a subset-sum knapsack) until none remain. Every g_s from
# the largest window up to the total is costed with the attention FLOPs
# model n_g * (4 g_s C^2 + 2 g_s^2 C), and the cheapest wins.

# %%
from groupwin import knapsack, optimal_grouping, partition

print(knapsack(10, [7, 3, 5]))          # -> [0, 1], fill 10
plan = partition(12, [7, 3, 5, 6, 3])
print(plan.groups, plan.fill, plan.padding)

# %% [markdown]
# Now the stage-1 windows from the previous demo.

# %%
from groupwin import StageGeometry, expand_to_tokens, gen_batch_mask, partition_windows, visible_counts
from groupwin.windowing import nonempty

vis = expand_to_tokens(gen_batch_mask(0, 7, 7, 0.75), 8)
counts = visible_counts(partition_windows(StageGeometry(56, 56, 7)), vis)
ids, sizes = nonempty(counts)
plan, report = optimal_grouping(sizes, channels=128, window_ids=ids)
print(f"{len(sizes)} non-empty windows, {sum(sizes)} visible tokens")
print(f"best g_s={plan.group_size}: {plan.n_groups} groups, padding {sum(plan.padding)} slots")

# %% [markdown]
# The whole sweep is in the report; a few entries around the optimum:

# %%
for g, n_g, cost in report.candidates:
    if abs(g - plan.group_size) <= 4 or (g % 49 == 0 and g <= 245):
        print(f"g_s={g:4d}  n_g={n_g:3d}  flops={cost:,}")
