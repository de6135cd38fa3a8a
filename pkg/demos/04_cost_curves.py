# %% [markdown]
# # Cost against group size, stage by stage
#
# 100 random masks per stage, the attention FLOPs of the repeated-knapsack
# plan at every group size, mean and standard deviation across masks. The
# fourth stage has a single window and needs no grouping.
#
# Plotting is optional; the CSV written by `groupwin simulate --out` holds
# the same numbers.

# %%
from groupwin import default_profile, flops_comparison, sweep_cost_curve

curves = {}
for stage in default_profile()[:3]:
    stats = sweep_cost_curve(stage, r=0.75, n_trials=100, seed=0)
    curves[stage.index] = stats
    print(f"stage {stage.index}: mean-curve minimum at g_s={stats.mean_argmin}, "
          f"{stats.fraction_argmin_within(40, 58):.0%} of masks pick 40 <= g_s <= 58")

# %%
report = flops_comparison(default_profile(), 0.75, seed=0)
for s in report["stages"]:
    print(f"stage {s['stage']}: grouped/dense attention FLOPs = {s['ratio']:.3f}")
print(f"all stages: {report['total']['ratio']:.3f}")

# %%
try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    import numpy as np

    fig, axes = plt.subplots(1, 3, figsize=(12, 3.2))
    for ax, (k, s) in zip(axes, curves.items()):
        g, m, sd = map(np.asarray, (s.group_sizes, s.mean, s.std))
        ax.plot(g, m)
        ax.fill_between(g, m - sd, m + sd, alpha=0.3)
        ax.axvline(49, ls="--", c="gray")
        ax.set_title(f"stage {k}")
        ax.set_xlabel("group size")
    axes[0].set_ylabel("attention FLOPs")
    fig.tight_layout()
    fig.savefig("cost_curves.png", dpi=120)
    print("wrote cost_curves.png")
