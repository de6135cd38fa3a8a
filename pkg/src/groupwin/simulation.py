"""Cost-vs-group-size sweeps and grouped-vs-dense FLOPs comparisons.

A single batch-wise mask over a 7x7 grid of mask units is projected to
every stage of a four-stage hierarchical encoder (token strides 4/8/16/32
on a 224 px image, 32 px mask units), so stage ``k`` sees each unit as a
``unit_span x unit_span`` block of tokens.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .grouping import GroupPlan, attention_cost, optimal_grouping
from .masking import expand_to_tokens, gen_batch_mask
from .windowing import StageGeometry, nonempty, partition_windows, visible_counts

MASK_UNITS = 7
CSV_HEADER = ("g_s", "mean_flops", "std_flops", "trials_valid")


@dataclass(frozen=True)
class Stage:
    index: int
    tokens: int
    unit_span: int
    channels: int
    window: int = 7

    def geometry(self, shift=(0, 0)) -> StageGeometry:
        return StageGeometry(
            self.tokens, self.tokens, self.window, shift, self.channels, self.unit_span
        )

    @property
    def n_windows(self) -> int:
        return len(partition_windows(self.geometry()))


def default_profile(channels=(128, 256, 512, 1024)) -> list[Stage]:
    """Swin-B-like stages: 56/28/14/7 token grids, window 7."""
    return [
        Stage(i + 1, 56 >> i, 8 >> i, c) for i, c in enumerate(channels)
    ]


def stage_counts(stage: Stage, r: float, seed: int, shift=(0, 0)) -> list[int]:
    """Visible tokens per window (zeros kept) for the mask drawn from ``seed``."""
    units = stage.tokens // stage.unit_span
    mask = gen_batch_mask(seed, units, units, r)
    vis = expand_to_tokens(mask, stage.unit_span)
    return visible_counts(partition_windows(stage.geometry(shift)), vis)


def _trial_curve(args):
    stage, r, seed = args
    _, sizes = nonempty(stage_counts(stage, r, seed))
    if not sizes:
        return None
    _, report = optimal_grouping(sizes, stage.channels)
    return report.candidates, report.best_group_size


@dataclass
class SweepStats:
    stage: int
    ratio: float
    n_trials: int
    group_sizes: list[int] = field(default_factory=list)
    mean: list[float] = field(default_factory=list)
    std: list[float] = field(default_factory=list)
    n_valid: list[int] = field(default_factory=list)
    argmins: list[int] = field(default_factory=list)
    skipped: int = 0
    single_window: bool = False

    def _argmin(self, keep) -> int | None:
        ks = [k for k in range(len(self.mean)) if keep(k)]
        if not ks:
            return None
        return self.group_sizes[min(ks, key=lambda k: (self.mean[k], self.group_sizes[k]))]

    @property
    def mean_argmin(self) -> int | None:
        """Minimum of the mean curve over group sizes swept in every valid trial.

        Points outside that common support average over a biased subset of
        trials (only those whose largest window happens to be small, or whose
        visible total happens to be large), so they are left out here.
        """
        n = len(self.argmins)
        return self._argmin(lambda k: self.n_valid[k] == n)

    @property
    def union_mean_argmin(self) -> int | None:
        """Minimum of the mean curve over every swept group size."""
        return self._argmin(lambda k: True)

    def fraction_argmin_within(self, lo: int, hi: int) -> float:
        if not self.argmins:
            return 0.0
        return sum(lo <= g <= hi for g in self.argmins) / len(self.argmins)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in zip(self.group_sizes, self.mean, self.std, self.n_valid):
            w.writerow([row[0], repr(row[1]), repr(row[2]), row[3]])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "stage": self.stage,
            "ratio": self.ratio,
            "trials": self.n_trials,
            "trials_skipped": self.skipped,
            "single_window": self.single_window,
            "grouping_unnecessary": self.single_window,
            "mean_curve_argmin": self.mean_argmin,
            "union_mean_curve_argmin": self.union_mean_argmin,
            "trial_argmins": list(self.argmins),
        }


def _mean_std(values: list[int]) -> tuple[float, float]:
    # exact integer moments, unbiased variance
    n = len(values)
    s = sum(values)
    if n == 1:
        return float(s), 0.0
    ss = sum(v * v for v in values)
    var_num = n * ss - s * s  # = n (n-1) var
    return s / n, math.sqrt(var_num / (n * (n - 1)))


def sweep_cost_curve(
    stage: Stage, r: float, n_trials: int = 100, seed: int = 0, workers: int = 1
) -> SweepStats:
    """Cost of the repeated-knapsack plan for every group size, over random masks.

    Trial ``t`` uses the mask seeded with ``seed + t``. Trials whose mask hides
    every token of the stage are skipped and counted. Results do not depend
    on ``workers``.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    jobs = [(stage, r, seed + t) for t in range(n_trials)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_trial_curve, jobs, chunksize=max(1, n_trials // (4 * workers))))
    else:
        results = [_trial_curve(j) for j in jobs]

    stats = SweepStats(stage.index, r, n_trials, single_window=stage.n_windows == 1)
    per_g: dict[int, list[int]] = {}
    for res in results:
        if res is None:
            stats.skipped += 1
            continue
        candidates, best = res
        stats.argmins.append(best)
        for g, _, cost in candidates:
            per_g.setdefault(g, []).append(cost)
    for g in sorted(per_g):
        m, s = _mean_std(per_g[g])
        stats.group_sizes.append(g)
        stats.mean.append(m)
        stats.std.append(s)
        stats.n_valid.append(len(per_g[g]))
    return stats


@dataclass(frozen=True)
class StageFlops:
    stage: int
    n_windows: int
    visible_tokens: int
    dense_flops: int
    grouped_flops: int
    plan: GroupPlan | None

    @property
    def ratio(self) -> float:
        return self.grouped_flops / self.dense_flops

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "n_windows": self.n_windows,
            "visible_tokens": self.visible_tokens,
            "dense_flops": self.dense_flops,
            "grouped_flops": self.grouped_flops,
            "ratio": self.ratio,
            "group_size": None if self.plan is None else self.plan.group_size,
            "n_groups": 0 if self.plan is None else self.plan.n_groups,
        }


def flops_comparison(profile: list[Stage], r: float, seed: int = 0) -> dict:
    """Attention FLOPs of the optimal grouped plan vs. dense window attention.

    Dense attention runs all ``n_w`` windows at full ``p*p`` size; the grouped
    path runs only the visible tokens under the optimal plan for one mask.
    """
    stages = []
    for st in profile:
        counts = stage_counts(st, r, seed)
        dense = attention_cost(st.window * st.window, len(counts), st.channels)
        ids, sizes = nonempty(counts)
        plan = optimal_grouping(sizes, st.channels, ids)[0] if sizes else None
        grouped = plan.cost if plan is not None else 0
        stages.append(StageFlops(st.index, len(counts), sum(sizes), dense, grouped, plan))
    dense_total = sum(s.dense_flops for s in stages)
    grouped_total = sum(s.grouped_flops for s in stages)
    return {
        "ratio": r,
        "seed": seed,
        "stages": [s.to_dict() for s in stages],
        "total": {
            "dense_flops": dense_total,
            "grouped_flops": grouped_total,
            "ratio": grouped_total / dense_total,
        },
    }
