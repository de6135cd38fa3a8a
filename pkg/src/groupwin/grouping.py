"""Optimal grouping of uneven windows into equal-sized groups.

For a group size ``g_s`` the windows are packed by repeatedly solving a
single subset-sum knapsack on the windows still unplaced; every candidate
``g_s`` from ``max(w)`` to ``sum(w)`` is costed with the attention FLOPs
model and the cheapest one wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence


def _reachable_rows(capacity: int, sizes: Sequence[int]) -> list[int]:
    # rows[i] has bit s set iff some subset of sizes[:i] sums to s <= capacity.
    # The DP value K[i][w] is then the highest set bit of rows[i] at or below w.
    full = (1 << (capacity + 1)) - 1
    rows = [1]
    for s in sizes:
        prev = rows[-1]
        rows.append((prev | (prev << s)) & full)
    return rows


def _best_at_most(row: int, w: int) -> int:
    return (row & ((1 << (w + 1)) - 1)).bit_length() - 1


def knapsack(g_s: int, sizes: Sequence[int]) -> list[int]:
    """Indices of a subset of ``sizes`` with the largest sum not exceeding ``g_s``.

    Values equal weights, so this is subset-sum. The table is built bottom up
    and backtracked from the last item to the first, dropping item ``i-1``
    whenever ``K[i-1][w]`` already reaches the running residual; among equally
    full subsets this fixes which one comes back. Indices are increasing.

    >>> knapsack(10, [7, 3, 5])
    [0, 1]
    """
    if g_s < 1:
        raise ValueError("group size must be >= 1")
    if any(s < 1 for s in sizes):
        raise ValueError("window sizes must be >= 1")
    n = len(sizes)
    rows = _reachable_rows(g_s, sizes)
    res = _best_at_most(rows[n], g_s)
    w = g_s
    picked = []
    for i in range(n, 0, -1):
        if res <= 0:
            break
        if res == _best_at_most(rows[i - 1], w):
            continue
        picked.append(i - 1)
        res -= sizes[i - 1]
        w -= sizes[i - 1]
    return picked[::-1]


def attention_cost(g_s: int, n_g: int, channels: int) -> int:
    """FLOPs of multi-head attention over ``n_g`` groups of ``g_s`` tokens.

    ``n_g * (4 g_s C^2 + 2 g_s^2 C)``: the four C x C projections plus the
    two ``g_s x g_s`` products. Python ints, so no overflow.
    """
    if g_s < 1 or n_g < 1 or channels < 1:
        raise ValueError("attention_cost arguments must be >= 1")
    return n_g * (4 * g_s * channels * channels + 2 * g_s * g_s * channels)


@dataclass(frozen=True)
class GroupPlan:
    group_size: int
    groups: list[list[int]]
    fill: list[int]
    cost: int | None = None

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def padding(self) -> list[int]:
        return [self.group_size - f for f in self.fill]

    def window_ids(self) -> list[int]:
        return [i for grp in self.groups for i in grp]

    def with_cost(self, channels: int) -> "GroupPlan":
        return GroupPlan(
            self.group_size, self.groups, self.fill,
            attention_cost(self.group_size, self.n_groups, channels),
        )

    def to_dict(self) -> dict:
        return {
            "group_size": self.group_size,
            "n_groups": self.n_groups,
            "groups": [list(g) for g in self.groups],
            "fill": list(self.fill),
            "padding": self.padding,
            "cost": self.cost,
        }


def partition(
    g_s: int,
    sizes: Sequence[int],
    window_ids: Sequence[int] | None = None,
    channels: int | None = None,
) -> GroupPlan:
    """Pack windows into groups of capacity ``g_s`` by repeated knapsack.

    Each round selects a maximum-fill subset of the remaining windows and
    removes it, until nothing is left. ``window_ids`` relabels the windows in
    the returned plan (defaults to positions in ``sizes``). When ``channels``
    is given the plan carries its attention cost.
    """
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise ValueError("need at least one window")
    if any(s < 1 for s in sizes):
        raise ValueError("window sizes must be >= 1; drop empty windows first")
    if g_s < max(sizes):
        raise ValueError(f"group size {g_s} is smaller than the largest window {max(sizes)}")
    ids = list(range(len(sizes))) if window_ids is None else list(window_ids)
    if len(ids) != len(sizes):
        raise ValueError("window_ids and sizes differ in length")

    remaining = list(zip(ids, sizes))
    groups, fill = [], []
    while remaining:
        picked = knapsack(g_s, [s for _, s in remaining])
        groups.append([remaining[k][0] for k in picked])
        fill.append(sum(remaining[k][1] for k in picked))
        chosen = set(picked)
        remaining = [x for k, x in enumerate(remaining) if k not in chosen]

    plan = GroupPlan(g_s, groups, fill)
    return plan.with_cost(channels) if channels is not None else plan


@dataclass(frozen=True)
class CostReport:
    candidates: list[tuple[int, int, int]]  # (g_s, n_g, flops)
    optimum: GroupPlan = field(repr=False)

    @property
    def best_group_size(self) -> int:
        return self.optimum.group_size

    def to_dict(self) -> dict:
        return {
            "candidates": [
                {"g_s": g, "n_g": n, "flops": c} for g, n, c in self.candidates
            ],
            "best_group_size": self.best_group_size,
            "best_flops": self.optimum.cost,
        }


def sweep_range(sizes: Sequence[int]) -> range:
    return range(max(sizes), sum(sizes) + 1)


def optimal_grouping(
    sizes: Sequence[int],
    channels: int,
    window_ids: Sequence[int] | None = None,
    candidates: Iterable[int] | None = None,
) -> tuple[GroupPlan, CostReport]:
    """Sweep the group size and return the cheapest plan with its cost report.

    Every integer ``g_s`` in ``[max(sizes), sum(sizes)]`` is tried unless
    ``candidates`` narrows the list (values below ``max(sizes)`` are skipped
    as infeasible). Ties go to the smaller group size.
    """
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise ValueError("need at least one window")
    if channels < 1:
        raise ValueError("channels must be >= 1")
    if candidates is None:
        gs_list = list(sweep_range(sizes))
    else:
        gs_list = sorted({int(g) for g in candidates if g >= max(sizes)})
        if not gs_list:
            raise ValueError("no feasible candidate group size")

    best = None
    rows = []
    for g in gs_list:
        plan = partition(g, sizes, window_ids, channels)
        rows.append((g, plan.n_groups, plan.cost))
        if best is None or plan.cost < best.cost:
            best = plan
    return best, CostReport(rows, best)


def lower_bound_groups(sizes: Sequence[int], g_s: int) -> int:
    return math.ceil(sum(sizes) / g_s)
