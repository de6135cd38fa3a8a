import math
import statistics

import pytest

from groupwin.grouping import attention_cost, lower_bound_groups
from groupwin.simulation import (
    CSV_HEADER,
    _mean_std,
    default_profile,
    flops_comparison,
    stage_counts,
    sweep_cost_curve,
)
from groupwin.windowing import nonempty

PROFILE = default_profile()


class TestProfile:
    def test_default_stages(self):
        assert [(s.tokens, s.unit_span, s.channels) for s in PROFILE] == [
            (56, 8, 128), (28, 4, 256), (14, 2, 512), (7, 1, 1024),
        ]
        assert [s.n_windows for s in PROFILE] == [64, 16, 4, 1]

    def test_one_mask_for_all_stages(self):
        # the same 7x7 unit mask projects to 64/16/4/1 tokens per unit
        totals = [sum(stage_counts(s, 0.75, 3)) for s in PROFILE]
        assert totals == [13 * 64, 13 * 16, 13 * 4, 13]


class TestSweep:
    def test_single_window_stage(self):
        stats = sweep_cost_curve(PROFILE[3], 0.75, 10, 0)
        assert stats.single_window
        assert stats.group_sizes == [13]
        assert stats.argmins == [13] * 10
        assert stats.mean == [float(attention_cost(13, 1, 1024))]

    def test_zero_ratio_deterministic(self):
        stats = sweep_cost_curve(PROFILE[2], 0.0, 5, 0)
        assert all(s == 0.0 for s in stats.std)
        assert stats.n_valid == [5] * len(stats.group_sizes)
        assert stats.group_sizes == list(range(49, 197))

    def test_trials_must_be_positive(self):
        with pytest.raises(ValueError):
            sweep_cost_curve(PROFILE[0], 0.75, 0)

    def test_mean_std_exact(self):
        vals = [68567040, 70588224, 61234560, 99999999]
        m, s = _mean_std(vals)
        assert m == statistics.fmean(vals)
        assert s == pytest.approx(statistics.stdev(vals), rel=1e-15)
        assert _mean_std([5]) == (5.0, 0.0)

    def test_stats_against_direct_recomputation(self):
        stats = sweep_cost_curve(PROFILE[2], 0.75, 6, 40)
        from groupwin.grouping import partition
        per_trial = [nonempty(stage_counts(PROFILE[2], 0.75, 40 + t))[1] for t in range(6)]
        for g, m, n in zip(stats.group_sizes, stats.mean, stats.n_valid):
            costs = [
                attention_cost(g, partition(g, s).n_groups, 512)
                for s in per_trial if max(s) <= g <= sum(s)
            ]
            assert len(costs) == n
            assert m == pytest.approx(sum(costs) / n, rel=1e-15)

    def test_reproducible_and_worker_independent(self):
        a = sweep_cost_curve(PROFILE[1], 0.75, 8, 7)
        b = sweep_cost_curve(PROFILE[1], 0.75, 8, 7)
        c = sweep_cost_curve(PROFILE[1], 0.75, 8, 7, workers=2)
        assert a.to_csv() == b.to_csv() == c.to_csv()
        assert a.argmins == c.argmins

    def test_csv(self):
        text = sweep_cost_curve(PROFILE[2], 0.75, 3, 0).to_csv()
        lines = text.splitlines()
        assert lines[0] == ",".join(CSV_HEADER) == "g_s,mean_flops,std_flops,trials_valid"
        g, mean, std, n = lines[1].split(",")
        assert int(g) >= 1 and float(mean) > 0 and float(std) >= 0 and 1 <= int(n) <= 3

    def test_common_support_argmin(self):
        stats = sweep_cost_curve(PROFILE[1], 0.75, 100, 0)
        full = [k for k, n in enumerate(stats.n_valid) if n == 100]
        best = min(full, key=lambda k: stats.mean[k])
        assert stats.mean_argmin == stats.group_sizes[best]
        assert stats.union_mean_argmin <= stats.mean_argmin

    def test_monotone_masking_bound(self):
        for seed in range(5):
            prev = None
            for r in (0.0, 0.25, 0.5, 0.75, 0.85):
                total = sum(stage_counts(PROFILE[0], r, seed))
                if prev is not None:
                    assert total <= prev[0]
                    for g in (49, 64, 100):
                        assert math.ceil(total / g) <= prev[1][g]
                prev = (total, {g: math.ceil(total / g) for g in (49, 64, 100)})


class TestFlops:
    def test_unmasked_ratio_is_one(self):
        rep = flops_comparison(PROFILE, 0.0, 0)
        for s in rep["stages"]:
            assert s["ratio"] == 1.0
            assert s["group_size"] == 49
        assert rep["total"]["ratio"] == 1.0

    def test_masked_stage_values(self):
        rep = flops_comparison(PROFILE, 0.75, 0)
        s1 = rep["stages"][0]
        assert (s1["dense_flops"], s1["grouped_flops"]) == (244_858_880, 68_567_040)
        assert s1["dense_flops"] == attention_cost(49, 64, 128)
        for s in rep["stages"]:
            assert s["ratio"] <= 0.40

    def test_single_window_closed_form(self):
        rep = flops_comparison(PROFILE[3:], 0.75, 0)
        s = rep["stages"][0]
        w, C = 13, 1024
        assert s["visible_tokens"] == w
        assert s["ratio"] == (4 * w * C * C + 2 * w * w * C) / (4 * 49 * C * C + 2 * 49 * 49 * C)

    def test_stage4_identity_plan(self):
        for seed in range(5):
            counts = stage_counts(PROFILE[3], 0.5, seed)
            rep = flops_comparison(PROFILE[3:], 0.5, seed)["stages"][0]
            assert rep["n_groups"] == 1
            assert rep["group_size"] == counts[0]
            assert rep["grouped_flops"] == attention_cost(counts[0], 1, 1024)

    def test_lower_bound_holds(self):
        for seed in range(3):
            _, sizes = nonempty(stage_counts(PROFILE[0], 0.75, seed))
            rep = flops_comparison(PROFILE[:1], 0.75, seed)["stages"][0]
            assert rep["n_groups"] >= lower_bound_groups(sizes, rep["group_size"])
