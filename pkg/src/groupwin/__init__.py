"""Group window attention scheduling for masked hierarchical vision transformers."""

__version__ = "0.1.0"

from .attention import (
    AttentionParams,
    GroupedTokens,
    TokenArray,
    gather_groups,
    group_attention_weights,
    group_window_attention,
    make_tokens,
    masked_group_attention,
    max_relative_error,
    reference_window_attention,
    relative_bias_lookup,
    scatter_groups,
)
from .grouping import CostReport, GroupPlan, attention_cost, knapsack, optimal_grouping, partition
from .masking import Mask, TokenVisibility, expand_to_tokens, gen_batch_mask
from .simulation import Stage, default_profile, flops_comparison, sweep_cost_curve
from .windowing import (
    StageGeometry,
    WindowLayout,
    partition_windows,
    visible_counts,
    with_visibility,
)
