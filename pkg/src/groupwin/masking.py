"""Batch-wise random masking at mask-unit resolution.

One mask is drawn per micro-batch and shared by every sample, so the set of
visible tokens (and therefore the grouping) is identical across the batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Mask:
    """Boolean visibility grid over mask units (``True`` = visible)."""

    units_h: int
    units_w: int
    visible: np.ndarray
    ratio: float

    def __post_init__(self):
        if self.units_h < 1 or self.units_w < 1:
            raise ValueError("mask grid dimensions must be positive")
        vis = np.asarray(self.visible, dtype=bool)
        if vis.shape != (self.units_h, self.units_w):
            raise ValueError(
                f"visible grid has shape {vis.shape}, "
                f"expected {(self.units_h, self.units_w)}"
            )
        vis.flags.writeable = False
        object.__setattr__(self, "visible", vis)

    @property
    def n_units(self) -> int:
        return self.units_h * self.units_w

    @property
    def n_visible(self) -> int:
        return int(self.visible.sum())

    @property
    def n_hidden(self) -> int:
        return self.n_units - self.n_visible

    def to_ascii(self, on: str = "#", off: str = ".") -> str:
        return "\n".join("".join(on if v else off for v in row) for row in self.visible)


@dataclass(frozen=True)
class TokenVisibility:
    """Visibility at token resolution for one stage."""

    tokens_h: int
    tokens_w: int
    visible: np.ndarray

    def __post_init__(self):
        vis = np.asarray(self.visible, dtype=bool)
        if vis.shape != (self.tokens_h, self.tokens_w):
            raise ValueError(
                f"visible grid has shape {vis.shape}, "
                f"expected {(self.tokens_h, self.tokens_w)}"
            )
        vis.flags.writeable = False
        object.__setattr__(self, "visible", vis)

    @property
    def n_visible(self) -> int:
        return int(self.visible.sum())


def n_masked_units(n_units: int, ratio: float) -> int:
    """Number of hidden units, ``floor(ratio * n_units)``."""
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"mask ratio must lie in [0, 1), got {ratio!r}")
    return math.floor(ratio * n_units)


def gen_batch_mask(seed: int, units_h: int, units_w: int, r: float) -> Mask:
    """Draw a uniformly random mask hiding exactly ``floor(r * units_h * units_w)`` units.

    The unit indices are shuffled with numpy's PCG64 generator seeded by
    ``seed``; the first ``n_mask`` shuffled indices are hidden. The result
    depends on nothing but the arguments.
    """
    if units_h < 1 or units_w < 1:
        raise ValueError("units_h and units_w must be >= 1")
    n = units_h * units_w
    n_mask = n_masked_units(n, r)
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(n)
    visible = np.ones(n, dtype=bool)
    visible[order[:n_mask]] = False
    return Mask(units_h, units_w, visible.reshape(units_h, units_w), float(r))


def expand_to_tokens(mask: Mask, unit_span: int) -> TokenVisibility:
    """Blow each mask unit up into a ``unit_span x unit_span`` block of tokens."""
    if unit_span < 1:
        raise ValueError("unit_span must be >= 1")
    vis = np.repeat(np.repeat(mask.visible, unit_span, axis=0), unit_span, axis=1)
    return TokenVisibility(mask.units_h * unit_span, mask.units_w * unit_span, vis)
