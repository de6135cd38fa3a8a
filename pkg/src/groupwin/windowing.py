"""Local window partition of a stage's token grid.

Shifted windows are produced as a direct irregular tiling: window
boundaries sit at ``shift + k * window`` along each axis, so border windows
may be smaller than ``window x window``. No cyclic roll is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .masking import TokenVisibility


@dataclass(frozen=True)
class StageGeometry:
    tokens_h: int
    tokens_w: int
    window: int
    shift: tuple[int, int] = (0, 0)
    channels: int = 128
    unit_span: int = 1

    def __post_init__(self):
        if min(self.tokens_h, self.tokens_w, self.window, self.channels, self.unit_span) < 1:
            raise ValueError("geometry sizes must be positive")
        dy, dx = self.shift
        object.__setattr__(self, "shift", (int(dy), int(dx)))
        if not (0 <= dy < self.window and 0 <= dx < self.window):
            raise ValueError(f"shift {self.shift} must satisfy 0 <= shift < window={self.window}")
        if self.shift == (0, 0) and (self.tokens_h % self.window or self.tokens_w % self.window):
            raise ValueError(
                f"token grid {self.tokens_h}x{self.tokens_w} is not divisible by "
                f"window {self.window} and no shift is set"
            )


@dataclass(frozen=True)
class Window:
    id: int
    origin: tuple[int, int]
    coords: np.ndarray  # (n_tokens, 2) absolute (row, col), row-major
    visible_count: int = 0

    @property
    def n_tokens(self) -> int:
        return len(self.coords)

    @property
    def empty(self) -> bool:
        return self.visible_count == 0


@dataclass(frozen=True)
class WindowLayout:
    geometry: StageGeometry
    windows: list[Window] = field(default_factory=list)

    def __len__(self):
        return len(self.windows)

    def __iter__(self):
        return iter(self.windows)

    def __getitem__(self, i):
        return self.windows[i]

    @property
    def counts(self) -> list[int]:
        return [w.visible_count for w in self.windows]

    def window_index(self) -> np.ndarray:
        """(tokens_h, tokens_w) grid holding the owning window id of every token."""
        g = self.geometry
        owner = np.full((g.tokens_h, g.tokens_w), -1, dtype=np.int64)
        for w in self.windows:
            owner[w.coords[:, 0], w.coords[:, 1]] = w.id
        return owner


def _bands(n: int, window: int, offset: int) -> list[tuple[int, int]]:
    edges = [0] + list(range(offset if offset else window, n, window)) + [n]
    return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def partition_windows(geom: StageGeometry) -> WindowLayout:
    """Tile the token grid into windows, enumerated row-major by origin.

    Visible counts are left at zero; see :func:`with_visibility`.

    >>> len(partition_windows(StageGeometry(56, 56, 7)))
    64
    """
    rows = _bands(geom.tokens_h, geom.window, geom.shift[0])
    cols = _bands(geom.tokens_w, geom.window, geom.shift[1])
    windows = []
    for r0, r1 in rows:
        for c0, c1 in cols:
            rr, cc = np.meshgrid(np.arange(r0, r1), np.arange(c0, c1), indexing="ij")
            coords = np.stack([rr.ravel(), cc.ravel()], axis=1)
            coords.flags.writeable = False
            windows.append(Window(len(windows), (r0, c0), coords))
    return WindowLayout(geom, windows)


def visible_counts(layout: WindowLayout, vis: TokenVisibility) -> list[int]:
    """Number of visible tokens in each window, in window order (zeros kept)."""
    g = layout.geometry
    if (vis.tokens_h, vis.tokens_w) != (g.tokens_h, g.tokens_w):
        raise ValueError(
            f"visibility grid {vis.tokens_h}x{vis.tokens_w} does not match "
            f"geometry {g.tokens_h}x{g.tokens_w}"
        )
    return [int(vis.visible[w.coords[:, 0], w.coords[:, 1]].sum()) for w in layout.windows]


def with_visibility(layout: WindowLayout, vis: TokenVisibility) -> WindowLayout:
    """Copy of ``layout`` whose windows carry their visible counts."""
    counts = visible_counts(layout, vis)
    windows = [
        Window(w.id, w.origin, w.coords, c) for w, c in zip(layout.windows, counts)
    ]
    return WindowLayout(layout.geometry, windows)


def nonempty(counts) -> tuple[list[int], list[int]]:
    """Split counts into (window ids, sizes) keeping only windows with visible tokens."""
    ids = [i for i, c in enumerate(counts) if c > 0]
    return ids, [int(counts[i]) for i in ids]
