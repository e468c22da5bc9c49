"""Per-pixel background kernel variance selection and its cached fast path."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .features import check_mode
from .kde import (
    DiagonalCovariance,
    KernelBank,
    MixConfig,
    background_scores_bank,
    foreground_score,
    frame_cached_scores,
    frame_foreground_scores,
    posterior_bg,
    window_radius,
)


@dataclass(frozen=True)
class VarianceGrid:
    """Candidate background variances and the fixed foreground ones.

    Values are true variances, i.e. a quarter of the usual ``4*sigma`` figures.
    """

    mode: str = "rgb"
    spatial: tuple[float, ...] = (1 / 4, 3 / 4)
    rgb: tuple[float, ...] = (5 / 4, 15 / 4, 45 / 4)
    l: tuple[float, ...] = (5 / 4, 10 / 4, 20 / 4)
    ab: tuple[float, ...] = (4 / 4, 6 / 4)
    siltp: float = 3 / 4
    fg_spatial: float = 12 / 4
    fg_rgb: float = 15 / 4
    fg_l: float = 15 / 4
    fg_ab: float = 4 / 4
    fg_siltp: float = 3 / 4
    n_siltp: int = 3

    def __post_init__(self):
        check_mode(self.mode)
        for name in ("spatial", "rgb", "l", "ab"):
            vals = tuple(sorted(float(v) for v in getattr(self, name)))
            if not vals:
                raise ValueError(f"variance set {name!r} is empty")
            if any(v <= 0 for v in vals):
                raise ValueError(f"variance set {name!r} has non-positive entries")
            object.__setattr__(self, name, vals)

    def color_options(self) -> list:
        if self.mode == "rgb":
            return list(self.rgb)
        return [(l, ab) for l in self.l for ab in self.ab]

    def _cov(self, spatial: float, color) -> DiagonalCovariance:
        if self.mode == "rgb":
            return DiagonalCovariance.rgb(spatial, color)
        l, ab = color
        return DiagonalCovariance.lab(spatial, l, ab, self.siltp, self.n_siltp)

    def candidates(self) -> list[DiagonalCovariance]:
        """Spatial x color product, ordered by spatial then color (ascending)."""
        return [self._cov(sd, c) for sd in self.spatial for c in self.color_options()]

    def describe(self, index: int) -> tuple[float, object]:
        colors = self.color_options()
        return self.spatial[index // len(colors)], colors[index % len(colors)]

    def foreground(self) -> DiagonalCovariance:
        if self.mode == "rgb":
            return DiagonalCovariance.rgb(self.fg_spatial, self.fg_rgb)
        return DiagonalCovariance.lab(self.fg_spatial, self.fg_l, self.fg_ab, self.fg_siltp, self.n_siltp)

    def singleton(self, spatial: float, color) -> "VarianceGrid":
        """Same grid restricted to one background pair (fixed-variance operation)."""
        if self.mode == "rgb":
            return replace(self, spatial=(spatial,), rgb=(color,))
        l, ab = color
        return replace(self, spatial=(spatial,), l=(l,), ab=(ab,))

    def appearance_options(self) -> list[tuple[tuple[float, ...], tuple[float, ...]]]:
        out = []
        for c in self.color_options():
            cov = self._cov(1.0, c)
            out.append((cov.color, cov.siltp))
        return out

    def bank(self, window_stds: float = 4.0) -> KernelBank:
        return KernelBank(self.spatial, self.appearance_options(), window_radius(max(self.spatial), window_stds))


@dataclass
class VarianceCache:
    """Per-pixel index of the last selected background candidate."""

    index: np.ndarray
    valid: np.ndarray

    @classmethod
    def empty(cls, height: int, width: int) -> "VarianceCache":
        return cls(np.zeros((height, width), dtype=np.int64), np.zeros((height, width), dtype=bool))

    def invalidate(self) -> None:
        self.valid[:] = False


@dataclass(frozen=True)
class CacheThreshold:
    tau_bf: float = 2.0

    def __post_init__(self):
        if not self.tau_bf > 1:
            raise ValueError("tau_bf must exceed 1")


class Selection(NamedTuple):
    spatial: float
    color: object
    score: float
    index: int


def select_variances(a, bg, grid: VarianceGrid) -> Selection:
    """Exhaustive argmax of the background score over the grid.

    Ties go to the smallest spatial variance, then the smallest color one.
    """
    scores = background_scores_bank(a, bg, grid.bank())
    best = int(np.argmax(scores))  # first maximum == smallest variances
    sd, color = grid.describe(best)
    return Selection(sd, color, float(scores[best]), best)


def classify_with_cache(
    a, bg, fg, cache: VarianceCache, tau: CacheThreshold, mix: MixConfig, grid: VarianceGrid
) -> tuple[float, Selection, bool]:
    """Single-pixel cached classification; updates ``cache`` when a search runs."""
    fg_cov = grid.foreground()
    sf = foreground_score(a, fg, fg_cov, mix, window_radius(fg_cov.spatial))
    bank = grid.bank()
    x, y = a.x, a.y
    if cache.valid[y, x]:
        c = int(cache.index[y, x])
        sub = KernelBank.single(bank.candidates[c], bank.radius)
        sb = float(background_scores_bank(a, bg, sub)[0])
        if sb > tau.tau_bf * sf or sf > tau.tau_bf * sb:
            sd, color = grid.describe(c)
            return posterior_bg(sb, sf), Selection(sd, color, sb, c), False
    sel = select_variances(a, bg, grid)
    cache.index[y, x] = sel.index
    cache.valid[y, x] = True
    return posterior_bg(sel.score, sf), sel, True


@dataclass
class FrameScores:
    p_bg: np.ndarray
    s_b: np.ndarray
    s_f: np.ndarray
    chosen: np.ndarray
    searched: np.ndarray


def score_frame(
    features,
    bg,
    fg,
    grid: VarianceGrid,
    mix: MixConfig,
    variance_mode: str = "vks",
    cache: VarianceCache | None = None,
    tau_bf: float = 2.0,
    window_stds: float = 4.0,
) -> FrameScores:
    """Score every pixel of a frame.

    ``variance_mode`` is ``uniform`` (grid must be a singleton), ``vks`` (full
    search everywhere) or ``vks-cached`` (cache consulted first).
    """
    fg_cov = grid.foreground()
    s_f = frame_foreground_scores(features, fg, fg_cov, mix, window_radius(fg_cov.spatial, window_stds))
    bank = grid.bank(window_stds)
    h, w = features.shape
    if variance_mode == "uniform" and len(bank) != 1:
        raise ValueError("uniform variance mode needs a singleton grid")
    if variance_mode == "vks-cached":
        if cache is None:
            cache = VarianceCache.empty(h, w)
        s_b, chosen, searched = frame_cached_scores(
            features, bg, bank, s_f, cache.index, cache.valid, tau_bf, False
        )
    elif variance_mode in ("vks", "uniform"):
        scratch = VarianceCache.empty(h, w)
        s_b, chosen, searched = frame_cached_scores(
            features, bg, bank, s_f, scratch.index, scratch.valid, math.inf, True
        )
        if variance_mode == "uniform":
            searched[:] = False
    else:
        raise ValueError(f"unknown variance mode {variance_mode!r}")
    return FrameScores(posterior_bg(s_b, s_f), s_b, s_f, chosen, searched)
