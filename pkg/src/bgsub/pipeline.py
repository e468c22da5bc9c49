"""Per-frame orchestration: features, scores, variance selection, MRF, size filter, update."""

from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
from scipy import ndimage

from .features import FEATURE_MODES, FeatureFrame, extract_features
from .kde import MixConfig
from .model import ProcessModel, ResetConfig, build_models, illumination_reset_check, init_sample_indices, update_frame
from .mrf import MrfConfig, mrf_smooth, threshold
from .variance import VarianceCache, VarianceGrid, score_frame

logger = logging.getLogger(__name__)

VARIANCE_MODES = ("uniform", "vks", "vks-cached")

_FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


class ConfigError(ValueError):
    """Malformed or inconsistent pipeline configuration."""


@dataclass(frozen=True)
class PipelineConfig:
    features: str = "rgb"
    variance_mode: str = "vks"
    # background candidate sets (true variances)
    bg_sigma_d: tuple[float, ...] = (1 / 4, 3 / 4)
    bg_sigma_rgb: tuple[float, ...] = (5 / 4, 15 / 4, 45 / 4)
    bg_sigma_l: tuple[float, ...] = (5 / 4, 10 / 4, 20 / 4)
    bg_sigma_ab: tuple[float, ...] = (4 / 4, 6 / 4)
    bg_sigma_siltp: float = 3 / 4
    # fixed foreground variances
    fg_sigma_d: float = 12 / 4
    fg_sigma_rgb: float = 15 / 4
    fg_sigma_l: float = 15 / 4
    fg_sigma_ab: float = 4 / 4
    fg_sigma_siltp: float = 3 / 4
    # background pair used by the uniform mode
    uniform_sigma_d: float = 3 / 4
    uniform_sigma_rgb: float = 45 / 4
    uniform_sigma_l: float = 20 / 4
    uniform_sigma_ab: float = 6 / 4
    u: float = 1e-6
    alpha_f: float = 0.5
    tau_bf: float = 2.0
    lam: float = 1.0
    min_component_size: int = 15
    posterior_threshold: float = 0.5
    init_frames: int = 50
    init_samples: int = 5
    bg_capacity: int = 5
    fg_capacity: int = 5
    conditional_update: bool = True
    reset_enabled: bool = True
    reset_t_i: float = 0.0  # 0 selects 10 (rgb) or 2.5 (lab)
    window_stds: float = 4.0
    siltp_radii: tuple[int, ...] = (1, 2, 4)
    siltp_tau: float = 0.05

    def __post_init__(self):
        if self.features not in FEATURE_MODES:
            raise ConfigError(f"features must be one of {FEATURE_MODES}, got {self.features!r}")
        if self.variance_mode not in VARIANCE_MODES:
            raise ConfigError(f"variance_mode must be one of {VARIANCE_MODES}, got {self.variance_mode!r}")
        for name in ("u", "tau_bf", "posterior_threshold", "window_stds", "siltp_tau",
                     "init_frames", "init_samples", "bg_capacity", "fg_capacity"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.lam < 0 or self.min_component_size < 0 or self.reset_t_i < 0:
            raise ConfigError("lam, min_component_size and reset_t_i must be non-negative")
        if not 0 <= self.alpha_f <= 1:
            raise ConfigError("alpha_f must lie in [0, 1]")
        if self.tau_bf <= 1:
            raise ConfigError("tau_bf must exceed 1")

    def grid(self) -> VarianceGrid:
        g = VarianceGrid(
            mode=self.features,
            spatial=self.bg_sigma_d,
            rgb=self.bg_sigma_rgb,
            l=self.bg_sigma_l,
            ab=self.bg_sigma_ab,
            siltp=self.bg_sigma_siltp,
            fg_spatial=self.fg_sigma_d,
            fg_rgb=self.fg_sigma_rgb,
            fg_l=self.fg_sigma_l,
            fg_ab=self.fg_sigma_ab,
            fg_siltp=self.fg_sigma_siltp,
            n_siltp=len(self.siltp_radii),
        )
        if self.variance_mode == "uniform":
            color = self.uniform_sigma_rgb if self.features == "rgb" else (self.uniform_sigma_l, self.uniform_sigma_ab)
            g = g.singleton(self.uniform_sigma_d, color)
        return g

    def mix(self) -> MixConfig:
        return MixConfig(self.u, self.alpha_f)

    def reset(self) -> ResetConfig:
        if self.reset_t_i > 0:
            return ResetConfig(t_i=self.reset_t_i, relearn_frames=self.init_frames)
        return ResetConfig.for_mode(self.features, relearn_frames=self.init_frames)

    def with_overrides(self, **kw) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    @classmethod
    def from_file(cls, path, **overrides) -> "PipelineConfig":
        return parse_config(Path(path).read_text(), **overrides)


def _parse_value(raw: str, default):
    raw = raw.strip()
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(raw)
    if isinstance(default, tuple):
        items = [s for s in raw.replace(",", " ").split() if s]
        if not items:
            raise ValueError(raw)
        kind = type(default[0]) if default else float
        return tuple(kind(_number(s)) for s in items)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(_number(raw))
    return raw


def _number(s: str) -> float:
    if s.lower() in ("inf", "infinity"):
        return math.inf
    if "/" in s:
        num, den = s.split("/", 1)
        return float(num) / float(den)
    return float(s)


def parse_config(text: str, **overrides) -> PipelineConfig:
    """Flat ``key = value`` text, one key per line; ``#`` starts a comment."""
    defaults = PipelineConfig()
    known = {f.name for f in fields(PipelineConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split(sep, 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _parse_value(raw, getattr(defaults, key))
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {raw!r} for {key}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)


def filter_small_components(mask: np.ndarray, min_size: int) -> np.ndarray:
    """Drop 4-connected foreground components with fewer than ``min_size`` pixels."""
    mask = np.asarray(mask, dtype=bool)
    if min_size <= 1 or not mask.any():
        return mask.copy()
    labels, n = ndimage.label(mask, structure=_FOUR_CONNECTED)
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    keep = sizes >= min_size
    keep[0] = False
    return keep[labels]


@dataclass
class FrameResult:
    index: int
    posterior: np.ndarray        # P(bg) before smoothing
    mask: np.ndarray             # final foreground mask
    sigma_d: np.ndarray          # selected background spatial variance per pixel
    color_index: np.ndarray      # index into the grid's color options
    searched: np.ndarray         # where a variance search ran
    seconds: float = 0.0

    @property
    def search_fraction(self) -> float:
        return float(self.searched.mean())


def configure_threads() -> int:
    """Cap numba parallelism at ``BGSUB_THREADS`` (if set)."""
    import numba

    limit = numba.config.NUMBA_NUM_THREADS
    env = os.environ.get("BGSUB_THREADS")
    n = limit
    if env:
        try:
            n = max(1, min(int(env), limit))
        except ValueError:
            logger.warning("ignoring non-integer BGSUB_THREADS=%r", env)
    numba.set_num_threads(n)
    return n


@dataclass
class BackgroundSubtractor:
    """Streaming background subtractor; feed frames in order with :meth:`process`."""

    config: PipelineConfig = field(default_factory=PipelineConfig)
    bg: ProcessModel | None = field(default=None, init=False)
    fg: ProcessModel | None = field(default=None, init=False)
    cache: VarianceCache | None = field(default=None, init=False)
    resets: list[int] = field(default_factory=list, init=False)

    def __post_init__(self):
        self._grid = self.config.grid()
        self._mix = self.config.mix()
        self._mrf = MrfConfig(self.config.lam)
        self._reset_cfg = self.config.reset()
        self._sample_at = set(init_sample_indices(self.config.init_frames, self.config.init_samples))
        self._window: list[tuple[int, FeatureFrame]] = []
        self._window_pos = 0
        self._prev = None
        self._count = 0
        configure_threads()

    @property
    def learning(self) -> bool:
        return self.bg is None

    def features(self, frame) -> FeatureFrame:
        c = self.config
        return extract_features(frame, c.features, c.siltp_radii, c.siltp_tau)

    def _start_learning(self) -> None:
        self.bg = self.fg = None
        self._window = []
        self._window_pos = 0
        if self.cache is not None:
            self.cache.invalidate()

    def _learn(self, index: int, feats: FeatureFrame) -> None:
        if self._window_pos in self._sample_at:
            self._window.append((index, feats))
        self._window_pos += 1
        if self._window_pos == self.config.init_frames:
            idx = [i for i, _ in self._window]
            self.bg, self.fg = build_models(
                [f for _, f in self._window], idx, self.config.bg_capacity, self.config.fg_capacity
            )
            self._window = []
            logger.debug("models initialized from frames %s", idx)

    def process(self, frame, index: int | None = None) -> FrameResult | None:
        """Consume one frame; returns its result, or ``None`` while (re)learning."""
        frame = np.asarray(frame)
        if index is None:
            index = self._count
        self._count += 1
        prev, self._prev = self._prev, frame
        if prev is not None and prev.shape != frame.shape:
            raise ValueError(f"frame {index} has shape {frame.shape}, expected {prev.shape}")
        t0 = time.perf_counter()
        feats = self.features(frame)
        c = self.config
        if not self.learning and c.reset_enabled and prev is not None:
            if illumination_reset_check(prev, frame, self._reset_cfg, c.features):
                logger.info("illumination reset at frame %d", index)
                self.resets.append(index)
                self._start_learning()
        if self.learning:
            self._learn(index, feats)
            return None
        h, w = feats.shape
        if self.cache is None:
            self.cache = VarianceCache.empty(h, w)
        scores = score_frame(
            feats, self.bg, self.fg, self._grid, self._mix,
            variance_mode=c.variance_mode, cache=self.cache, tau_bf=c.tau_bf, window_stds=c.window_stds,
        )
        p_bg = scores.p_bg
        labels = mrf_smooth(p_bg, self._mrf) if c.lam > 0 else threshold(p_bg, c.posterior_threshold)
        mask = filter_small_components(labels, c.min_component_size)
        update_frame(self.bg, self.fg, feats, p_bg, index, conditional=c.conditional_update)
        n_color = len(self._grid.color_options())
        spatial = np.asarray(self._grid.spatial)
        return FrameResult(
            index=index,
            posterior=p_bg,
            mask=mask,
            sigma_d=spatial[scores.chosen // n_color],
            color_index=scores.chosen % n_color,
            searched=scores.searched,
            seconds=time.perf_counter() - t0,
        )


def process_sequence(config: PipelineConfig, frames: Iterable) -> Iterator[FrameResult]:
    """Run the subtractor over an ordered frame source, yielding results in frame order."""
    sub = BackgroundSubtractor(config)
    seen = False
    for i, frame in enumerate(frames):
        seen = True
        res = sub.process(frame, i)
        if res is not None:
            yield res
    if not seen:
        raise ValueError("empty frame source")
