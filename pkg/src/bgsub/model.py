"""Background / foreground sample buffers with soft labels.

Each :class:`ProcessModel` keeps, per pixel location, a ring of samples
taken from the most recent frames that were written at that location.
Background rings only advance where the pixel was judged background, so the
ring head is tracked per pixel.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .features import FeatureFrame, FeatureVector, check_mode, extract_features, rgb_to_lab_array

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelSample:
    feature: FeatureVector
    label_prob: float
    frame_index: int


@dataclass
class ProcessModel:
    color: np.ndarray   # (N, H, W, 3)
    codes: np.ndarray   # (N, H, W, S) uint16
    weight: np.ndarray  # (N, H, W) stored label probability
    frame: np.ndarray   # (N, H, W) source frame index, -1 for an empty slot
    valid: np.ndarray   # (N, H, W) bool
    head: np.ndarray    # (H, W) slot written next (the oldest once full)
    count: np.ndarray   # (H, W) filled slots

    @classmethod
    def empty(cls, capacity: int, height: int, width: int, n_siltp: int = 0) -> "ProcessModel":
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        shape = (capacity, height, width)
        return cls(
            color=np.zeros(shape + (3,)),
            codes=np.zeros(shape + (n_siltp,), dtype=np.uint16),
            weight=np.zeros(shape),
            frame=np.full(shape, -1, dtype=np.int64),
            valid=np.zeros(shape, dtype=bool),
            head=np.zeros((height, width), dtype=np.int64),
            count=np.zeros((height, width), dtype=np.int64),
        )

    @property
    def capacity(self) -> int:
        return self.weight.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.weight.shape[1:]

    @property
    def n_samples(self) -> int:
        return int(self.count.sum())

    def clear(self) -> None:
        self.weight[:] = 0.0
        self.frame[:] = -1
        self.valid[:] = False
        self.head[:] = 0
        self.count[:] = 0

    def push(self, features: FeatureFrame, label_prob, frame_index: int, where=None) -> None:
        """Write one frame's samples into the rings, replacing the oldest slot.

        ``where`` restricts the write to a boolean ``(H, W)`` mask.
        """
        h, w = self.shape
        ys, xs = np.nonzero(np.ones((h, w), dtype=bool) if where is None else where)
        if ys.size == 0:
            return
        prob = np.broadcast_to(np.asarray(label_prob, dtype=np.float64), (h, w))
        slot = self.head[ys, xs]
        self.color[slot, ys, xs] = features.color[ys, xs]
        self.codes[slot, ys, xs] = features.codes[ys, xs]
        self.weight[slot, ys, xs] = prob[ys, xs]
        self.frame[slot, ys, xs] = frame_index
        self.valid[slot, ys, xs] = True
        self.head[ys, xs] = (slot + 1) % self.capacity
        self.count[ys, xs] = np.minimum(self.count[ys, xs] + 1, self.capacity)

    def push_sample(self, a: FeatureVector, label_prob: float, frame_index: int) -> None:
        x, y = a.x, a.y
        slot = self.head[y, x]
        self.color[slot, y, x] = a.color
        self.codes[slot, y, x] = a.siltp
        self.weight[slot, y, x] = label_prob
        self.frame[slot, y, x] = frame_index
        self.valid[slot, y, x] = True
        self.head[y, x] = (slot + 1) % self.capacity
        self.count[y, x] = min(self.count[y, x] + 1, self.capacity)

    def samples_at(self, x: int, y: int) -> list[ModelSample]:
        """Samples stored at one location, oldest first."""
        out = []
        for k in range(self.capacity):
            if not self.valid[k, y, x]:
                continue
            c = self.color[k, y, x]
            fv = FeatureVector(
                x=x, y=y,
                color=(float(c[0]), float(c[1]), float(c[2])),
                siltp=tuple(int(v) for v in self.codes[k, y, x]),
            )
            out.append(ModelSample(fv, float(self.weight[k, y, x]), int(self.frame[k, y, x])))
        out.sort(key=lambda s: s.frame_index)
        return out

    def copy(self) -> "ProcessModel":
        return ProcessModel(**{k: v.copy() for k, v in vars(self).items()})


@dataclass(frozen=True)
class ResetConfig:
    t_i: float = 10.0
    relearn_frames: int = 50
    majority: float = 0.5

    def __post_init__(self):
        if not self.t_i > 0:
            raise ValueError("t_i must be positive")

    @classmethod
    def for_mode(cls, mode: str, **kw) -> "ResetConfig":
        return cls(t_i=10.0 if check_mode(mode) == "rgb" else 2.5, **kw)


def init_sample_indices(n_frames: int, n_samples: int = 5) -> list[int]:
    """Last frame of each of ``n_samples`` equal slices of the window."""
    if n_frames <= n_samples:
        return list(range(n_frames))
    return [(j + 1) * n_frames // n_samples - 1 for j in range(n_samples)]


def initialize(
    frames,
    mode: str = "rgb",
    n_samples: int = 5,
    expected: int = 50,
    bg_capacity: int | None = None,
    fg_capacity: int = 5,
    first_index: int = 0,
    **feature_kw,
) -> tuple[ProcessModel, ProcessModel]:
    """Build the initial models from frames assumed to be all background.

    ``frames`` may hold raw RGB frames or :class:`FeatureFrame` objects.  The
    foreground model starts empty.
    """
    frames = list(frames)
    if not frames:
        raise ValueError("initialize needs at least one frame")
    check_mode(mode)
    if len(frames) < expected:
        warnings.warn(
            f"only {len(frames)} initialization frames available (expected {expected}); using all of them",
            stacklevel=2,
        )
    idx = init_sample_indices(len(frames), n_samples)
    feats = [f if isinstance(f, FeatureFrame) else extract_features(f, mode, **feature_kw) for f in (frames[i] for i in idx)]
    return build_models(feats, [first_index + i for i in idx], bg_capacity or n_samples, fg_capacity)


def build_models(
    features: list[FeatureFrame], frame_indices: list[int], bg_capacity: int = 5, fg_capacity: int = 5
) -> tuple[ProcessModel, ProcessModel]:
    """Background model from already-sampled frames (P(bg) = 1); empty foreground model."""
    h, w = features[0].shape
    n_siltp = features[0].codes.shape[-1]
    bg = ProcessModel.empty(bg_capacity, h, w, n_siltp)
    for i, ff in zip(frame_indices, features):
        bg.push(ff, 1.0, i)
    fg = ProcessModel.empty(fg_capacity, h, w, n_siltp)
    return bg, fg


def update(bg: ProcessModel, fg: ProcessModel, a: FeatureVector, p_bg: float, frame_index: int = 0, conditional: bool = True) -> None:
    """Single-pixel model update after classification."""
    if not 0.0 <= p_bg <= 1.0:
        raise ValueError("p_bg must lie in [0, 1]")
    if p_bg > 0.5 or not conditional:
        bg.push_sample(a, p_bg, frame_index)
    fg.push_sample(a, 1.0 - p_bg, frame_index)


def update_frame(bg: ProcessModel, fg: ProcessModel, features: FeatureFrame, p_bg: np.ndarray, frame_index: int, conditional: bool = True) -> None:
    """Frame-wide version of :func:`update`."""
    bg.push(features, p_bg, frame_index, where=(p_bg > 0.5) if conditional else None)
    fg.push(features, 1.0 - p_bg, frame_index)


def frame_intensity(frame, mode: str = "rgb") -> np.ndarray:
    rgb = np.asarray(frame, dtype=np.float64)
    if check_mode(mode) == "rgb":
        return rgb.sum(axis=2) / 3.0
    return rgb_to_lab_array(rgb)[..., 0]


def illumination_reset_check(prev, cur, cfg: ResetConfig = ResetConfig(), mode: str = "rgb") -> bool:
    """True when strictly more than ``cfg.majority`` of pixels changed by ``t_i`` or more."""
    prev = np.asarray(prev)
    cur = np.asarray(cur)
    if prev.shape != cur.shape:
        raise ValueError(f"frame size mismatch: {prev.shape} vs {cur.shape}")
    delta = np.abs(frame_intensity(cur, mode) - frame_intensity(prev, mode))
    changed = int(np.count_nonzero(delta >= cfg.t_i))
    fired = changed > cfg.majority * delta.size
    if fired:
        logger.info("illumination change on %d of %d pixels", changed, delta.size)
    return fired
