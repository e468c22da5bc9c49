"""Deterministic synthetic sequences with ground truth.

Scenes are small (default 64x64) and reproduce the situations the method
cares about: a static scene, a region of jittering texture (waving leaves),
an object parked over the background for a while, and a global
illumination step.  Ground truth marks the moving object as foreground.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

SCENE_KINDS = ("static", "dynamic-texture", "occlusion", "illumination-jump")


@dataclass(frozen=True)
class SynthSpec:
    kind: str = "static"
    height: int = 64
    width: int = 64
    n_frames: int = 150
    noise_std: float = 1.0
    seed: int = 0
    # moving object
    object_size: int = 10
    object_speed: int = 5
    object_color: tuple[int, int, int] = (230, 40, 200)
    object_start: int = 50
    # dynamic texture: the top ``texture_rows`` rows jitter
    texture_rows: int = 32
    texture_amplitude: float = 1.0
    texture_period: float = 7.0
    texture_contrast: float = 45.0
    # occlusion: the object parks at (park_x, park_y) for park_frames
    park_x: int = 27
    park_y: int = 27
    park_start: int = 60
    park_frames: int = 15
    # illumination step
    jump_frame: int = 70
    jump: float = 20.0

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise ValueError(f"unknown scene kind {self.kind!r}")
        if self.height < 8 or self.width < 8 or self.n_frames < 1:
            raise ValueError("degenerate scene size")
        if self.object_size < 1 or self.object_size >= min(self.height, self.width):
            raise ValueError("object does not fit the frame")


@dataclass
class SynthSequence:
    frames: np.ndarray  # (T, H, W, 3) uint8
    gt: np.ndarray      # (T, H, W) bool, True = foreground
    plate: np.ndarray   # (H, W, 3) float64 clean background
    spec: SynthSpec

    def __len__(self) -> int:
        return len(self.frames)


def _plate(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    h, w = spec.height, spec.width
    coarse = rng.uniform(60.0, 170.0, size=(h, w, 3))
    plate = np.stack([ndimage.gaussian_filter(coarse[..., c], 3.0, mode="wrap") for c in range(3)], axis=-1)
    plate = (plate - plate.mean()) * 4.0 + 115.0
    return np.clip(plate, 20.0, 200.0)


def _texture(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    h, w = spec.height, spec.width
    raw = rng.normal(size=(h, w))
    tex = ndimage.gaussian_filter(raw, 1.0, mode="wrap")
    return tex / tex.std() * spec.texture_contrast


def _object_track(spec: SynthSpec, t: int) -> tuple[int, int] | None:
    """Top-left corner of the object at frame t, or None when absent."""
    s, v = spec.object_size, spec.object_speed
    if spec.kind == "static":
        return None
    if spec.kind == "occlusion":
        end = spec.park_start + spec.park_frames
        if t < spec.park_start:
            x = spec.park_x - v * (spec.park_start - t)
        elif t < end:
            x = spec.park_x
        else:
            x = spec.park_x + v * (t - end + 1)
        if v == 0 and not spec.park_start <= t < end:
            return None
        if x + s <= 0 or x >= spec.width:
            return None
        return x, spec.park_y
    if t < spec.object_start:
        return None
    # bounce back and forth along a diagonal-ish path
    span_x = spec.width - s
    span_y = spec.height - s
    k = (t - spec.object_start) * v
    x = k % (2 * span_x)
    x = x if x <= span_x else 2 * span_x - x
    ky = (t - spec.object_start) * max(1, v // 2) + span_y // 3
    y = ky % (2 * span_y)
    y = y if y <= span_y else 2 * span_y - y
    return int(x), int(y)


def synth_generate(spec: SynthSpec) -> SynthSequence:
    rng = np.random.default_rng(spec.seed)
    h, w = spec.height, spec.width
    plate = _plate(spec, rng)
    tex = _texture(spec, rng) if spec.kind == "dynamic-texture" else None
    phase = rng.uniform(0, 2 * np.pi, size=h)
    frames = np.empty((spec.n_frames, h, w, 3), dtype=np.uint8)
    gt = np.zeros((spec.n_frames, h, w), dtype=bool)
    for t in range(spec.n_frames):
        img = plate.copy()
        if tex is not None:
            rows = min(spec.texture_rows, h)
            moved = np.empty((rows, w))
            for r in range(rows):
                dx = spec.texture_amplitude * np.sin(2 * np.pi * t / spec.texture_period + phase[r])
                moved[r] = ndimage.shift(tex[r], dx, order=1, mode="wrap")
            img[:rows] += moved[:, :, None] * np.array([0.6, 1.0, 0.4])
        if spec.kind == "illumination-jump" and t >= spec.jump_frame:
            img += spec.jump
        pos = _object_track(spec, t)
        if pos is not None:
            x, y = pos
            x0, x1 = max(x, 0), min(x + spec.object_size, w)
            y0, y1 = max(y, 0), min(y + spec.object_size, h)
            img[y0:y1, x0:x1] = spec.object_color
            gt[t, y0:y1, x0:x1] = True
        img += rng.normal(0.0, spec.noise_std, size=img.shape)
        frames[t] = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return SynthSequence(frames=frames, gt=gt, plate=plate, spec=spec)
