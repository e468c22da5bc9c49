"""Feature extraction: raw RGB, rescaled CIELAB and multi-radius SILTP codes.

Frames are ``(H, W, 3)`` arrays in RGB channel order with values in
``[0, 255]``.  Frame-level helpers return a :class:`FeatureFrame`, the
per-pixel helpers mirror them one location at a time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEATURE_MODES = ("rgb", "lab+siltp")

DEFAULT_SILTP_RADII = (1, 2, 4)
DEFAULT_SILTP_TAU = 0.05

# sRGB (D65) linear-RGB -> XYZ
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
# white point taken from the matrix row sums so that grays are exactly neutral
_WHITE = _RGB_TO_XYZ.sum(axis=1)
_EPS = (6.0 / 29.0) ** 3
_KAPPA = 3.0 * (6.0 / 29.0) ** 2

# (dx, dy) clockwise from the top-left corner of the square ring
_RING = ((-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0))


class FeatureModeError(ValueError):
    """Unknown feature mode."""


def check_mode(mode: str) -> str:
    if mode not in FEATURE_MODES:
        raise FeatureModeError(f"unknown feature mode {mode!r}; expected one of {FEATURE_MODES}")
    return mode


@dataclass(frozen=True)
class SiltpCode:
    code: int
    radius: int
    tau: float

    def fields(self) -> list[int]:
        """Per-neighbor 2-bit values in ring order (0, 1 = brighter, 2 = darker)."""
        return [(self.code >> (2 * k)) & 0b11 for k in range(8)]


@dataclass(frozen=True)
class FeatureVector:
    """One joint domain-range pixel sample."""

    x: int
    y: int
    color: tuple[float, float, float]
    siltp: tuple[int, ...] = ()

    def as_tuple(self) -> tuple:
        return (self.x, self.y, *self.color, *self.siltp)

    def __len__(self) -> int:
        return 2 + len(self.color) + len(self.siltp)


@dataclass
class FeatureFrame:
    """Dense features for a whole frame.

    ``color`` is ``(H, W, 3)`` float64 (RGB or rescaled LAB); ``codes`` is
    ``(H, W, S)`` uint16 with one SILTP code per radius (``S == 0`` in rgb mode).
    """

    color: np.ndarray
    codes: np.ndarray
    mode: str

    @property
    def shape(self) -> tuple[int, int]:
        return self.color.shape[:2]

    def vector(self, x: int, y: int) -> FeatureVector:
        c = self.color[y, x]
        return FeatureVector(
            x=int(x),
            y=int(y),
            color=(float(c[0]), float(c[1]), float(c[2])),
            siltp=tuple(int(v) for v in self.codes[y, x]),
        )


def _as_rgb(frame) -> np.ndarray:
    arr = np.asarray(frame, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) frame, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("frame must be non-empty")
    return arr


def rgb_to_lab_array(rgb) -> np.ndarray:
    """Convert RGB in ``[0, 255]`` (any leading shape, last axis 3) to LAB rescaled to ``[0, 255]``.

    L is mapped from ``[0, 100]`` by ``255/100``; a and b are offset by 128.
    """
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _RGB_TO_XYZ.T / _WHITE
    f = np.where(xyz > _EPS, np.cbrt(xyz), xyz / _KAPPA + 4.0 / 29.0)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    out = np.stack([L * 255.0 / 100.0, a + 128.0, b + 128.0], axis=-1)
    return np.clip(out, 0.0, 255.0)


def rgb_to_lab(rgb) -> tuple[float, float, float]:
    lab = rgb_to_lab_array(np.asarray(rgb, dtype=np.float64).reshape(3))
    return float(lab[0]), float(lab[1]), float(lab[2])


def grayscale(frame) -> np.ndarray:
    """Mean of the three channels; a 2-D input is taken as already grayscale."""
    arr = np.asarray(frame, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    return _as_rgb(arr).sum(axis=2) / 3.0


def siltp_image(frame, radius: int, tau: float = DEFAULT_SILTP_TAU) -> np.ndarray:
    """SILTP codes for every pixel of ``frame`` at one radius, as uint16."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if radius < 1:
        raise ValueError("radius must be >= 1")
    gray = grayscale(frame)
    h, w = gray.shape
    padded = np.pad(gray, radius, mode="edge")
    upper = (1.0 + tau) * gray
    lower = (1.0 - tau) * gray
    code = np.zeros((h, w), dtype=np.uint16)
    for k, (dx, dy) in enumerate(_RING):
        oy, ox = radius + dy * radius, radius + dx * radius
        nb = padded[oy : oy + h, ox : ox + w]
        code |= (nb > upper).astype(np.uint16) << (2 * k)
        code |= (nb < lower).astype(np.uint16) << (2 * k + 1)
    return code


def siltp_encode(frame, x: int, y: int, radius: int, tau: float = DEFAULT_SILTP_TAU) -> SiltpCode:
    gray = grayscale(frame)
    h, w = gray.shape
    if not (0 <= x < w and 0 <= y < h):
        raise IndexError(f"pixel ({x}, {y}) outside a {w}x{h} frame")
    if tau <= 0:
        raise ValueError("tau must be positive")
    if radius < 1:
        raise ValueError("radius must be >= 1")
    center = gray[y, x]
    code = 0
    for k, (dx, dy) in enumerate(_RING):
        nx = min(max(x + dx * radius, 0), w - 1)
        ny = min(max(y + dy * radius, 0), h - 1)
        nb = gray[ny, nx]
        if nb > (1.0 + tau) * center:
            code |= 0b01 << (2 * k)
        elif nb < (1.0 - tau) * center:
            code |= 0b10 << (2 * k)
    return SiltpCode(code=code, radius=radius, tau=tau)


def siltp_distance(a: int, b: int) -> int:
    """Number of neighbor fields (0-8) on which two codes disagree."""
    x = int(a) ^ int(b)
    return bin((x | (x >> 1)) & 0x5555).count("1")


def extract_features(
    frame,
    mode: str = "rgb",
    radii: tuple[int, ...] = DEFAULT_SILTP_RADII,
    tau: float = DEFAULT_SILTP_TAU,
) -> FeatureFrame:
    check_mode(mode)
    rgb = _as_rgb(frame)
    h, w = rgb.shape[:2]
    if mode == "rgb":
        return FeatureFrame(color=rgb.copy(), codes=np.zeros((h, w, 0), dtype=np.uint16), mode=mode)
    codes = np.stack([siltp_image(rgb, r, tau) for r in radii], axis=-1)
    return FeatureFrame(color=rgb_to_lab_array(rgb), codes=codes, mode=mode)


def build_feature_vector(
    frame,
    x: int,
    y: int,
    mode: str = "rgb",
    radii: tuple[int, ...] = DEFAULT_SILTP_RADII,
    tau: float = DEFAULT_SILTP_TAU,
) -> FeatureVector:
    check_mode(mode)
    rgb = _as_rgb(frame)
    h, w = rgb.shape[:2]
    if not (0 <= x < w and 0 <= y < h):
        raise IndexError(f"pixel ({x}, {y}) outside a {w}x{h} frame")
    px = rgb[y, x]
    if mode == "rgb":
        return FeatureVector(x=x, y=y, color=(float(px[0]), float(px[1]), float(px[2])))
    codes = tuple(siltp_encode(rgb, x, y, r, tau).code for r in radii)
    return FeatureVector(x=x, y=y, color=rgb_to_lab(px), siltp=codes)
