"""Gaussian kernels, background/foreground scores and the Bayes-like posterior.

Scores are sums over model samples in a square spatial window around the
query pixel.  Each sample contributes ``exp(log G_appearance + log G_spatial +
log weight)``, accumulated in double precision.  SILTP codes enter the
appearance kernel through their per-radius Hamming distance.

The hot loops live in numba kernels that evaluate a *bank* of candidate
covariances at once, so variance selection costs one pass over the window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

LOG_2PI = math.log(2.0 * math.pi)
# exp() of anything below this is zero in double precision
_UNDERFLOW = -746.0


@dataclass(frozen=True)
class DiagonalCovariance:
    """Diagonal kernel covariance, grouped as spatial / color / siltp.

    ``spatial`` is shared by x and y; ``color`` holds one variance per color
    channel; ``siltp`` one per SILTP radius (empty in rgb mode).
    """

    spatial: float
    color: tuple[float, float, float]
    siltp: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "color", tuple(float(v) for v in self.color))
        object.__setattr__(self, "siltp", tuple(float(v) for v in self.siltp))
        if len(self.color) != 3:
            raise ValueError("color covariance needs exactly 3 entries")
        if not all(v > 0 for v in self.entries()):
            raise ValueError(f"covariance entries must be positive: {self.entries()}")

    def entries(self) -> tuple[float, ...]:
        return (float(self.spatial), float(self.spatial), *self.color, *self.siltp)

    @property
    def appearance(self) -> tuple[float, ...]:
        return (*self.color, *self.siltp)

    @classmethod
    def rgb(cls, spatial: float, color: float) -> "DiagonalCovariance":
        return cls(spatial, (color,) * 3)

    @classmethod
    def lab(cls, spatial: float, l: float, ab: float, siltp: float, n_siltp: int = 3) -> "DiagonalCovariance":
        return cls(spatial, (l, ab, ab), (siltp,) * n_siltp)


@dataclass(frozen=True)
class MixConfig:
    u: float = 1e-6
    alpha_f: float = 0.5

    def __post_init__(self):
        if not self.u > 0:
            raise ValueError("u must be positive")
        if not 0.0 <= self.alpha_f <= 1.0:
            raise ValueError("alpha_f must lie in [0, 1]")


def window_radius(spatial_variance: float, n_std: float = 4.0) -> int:
    """Half-width of the summation window: ``n_std`` spatial standard deviations, rounded up."""
    return int(math.ceil(n_std * math.sqrt(spatial_variance)))


def gaussian(x, sigma) -> float:
    """Zero-mean multivariate normal density with diagonal covariance ``sigma``."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    s = np.atleast_1d(np.asarray(sigma.entries() if isinstance(sigma, DiagonalCovariance) else sigma, dtype=np.float64))
    if x.shape != s.shape or x.ndim != 1:
        raise ValueError(f"dimension mismatch: x has shape {x.shape}, sigma has {s.shape}")
    if np.any(s <= 0):
        raise ValueError("variances must be positive")
    d = x.size
    log_g = -0.5 * d * LOG_2PI - 0.5 * np.sum(np.log(s)) - 0.5 * np.sum(x * x / s)
    return float(np.exp(log_g))


def posterior_bg(s_b, s_f_hat):
    """``s_b / (s_b + s_f_hat)``; zero when both scores vanish. Works elementwise."""
    s_b = np.asarray(s_b, dtype=np.float64)
    s_f_hat = np.asarray(s_f_hat, dtype=np.float64)
    if np.any(s_b < 0) or np.any(s_f_hat < 0):
        raise ValueError("scores must be non-negative")
    total = s_b + s_f_hat
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(total > 0, s_b / np.where(total > 0, total, 1.0), 0.0)
    p = np.clip(p, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


@dataclass
class KernelBank:
    """Precomputed kernel terms for a spatial x appearance product of covariances.

    Candidate ``c`` pairs spatial option ``c // n_appearance`` with appearance
    option ``c % n_appearance``.  All candidates share one window radius.
    """

    spatial: tuple[float, ...]
    appearance: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...]  # (color, siltp) pairs
    radius: int
    spatial_table: np.ndarray = field(init=False, repr=False)
    inv2_color: np.ndarray = field(init=False, repr=False)
    inv2_siltp: np.ndarray = field(init=False, repr=False)
    log_norm_app: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.spatial = tuple(float(v) for v in self.spatial)
        self.appearance = tuple((tuple(c), tuple(s)) for c, s in self.appearance)
        if not self.spatial or not self.appearance:
            raise ValueError("kernel bank needs at least one candidate")
        n_siltp = {len(s) for _, s in self.appearance}
        if len(n_siltp) != 1:
            raise ValueError("candidates mix feature layouts")
        r = int(self.radius)
        off = np.arange(-r, r + 1, dtype=np.float64)
        sq = off[:, None] ** 2 + off[None, :] ** 2
        self.spatial_table = np.stack(
            [np.exp(-LOG_2PI - math.log(sd) - sq / (2.0 * sd)) for sd in self.spatial]
        )
        self.inv2_color = np.array([[0.5 / v for v in c] for c, _ in self.appearance])
        self.inv2_siltp = np.array([[0.5 / v for v in s] for _, s in self.appearance]).reshape(
            len(self.appearance), n_siltp.pop()
        )
        self.log_norm_app = np.array(
            [-0.5 * (len(c) + len(s)) * LOG_2PI - 0.5 * float(np.log([*c, *s]).sum()) for c, s in self.appearance]
        )

    def __len__(self) -> int:
        return len(self.spatial) * len(self.appearance)

    @property
    def candidates(self) -> list[DiagonalCovariance]:
        return [DiagonalCovariance(sd, c, s) for sd in self.spatial for c, s in self.appearance]

    @classmethod
    def single(cls, sigma: DiagonalCovariance, radius: int | None = None) -> "KernelBank":
        if radius is None:
            radius = window_radius(sigma.spatial)
        return cls((sigma.spatial,), ((sigma.color, sigma.siltp),), radius)


# --- numba kernels -----------------------------------------------------------


@njit(cache=True, nogil=True)
def _hamming(a, b):
    x = np.uint32(a) ^ np.uint32(b)
    x = (x | (x >> np.uint32(1))) & np.uint32(0x5555)
    n = 0
    while x:
        x &= x - np.uint32(1)
        n += 1
    return n


@njit(cache=True, nogil=True)
def _accumulate(
    out_s, out_u, s0, s1, j0, j1, qc, qs, x, y,
    m_color, m_codes, m_weight, m_valid,
    sp_tab, inv2_c, inv2_s, log_norm, radius, want_u,
):
    """Add window contributions for spatial options ``s0..s1-1`` x appearance
    options ``j0..j1-1`` into ``out_s`` (indexed ``s * n_app + j``).

    Every log-kernel term is <= 0, so multiplying the appearance factor by the
    tabulated spatial factor underflows exactly where the summed exponent would.
    ``out_u`` receives the unweighted spatial kernel sum for option ``s0``.
    """
    n_slot, h, w = m_weight.shape
    n_s = qs.shape[0]
    n_app = log_norm.shape[0]
    app = np.empty(n_app)
    ham2 = np.empty(n_s)
    for k in range(n_slot):
        for yy in range(max(y - radius, 0), min(y + radius + 1, h)):
            dy = yy - y
            for xx in range(max(x - radius, 0), min(x + radius + 1, w)):
                dx = xx - x
                if not m_valid[k, yy, xx]:
                    continue
                if want_u:
                    out_u[0] += sp_tab[s0, dy + radius, dx + radius]
                wgt = m_weight[k, yy, xx]
                if wgt <= 0.0:
                    continue
                d0 = qc[0] - m_color[k, yy, xx, 0]
                d1 = qc[1] - m_color[k, yy, xx, 1]
                d2 = qc[2] - m_color[k, yy, xx, 2]
                d0 *= d0
                d1 *= d1
                d2 *= d2
                for s in range(n_s):
                    hd = _hamming(qs[s], m_codes[k, yy, xx, s])
                    ham2[s] = hd * hd
                for j in range(j0, j1):
                    la = log_norm[j] - d0 * inv2_c[j, 0] - d1 * inv2_c[j, 1] - d2 * inv2_c[j, 2]
                    for s in range(n_s):
                        la -= ham2[s] * inv2_s[j, s]
                    app[j] = math.exp(la) if la > _UNDERFLOW else 0.0
                for sp in range(s0, s1):
                    f = sp_tab[sp, dy + radius, dx + radius]
                    for j in range(j0, j1):
                        out_s[sp * n_app + j] += app[j] * f * wgt


@njit(cache=True, nogil=True)
def _pixel_scores(
    qc, qs, x, y, m_color, m_codes, m_weight, m_valid,
    sp_tab, inv2_c, inv2_s, log_norm, radius, want_u,
):
    n_sp = sp_tab.shape[0]
    n_app = log_norm.shape[0]
    out_s = np.zeros(n_sp * n_app)
    out_u = np.zeros(1)
    _accumulate(out_s, out_u, 0, n_sp, 0, n_app, qc, qs, x, y, m_color, m_codes, m_weight, m_valid,
                sp_tab, inv2_c, inv2_s, log_norm, radius, want_u)
    return out_s, out_u[0]


@njit(cache=True, parallel=True)
def _frame_scores(
    f_color, f_codes, m_color, m_codes, m_weight, m_valid,
    sp_tab, inv2_c, inv2_s, log_norm, radius, want_u,
):
    h, w = f_color.shape[:2]
    n_sp = sp_tab.shape[0]
    n_app = log_norm.shape[0]
    sums = np.zeros((h, w, n_sp * n_app))
    usum = np.zeros((h, w))
    for y in prange(h):
        out_u = np.zeros(1)
        for x in range(w):
            out_u[0] = 0.0
            _accumulate(sums[y, x], out_u, 0, n_sp, 0, n_app, f_color[y, x], f_codes[y, x], x, y,
                        m_color, m_codes, m_weight, m_valid,
                        sp_tab, inv2_c, inv2_s, log_norm, radius, want_u)
            usum[y, x] = out_u[0]
    return sums, usum


@njit(cache=True, nogil=True)
def _argmax_first(v):
    best = 0
    for i in range(1, v.shape[0]):
        if v[i] > v[best]:
            best = i
    return best


@njit(cache=True, parallel=True)
def _frame_cached(
    f_color, f_codes, m_color, m_codes, m_weight, m_valid, inv_n,
    sp_tab, inv2_c, inv2_s, log_norm, radius,
    sf_hat, cache_idx, cache_valid, tau, force_search,
):
    """Cached-variance classification of a whole frame.

    Returns background scores, selected candidate and a searched flag per
    pixel; ``cache_idx`` / ``cache_valid`` are updated in place where a search ran.
    """
    h, w = f_color.shape[:2]
    n_sp = sp_tab.shape[0]
    n_app = log_norm.shape[0]
    n_c = n_sp * n_app
    sb = np.zeros((h, w))
    chosen = np.zeros((h, w), dtype=np.int64)
    searched = np.zeros((h, w), dtype=np.bool_)
    for y in prange(h):
        dummy = np.zeros(1)
        buf = np.zeros(n_c)
        for x in range(w):
            qc = f_color[y, x]
            qs = f_codes[y, x]
            s_f = sf_hat[y, x]
            if cache_valid[y, x] and not force_search:
                c = cache_idx[y, x]
                sp = c // n_app
                j = c % n_app
                buf[:] = 0.0
                _accumulate(buf, dummy, sp, sp + 1, j, j + 1, qc, qs, x, y,
                            m_color, m_codes, m_weight, m_valid,
                            sp_tab, inv2_c, inv2_s, log_norm, radius, False)
                s_b = buf[c] * inv_n[y, x]
                if s_b > tau * s_f or s_f > tau * s_b:
                    sb[y, x] = s_b
                    chosen[y, x] = c
                    continue
            buf[:] = 0.0
            _accumulate(buf, dummy, 0, n_sp, 0, n_app, qc, qs, x, y,
                        m_color, m_codes, m_weight, m_valid,
                        sp_tab, inv2_c, inv2_s, log_norm, radius, False)
            for i in range(n_c):
                buf[i] *= inv_n[y, x]
            best = _argmax_first(buf)
            sb[y, x] = buf[best]
            chosen[y, x] = best
            searched[y, x] = True
            cache_idx[y, x] = best
            cache_valid[y, x] = True
    return sb, chosen, searched


# --- model adapters ----------------------------------------------------------


def _model_arrays(model):
    return model.color, model.codes, model.weight, model.valid


def _inv_count(model) -> np.ndarray:
    n = model.count.astype(np.float64)
    return np.where(n > 0, 1.0 / np.where(n > 0, n, 1.0), 0.0)


def _query(a, n_siltp: int):
    qc = np.asarray(a.color, dtype=np.float64)
    qs = np.asarray(a.siltp, dtype=np.uint16)
    if qs.size != n_siltp:
        raise ValueError(f"feature vector carries {qs.size} SILTP codes, model expects {n_siltp}")
    return qc, qs


def _bank_args(bank: KernelBank):
    return bank.spatial_table, bank.inv2_color, bank.inv2_siltp, bank.log_norm_app, bank.radius


def _check_window(sigma: DiagonalCovariance, window: int | None) -> int:
    need = window_radius(sigma.spatial)
    if window is None:
        return need
    if window < need:
        raise ValueError(f"window {window} is smaller than four spatial std-devs ({need})")
    return int(window)


def background_score(a, bg, sigma: DiagonalCovariance, window: int | None = None) -> float:
    """Soft-labeled background score of one feature vector."""
    bank = KernelBank.single(sigma, _check_window(sigma, window))
    return float(background_scores_bank(a, bg, bank)[0])


def background_scores_bank(a, bg, bank: KernelBank) -> np.ndarray:
    """Background score of ``a`` under every candidate of ``bank``."""
    n = int(bg.count[a.y, a.x])
    if n == 0:
        return np.zeros(len(bank))
    qc, qs = _query(a, bg.codes.shape[-1])
    sums, _ = _pixel_scores(qc, qs, a.x, a.y, *_model_arrays(bg), *_bank_args(bank), False)
    return sums / n


def foreground_score(a, fg, sigma: DiagonalCovariance, mix: MixConfig = MixConfig(), window: int | None = None) -> float:
    """Foreground score mixed with the constant per-sample contribution ``u``."""
    bank = KernelBank.single(sigma, _check_window(sigma, window))
    n = int(fg.count[a.y, a.x])
    if n == 0:
        return mix.alpha_f * mix.u
    qc, qs = _query(a, fg.codes.shape[-1])
    sums, usum = _pixel_scores(qc, qs, a.x, a.y, *_model_arrays(fg), *_bank_args(bank), True)
    u_f = mix.u * usum / n
    return mix.alpha_f * u_f + (1.0 - mix.alpha_f) * sums[0] / n


def frame_background_scores(features, bg, bank: KernelBank) -> np.ndarray:
    """``(H, W, C)`` background scores for every pixel and candidate."""
    sums, _ = _frame_scores(features.color, features.codes, *_model_arrays(bg), *_bank_args(bank), False)
    return sums * _inv_count(bg)[:, :, None]


def frame_foreground_scores(features, fg, sigma: DiagonalCovariance, mix: MixConfig, radius: int | None = None) -> np.ndarray:
    bank = KernelBank.single(sigma, radius)
    sums, usum = _frame_scores(features.color, features.codes, *_model_arrays(fg), *_bank_args(bank), True)
    inv = _inv_count(fg)
    u_f = np.where(fg.count > 0, mix.u * usum * inv, mix.u)
    s_f = sums[:, :, 0] * inv
    return mix.alpha_f * u_f + (1.0 - mix.alpha_f) * s_f


def frame_cached_scores(features, bg, bank: KernelBank, sf_hat, cache_idx, cache_valid, tau: float, force_search: bool = False):
    return _frame_cached(
        features.color, features.codes, *_model_arrays(bg), _inv_count(bg),
        *_bank_args(bank), sf_hat, cache_idx, cache_valid, float(tau), force_search,
    )
