"""Brute-force reference computations used by the tests.

Nothing here shares code with the windowed kernels: every sample of a model
contributes through a full multivariate-normal density evaluated with an
explicit covariance matrix.
"""

import itertools

import numpy as np

from bgsub.features import siltp_distance


_POPCOUNT = np.array([bin(v).count("1") for v in range(1 << 16)])


def mvn(x, variances):
    x = np.asarray(x, dtype=np.float64)
    cov = np.diag(np.asarray(variances, dtype=np.float64))
    d = x.size
    return float(
        (2 * np.pi) ** (-d / 2) * np.linalg.det(cov) ** -0.5 * np.exp(-0.5 * x @ np.linalg.inv(cov) @ x)
    )


def model_samples(model):
    """Every stored sample as (x, y, color, codes, weight)."""
    out = []
    n, h, w = model.weight.shape
    for k in range(n):
        for y in range(h):
            for x in range(w):
                if model.valid[k, y, x]:
                    out.append((x, y, model.color[k, y, x], model.codes[k, y, x], model.weight[k, y, x]))
    return out


def kernel_sum(a, samples, sigma, weighted=True, appearance=True):
    total = 0.0
    for x, y, color, codes, wgt in samples:
        g = mvn([a.x - x, a.y - y], [sigma.spatial, sigma.spatial])
        if appearance:
            diff = list(np.asarray(a.color) - color) + [siltp_distance(p, q) for p, q in zip(a.siltp, codes)]
            g *= mvn(diff, sigma.appearance)
        if weighted:
            g *= wgt
        total += g
    return total


def background_score_naive(a, model, sigma):
    n = int(model.count[a.y, a.x])
    if n == 0:
        return 0.0
    return kernel_sum(a, model_samples(model), sigma) / n


def foreground_score_naive(a, model, sigma, u=1e-6, alpha=0.5):
    n = int(model.count[a.y, a.x])
    if n == 0:
        return alpha * u
    samples = model_samples(model)
    u_f = u * kernel_sum(a, samples, sigma, weighted=False, appearance=False) / n
    s_f = kernel_sum(a, samples, sigma) / n
    return alpha * u_f + (1 - alpha) * s_f


def background_scores_vectorized(feats, model, sigma):
    """All-pairs (no window) background scores for every pixel of a small frame."""
    h, w = feats.shape
    ys, xs = np.mgrid[0:h, 0:w]
    q_xy = np.stack([xs.ravel(), ys.ravel()], 1).astype(float)
    q_col = feats.color.reshape(-1, 3)
    q_codes = feats.codes.reshape(h * w, -1)
    mask = model.valid
    ks, sy, sx = np.nonzero(mask)
    s_xy = np.stack([sx, sy], 1).astype(float)
    s_col = model.color[ks, sy, sx]
    s_codes = model.codes[ks, sy, sx]
    s_w = model.weight[ks, sy, sx]
    dxy = q_xy[:, None, :] - s_xy[None]
    dcol = q_col[:, None, :] - s_col[None]
    parts = [dxy, dcol]
    var = [sigma.spatial, sigma.spatial, *sigma.color]
    if q_codes.shape[1]:
        ham = np.zeros((h * w, len(s_w), q_codes.shape[1]))
        for s in range(q_codes.shape[1]):
            x = q_codes[:, None, s].astype(np.uint32) ^ s_codes[None, :, s].astype(np.uint32)
            x = (x | (x >> 1)) & 0x5555
            ham[..., s] = _POPCOUNT[x]
        parts.append(ham)
        var += list(sigma.siltp)
    diff = np.concatenate(parts, axis=2)
    var = np.asarray(var)
    d = var.size
    dens = (2 * np.pi) ** (-d / 2) * np.prod(var) ** -0.5 * np.exp(-0.5 * np.sum(diff**2 / var, axis=2))
    n = model.count.ravel().astype(float)
    sums = dens @ s_w
    return np.where(n > 0, sums / np.where(n > 0, n, 1), 0.0).reshape(h, w)


def mrf_brute_force(posterior, lam, energy):
    h, w = posterior.shape
    best, best_e = None, np.inf
    for bits in itertools.product((False, True), repeat=h * w):
        lab = np.array(bits).reshape(h, w)
        e = energy(lab, posterior, lam)
        if e < best_e:
            best, best_e = lab, e
    return best, best_e


def components_bfs(mask):
    """4-connected component sizes by explicit flood fill; returns a size-per-pixel map."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    size = np.zeros(mask.shape, dtype=int)
    for y0 in range(h):
        for x0 in range(w):
            if not mask[y0, x0] or seen[y0, x0]:
                continue
            stack, comp = [(y0, x0)], []
            seen[y0, x0] = True
            while stack:
                y, x = stack.pop()
                comp.append((y, x))
                for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        stack.append((ny, nx))
            for y, x in comp:
                size[y, x] = len(comp)
    return size


def foreground_scores_vectorized(feats, model, sigma, u=1e-6, alpha=0.5):
    """All-pairs foreground scores for every pixel of a small frame."""
    h, w = feats.shape
    weighted = background_scores_vectorized(feats, model, sigma)
    ks, sy, sx = np.nonzero(model.valid)
    ys, xs = np.mgrid[0:h, 0:w]
    d2 = (xs.ravel()[:, None] - sx[None]) ** 2 + (ys.ravel()[:, None] - sy[None]) ** 2
    g_sp = np.exp(-0.5 * d2 / sigma.spatial) / (2 * np.pi * sigma.spatial)
    n = model.count.ravel().astype(float)
    u_f = np.where(n > 0, u * g_sp.sum(axis=1) / np.where(n > 0, n, 1), u).reshape(h, w)
    s_f = np.where(model.count > 0, weighted, 0.0)
    return alpha * u_f + (1 - alpha) * s_f


def mrf_brute_force_vectorized(posterior, lam):
    """Exhaustive minimum of the smoothing energy, every labeling at once (maps up to ~4x4)."""
    h, w = posterior.shape
    n = h * w
    codes = np.arange(2**n, dtype=np.int64)
    labels = ((codes[:, None] >> np.arange(n)) & 1).astype(bool).reshape(-1, h, w)
    p = np.asarray(posterior, dtype=np.float64)
    u_bg = -np.log(np.maximum(p, 1e-10))
    u_fg = -np.log(np.maximum(1 - p, 1e-10))
    e = np.where(labels, u_fg, u_bg).sum(axis=(1, 2))
    e += lam * ((labels[:, 1:, :] != labels[:, :-1, :]).sum(axis=(1, 2)) + (labels[:, :, 1:] != labels[:, :, :-1]).sum(axis=(1, 2)))
    best = int(np.argmin(e))
    return labels[best], float(e[best]), np.sort(e)[:2]
