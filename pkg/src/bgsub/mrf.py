"""Two-label MRF smoothing of posterior maps, solved exactly by min-cut.

Energy: ``sum_p U_p(l_p) + lambda * sum_{p~q} [l_p != l_q]`` over the
4-neighborhood with ``U_p(bg) = -log P(bg)`` and ``U_p(fg) = -log P(fg)``.
Masks are boolean with ``True`` meaning foreground.
"""

from __future__ import annotations

from dataclasses import dataclass

import maxflow
import numpy as np

EPS = 1e-10

# forward right/down neighbors; symmetric=True adds the reverse arcs
_FORWARD_4 = np.array([[0, 0, 0], [0, 0, 1], [0, 1, 0]])


@dataclass(frozen=True)
class MrfConfig:
    lam: float = 1.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")


def unaries(posterior: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(posterior, dtype=np.float64)
    return -np.log(np.maximum(p, EPS)), -np.log(np.maximum(1.0 - p, EPS))


def energy(labels: np.ndarray, posterior: np.ndarray, lam: float) -> float:
    """Energy of a foreground mask under the smoothing model."""
    labels = np.asarray(labels, dtype=bool)
    u_bg, u_fg = unaries(posterior)
    e = np.where(labels, u_fg, u_bg).sum()
    e += lam * (np.count_nonzero(labels[1:, :] != labels[:-1, :]) + np.count_nonzero(labels[:, 1:] != labels[:, :-1]))
    return float(e)


def threshold(posterior: np.ndarray, level: float = 0.5) -> np.ndarray:
    """Foreground wherever P(bg) falls below ``level``; exact ties stay background."""
    return np.asarray(posterior) < level


def mrf_smooth(posterior: np.ndarray, cfg: MrfConfig = MrfConfig()) -> np.ndarray:
    p = np.asarray(posterior, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("posterior map must be 2-D")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("posterior values must lie in [0, 1]")
    if cfg.lam == 0:
        return threshold(p)
    u_bg, u_fg = unaries(p)
    base = np.minimum(u_bg, u_fg)
    g = maxflow.Graph[float]()
    nodes = g.add_grid_nodes(p.shape)
    g.add_grid_edges(nodes, weights=cfg.lam, structure=_FORWARD_4, symmetric=True)
    # a node cut to the sink side (foreground) pays its source capacity;
    # free nodes stay on the source side, matching threshold() at ties
    g.add_grid_tedges(nodes, u_fg - base, u_bg - base)
    g.maxflow()
    return np.asarray(g.get_grid_segments(nodes), dtype=bool)
