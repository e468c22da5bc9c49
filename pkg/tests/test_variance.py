import math

import numpy as np
import pytest

from bgsub.features import FeatureVector
from bgsub.kde import DiagonalCovariance, MixConfig, gaussian
from bgsub.model import ProcessModel
from bgsub.variance import (
    CacheThreshold,
    VarianceCache,
    VarianceGrid,
    classify_with_cache,
    score_frame,
    select_variances,
)

from conftest import random_scene
from oracles import background_score_naive

GRID = VarianceGrid()


def lone_sample(dx=0, weight=1.0, color=(100.0, 100.0, 100.0)):
    m = ProcessModel.empty(5, 16, 16)
    m.push_sample(FeatureVector(8 + dx, 8, color), weight, 0)
    m.count[:] = 1  # N_B is read at the query location
    return m


def peak(sigma: DiagonalCovariance) -> float:
    return gaussian([0.0] * len(sigma.entries()), list(sigma.entries()))


def test_grid_defaults_are_quarter_table_values():
    assert GRID.spatial == (0.25, 0.75)
    assert GRID.rgb == (1.25, 3.75, 11.25)
    lab = VarianceGrid(mode="lab+siltp")
    assert lab.l == (1.25, 2.5, 5.0) and lab.ab == (1.0, 1.5) and lab.siltp == 0.75
    assert len(lab.candidates()) == 12
    assert GRID.foreground().entries() == (3.0, 3.0, 3.75, 3.75, 3.75)


def test_singleton_grid_returns_its_pair():
    g = GRID.singleton(0.75, 3.75)
    a = FeatureVector(8, 8, (100.0, 100.0, 101.0))
    sel = select_variances(a, lone_sample(), g)
    assert (sel.spatial, sel.color, sel.index) == (0.75, 3.75, 0)
    assert sel.score == pytest.approx(background_score_naive(a, lone_sample(), DiagonalCovariance.rgb(0.75, 3.75)), rel=1e-12)


def test_colocated_identical_sample_picks_smallest_pair():
    a = FeatureVector(8, 8, (100.0, 100.0, 100.0))
    sel = select_variances(a, lone_sample(), GRID)
    assert (sel.spatial, sel.color) == (0.25, 1.25)
    assert sel.score == pytest.approx(peak(DiagonalCovariance.rgb(0.25, 1.25)), rel=1e-12)


def test_spatially_displaced_sample_flips_to_wide_spatial():
    a = FeatureVector(8, 8, (100.0, 100.0, 100.0))
    sel = select_variances(a, lone_sample(dx=3), GRID)
    assert sel.spatial == 0.75
    assert sel.color == 1.25
    # same answer from brute force over the six candidates
    scores = [background_score_naive(a, lone_sample(dx=3), c) for c in GRID.candidates()]
    assert sel.index == int(np.argmax(scores))


def test_selection_matches_exhaustive_oracle():
    rng = np.random.default_rng(11)
    for trial in range(10):
        feats, model = random_scene(rng, 8, 8, noise=rng.uniform(0.5, 6.0))
        for _ in range(4):
            x, y = rng.integers(0, 8, size=2)
            a = feats.vector(int(x), int(y))
            scores = [background_score_naive(a, model, c) for c in GRID.candidates()]
            assert select_variances(a, model, GRID).index == int(np.argmax(scores))


def test_lab_grid_selection_matches_oracle():
    rng = np.random.default_rng(12)
    grid = VarianceGrid(mode="lab+siltp")
    feats, model = random_scene(rng, 8, 8, mode="lab+siltp", noise=3.0)
    for x, y in [(1, 1), (4, 6), (7, 0)]:
        a = feats.vector(x, y)
        scores = [background_score_naive(a, model, c) for c in grid.candidates()]
        assert select_variances(a, model, grid).index == int(np.argmax(scores))


def cached_case(ratio, cached_index):
    """Background model whose score under ``cached_index`` is ``ratio`` times the empty-fg floor."""
    cov = GRID.candidates()[cached_index]
    sf = 0.5 * 1e-6
    a = FeatureVector(8, 8, (100.0, 100.0, 100.0))
    bg = lone_sample(weight=ratio * sf / peak(cov))
    fg = ProcessModel.empty(5, 16, 16)
    cache = VarianceCache.empty(16, 16)
    cache.index[8, 8] = cached_index
    cache.valid[8, 8] = True
    return a, bg, fg, cache


def test_cached_ratio_above_threshold_skips_search():
    a, bg, fg, cache = cached_case(5.0, 5)
    p, sel, searched = classify_with_cache(a, bg, fg, cache, CacheThreshold(2.0), MixConfig(), GRID)
    assert not searched
    assert sel.index == 5 and cache.index[8, 8] == 5
    assert p == pytest.approx(5 / 6, rel=1e-9)


def test_cached_ratio_inside_band_searches():
    a, bg, fg, cache = cached_case(1.5, 5)
    p, sel, searched = classify_with_cache(a, bg, fg, cache, CacheThreshold(2.0), MixConfig(), GRID)
    assert searched
    assert sel.index == 0 and cache.index[8, 8] == 0
    full = select_variances(a, bg, GRID)
    assert p == pytest.approx(full.score / (full.score + 5e-7), rel=1e-12)


def test_foreground_dominant_ratio_skips_search():
    # the symmetric side of the test: S_F > tau * S_B also trusts the cache
    a, bg, fg, cache = cached_case(0.2, 5)
    _, _, searched = classify_with_cache(a, bg, fg, cache, CacheThreshold(2.0), MixConfig(), GRID)
    assert not searched


def test_invalid_cache_always_searches():
    a, bg, fg, cache = cached_case(5.0, 5)
    cache.invalidate()
    _, sel, searched = classify_with_cache(a, bg, fg, cache, CacheThreshold(2.0), MixConfig(), GRID)
    assert searched and sel.index == 0 and cache.valid[8, 8]


def test_threshold_must_exceed_one():
    with pytest.raises(ValueError):
        CacheThreshold(1.0)


def frame_pair(seed=21):
    rng = np.random.default_rng(seed)
    feats, bg = random_scene(rng, 16, 16, noise=3.0)
    _, fg = random_scene(rng, 16, 16, noise=3.0)
    return feats, bg, fg


def test_infinite_threshold_equals_full_search():
    feats, bg, fg = frame_pair()
    full = score_frame(feats, bg, fg, GRID, MixConfig(), "vks")
    cache = VarianceCache.empty(16, 16)
    for _ in range(3):
        cached = score_frame(feats, bg, fg, GRID, MixConfig(), "vks-cached", cache, math.inf)
        np.testing.assert_array_equal(cached.p_bg, full.p_bg)
        np.testing.assert_array_equal(cached.chosen, full.chosen)
        assert cached.searched.all()


def test_first_cached_frame_searches_everywhere():
    feats, bg, fg = frame_pair()
    out = score_frame(feats, bg, fg, GRID, MixConfig(), "vks-cached", VarianceCache.empty(16, 16), 2.0)
    assert out.searched.all()


def test_threshold_near_one_rarely_searches_once_cached():
    feats, bg, fg = frame_pair()
    cache = VarianceCache.empty(16, 16)
    score_frame(feats, bg, fg, GRID, MixConfig(), "vks-cached", cache, 1.0 + 1e-9)
    again = score_frame(feats, bg, fg, GRID, MixConfig(), "vks-cached", cache, 1.0 + 1e-9)
    assert again.searched.mean() < 0.01


def test_frame_scores_agree_with_single_pixel_path():
    feats, bg, fg = frame_pair(22)
    cache = VarianceCache.empty(16, 16)
    frame = score_frame(feats, bg, fg, GRID, MixConfig(), "vks-cached", cache, 2.0)
    frame2 = score_frame(feats, bg, fg, GRID, MixConfig(), "vks-cached", cache, 2.0)
    pcache = VarianceCache(frame.chosen.copy(), np.ones((16, 16), dtype=bool))
    for y in range(0, 16, 3):
        for x in range(0, 16, 3):
            p, sel, searched = classify_with_cache(feats.vector(x, y), bg, fg, pcache, CacheThreshold(2.0), MixConfig(), GRID)
            assert p == pytest.approx(frame2.p_bg[y, x], rel=1e-9, abs=1e-300)
            assert searched == frame2.searched[y, x]
            assert sel.index == frame2.chosen[y, x]


def test_uniform_requires_singleton():
    feats, bg, fg = frame_pair()
    with pytest.raises(ValueError):
        score_frame(feats, bg, fg, GRID, MixConfig(), "uniform")
    out = score_frame(feats, bg, fg, GRID.singleton(0.25, 1.25), MixConfig(), "uniform")
    assert not out.searched.any()
    with pytest.raises(ValueError):
        score_frame(feats, bg, fg, GRID, MixConfig(), "bogus")


def test_vks_background_score_dominates_every_uniform_pair():
    feats, bg, fg = frame_pair(23)
    full = score_frame(feats, bg, fg, GRID, MixConfig(), "vks")
    for sd in GRID.spatial:
        for c in GRID.rgb:
            uni = score_frame(feats, bg, fg, GRID.singleton(sd, c), MixConfig(), "uniform")
            assert np.all(full.s_b >= uni.s_b)
            assert np.all(full.p_bg >= uni.p_bg)
