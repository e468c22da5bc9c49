import numpy as np
import pytest

from bgsub.features import extract_features
from bgsub.model import ProcessModel


def random_scene(rng, h, w, mode="rgb", n_frames=5, noise=0.5, smooth=True):
    """A query frame and a model whose frames are noisy copies of it."""
    from scipy import ndimage

    base = rng.uniform(30, 220, size=(h, w, 3))
    if smooth:
        base = np.stack([ndimage.gaussian_filter(base[..., c], 1.0) for c in range(3)], -1)
        base = (base - base.mean()) * 3 + 128
        base = np.clip(base, 5, 250)
    feats = extract_features(base, mode)
    n_siltp = feats.codes.shape[-1]
    model = ProcessModel.empty(n_frames, h, w, n_siltp)
    for k in range(n_frames):
        frame = np.clip(base + rng.normal(0, noise, base.shape), 0, 255)
        model.push(extract_features(frame, mode), rng.uniform(0.0, 1.0, size=(h, w)), k)
    return feats, model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
