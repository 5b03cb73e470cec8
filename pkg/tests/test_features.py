import math

import numpy as np
import pytest

from tikcf.errors import RegionTooSmall
from tikcf.features import block_normalize, cell_histograms, extract_channels, sample_region
from tikcf.tracker import BoundingBox


def naive_histograms(patch, cell, bins):
    H, W = patch.shape
    out = np.zeros((H // cell, W // cell, bins))
    for y in range(H // cell * cell):
        for x in range(W // cell * cell):
            gx = patch[y, min(x + 1, W - 1)] - patch[y, max(x - 1, 0)]
            gy = patch[min(y + 1, H - 1), x] - patch[max(y - 1, 0), x]
            mag = math.hypot(gx, gy)
            ang = math.atan2(gy, gx) % math.pi
            pos = ang / (math.pi / bins)
            lo = int(math.floor(pos))
            frac = pos - lo
            out[y // cell, x // cell, lo % bins] += (1 - frac) * mag
            out[y // cell, x // cell, (lo + 1) % bins] += frac * mag
    return out


def naive_normalize(hist, eps=1e-5):
    ch, cw, _ = hist.shape
    energy = lambda i, j: float(np.sum(hist[min(max(i, 0), ch - 1), min(max(j, 0), cw - 1)] ** 2))
    out = np.zeros_like(hist)
    for i in range(ch):
        for j in range(cw):
            acc = 0.0
            for bi in (i - 1, i):
                for bj in (j - 1, j):
                    e = sum(energy(bi + di, bj + dj) for di in (0, 1) for dj in (0, 1))
                    acc += 1.0 / math.sqrt(e + eps ** 2)
            out[i, j] = hist[i, j] * acc / 4
    return out


def test_constant_patch():
    img = np.full((40, 40), 0.37)
    fs = extract_channels(img, BoundingBox(4, 4, 32, 32), 4, 9)
    assert fs.values.shape == (8, 8, 10) and fs.channels == 10
    assert np.all(fs.values[:, :, 1:] == 0)
    assert np.allclose(fs.values[:, :, 0], 0.37)


def test_vertical_edge_concentrates_in_horizontal_gradient_bin():
    img = np.zeros((32, 32))
    img[:, 16:] = 1.0
    fs = extract_channels(img, BoundingBox(0, 0, 32, 32), 4, 9)
    hog = fs.values[:, :, 1:]
    energy = hog.sum(axis=(0, 1))
    assert np.argmax(energy) == 0  # bin 0 is centred on a horizontal gradient
    assert energy[0] > 0.99 * energy.sum()


@pytest.mark.parametrize("seed", range(3))
def test_histograms_match_per_pixel_oracle(seed):
    patch = np.random.default_rng(seed).uniform(size=(24, 20))
    assert np.max(np.abs(cell_histograms(patch, 4, 9) - naive_histograms(patch, 4, 9))) < 1e-10


def test_normalization_matches_loop_oracle():
    hist = np.random.default_rng(1).uniform(size=(5, 6, 9))
    assert np.max(np.abs(block_normalize(hist) - naive_normalize(hist))) < 1e-12


def test_channel_value_range():
    img = np.random.default_rng(3).uniform(size=(64, 64))
    fs = extract_channels(img, BoundingBox(10, 10, 40, 40), 4, 9)
    assert np.all(np.isfinite(fs.values))
    assert fs.values[:, :, 1:].min() >= 0 and fs.values[:, :, 1:].max() <= 1.5


def test_sample_region_identity_on_pixel_grid():
    img = np.random.default_rng(0).uniform(size=(20, 20))
    out = sample_region(img, BoundingBox(3, 5, 8, 6), (6, 8))
    assert np.allclose(out, img[5:11, 3:11])


def test_extra_channels_and_out_size():
    img = np.random.default_rng(0).uniform(size=(50, 50))
    extra = lambda patch, c: np.ones((patch.shape[0] // c, patch.shape[1] // c, 2))
    fs = extract_channels(img, BoundingBox(0, 0, 30, 30), 4, 9, out_size=(16, 24), extra=[extra])
    assert fs.values.shape == (4, 6, 12)


def test_region_too_small():
    img = np.zeros((32, 32))
    with pytest.raises(RegionTooSmall):
        extract_channels(img, BoundingBox(31, 31, 10, 10), 4, 9)
    with pytest.raises(RegionTooSmall):
        extract_channels(img, BoundingBox(2, 2, 3, 3), 4, 9)
