"""Cell-level feature channels: mean intensity plus an unsigned-gradient
orientation histogram (HOG-style) per cell."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.ndimage import map_coordinates

from .errors import RegionTooSmall

HOG_EPS = 1e-5


@dataclass(frozen=True)
class ChannelStack:
    values: np.ndarray  # cells_h x cells_w x C
    cell_size: int

    @property
    def cells_h(self) -> int:
        return self.values.shape[0]

    @property
    def cells_w(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


def sample_region(image: np.ndarray, region, out_shape) -> np.ndarray:
    """Bilinearly resample ``region`` (x, y, w, h in pixel-edge coordinates)
    onto an ``out_shape`` grid; samples outside the image repeat the border."""
    ho, wo = out_shape
    ys = region.y + (np.arange(ho) + 0.5) * (region.h / ho) - 0.5
    xs = region.x + (np.arange(wo) + 0.5) * (region.w / wo) - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return map_coordinates(image, [yy, xx], order=1, mode="nearest")


def pixel_gradients(patch: np.ndarray):
    """Central differences with replicated borders; returns (magnitude, angle in [0, pi))."""
    P = np.pad(patch, 1, mode="edge")
    gx = P[1:-1, 2:] - P[1:-1, :-2]
    gy = P[2:, 1:-1] - P[:-2, 1:-1]
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), np.pi)
    return mag, ang


def cell_histograms(patch: np.ndarray, cell_size: int, bins: int) -> np.ndarray:
    """Unnormalized orientation histograms, ``(H/cell, W/cell, bins)``.

    Bin ``b`` is centered at ``b * pi / bins``; each pixel's magnitude is
    split linearly between the two nearest bins (circularly).
    """
    mag, ang = pixel_gradients(patch)
    t = ang * (bins / np.pi)
    b0 = np.floor(t).astype(int)
    frac = t - b0
    b0 %= bins
    b1 = (b0 + 1) % bins
    H, W = patch.shape
    ch, cw = H // cell_size, W // cell_size
    rows, cols = np.indices((ch * cell_size, cw * cell_size))
    cell = (rows // cell_size) * cw + cols // cell_size
    keep = (slice(0, ch * cell_size), slice(0, cw * cell_size))
    size = ch * cw * bins
    hist = np.bincount((cell * bins + b0[keep]).ravel(), ((1.0 - frac) * mag)[keep].ravel(), size)
    hist += np.bincount((cell * bins + b1[keep]).ravel(), (frac * mag)[keep].ravel(), size)
    return hist.reshape(ch, cw, bins)


def block_normalize(hist: np.ndarray, eps: float = HOG_EPS) -> np.ndarray:
    """Average of the four 2x2-block L2 normalizations covering each cell."""
    energy = np.pad(np.sum(hist ** 2, axis=2), 1, mode="edge")
    blocks = energy[:-1, :-1] + energy[1:, :-1] + energy[:-1, 1:] + energy[1:, 1:]
    inv = 1.0 / np.sqrt(blocks + eps ** 2)
    # cell (i, j) sits in blocks (i + di, j + dj), di, dj in {0, 1}
    scale = 0.25 * (inv[:-1, :-1] + inv[1:, :-1] + inv[:-1, 1:] + inv[1:, 1:])
    return hist * scale[:, :, None]


def cell_means(patch: np.ndarray, cell_size: int) -> np.ndarray:
    H, W = patch.shape
    ch, cw = H // cell_size, W // cell_size
    p = patch[: ch * cell_size, : cw * cell_size]
    return p.reshape(ch, cell_size, cw, cell_size).mean(axis=(1, 3))


def _overlap_area(region, shape) -> float:
    H, W = shape
    ow = min(region.x + region.w, W) - max(region.x, 0.0)
    oh = min(region.y + region.h, H) - max(region.y, 0.0)
    return max(ow, 0.0) * max(oh, 0.0)


def extract_channels(frame, region, cell_size: int = 4, bins: int = 9,
                     out_size: Optional[Sequence[int]] = None,
                     extra: Sequence[Callable] = ()) -> ChannelStack:
    """Channel stack for ``region`` of ``frame``.

    Channel 0 is the cell-averaged intensity; channels ``1..bins`` are the
    block-normalized orientation histograms. ``out_size`` (height, width in
    pixels) resamples the region first; by default its own pixel size is used,
    truncated to whole cells. Each callable in ``extra`` maps
    ``(patch, cell_size)`` to an ``(cells_h, cells_w, k)`` array appended as
    further channels.
    """
    image = getattr(frame, "pixels", frame)
    image = np.asarray(image, dtype=float)
    if _overlap_area(region, image.shape) < cell_size ** 2:
        raise RegionTooSmall(f"region {region} covers less than one {cell_size}x{cell_size} cell of the frame")
    if out_size is None:
        out_size = (int(round(region.h)) // cell_size * cell_size,
                    int(round(region.w)) // cell_size * cell_size)
    ho, wo = int(out_size[0]), int(out_size[1])
    if ho < cell_size or wo < cell_size:
        raise RegionTooSmall(f"output size {ho}x{wo} is smaller than one cell")
    patch = sample_region(image, region, (ho, wo))
    chans = [cell_means(patch, cell_size)[:, :, None],
             block_normalize(cell_histograms(patch, cell_size, bins))]
    for fn in extra:
        chans.append(np.asarray(fn(patch, cell_size), dtype=float))
    return ChannelStack(np.concatenate(chans, axis=2), cell_size)
