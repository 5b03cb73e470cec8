"""Seeded synthetic sequences: a bright Gaussian blob bouncing over a
smooth textured background, with optional occlusion, clutter or fast motion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import InputError
from .tracker import BoundingBox, Frame

PRESETS = ("clean", "occlusion", "clutter", "fast-motion")

FRAME_SHAPE = (160, 240)
TARGET_SIZE = 24
BLOB_SIGMA = 6.0
BLOB_AMPLITUDE = 0.5
BACKGROUND_MEAN = 0.3
TEXTURE_STD = 0.04
NOISE_STD = 0.01
OCCLUSION_FRAMES = 10
OCCLUDER_COVER = 0.6
DISTRACTOR_COUNT = 4
DISTRACTOR_AMPLITUDE = 0.3
DISTRACTOR_CLEARANCE = 40.0


@dataclass
class SynthScene:
    frames: List[Frame]
    boxes: List[BoundingBox]
    occluders: List[Optional[BoundingBox]] = field(default_factory=list)
    distractors: List[tuple] = field(default_factory=list)
    background_std: float = 0.0


def _trajectory(rng, n, speed, shape, size):
    """Constant-speed straight motion reflected at the frame borders."""
    H, W = shape
    lo = size / 2.0 + 2.0
    hi_x, hi_y = W - lo, H - lo
    pos = np.array([rng.uniform(lo + 20, hi_x - 20), rng.uniform(lo + 20, hi_y - 20)])
    angle = rng.uniform(0.0, 2.0 * math.pi)
    vel = speed * np.array([math.cos(angle), math.sin(angle)])
    out = np.empty((n, 2))
    for k in range(n):
        out[k] = pos
        pos = pos + vel
        for d, hi in ((0, hi_x), (1, hi_y)):
            if pos[d] < lo:
                pos[d], vel[d] = 2 * lo - pos[d], -vel[d]
            elif pos[d] > hi:
                pos[d], vel[d] = 2 * hi - pos[d], -vel[d]
    return out


def _blob(shape, cx, cy, sigma, amplitude):
    H, W = shape
    yy = np.arange(H)[:, None] + 0.5
    xx = np.arange(W)[None, :] + 0.5
    return amplitude * np.exp(-0.5 * ((xx - cx) ** 2 + (yy - cy) ** 2) / sigma ** 2)


def _texture(rng, shape):
    t = gaussian_filter(rng.standard_normal(shape), 4.0, mode="wrap")
    t = (t - t.mean()) / t.std()
    return BACKGROUND_MEAN + TEXTURE_STD * t


def _place_distractors(rng, traj, shape, count):
    H, W = shape
    spots = []
    for _ in range(2000):
        if len(spots) == count:
            break
        p = np.array([rng.uniform(15, W - 15), rng.uniform(15, H - 15)])
        if np.min(np.hypot(*(traj - p).T)) >= DISTRACTOR_CLEARANCE:
            spots.append((float(p[0]), float(p[1])))
    return spots


def synth_scene(preset: str, frames: int, seed: int) -> SynthScene:
    """Generate a sequence together with its scene metadata."""
    if preset not in PRESETS:
        raise InputError(f"unknown preset {preset!r}; expected one of {PRESETS}")
    if frames < 2:
        raise InputError("a synthetic sequence needs at least 2 frames")
    rng = np.random.default_rng(seed)
    shape, size = FRAME_SHAPE, TARGET_SIZE
    speed = 8.0 if preset == "fast-motion" else 2.0
    traj = _trajectory(rng, frames, speed, shape, size)
    background = _texture(rng, shape)

    distractors = _place_distractors(rng, traj, shape, DISTRACTOR_COUNT) if preset == "clutter" else []
    for cx, cy in distractors:
        background = background + _blob(shape, cx, cy, BLOB_SIGMA, DISTRACTOR_AMPLITUDE)

    occ_start = None
    if preset == "occlusion":
        occ_start = max(1, frames // 2 - OCCLUSION_FRAMES // 2)

    out_frames, boxes, occluders = [], [], []
    for k in range(frames):
        cx, cy = traj[k]
        img = background + _blob(shape, cx, cy, BLOB_SIGMA, BLOB_AMPLITUDE)
        occ = None
        if occ_start is not None and occ_start <= k < occ_start + OCCLUSION_FRAMES:
            # bar riding over the left part of the target
            ox0 = int(round(cx - size / 2.0))
            oy0 = int(round(cy - size / 2.0)) - 4
            ow, oh = int(math.ceil(OCCLUDER_COVER * size)), size + 8
            occ = BoundingBox(ox0, oy0, ow, oh)
            ys = slice(max(oy0, 0), min(oy0 + oh, shape[0]))
            xs = slice(max(ox0, 0), min(ox0 + ow, shape[1]))
            img[ys, xs] = BACKGROUND_MEAN
        img = img + NOISE_STD * rng.standard_normal(shape)
        out_frames.append(Frame(np.clip(img, 0.0, 1.0)))
        boxes.append(BoundingBox.from_center(float(cx), float(cy), size, size))
        occluders.append(occ)
    bg_std = math.sqrt(TEXTURE_STD ** 2 + NOISE_STD ** 2)
    return SynthScene(out_frames, boxes, occluders, distractors, bg_std)


def synth_generate(preset: str, frames: int, seed: int):
    """``(frames, ground_truth_boxes)`` for a preset; deterministic in ``seed``."""
    scene = synth_scene(preset, frames, seed)
    return scene.frames, scene.boxes
