"""Correlation-filter tracking pipeline.

Filters are stored as 2-D DFTs of spatial cell-domain filters ``h_c``; the
response to features ``z`` is the circular cross-correlation
``r[t] = sum_c sum_x h_c[x] z_c[x + t]``, i.e. ``ifft2(sum_c conj(H_c) Z_c)``.
Training solves, for every channel and frequency bin independently, the
scalar problem in ``g = conj(H)`` with data operator ``X`` (the masked
training features) and target ``Y`` (the label spectrum).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyMask, EmptySequence, InputError
from .features import ChannelStack, extract_channels
from .objective import WeightConfig
from .solvers import DiagonalProblem, SolverConfig, run_online_optimizer

MASK_MODES = ("feature", "support", "off")


@dataclass(frozen=True)
class Frame:
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim != 2:
            raise InputError(f"frame must be 2-D, got shape {px.shape}")
        if px.shape[0] < 16 or px.shape[1] < 16:
            raise InputError(f"frame must be at least 16x16, got {px.shape[1]}x{px.shape[0]}")
        if px.size and (px.min() < 0.0 or px.max() > 1.0):
            raise InputError("frame intensities must lie in [0, 1]")
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box; ``(x, y)`` is the top-left corner in pixels (0-based)."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise InputError(f"box extent must be positive, got w={self.w}, h={self.h}")

    @property
    def center(self):
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @classmethod
    def from_center(cls, cx, cy, w, h) -> "BoundingBox":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    def as_tuple(self):
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class TrackerConfig:
    cell_size: int = 4
    bins: int = 9
    padding: float = 2.5
    sigma_factor: float = 0.1
    learning_rate: float = 0.012
    inflation: float = 1.2
    scales: tuple = (0.985, 1.0, 1.015)
    scale_penalty: float = 0.99
    mask_mode: str = "feature"
    cosine_window: bool = True
    subpixel: bool = True

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        if self.mask_mode not in MASK_MODES:
            raise InputError(f"mask_mode must be one of {MASK_MODES}, got {self.mask_mode!r}")
        if not 0.0 <= self.learning_rate <= 1.0:
            raise InputError("learning_rate must lie in [0, 1]")
        if self.cell_size < 1 or self.bins < 1:
            raise InputError("cell_size and bins must be positive")
        if self.inflation < 1.0 or self.padding < 1.0 or self.sigma_factor <= 0:
            raise InputError("inflation and padding must be >= 1, sigma_factor > 0")
        if not self.scales or min(self.scales) <= 0:
            raise InputError("scales must be positive")


@dataclass
class TrackState:
    box: BoundingBox
    filters: Optional[np.ndarray] = None        # model used by detect, (H, W, C) complex
    mask: Optional[np.ndarray] = None
    prior_filters: Optional[np.ndarray] = None
    learning_rate: float = 0.012
    weights: WeightConfig = field(default_factory=WeightConfig)
    scale: float = 1.0
    solution: Optional[np.ndarray] = None       # last raw solver output
    mask_mode: str = "feature"
    report: object = None


@dataclass
class SequenceResult:
    boxes: List[BoundingBox]
    scores: List[float]


def gaussian_label(cells_h: int, cells_w: int, sigma_factor: float, target_cells) -> np.ndarray:
    """Circularly shifted Gaussian with its unit peak at index (0, 0).

    ``sigma = sigma_factor * sqrt(target_h * target_w)`` in cells.
    """
    if sigma_factor <= 0:
        raise InputError("sigma_factor must be positive")
    sigma = sigma_factor * math.sqrt(target_cells[0] * target_cells[1])
    di = (np.arange(cells_h) + cells_h // 2) % cells_h - cells_h // 2
    dj = (np.arange(cells_w) + cells_w // 2) % cells_w - cells_w // 2
    return np.exp(-0.5 * (di[:, None] ** 2 + dj[None, :] ** 2) / sigma ** 2)


def build_adaptive_mask(box: BoundingBox, search_region: BoundingBox, cell_size: float,
                        inflation: float = 1.2, grid=None) -> np.ndarray:
    """Binary cell mask: 1 where the cell center lies in the inflated box.

    ``cell_size`` is the cell pitch in frame pixels; ``grid`` (rows, cols)
    defaults to the number of whole cells in ``search_region``.
    """
    if inflation < 1.0:
        raise InputError("inflation must be >= 1")
    if grid is None:
        grid = (int(round(search_region.h / cell_size)), int(round(search_region.w / cell_size)))
    rows, cols = grid
    pitch_y, pitch_x = search_region.h / rows, search_region.w / cols
    cx, cy = box.center
    hw, hh = 0.5 * inflation * box.w, 0.5 * inflation * box.h
    ys = search_region.y + (np.arange(rows) + 0.5) * pitch_y
    xs = search_region.x + (np.arange(cols) + 0.5) * pitch_x
    inside_y = (ys >= cy - hh) & (ys <= cy + hh)
    inside_x = (xs >= cx - hw) & (xs <= cx + hw)
    mask = (inside_y[:, None] & inside_x[None, :]).astype(float)
    if not mask.any():
        raise EmptyMask(f"no cell center of {search_region} falls inside {box}")
    return mask


def _support_projector(mask):
    def project(u):
        h = np.real(np.fft.ifft2(np.conj(u), axes=(0, 1))) * mask[:, :, None]
        return np.conj(np.fft.fft2(h, axes=(0, 1)))
    return project


def train_filter(st: TrackState, feats: ChannelStack, label: np.ndarray,
                 cfg: SolverConfig = SolverConfig(max_iter=50)) -> TrackState:
    """Train per-channel filters on one sample and blend them into the model.

    In ``feature`` mask mode the features are multiplied by ``st.mask``
    first; in ``support`` mode the auxiliary variable is projected onto
    filters supported on the mask and that projection is kept. The new
    filters ``F`` update the model as ``(1 - lr) * prior + lr * F`` (the
    first call adopts ``F``).
    """
    values = feats.values
    if values.shape[:2] != label.shape:
        raise DimensionMismatch(f"features {values.shape[:2]} do not match label {label.shape}")
    mask = st.mask
    if mask is not None and mask.shape != label.shape:
        raise DimensionMismatch(f"mask {mask.shape} does not match label {label.shape}")
    if mask is not None and st.mask_mode == "feature":
        values = values * mask[:, :, None]
    C = values.shape[2]
    X = np.fft.fft2(values, axes=(0, 1))
    Y = np.broadcast_to(np.fft.fft2(label)[:, :, None], X.shape)
    prior = st.prior_filters
    if prior is not None and prior.shape != X.shape:
        raise DimensionMismatch(f"prior filters {prior.shape} do not match features {X.shape}")
    g0 = np.zeros(X.shape, dtype=complex) if prior is None else np.conj(prior)
    wc = st.weights
    alpha = np.array([wc.data_weight(c) for c in range(C)])[None, None, :]
    dp = DiagonalProblem(a=X, b=Y, w0=g0, weights=wc, data_weight=alpha)
    project = None
    if mask is not None and st.mask_mode == "support":
        project = _support_projector(mask)
    report = run_online_optimizer(dp, cfg, project=project)
    g = report.final_state.u if project is not None else report.final_state.w
    new = np.conj(g)
    if prior is None:
        model = new
    else:
        lr = st.learning_rate
        model = (1.0 - lr) * prior + lr * new
    return replace(st, filters=model, prior_filters=model, solution=new, report=report)


def detect(st: TrackState, feats: ChannelStack):
    """Response map, peak ``(row, col)`` (smallest row, then column, on ties)
    and peak value."""
    if st.filters is None:
        raise InputError("tracker has no trained filters")
    if feats.values.shape != st.filters.shape:
        raise DimensionMismatch(f"features {feats.values.shape} do not match filters {st.filters.shape}")
    Z = np.fft.fft2(feats.values, axes=(0, 1))
    response = np.real(np.fft.ifft2(np.sum(np.conj(st.filters) * Z, axis=2)))
    idx = int(np.argmax(response))
    peak = divmod(idx, response.shape[1])
    return response, peak, float(response[peak])


def signed_shift(peak, shape):
    """Map a circular peak index to a signed displacement."""
    return tuple(p - n if p > n // 2 else p for p, n in zip(peak, shape))


def _parabolic(prev, mid, nxt) -> float:
    den = prev - 2.0 * mid + nxt
    if den >= 0:
        return 0.0
    return float(np.clip(0.5 * (prev - nxt) / den, -0.5, 0.5))


def refine_peak(response: np.ndarray, peak):
    """Sub-cell peak offset from 1-D parabolic fits along rows and columns."""
    H, W = response.shape
    r, c = peak
    dy = _parabolic(response[(r - 1) % H, c], response[r, c], response[(r + 1) % H, c])
    dx = _parabolic(response[r, (c - 1) % W], response[r, c], response[r, (c + 1) % W])
    return dy, dx


class _Pipeline:
    """Geometry and feature plumbing shared by every frame of one sequence."""

    def __init__(self, init: BoundingBox, params: TrackerConfig):
        self.params = params
        cs = params.cell_size
        self.base_w, self.base_h = init.w, init.h
        self.win_w = params.padding * init.w
        self.win_h = params.padding * init.h
        self.grid = (max(2, int(round(self.win_h / cs))), max(2, int(round(self.win_w / cs))))
        self.out_size = (self.grid[0] * cs, self.grid[1] * cs)
        self.label = gaussian_label(self.grid[0], self.grid[1], params.sigma_factor,
                                    (init.h / cs, init.w / cs))
        if params.cosine_window:
            self.window = np.outer(np.hanning(self.grid[0] + 2)[1:-1], np.hanning(self.grid[1] + 2)[1:-1])
        else:
            self.window = np.ones(self.grid)

    def region(self, center, scale) -> BoundingBox:
        return BoundingBox.from_center(center[0], center[1], self.win_w * scale, self.win_h * scale)

    def features(self, frame: Frame, region: BoundingBox) -> ChannelStack:
        fs = extract_channels(frame, region, self.params.cell_size, self.params.bins, self.out_size)
        vals = fs.values.copy()
        vals[:, :, 0] -= vals[:, :, 0].mean()
        return ChannelStack(vals * self.window[:, :, None], fs.cell_size)

    def mask(self, box: BoundingBox, region: BoundingBox):
        if self.params.mask_mode == "off":
            return None
        return build_adaptive_mask(box, region, region.w / self.grid[1], self.params.inflation, self.grid)


def track_sequence(frames: Sequence, init: BoundingBox, params: Optional[TrackerConfig] = None,
                   weights: Optional[WeightConfig] = None,
                   solver: Optional[SolverConfig] = None) -> SequenceResult:
    """One-pass tracking: train on ``init`` in frame 0, then detect, move,
    rebuild the mask and retrain on every later frame."""
    if len(frames) == 0:
        raise EmptySequence("no frames to track")
    params = params or TrackerConfig()
    weights = weights or WeightConfig()
    solver = solver or SolverConfig(max_iter=50)
    frames = [f if isinstance(f, Frame) else Frame(f) for f in frames]
    f0 = frames[0]
    if not (init.x < f0.width and init.y < f0.height and init.x + init.w > 0 and init.y + init.h > 0):
        raise InputError(f"initial box {init} lies outside the first frame")

    pipe = _Pipeline(init, params)
    center = init.center
    scale = 1.0
    region = pipe.region(center, scale)
    st = TrackState(box=init, learning_rate=1.0, weights=weights, mask_mode=params.mask_mode)
    st.mask = pipe.mask(init, region)
    st = train_filter(st, pipe.features(f0, region), pipe.label, solver)
    st.learning_rate = params.learning_rate
    boxes, scores = [init], [float("nan")]

    for frame in frames[1:]:
        best = None
        for s in params.scales:
            reg = pipe.region(center, scale * s)
            response, peak, score = detect(st, pipe.features(frame, reg))
            if s != 1.0:
                score *= params.scale_penalty
            if best is None or score > best[0]:
                best = (score, s, reg, response, peak)
        score, s, reg, response, peak = best
        dy, dx = signed_shift(peak, response.shape)
        if params.subpixel:
            ry, rx = refine_peak(response, peak)
            dy, dx = dy + ry, dx + rx
        pitch_x, pitch_y = reg.w / pipe.grid[1], reg.h / pipe.grid[0]
        center = (center[0] + dx * pitch_x, center[1] + dy * pitch_y)
        scale *= s
        box = BoundingBox.from_center(center[0], center[1], pipe.base_w * scale, pipe.base_h * scale)
        region = pipe.region(center, scale)
        st.box, st.scale = box, scale
        st.mask = pipe.mask(box, region)
        st = train_filter(st, pipe.features(frame, region), pipe.label, solver)
        boxes.append(box)
        scores.append(score)
    return SequenceResult(boxes, scores)
