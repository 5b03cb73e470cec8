"""Sequence directories (binary PGM frames + ground truth) and result files."""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List

import numpy as np

from .errors import SequenceFormatError
from .metrics import center_error, iou, precision_metric, success_auc
from .tracker import BoundingBox, Frame

GROUNDTRUTH = "groundtruth.txt"
RESULTS = "results.txt"
METRICS = "metrics.json"
_FRAME_RE = re.compile(r"^(\d+)\.pgm$")


def _header_tokens(data: bytes, path):
    """First four whitespace-separated header tokens and the raster offset."""
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise SequenceFormatError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos].decode("ascii", "replace"))
    return tokens, pos + 1  # one whitespace byte ends the header


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) PGM, 8- or 16-bit, scaled to [0, 1]."""
    path = Path(path)
    data = path.read_bytes()
    tokens, offset = _header_tokens(data, path)
    if tokens[0] != "P5":
        raise SequenceFormatError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise SequenceFormatError(f"{path}: malformed PGM header {tokens}") from None
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise SequenceFormatError(f"{path}: invalid PGM dimensions or maxval {tokens[1:]}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * dtype.itemsize
    raster = data[offset:offset + need]
    if len(raster) != need:
        raise SequenceFormatError(f"{path}: expected {need} raster bytes, found {len(raster)}")
    img = np.frombuffer(raster, dtype=dtype).reshape(height, width).astype(float)
    return np.clip(img / maxval, 0.0, 1.0)


def write_pgm(path, pixels, bits: int = 8) -> None:
    """Write intensities in [0, 1] as a binary PGM with 8 or 16 bits."""
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    maxval = 255 if bits == 8 else 65535
    px = np.clip(np.asarray(pixels, dtype=float), 0.0, 1.0)
    q = np.rint(px * maxval).astype(">u2" if bits == 16 else "u1")
    h, w = q.shape
    Path(path).write_bytes(b"P5\n%d %d\n%d\n" % (w, h, maxval) + q.tobytes())


def format_box(b: BoundingBox) -> str:
    """One 1-based ``x,y,w,h`` line."""
    return f"{b.x + 1:.4f},{b.y + 1:.4f},{b.w:.4f},{b.h:.4f}"


def parse_boxes(path) -> List[BoundingBox]:
    path = Path(path)
    if not path.is_file():
        raise SequenceFormatError(f"{path}: file not found")
    boxes = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        parts = [p for p in re.split(r"[,\s]+", line) if p]
        try:
            x, y, w, h = (float(p) for p in parts)
            boxes.append(BoundingBox(x - 1.0, y - 1.0, w, h))
        except (ValueError, TypeError) as exc:
            raise SequenceFormatError(f"{path}:{lineno}: expected 'x,y,w,h', got {line!r}") from exc
    return boxes


def write_boxes(path, boxes) -> None:
    Path(path).write_text("".join(format_box(b) + "\n" for b in boxes))


def frame_paths(seq_dir) -> List[Path]:
    seq_dir = Path(seq_dir)
    if not seq_dir.is_dir():
        raise SequenceFormatError(f"{seq_dir}: not a directory")
    found = [(int(m.group(1)), p) for p in seq_dir.iterdir() if (m := _FRAME_RE.match(p.name))]
    if not found:
        raise SequenceFormatError(f"{seq_dir}: no numbered .pgm frames")
    return [p for _, p in sorted(found)]


def load_sequence(seq_dir):
    """``(frames, ground_truth)``; the box count must match the frame count."""
    seq_dir = Path(seq_dir)
    paths = frame_paths(seq_dir)
    gt = parse_boxes(seq_dir / GROUNDTRUTH)
    if len(gt) != len(paths):
        raise SequenceFormatError(f"{seq_dir / GROUNDTRUTH}: {len(gt)} boxes for {len(paths)} frames")
    frames = []
    for p in paths:
        try:
            frames.append(Frame(read_pgm(p)))
        except SequenceFormatError:
            raise
        except ValueError as exc:
            raise SequenceFormatError(f"{p}: {exc}") from exc
    return frames, gt


def save_sequence(out_dir, frames, boxes, bits: int = 8) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(len(frames))))
    for k, f in enumerate(frames, 1):
        write_pgm(out / f"{k:0{width}d}.pgm", getattr(f, "pixels", f), bits)
    write_boxes(out / GROUNDTRUTH, boxes)


@dataclass
class MetricsReport:
    precision_at_20: float
    success_auc: float
    mean_center_error: float
    mean_iou: float
    runtime_seconds: float
    fps: float
    center_errors: list
    ious: list

    @classmethod
    def compute(cls, pred, gt, runtime: float) -> "MetricsReport":
        ce, ov = center_error(pred, gt), iou(pred, gt)
        return cls(precision_metric(pred, gt, 20.0), success_auc(pred, gt),
                   float(ce.mean()), float(ov.mean()), float(runtime),
                   len(pred) / runtime if runtime > 0 else float("inf"),
                   [float(x) for x in ce], [float(x) for x in ov])

    def accuracy_dict(self) -> dict:
        """Everything except wall-clock fields, so reruns compare byte for byte."""
        d = asdict(self)
        d.pop("runtime_seconds")
        d.pop("fps")
        return d


def write_metrics(out_dir, report: MetricsReport) -> None:
    out = Path(out_dir)
    (out / METRICS).write_text(json.dumps(report.accuracy_dict(), indent=2) + "\n")
    timing = {"runtime_seconds": report.runtime_seconds, "fps": report.fps}
    (out / "timing.json").write_text(json.dumps(timing, indent=2) + "\n")
