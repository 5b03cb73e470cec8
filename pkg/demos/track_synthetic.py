"""Generate each synthetic preset, track it, and score the result."""

import time

from tikcf.metrics import center_error, iou, precision_metric, success_auc
from tikcf.synth import PRESETS, synth_scene
from tikcf.tracker import TrackerConfig, track_sequence

for preset in PRESETS:
    scene = synth_scene(preset, frames=120, seed=1)
    t0 = time.perf_counter()
    result = track_sequence(scene.frames, scene.boxes[0], TrackerConfig())
    elapsed = time.perf_counter() - t0
    err = center_error(result.boxes, scene.boxes)
    print(f"{preset:<12} mean error {err.mean():5.2f}px  P@20 {precision_metric(result.boxes, scene.boxes):.3f}"
          f"  AUC {success_auc(result.boxes, scene.boxes):.3f}"
          f"  final IoU {iou(result.boxes[-1:], scene.boxes[-1:])[0]:.3f}  {len(scene.frames) / elapsed:5.1f} fps")
