"""Command-line front end: ``track``, ``synth`` and ``bench-solver``.

Exit codes: 0 on success, 2 on bad input (files, flags, configuration),
3 on a numerical failure inside a solver.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import config as run_config
from . import io
from .errors import InputError, NumericalError
from .metrics import SUCCESS_THRESHOLDS, precision_curve, success_curve
from .objective import WeightConfig, evaluate_loss, random_problem, weighted_mse
from .solvers import MODES, SolverConfig, joint_minimizer, run
from .synth import synth_generate
from .tracker import track_sequence


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def cmd_track(args) -> int:
    cfg = run_config.load(args.config) if args.config else run_config.RunConfig()
    frames, gt = io.load_sequence(args.seq)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = track_sequence(frames, gt[0], cfg.tracker, cfg.weights, cfg.solver)
    runtime = time.perf_counter() - t0
    io.write_boxes(out / io.RESULTS, result.boxes)
    report = io.MetricsReport.compute(result.boxes, gt, runtime)
    io.write_metrics(out, report)
    thr = np.arange(51)
    _write_csv(out / "precision_curve.csv", ["threshold_px", "precision"],
               [(int(t), f"{p:.6f}") for t, p in zip(thr, precision_curve(result.boxes, gt, thr))])
    _write_csv(out / "success_curve.csv", ["iou_threshold", "success"],
               [(f"{t:.2f}", f"{s:.6f}") for t, s in zip(SUCCESS_THRESHOLDS, success_curve(result.boxes, gt))])
    print(f"{Path(args.seq).name}: frames={len(frames)} precision@20={report.precision_at_20:.3f} "
          f"auc={report.success_auc:.3f} mean_ce={report.mean_center_error:.2f}px "
          f"mean_iou={report.mean_iou:.3f} runtime={runtime:.2f}s fps={report.fps:.1f}")
    return 0


def cmd_synth(args) -> int:
    frames, boxes = synth_generate(args.preset, args.frames, args.seed)
    io.save_sequence(args.out, frames, boxes)
    print(f"wrote {len(frames)} frames of preset '{args.preset}' to {args.out}")
    return 0


def cmd_bench_solver(args) -> int:
    weights = run_config.load(args.config).weights if args.config else WeightConfig.consistent()
    p = random_problem(args.n, args.channels, args.seed, weights)
    cfg = SolverConfig(max_iter=args.max_iter, mode=args.mode)
    rep = run(p, cfg)
    st = rep.final_state
    w_ref, _, _ = joint_minimizer(p)
    mse = weighted_mse(st.w, w_ref)
    coupling = float(np.linalg.norm(st.w - st.u))
    print(f"mode={args.mode} iterations={rep.iterations} converged={str(rep.converged).lower()} "
          f"loss={evaluate_loss(p, st):.10g} coupling={coupling:.3e} mse={mse:.3e}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "loss_history.csv", ["iteration", "loss", "coupling", "rho"],
               [(k + 1, repr(l), repr(c), repr(r)) for k, (l, c, r) in
                enumerate(zip(rep.loss_history, rep.coupling_history, rep.rho_history))])
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tikcf", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("track", help="track one sequence directory and score it")
    t.add_argument("--seq", required=True, help="directory with NNNN.pgm frames and groundtruth.txt")
    t.add_argument("--config", help="INI run configuration (defaults if omitted)")
    t.add_argument("--out", required=True, help="output directory")
    t.set_defaults(func=cmd_track)

    s = sub.add_parser("synth", help="generate a synthetic sequence directory")
    s.add_argument("--preset", required=True, help="clean | occlusion | clutter | fast-motion")
    s.add_argument("--frames", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    b = sub.add_parser("bench-solver", help="run an optimizer on a seeded random problem")
    b.add_argument("--n", type=int, required=True, help="unknowns")
    b.add_argument("--channels", type=int, required=True, help="data terms")
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("--mode", choices=MODES, default="online")
    b.add_argument("--max-iter", type=int, default=200)
    b.add_argument("--config", help="take weights from this INI file instead of the consistent preset")
    b.add_argument("--out", default=".", help="directory for loss_history.csv")
    b.set_defaults(func=cmd_bench_solver)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
