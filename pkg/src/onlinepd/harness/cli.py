"""Command line entry point.

Frames are produced on a separate thread and handed to the solver through
a bounded queue; the consumer alone computes metrics and writes files.
"""
from __future__ import annotations

import argparse
import os
import queue
import sys
import threading
from dataclasses import fields, replace

import numpy as np

from ..steprules import InfeasibleStepsError
from .config import MODES, ConfigError, ExperimentConfig, load_config, snapshot
from .experiments import build_scene, build_solver
from .imageio import save_image
from .metrics import psnr, ssim

OUTDIR_ENV = "ONLINEPD_OUTDIR"
HEADER = "k,objective,psnr,ssim,psnr_data,ssim_data,pred_residual,ms"
QUEUE_DEPTH = 4

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4

_DONE = object()


def _fmt(v):
    return repr(float(v))


def _producer(frames, q, stop, errors):
    try:
        for f in frames:
            while not stop.is_set():
                try:
                    q.put(f, timeout=0.1)
                    break
                except queue.Full:
                    continue
            if stop.is_set():
                return
    except Exception as e:  # surfaced on the consumer thread
        errors.append(e)
    finally:
        q.put(_DONE)


def run_solver(cfg: ExperimentConfig, outdir, log=print):
    """Run an online experiment, writing ``metrics.csv`` and frame dumps to ``outdir``."""
    solver = build_solver(cfg)
    scene = build_scene(cfg)
    os.makedirs(os.path.join(outdir, "frames"), exist_ok=True)
    dumps = set(cfg.dumps)
    q = queue.Queue(maxsize=QUEUE_DEPTH)
    stop = threading.Event()
    errors = []
    from ..flow import generate_scene

    t = threading.Thread(target=_producer, args=(generate_scene(scene, cfg.N), q, stop, errors), daemon=True)
    t.start()
    rows = 0
    try:
        with open(os.path.join(outdir, "metrics.csv"), "w", encoding="ascii", newline="\n") as fh:
            fh.write(HEADER + "\n")
            while True:
                f = q.get()
                if f is _DONE:
                    break
                x, tr = solver.push(f)
                row = (
                    tr.k,
                    _fmt(tr.objective),
                    _fmt(psnr(x, f.clean)),
                    _fmt(ssim(x, f.clean)),
                    _fmt(psnr(f.noisy, f.clean)),
                    _fmt(ssim(f.noisy, f.clean)),
                    _fmt(tr.pred_residual),
                    _fmt(tr.ms),
                )
                fh.write(",".join(str(v) for v in row) + "\n")
                rows += 1
                if tr.k in dumps:
                    save_image(os.path.join(outdir, "frames", f"x_{tr.k:05d}.pgm"), x)
                    save_image(os.path.join(outdir, "frames", f"b_{tr.k:05d}.pgm"), f.noisy)
    finally:
        stop.set()
        t.join()
    if errors:
        raise errors[0]
    log(f"{cfg.mode}: {rows} frames, mean step {solver.total_ms / max(rows, 1):.2f} ms")
    return rows


def run_diagnostics(cfg: ExperimentConfig, outdir, log=print):
    """Desk-scale regret certificates, written to ``certificates.txt``."""
    from ..diagnostics import (
        ScalarTrackingProblem,
        SmallSaddleProblem,
        pofb_ledger,
        pofb_regret_certificate,
        popd_ledger,
        popd_regret_certificate,
    )
    from ..steprules import FbStepConfig, constant_steps

    rng = np.random.default_rng(cfg.seed)
    lines = []
    fb = FbStepConfig(tau=0.4, zeta=0.8, L=1.0, gammaF=1.0, Lambda=1.2)
    n = 50
    s = 0.5 * rng.standard_normal(n)
    xbar = np.concatenate([[0.0], np.cumsum(s)])
    e = 0.2 * rng.standard_normal(n)
    prob = ScalarTrackingProblem([xbar[k : k + 1] for k in range(1, n + 1)], [np.array([s[k] + e[k]]) for k in range(n)])
    eps = fb.Lambda / (fb.Lambda - 1.0) * e**2 / 2.0
    led = pofb_ledger(prob, fb.tau, np.array([1.0]), [[xbar[k : k + 1] for k in range(n + 1)]], eps)
    lines.append(f"pofb tracking: {pofb_regret_certificate(led, fb)}")
    K = 0.5 * rng.standard_normal((8, 8))
    p = SmallSaddleProblem(K, rng.standard_normal(8), alpha=0.5)
    steps = constant_steps(0.2, 0.5, 1.0, 0.0, 1.0, 1.0, p.Knorm_sq)
    U0 = [(rng.standard_normal(8), p.project(rng.standard_normal(8)))]
    led = popd_ledger(p, steps, np.zeros(8), np.zeros(8), U0, N=50)
    lines.append(f"popd static: {popd_regret_certificate(led, steps)}")
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "certificates.txt"), "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    for ln in lines:
        log(ln)
    return len(lines)


def _bool_flag(s):
    v = s.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {s!r}")


def build_parser():
    ap = argparse.ArgumentParser(prog="onlinepd", description="Online TV video denoising experiments.")
    ap.add_argument("--config", help="config file with [experiment], [scene], ... sections")
    ap.add_argument("--mode", choices=MODES)
    for f in fields(ExperimentConfig):
        if f.name == "mode":
            continue
        flag = "--" + f.name.replace("_", "-")
        if f.name == "dumps":
            ap.add_argument(flag, type=int, nargs="*", help="frame indices to dump")
        elif f.type == "bool":
            ap.add_argument(flag, type=_bool_flag, metavar="BOOL")
        elif f.type == "int":
            ap.add_argument(flag, type=int)
        elif f.type == "str":
            ap.add_argument(flag)
        else:
            ap.add_argument(flag, type=float)
    return ap


def resolve_config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = {}
    for f in fields(ExperimentConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            over[f.name] = tuple(v) if f.name == "dumps" else v
    env = os.environ.get(OUTDIR_ENV)
    if env:
        over["outdir"] = env
    return replace(cfg, **over).validate()


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"config error: cannot read {e.filename}: {e.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if cfg.source and not os.path.isfile(cfg.source):
            print(f"I/O error: source image not found: {cfg.source}", file=sys.stderr)
            return EXIT_IO
        os.makedirs(cfg.outdir, exist_ok=True)
        with open(os.path.join(cfg.outdir, "config.ini"), "w", encoding="ascii") as fh:
            fh.write(snapshot(cfg))
        if cfg.mode == "diagnostics":
            run_diagnostics(cfg, cfg.outdir)
        else:
            run_solver(cfg, cfg.outdir)
    except InfeasibleStepsError as e:
        print(f"infeasible steps: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, ValueError) as e:
        if isinstance(e, OSError) or e.__class__.__name__ == "ImageFormatError":
            print(f"I/O error: {e}", file=sys.stderr)
            return EXIT_IO
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
