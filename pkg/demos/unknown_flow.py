"""Estimate the camera shake online while denoising.

The displacement between frames is fitted by a windowed Horn-Schunck model
with constant-in-space shifts. The script prints the estimated and true
cumulative position, which shows how the linearised estimate drifts.

    python demos/unknown_flow.py [T]
"""
import sys

import numpy as np

from onlinepd.harness import ExperimentConfig, psnr
from onlinepd.harness.experiments import build_solver, frame_stream

T = float(sys.argv[1]) if len(sys.argv) > 1 else 1.0
cfg = ExperimentConfig(mode="popd-unknown", N=400, noise=0.3, alpha=0.2, T=T, compute_objective=False)
solver = build_solver(cfg)

est, true, shifts = [], [], []
print("frame   estimated position     true position     psnr(x) psnr(b)")
for f in frame_stream(cfg):
    x, tr = solver.push(f)
    est.append(solver.problem.estimated_position.copy())
    true.append(f.position.copy())
    shifts.append((solver.problem.d.copy(), f.true_shift))
    if tr.k % 50 == 0:
        e, t = est[-1], true[-1]
        print(f"{tr.k:5d}  ({e[0]:7.2f}, {e[1]:7.2f})  ({t[0]:7.2f}, {t[1]:7.2f})  {psnr(x, f.clean):6.2f}  {psnr(f.noisy, f.clean):6.2f}")

d = np.array([s[0] for s in shifts])
u = np.array([s[1] for s in shifts])
print(f"per-frame shift regression slope {np.sum(d * u) / np.sum(u * u):.3f} (1 is unbiased)")
print(f"mean absolute position error {np.mean(np.abs(np.array(est) - np.array(true))):.2f} px")
