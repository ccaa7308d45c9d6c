"""Regret certificates and gap checks on small instances.

Prints the forward-backward and primal-dual regret inequalities, the
support function of a ball lens against a sampled supremum, and the local
strong convexity check of the ball indicator in both regimes.

    python demos/certificates.py
"""
import tempfile

import numpy as np

from onlinepd.diagnostics import (
    SmallSaddleProblem,
    ball_local_strong_convexity_check,
    popd_ledger,
    popd_regret_certificate,
    tilde_g_ball_closed_form,
)
from onlinepd.harness import ExperimentConfig
from onlinepd.harness.cli import run_diagnostics
from onlinepd.steprules import constant_steps

rng = np.random.default_rng(0)

# the two certificates the CLI writes
with tempfile.TemporaryDirectory() as tmp:
    run_diagnostics(ExperimentConfig(), tmp)

# primal-dual certificate as the horizon grows
K = 0.5 * rng.standard_normal((8, 8))
p = SmallSaddleProblem(K, rng.standard_normal(8), alpha=0.5)
steps = constant_steps(0.2, 0.5, 1.0, 0.0, 1.0, 1.0, p.Knorm_sq)
U0 = [(rng.standard_normal(8), p.project(rng.standard_normal(8)))]
for N in (1, 10, 100):
    print(f"N = {N:3d}: {popd_regret_certificate(popd_ledger(p, steps, np.zeros(8), np.zeros(8), U0, N), steps)}")

# ball lens support function
c, alpha, rho = np.array([0.9, 0.3]), 1.0, 0.6
d = np.array([-0.3, 1.1])
th = np.linspace(0, 2 * np.pi, 400000)
pts = np.vstack([alpha * np.c_[np.cos(th), np.sin(th)], c + rho * np.c_[np.cos(th), np.sin(th)]])
keep = (np.linalg.norm(pts, axis=1) <= alpha) & (np.linalg.norm(pts - c, axis=1) <= rho)
print(f"lens support: closed form {tilde_g_ball_closed_form(d, alpha, c, rho):.8f}, sampled {np.max(pts[keep] @ d):.8f}")

# ball indicator: whole-ball regime holds, the local regime fails next to x on the sphere
x = np.array([1.0, 0.0])
S = rng.uniform(-1, 1, (2000, 2))
S = S[np.linalg.norm(S, axis=1) <= 1]
print("gamma alpha <= |x*|:", f"min margin {ball_local_strong_convexity_check(1.0, 0.5, x, 2 * x, S).min_margin_inside:.3e}")
near = np.array([[np.cos(0.01), np.sin(0.01)]])
rep = ball_local_strong_convexity_check(1.0, 2.0, x, 0.5 * x, near)
print("gamma alpha > |x*|: sphere point at angle 0.01 is in the neighbourhood,", f"margin {rep.margins[0]:.3e}")
