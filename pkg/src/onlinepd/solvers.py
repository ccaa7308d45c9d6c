"""Online forward-backward and primal-dual loops, one step per data frame.

Problems are duck-typed. A primal-dual problem provides

``prox_f(k, z, tau)``, ``prox_gstar(k, z, sigma)``,
``prox_gtilde_star(k, z, sigma_tilde, rho_tilde)``, ``K(k, x)``,
``K_adjoint(k, y)``, ``predict_primal(k, x)``, ``predict_dual(k, y)`` and
``objective(k, x)``.

A forward-backward problem provides ``grad_f(k, z)``, ``prox_g(k, z, tau)``,
``predict(k, x)`` and ``objective(k, x)``. Either kind may define
``observe(k, frame)``, called when frame ``k`` arrives and before the step
that uses it.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .steprules import StepConfig

__all__ = [
    "IterationTrace",
    "pofb_step",
    "popd_step",
    "PofbSolver",
    "PopdSolver",
    "run_online",
]


@dataclass(frozen=True)
class IterationTrace:
    """Per-frame record: the index of the produced iterate, objective, residuals, step time."""

    k: int
    objective: float
    pred_residual: float
    dual_residual: float
    ms: float


def _sqnorm(a):
    a = np.ravel(a)
    return float(a @ a)


def pofb_step(prob, k, x, tau):
    """One forward-backward step from ``x^k`` to ``x^{k+1}``.

    Returns ``(x_next, z)`` where ``z`` is the prediction ``A_k(x^k)``.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    z = prob.predict(k, x)
    x_next = prob.prox_g(k + 1, z - tau * prob.grad_f(k + 1, z), tau)
    return x_next, z


def popd_step(prob, cfg: StepConfig, k, x, y):
    """One primal-dual step from ``(x^k, y^k)`` to ``(x^{k+1}, y^{k+1})``.

    Returns ``(x_next, y_next, xi, upsilon)`` with the primal prediction
    ``xi`` and the dual prediction ``upsilon``.
    """
    xi = prob.predict_primal(k, x)
    upsilon = prob.prox_gtilde_star(
        k + 1,
        prob.predict_dual(k, y) + cfg.sigma_tilde * prob.K(k + 1, xi),
        cfg.sigma_tilde,
        cfg.rho_tilde,
    )
    x_next = prob.prox_f(k + 1, xi - cfg.tau * prob.K_adjoint(k + 1, upsilon), cfg.tau)
    y_next = prob.prox_gstar(k + 1, upsilon + cfg.sigma * prob.K(k + 1, 2.0 * x_next - xi), cfg.sigma)
    return x_next, y_next, xi, upsilon


class _OnlineSolver:
    # shared push-driven bookkeeping

    def __init__(self, problem, compute_objective=True, timing=True):
        self.problem = problem
        self.k = 0
        self.compute_objective = compute_objective
        self.timing = timing
        self.total_ms = 0.0

    def _observe(self, frame):
        obs = getattr(self.problem, "observe", None)
        if obs is not None and frame is not None:
            obs(self.k + 1, frame)

    def _finish(self, x_next, pred_res, dual_res, ms):
        self.k += 1
        obj = float(self.problem.objective(self.k, x_next)) if self.compute_objective else float("nan")
        self.total_ms += ms
        return IterationTrace(k=self.k, objective=obj, pred_residual=pred_res, dual_residual=dual_res, ms=ms)


class PofbSolver(_OnlineSolver):
    """Online forward-backward splitting with constant step ``tau``."""

    def __init__(self, problem, tau, x0, compute_objective=True, timing=True):
        super().__init__(problem, compute_objective, timing)
        if not tau > 0:
            raise ValueError("tau must be positive")
        self.tau = float(tau)
        self.x = np.array(x0, dtype=float)

    def push(self, frame=None):
        """Consume one frame and return ``(x^{k+1}, trace)``."""
        t0 = time.perf_counter()
        self._observe(frame)
        x_next, z = pofb_step(self.problem, self.k, self.x, self.tau)
        ms = (time.perf_counter() - t0) * 1e3 if self.timing else 0.0
        self.x = x_next
        return x_next, self._finish(x_next, _sqnorm(x_next - z), 0.0, ms)


class PopdSolver(_OnlineSolver):
    """Online primal-dual splitting with a fixed step configuration."""

    def __init__(self, problem, cfg: StepConfig, x0, y0=None, compute_objective=True, timing=True):
        super().__init__(problem, compute_objective, timing)
        self.cfg = cfg
        self.x = np.array(x0, dtype=float)
        self.y = np.zeros(self.x.shape + (2,)) if y0 is None else np.array(y0, dtype=float)

    def push(self, frame=None):
        """Consume one frame and return ``(x^{k+1}, trace)``."""
        t0 = time.perf_counter()
        self._observe(frame)
        x_next, y_next, xi, upsilon = popd_step(self.problem, self.cfg, self.k, self.x, self.y)
        ms = (time.perf_counter() - t0) * 1e3 if self.timing else 0.0
        self.x, self.y = x_next, y_next
        return x_next, self._finish(x_next, _sqnorm(x_next - xi), _sqnorm(y_next - upsilon), ms)


def run_online(solver, frames):
    """Drive ``solver`` with a frame iterable, yielding ``(x, trace)`` per frame.

    The generator is lazy: the next frame is pulled only after the previous
    solution has been emitted.
    """
    for frame in frames:
        yield solver.push(frame)
