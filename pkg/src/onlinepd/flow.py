"""Optical-flow denoising problems and synthetic moving scenes.

Frames are numbered from 1. Frame ``k`` carries the noisy image ``b^k``,
its clean version, and the shift ``u`` with ``b^k(p) = b^{k-1}(p - u)``
(true and measured). Solvers consume frame ``k`` to produce ``x^k``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .grid import div, gaussian_convolve, grad, total_variation, warp
from .proxops import (
    FlowEnergyParams,
    fista_tv_prox,
    project_dual_ball,
    prox_flow_energy,
    prox_huber_dual,
    prox_quadratic_data,
    smoothed_flow_pair,
    HuberDualParams,
)

__all__ = [
    "SceneFrame",
    "SyntheticScene",
    "synthetic_source",
    "generate_scene",
    "tv_objective",
    "StaticProblem",
    "KnownFlowProblem",
    "KnownFlowPofbProblem",
    "known_flow_predictors",
    "iota",
    "FlowWindow",
    "unknown_flow_step_predictors",
    "UnknownFlowProblem",
    "prediction_penalty",
    "primal_bound_holds",
]


# --- synthetic data -------------------------------------------------------------


@dataclass(frozen=True)
class SceneFrame:
    k: int
    clean: np.ndarray
    noisy: np.ndarray
    true_shift: np.ndarray
    measured_shift: np.ndarray
    position: np.ndarray  # cumulative true shift of the crop since frame 0


@dataclass(frozen=True)
class SyntheticScene:
    """A crop of ``source`` moving by a Brownian motion.

    ``std`` is the per-frame standard deviation of the shift in pixels,
    ``noise`` the image noise level and ``disp_noise`` the relative
    measurement noise of each shift. With ``integer_motion`` the true shifts
    are rounded to whole pixels, so away from the borders each clean frame is
    an exact shift of the previous one.
    """

    source: np.ndarray
    crop: tuple = (200, 300)
    std: float = 2.0
    noise: float = 0.5
    disp_noise: float = 0.05
    seed: int = 0
    integer_motion: bool = False

    def __post_init__(self):
        src = np.asarray(self.source)
        if src.ndim != 2:
            raise ValueError("source must be a 2-D image")
        h, w = self.crop
        if h < 2 or w < 2 or src.shape[0] < h + 2 or src.shape[1] < w + 2:
            raise ValueError(f"crop {self.crop} does not fit in source of shape {src.shape} with a margin")
        if self.std < 0 or self.noise < 0 or self.disp_noise < 0:
            raise ValueError("std, noise and disp_noise must be non-negative")


def synthetic_source(kind="squares", shape=(256, 256), seed=0):
    """Deterministic test images with values in ``[0, 1]``.

    ``"squares"`` is piecewise constant with many edges, ``"blobs"`` a smooth
    sum of Gaussian bumps and ``"mixed"`` their average.
    """
    rng = np.random.default_rng(seed)
    h, w = shape
    if kind == "squares":
        img = np.full((h, w), 0.3)
        lo, hi = max(2, min(h, w) // 32), max(4, min(h, w) // 6)
        count = max(4, int(1.5 * h * w / ((lo + hi) / 2) ** 2))
        for _ in range(count):
            sh, sw = rng.integers(lo, hi + 1, size=2)
            r, c = rng.integers(0, h - sh + 1), rng.integers(0, w - sw + 1)
            img[r : r + sh, c : c + sw] = rng.uniform(0.0, 1.0)
        return img
    if kind == "blobs":
        rows, cols = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
        img = np.zeros((h, w))
        count = max(4, h * w // 400)
        for _ in range(count):
            r, c = rng.uniform(0, h), rng.uniform(0, w)
            s = rng.uniform(4.0, 12.0)
            img += rng.uniform(-1.0, 1.0) * np.exp(-((rows - r) ** 2 + (cols - c) ** 2) / (2 * s * s))
        img -= img.min()
        return img / img.max()
    if kind == "mixed":
        return 0.5 * (synthetic_source("squares", shape, seed) + synthetic_source("blobs", shape, seed + 1))
    raise ValueError(f"unknown source kind {kind!r}")


def _reflect(x, lo, hi):
    span = hi - lo
    if span <= 0:
        return lo
    y = np.mod(x - lo, 2.0 * span)
    return lo + (2.0 * span - y if y > span else y)


def _crop(source, origin, shape):
    # bilinear sample of source on origin + integer grid
    h, w = shape
    out = source
    for axis, (o, n) in enumerate(zip(origin, (h, w))):
        coords = o + np.arange(n, dtype=float)
        i0 = np.minimum(np.floor(coords).astype(np.intp), source.shape[axis] - 2)
        t = coords - i0
        a = np.take(out, i0, axis=axis)
        b = np.take(out, i0 + 1, axis=axis)
        t = t.reshape((n, 1) if axis == 0 else (1, n))
        out = (1.0 - t) * a + t * b
    return out


def generate_scene(scene: SyntheticScene, N):
    """Yield ``N`` :class:`SceneFrame` objects for frames ``1..N``.

    The crop origin is ``c - P^k`` for the cumulative path ``P^k``, reflected
    at the source borders, so ``clean^{k}(p) = clean^{k-1}(p - (P^k - P^{k-1}))``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    src = np.asarray(scene.source, dtype=float)
    h, w = scene.crop
    rng = np.random.default_rng(scene.seed)
    hi = np.array([src.shape[0] - h, src.shape[1] - w], dtype=float)
    c0 = np.floor(hi / 2.0)
    origin = c0.copy()
    for k in range(1, N + 1):
        step = scene.std * rng.standard_normal(2)
        if scene.integer_motion:
            step = np.round(step)
        new = np.array([_reflect(origin[i] - step[i], 0.0, hi[i]) for i in range(2)])
        true_shift = origin - new
        origin = new
        meas = true_shift + scene.disp_noise * np.linalg.norm(true_shift) * rng.standard_normal(2)
        clean = _crop(src, origin, (h, w))
        noisy = clean + scene.noise * rng.standard_normal((h, w)) if scene.noise > 0 else clean.copy()
        yield SceneFrame(
            k=k,
            clean=clean,
            noisy=noisy,
            true_shift=true_shift,
            measured_shift=meas,
            position=c0 - origin,
        )


# --- problems -------------------------------------------------------------------


def tv_objective(x, b, alpha):
    """``1/2 ||x - b||^2 + alpha TV(x)``."""
    r = np.ravel(x - b)
    return 0.5 * float(r @ r) + alpha * total_variation(x)


def _frame_data(frame):
    # accept SceneFrame, (b, shift) pairs or bare images
    if isinstance(frame, SceneFrame):
        return frame.noisy, frame.measured_shift
    if isinstance(frame, tuple):
        return frame[0], frame[1]
    return frame, None


class _TVBase:
    """Shared pieces of ``1/2||x-b||^2 + alpha ||Dx||_{2,1}``."""

    def __init__(self, alpha, b=None):
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        self.alpha = float(alpha)
        self.b = None if b is None else np.asarray(b, dtype=float)

    # primal-dual interface
    def prox_f(self, k, z, tau):
        return prox_quadratic_data(z, self.b, tau)

    def prox_gstar(self, k, z, sigma):
        return project_dual_ball(z, self.alpha)

    def prox_gtilde_star(self, k, z, sigma_tilde, rho_tilde):
        return prox_huber_dual(z, HuberDualParams(self.alpha, sigma_tilde, rho_tilde))

    def K(self, k, x):
        return grad(x)

    def K_adjoint(self, k, y):
        return -div(y)

    # forward-backward interface
    def grad_f(self, k, z):
        return z - self.b

    def objective(self, k, x):
        return tv_objective(x, self.b, self.alpha)


class StaticProblem(_TVBase):
    """Constant data with identity predictors; fista_iters sets the inexact TV prox."""

    def __init__(self, b, alpha, fista_iters=10):
        super().__init__(alpha, b)
        self.fista_iters = fista_iters

    def predict_primal(self, k, x):
        return x

    def predict_dual(self, k, y):
        return y

    def predict(self, k, x):
        return x

    def prox_g(self, k, z, tau):
        return fista_tv_prox(z, self.alpha * tau, self.fista_iters)


def known_flow_predictors(x, y, v):
    """Warp the primal and dual iterates by the measured displacement ``v``."""
    return warp(x, v), warp(y, v)


class KnownFlowProblem(_TVBase):
    """TV denoising of a moving scene with measured displacements (primal-dual)."""

    def __init__(self, alpha):
        super().__init__(alpha)
        self.v = np.zeros(2)

    def observe(self, k, frame):
        b, v = _frame_data(frame)
        self.b = np.asarray(b, dtype=float)
        self.v = np.zeros(2) if v is None else v

    def predict_primal(self, k, x):
        return warp(x, self.v)

    def predict_dual(self, k, y):
        return warp(y, self.v)


class KnownFlowPofbProblem(KnownFlowProblem):
    """Forward-backward version; the TV prox is solved by a few FISTA steps."""

    def __init__(self, alpha, fista_iters=10):
        super().__init__(alpha)
        self.fista_iters = fista_iters

    def predict(self, k, x):
        return warp(x, self.v)

    def prox_g(self, k, z, tau):
        return fista_tv_prox(z, self.alpha * tau, self.fista_iters)


# --- unknown displacement -------------------------------------------------------


def iota(k, n):
    """First frame of the estimation window at iteration ``k`` (window base is ``iota - 1``)."""
    return max(1, k + 2 - n)


class FlowWindow:
    """Displacement estimates over the last ``n`` frame pairs.

    ``u[j]`` is the shift of frame ``base + 1 + j`` relative to frame
    ``base``; the last entry is the prediction for a frame not yet seen.
    Only pair moments and the latest smoothed frame are stored.
    """

    def __init__(self, params: FlowEnergyParams):
        self.params = params
        self.base = 0
        self.u = np.zeros((1, 2))
        self.pairs = deque()
        self.last = None
        self.base_offset = np.zeros(2)

    def copy(self):
        w = FlowWindow(self.params)
        w.base = self.base
        w.u = self.u.copy()
        w.pairs = deque(self.pairs)
        w.last = self.last
        w.base_offset = self.base_offset.copy()
        return w

    @property
    def buffered_frames(self):
        return len(self.pairs) + 1

    def add_frame(self, img):
        p = self.params
        s = gaussian_convolve(img, p.kernel_std, p.kernel_window)
        if self.last is None:
            # the first frame doubles as its own predecessor
            self.last = s
        self.pairs.append(smoothed_flow_pair(self.last, s, p.T))
        self.last = s

    def solve(self, tau):
        if len(self.pairs) != len(self.u):
            raise RuntimeError(f"window has {len(self.u)} shifts but {len(self.pairs)} frame pairs")
        self.u = prox_flow_energy(self.u, list(self.pairs), self.params, tau)

    @property
    def latest_shift(self):
        """Estimated shift between the two newest frames."""
        return self.u[-1] - (self.u[-2] if len(self.u) > 1 else 0.0)

    @property
    def cumulative(self):
        """Estimated shift of the newest frame relative to frame 0."""
        return self.base_offset + self.u[-1]

    def advance(self, k):
        """Rebase to the window of iteration ``k + 1`` and predict a zero next shift."""
        u = self.u
        if iota(k + 1, self.params.window) > iota(k, self.params.window):
            self.base_offset = self.base_offset + u[0]
            self.pairs.popleft()
            self.base += 1
            u = u - u[0]
            u = u[1:]
        last = u[-1] if len(u) else np.zeros(2)
        self.u = np.vstack([u, last[None, :]])


def unknown_flow_step_predictors(x, y, window: FlowWindow, k):
    """Predictors of iteration ``k`` for a window already solved on frame ``k + 1``.

    Returns ``(xi, warped_dual, next_window)``; the input window is not modified.
    """
    d = window.latest_shift
    nxt = window.copy()
    nxt.advance(k)
    return warp(x, d), warp(y, d), nxt


class UnknownFlowProblem(_TVBase):
    """TV denoising with displacements estimated online from the frames.

    ``tau`` is the primal step, used also for the displacement prox.
    """

    def __init__(self, alpha, flow_params: FlowEnergyParams, tau):
        super().__init__(alpha)
        self.window = FlowWindow(flow_params)
        self.tau = float(tau)
        self.d = np.zeros(2)
        self.estimates = []

    def observe(self, k, frame):
        b, _ = _frame_data(frame)
        self.b = np.asarray(b, dtype=float)
        w = self.window
        w.add_frame(self.b)
        w.solve(self.tau)
        self.d = w.latest_shift.copy()
        self.estimates.append(w.cumulative.copy())
        w.advance(k - 1)

    @property
    def estimated_position(self):
        return self.estimates[-1] if self.estimates else np.zeros(2)

    def predict_primal(self, k, x):
        return warp(x, self.d)

    def predict_dual(self, k, y):
        return warp(y, self.d)


# --- bounds -----------------------------------------------------------------------


def prediction_penalty(Lambda, Lambda_V, M, v_err_norm_sq):
    """Penalty ``eps`` of the warp prediction bound for a displacement error."""
    if not Lambda_V > 0:
        raise ValueError("Lambda_V must be positive")
    if not Lambda > Lambda_V:
        raise ValueError("need Lambda > Lambda_V")
    if M < 0 or v_err_norm_sq < 0:
        raise ValueError("M and the error norm must be non-negative")
    return Lambda_V * (4.0 * Lambda - 3.0 * Lambda_V) / (8.0 * (Lambda - Lambda_V)) * M * v_err_norm_sq


def primal_bound_holds(x, xi, upsilon, b, tau, rtol=1e-12):
    """Check ``(1 + tau)||x - b||^2 <= tau ||div upsilon||^2 + ||xi - b||^2`` for one primal step.

    This is what comparing the primal prox minimiser with ``x = xi`` gives.
    The factor 2 in place of ``1 + tau`` only follows for ``tau >= 1``.
    """
    lhs = (1.0 + tau) * float(np.sum((x - b) ** 2))
    rhs = tau * float(np.sum(div(upsilon) ** 2)) + float(np.sum((xi - b) ** 2))
    return lhs <= rhs * (1 + rtol) + 1e-300
