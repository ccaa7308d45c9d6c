"""Proximal maps and projections used by the online solvers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import div, gaussian_convolve, grad, pointwise_norm

__all__ = [
    "HuberDualParams",
    "FlowEnergyParams",
    "prox_quadratic_data",
    "project_dual_ball",
    "prox_huber_dual",
    "fista_tv_prox",
    "FlowPair",
    "flow_pair",
    "smoothed_flow_pair",
    "flow_blocks",
    "prox_flow_energy",
    "flow_energy",
]


@dataclass(frozen=True)
class HuberDualParams:
    alpha: float
    sigma_tilde: float
    rho_tilde: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.sigma_tilde > 0:
            raise ValueError("sigma_tilde must be positive")
        if not self.rho_tilde >= 0:
            raise ValueError("rho_tilde must be non-negative")


@dataclass(frozen=True)
class FlowEnergyParams:
    """Weights of the windowed Horn–Schunck displacement energy.

    ``theta`` weights the linearised data term (a pixel mean), ``lambda1``
    penalises the size of each inter-frame shift, ``T`` is the time step,
    ``window`` the number of frame pairs kept, and ``kernel_std`` /
    ``kernel_window`` the pre-smoothing Gaussian.
    """

    theta: float
    lambda1: float = 1.0
    T: float = 1.0
    window: int = 100
    kernel_std: float = 3.0
    kernel_window: int = 11

    def __post_init__(self):
        if self.theta < 0 or self.lambda1 < 0:
            raise ValueError("theta and lambda1 must be non-negative")
        if self.theta == 0 and self.lambda1 == 0:
            raise ValueError("theta and lambda1 cannot both vanish")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if not self.T > 0:
            raise ValueError("T must be positive")


def prox_quadratic_data(z, b, tau):
    """Proximal point of ``tau/2 ||. - b||^2`` at ``z``."""
    z = np.asarray(z, dtype=float)
    b = np.asarray(b, dtype=float)
    if z.shape != b.shape:
        raise ValueError(f"shape mismatch: {z.shape} vs {b.shape}")
    if not tau > 0:
        raise ValueError("tau must be positive")
    # same as (z + tau b)/(1 + tau), written so that z = b is a fixed point bit for bit
    return b + (z - b) / (1.0 + tau)


def project_dual_ball(y, alpha):
    """Project each pixel of a vector field onto the closed ball of radius ``alpha``."""
    y = np.asarray(y, dtype=float)
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    nrm = pointwise_norm(y)
    # only rescale pixels that are outside, so interior points are untouched
    outside = nrm > alpha
    if not outside.any():
        return y.copy()
    scale = np.ones_like(nrm)
    scale[outside] = alpha / nrm[outside]
    out = y * scale[..., None]
    # rounding can leave a rescaled pixel an ulp outside; nudge it in so that
    # projecting again is the identity
    bad = pointwise_norm(out) > alpha
    while bad.any():
        scale[bad] = np.nextafter(scale[bad], 0.0)
        out[bad] = y[bad] * scale[bad][:, None]
        bad = pointwise_norm(out) > alpha
    return out


def prox_huber_dual(z, p: HuberDualParams):
    """Prox of ``sigma_tilde * (indicator of alpha-ball + rho_tilde/2 |.|^2)``."""
    z = np.asarray(z, dtype=float)
    if p.rho_tilde:
        z = z / (1.0 + p.sigma_tilde * p.rho_tilde)
    return project_dual_ball(z, p.alpha)


def fista_tv_prox(z, alpha_tau, iters=10, step=1.0 / 8.0):
    """Approximate prox of ``alpha_tau * TV`` by FISTA on the dual.

    Solves ``min_{|y|<=alpha_tau} 1/2 ||div y + z||^2`` from ``y = 0`` and
    returns ``z + div y``. ``step`` defaults to ``1/||grad||^2``.
    """
    z = np.asarray(z, dtype=float)
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if alpha_tau == 0:
        return z.copy()
    y = np.zeros(z.shape + (2,))
    q = y
    t = 1.0
    for _ in range(iters):
        y_new = project_dual_ball(q + step * grad(z + div(q)), alpha_tau)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        q = y_new + ((t - 1.0) / t_new) * (y_new - y)
        y, t = y_new, t_new
    return z + div(y)


# --- displacement estimation -------------------------------------------------


@dataclass(frozen=True)
class FlowPair:
    """Quadratic model of one frame pair in the Horn–Schunck term.

    For a constant shift ``d`` the pair energy is
    ``theta/2 * mean((r + <g, d>)^2) + lambda1/2 |d|^2`` which equals
    ``1/2 d'Qd + c'd + const`` with the moments stored here.
    """

    gtg: np.ndarray  # mean of g g^T, 2x2
    gtr: np.ndarray  # mean of g r, 2
    rtr: float  # mean of r^2


def flow_pair(prev, nxt, p: FlowEnergyParams):
    """Moments of the linearised optical-flow residual between two frames."""
    sp = gaussian_convolve(prev, p.kernel_std, p.kernel_window)
    sn = gaussian_convolve(nxt, p.kernel_std, p.kernel_window)
    return smoothed_flow_pair(sp, sn, p.T)


def smoothed_flow_pair(sp, sn, T=1.0):
    """:func:`flow_pair` for frames that are already smoothed."""
    r = (sn - sp) / T
    g = grad(sp).reshape(-1, 2)
    r = r.reshape(-1)
    n = r.size
    return FlowPair(gtg=g.T @ g / n, gtr=g.T @ r / n, rtr=float(r @ r) / n)


def flow_blocks(pairs, p: FlowEnergyParams):
    """Per-pair Hessian blocks ``Q_j`` and linear terms ``c_j`` of the energy."""
    m = len(pairs)
    Q = np.empty((m, 2, 2))
    c = np.empty((m, 2))
    for j, pr in enumerate(pairs):
        Q[j] = (p.theta * pr.gtg + p.lambda1 * np.eye(2)) / m
        c[j] = p.theta * pr.gtr / m
    return Q, c


def flow_energy(u, pairs, p: FlowEnergyParams):
    """Window energy of cumulative shifts ``u`` (shape ``(m, 2)``, base shift 0)."""
    u = np.asarray(u, dtype=float).reshape(-1, 2)
    m = len(pairs)
    d = np.diff(np.vstack([np.zeros((1, 2)), u]), axis=0)
    total = 0.0
    for j, pr in enumerate(pairs):
        dj = d[j]
        data = dj @ pr.gtg @ dj + 2.0 * dj @ pr.gtr + pr.rtr
        total += 0.5 * p.theta * data + 0.5 * p.lambda1 * dj @ dj
    return total / m


def prox_flow_energy(w, pairs, p: FlowEnergyParams, tau):
    """Exact prox of ``tau * flow_energy`` at the window state ``w``.

    ``w[j]`` is the shift of frame ``j+1`` of the window relative to the
    window base frame. The optimality system is block tridiagonal with
    2x2 blocks and is solved by block elimination.
    """
    w = np.asarray(w, dtype=float).reshape(-1, 2)
    m = len(pairs)
    if w.shape[0] != m:
        raise ValueError(f"window state has {w.shape[0]} shifts but {m} frame pairs")
    if not tau > 0:
        raise ValueError("tau must be positive")
    Q, c = flow_blocks(pairs, p)
    eye = np.eye(2)
    # d_j = u_j - u_{j-1} with u_{-1} = 0 (0-based); u_i appears in d_i and d_{i+1}
    diag = np.empty((m, 2, 2))
    rhs = np.empty((m, 2))
    for i in range(m):
        diag[i] = eye + tau * Q[i]
        rhs[i] = w[i] - tau * c[i]
        if i + 1 < m:
            diag[i] += tau * Q[i + 1]
            rhs[i] += tau * c[i + 1]
    # upper[i] couples u_i with u_{i+1}
    upper = -tau * Q[1:]
    # forward elimination
    dprime = diag.copy()
    rprime = rhs.copy()
    for i in range(1, m):
        lower = upper[i - 1].T
        f = lower @ np.linalg.inv(dprime[i - 1])
        dprime[i] = dprime[i] - f @ upper[i - 1]
        rprime[i] = rprime[i] - f @ rprime[i - 1]
    u = np.empty((m, 2))
    u[-1] = np.linalg.solve(dprime[-1], rprime[-1])
    for i in range(m - 2, -1, -1):
        u[i] = np.linalg.solve(dprime[i], rprime[i] - upper[i] @ u[i + 1])
    return u
