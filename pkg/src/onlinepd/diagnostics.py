"""Gap functionals, regret certificates and property checks at desk scale.

Comparison sets are finite samples. Suprema and infima over them are exact
maxima and minima, so a sampled supremum never exceeds the true one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .steprules import FbStepConfig, StepConfig, fb_gamma, validate_conditions

__all__ = [
    "SmallSaddleProblem",
    "duality_gap",
    "lagrangian_gap",
    "partial_primal_gap_bruteforce",
    "tilde_g_bruteforce",
    "tilde_g_ball_closed_form",
    "tilde_g_lower_bound_check",
    "BoundReport",
    "RegretLedger",
    "CertificateReport",
    "ScalarTrackingProblem",
    "pofb_ledger",
    "pofb_regret_certificate",
    "popd_ledger",
    "popd_regret_certificate",
    "ball_local_strong_convexity_check",
    "smoothness_three_point",
    "fb_condition_margin",
]


# --- small saddle-point problems ----------------------------------------------------


@dataclass
class SmallSaddleProblem:
    """``min_x 1/2||x-b||^2 + alpha sum_g ||(Kx)_g||`` with a dense ``K``.

    The rows of ``K`` are split into consecutive groups of size ``group``;
    ``G`` is ``alpha`` times the sum of group norms, so ``G*`` is the
    indicator of the product of ``alpha``-balls.
    """

    K: np.ndarray
    b: np.ndarray
    alpha: float = 1.0
    group: int = 2
    tol: float = 1e-9

    def __post_init__(self):
        self.K = np.atleast_2d(np.asarray(self.K, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        m, n = self.K.shape
        if self.b.size != n:
            raise ValueError("b has the wrong length")
        if m % self.group:
            raise ValueError("row count must be a multiple of the group size")
        if max(m, n) > 64:
            raise ValueError("dimensions above 64 are not supported")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def Knorm_sq(self):
        return float(np.linalg.norm(self.K, 2) ** 2)

    def _groups(self, v):
        return np.asarray(v, dtype=float).reshape(-1, self.group)

    def F(self, x):
        r = np.asarray(x) - self.b
        return 0.5 * float(r @ r)

    def F_conj(self, w):
        w = np.asarray(w, dtype=float)
        return 0.5 * float(w @ w) + float(w @ self.b)

    def G(self, v):
        return self.alpha * float(np.linalg.norm(self._groups(v), axis=1).sum())

    def G_conj(self, y):
        nrm = np.linalg.norm(self._groups(y), axis=1)
        return 0.0 if np.all(nrm <= self.alpha * (1 + self.tol)) else np.inf

    def project(self, y, radius=None):
        a = self.alpha if radius is None else radius
        g = self._groups(y)
        nrm = np.linalg.norm(g, axis=1, keepdims=True)
        scale = np.where(nrm > a, a / np.maximum(nrm, 1e-300), 1.0)
        return (g * scale).reshape(-1)

    def primal(self, x):
        return self.F(x) + self.G(self.K @ x)

    def lagrangian(self, x, y):
        return self.F(x) + float((self.K @ x) @ y) - self.G_conj(y)


def duality_gap(p: SmallSaddleProblem, x, y):
    """``[F + G∘K](x) + F*(-K^T y) + G*(y)``."""
    return p.primal(x) + p.F_conj(-p.K.T @ y) + p.G_conj(y)


def lagrangian_gap(p: SmallSaddleProblem, x, y, xbar, ybar):
    """``L(x, ybar) - L(xbar, y)``."""
    return p.lagrangian(x, ybar) - p.lagrangian(xbar, y)


def _sample_values(p, samples):
    return np.array([p.primal(xb) for xb, _ in samples])


def partial_primal_gap_bruteforce(p: SmallSaddleProblem, x, B_samples):
    """Partial primal gap over a finite comparison set ``[(xbar, ybar), ...]``.

    The infimum over ``y`` is taken in closed form,
    ``F(x) + <Kx, ybar> - G*(ybar) - [F + G∘K](xbar)``.
    """
    if not len(B_samples):
        raise ValueError("empty comparison set")
    Kx = p.K @ x
    Fx = p.F(x)
    return max(Fx + float(Kx @ yb) - p.G_conj(yb) - p.primal(xb) for xb, yb in B_samples)


def tilde_g_bruteforce(p: SmallSaddleProblem, yprime, B_samples):
    """Gap-modified regulariser ``G~(y')`` of a finite comparison set."""
    J = _sample_values(p, B_samples)
    vals = [float(yprime @ yb) - p.G_conj(yb) - Ji for (_, yb), Ji in zip(B_samples, J)]
    return max(vals) + float(J.min())


def tilde_g_ball_closed_form(yprime, alpha, y_hat, rho):
    """Support function of the lens ``B(0, alpha) ∩ B(y_hat, rho)`` at ``y'``.

    Raises
    ------
    ValueError
        If the two balls do not intersect.
    """
    d = np.asarray(yprime, dtype=float).reshape(-1)
    c = np.asarray(y_hat, dtype=float).reshape(-1)
    if not (alpha > 0 and rho > 0):
        raise ValueError("alpha and rho must be positive")
    cn = float(np.linalg.norm(c))
    if cn > alpha + rho:
        raise ValueError(f"empty intersection: |y_hat| = {cn:g} > alpha + rho = {alpha + rho:g}")
    dn = float(np.linalg.norm(d))
    if dn == 0.0:
        return 0.0
    # maximiser of one ball alone, if it lies in the other
    z1 = alpha * d / dn
    if np.linalg.norm(z1 - c) <= rho:
        return alpha * dn
    z2 = c + rho * d / dn
    if np.linalg.norm(z2) <= alpha:
        return float(d @ c) + rho * dn
    # otherwise the maximum lies on the intersection of the two spheres
    e = c / cn
    t = (alpha**2 - rho**2 + cn**2) / (2.0 * cn)
    h = np.sqrt(max(alpha**2 - t**2, 0.0))
    de = float(d @ e)
    dperp = float(np.linalg.norm(d - de * e))
    return t * de + h * dperp


@dataclass(frozen=True)
class BoundReport:
    lower_margins: np.ndarray  # G~(y') + G(-y')
    upper_margins: np.ndarray  # G(y') - G~(y')

    @property
    def ok(self):
        return bool(np.all(self.lower_margins >= -1e-8) and np.all(self.upper_margins >= -1e-8))


def tilde_g_lower_bound_check(p: SmallSaddleProblem, samples, yprimes):
    """Check ``-G(-y') <= G~(y') <= G(y')`` for comparison samples in ``X x B_Y``."""
    for _, yb in samples:
        if p.G_conj(yb) != 0.0:
            raise ValueError("dual comparison samples must lie in the alpha-balls")
    lo, up = [], []
    for yp in yprimes:
        tg = tilde_g_bruteforce(p, yp, samples)
        lo.append(tg + p.G(-yp))
        up.append(p.G(yp) - tg)
    return BoundReport(lower_margins=np.array(lo), upper_margins=np.array(up))


# --- regret certificates ------------------------------------------------------------


@dataclass
class RegretLedger:
    """Terms of a regret bound collected along a run of ``N`` frames.

    ``gaps[i, k]`` is the (weighted) objective gap at frame ``k+1`` against
    comparison sequence ``i``; ``residuals[k]`` the (weighted) squared
    distance of iterate ``k+1`` from its prediction; ``init[i]`` the
    squared initial distance to comparison ``i`` in the relevant norm.
    """

    gaps: np.ndarray
    residuals: np.ndarray
    eps: np.ndarray
    init: np.ndarray
    eps_tilde: np.ndarray | None = None
    phi: np.ndarray | None = None
    psi: np.ndarray | None = None
    eta: np.ndarray | None = None
    M: float = float("nan")

    def __post_init__(self):
        self.gaps = np.atleast_2d(np.asarray(self.gaps, dtype=float))
        self.residuals = np.asarray(self.residuals, dtype=float)
        self.eps = np.asarray(self.eps, dtype=float)
        self.init = np.atleast_1d(np.asarray(self.init, dtype=float))
        N = self.gaps.shape[1]
        if len(self.residuals) != N or len(self.eps) != N:
            raise ValueError("ledger length must equal the frame count")
        if self.eps_tilde is None:
            self.eps_tilde = np.zeros(N)
        self.eps_tilde = np.asarray(self.eps_tilde, dtype=float)
        if len(self.init) != self.gaps.shape[0]:
            raise ValueError("one initial distance per comparison sequence")

    def __len__(self):
        return self.gaps.shape[1]


@dataclass(frozen=True)
class CertificateReport:
    lhs: float
    rhs: float
    applicable: bool = True
    note: str = ""

    @property
    def margin(self):
        return self.rhs - self.lhs

    @property
    def holds(self):
        return self.applicable and self.lhs <= self.rhs

    def __str__(self):
        if not self.applicable:
            return f"certificate inapplicable: {self.note}"
        return f"lhs {self.lhs:.6e} <= rhs {self.rhs:.6e}: {'holds' if self.holds else 'FAILS'} (margin {self.margin:.3e})"


class ScalarTrackingProblem:
    """Forward-backward problem ``F_k = 1/2 |x - b_k|^2``, ``G = 0`` on a vector space.

    ``shifts[k]`` is added by the predictor ``A_k`` at step ``k``.
    """

    def __init__(self, data, shifts):
        self.data = [np.asarray(d, dtype=float) for d in data]
        self.shifts = [np.asarray(s, dtype=float) for s in shifts]

    def predict(self, k, x):
        return x + self.shifts[k]

    def grad_f(self, k, z):
        return z - self.data[k - 1]

    def prox_g(self, k, z, tau):
        return z

    def objective(self, k, x):
        r = np.ravel(x - self.data[k - 1])
        return 0.5 * float(r @ r)


def pofb_ledger(problem, tau, x0, comparisons, eps):
    """Run the forward-backward method for ``N = len(eps)`` frames and fill a ledger.

    ``comparisons`` is a list of comparison sequences ``xbar^{0..N}``.
    """
    from .solvers import pofb_step

    N = len(eps)
    x = np.asarray(x0, dtype=float)
    iterates, res = [], []
    for k in range(N):
        x_next, z = pofb_step(problem, k, x, tau)
        res.append(float(np.sum((x_next - z) ** 2)))
        iterates.append(x_next)
        x = x_next
    gaps = np.array(
        [[problem.objective(k + 1, iterates[k]) - problem.objective(k + 1, seq[k + 1]) for k in range(N)] for seq in comparisons]
    )
    init = np.array([float(np.sum((np.asarray(x0) - seq[0]) ** 2)) for seq in comparisons])
    return RegretLedger(gaps=gaps, residuals=np.array(res), eps=np.asarray(eps, dtype=float), init=init)


def pofb_regret_certificate(ledger: RegretLedger, cfg: FbStepConfig):
    """Constant-step dynamic regret bound of the forward-backward method.

    ``regret + sum (1-zeta)/(2 tau) residual <= (1 + gamma tau) sup init / (2 tau) + sum eps / tau``.
    """
    gamma = fb_gamma(cfg)
    if 1.0 + gamma * cfg.tau < cfg.Lambda:
        return CertificateReport(
            lhs=np.nan, rhs=np.nan, applicable=False, note=f"1 + gamma tau = {1 + gamma * cfg.tau:g} < Lambda = {cfg.Lambda:g}"
        )
    tau = cfg.tau
    regret = float(ledger.gaps.sum(axis=1).max())
    lhs = regret + (1.0 - cfg.zeta) / (2.0 * tau) * float(ledger.residuals.sum())
    rhs = (1.0 + gamma * tau) * float(ledger.init.max()) / (2.0 * tau) + float(ledger.eps.sum()) / tau
    return CertificateReport(lhs=lhs, rhs=rhs)


def _eta_m_sq(p, dx, dy, phi, psi, eta):
    # squared norm in eta M: phi|dx|^2 + psi|dy|^2 - 2 eta <K dx, dy>
    return phi * float(dx @ dx) + psi * float(dy @ dy) - 2.0 * eta * float((p.K @ dx) @ dy)


def _eta_m_gamma_sq(p, dx, dy, cfg, phi, psi, eta):
    return (
        phi * (1.0 + cfg.gamma * cfg.tau) * float(dx @ dx)
        + psi * (1.0 + cfg.rho * cfg.sigma) * float(dy @ dy)
        - 2.0 * eta * float((p.K @ dx) @ dy)
    )


class _DenseStatic:
    # adapter exposing a SmallSaddleProblem to popd_step with identity predictors
    def __init__(self, p):
        self.p = p

    def predict_primal(self, k, x):
        return x

    def predict_dual(self, k, y):
        return y

    def K(self, k, x):
        return self.p.K @ x

    def K_adjoint(self, k, y):
        return self.p.K.T @ y

    def prox_f(self, k, z, tau):
        return (z + tau * self.p.b) / (1.0 + tau)

    def prox_gstar(self, k, z, sigma):
        return self.p.project(z)

    def prox_gtilde_star(self, k, z, sigma_tilde, rho_tilde):
        return self.p.project(z / (1.0 + sigma_tilde * rho_tilde))

    def objective(self, k, x):
        return self.p.primal(x)


def popd_ledger(p: SmallSaddleProblem, cfg: StepConfig, x0, y0, U0, N, eps=None, eps_tilde=None):
    """Run the primal-dual method on a static problem with identity predictors.

    Each initial comparison pair in ``U0`` generates the comparison sequence
    ``xbar^{k+1} = xbar^k``, ``ybar^{k+1} = prox(ybar^k + sigma_tilde K xbar)``,
    for which the prediction bounds hold with ``Lambda = Theta = 1`` and zero
    penalties. Gaps are brute-forced over these sequences.
    """
    from .solvers import popd_step

    prob = _DenseStatic(p)
    tp = cfg.testing(N + 1)
    x, y = np.asarray(x0, dtype=float), np.asarray(y0, dtype=float)
    seqs = []
    for xb0, yb0 in U0:
        xb, yb = np.asarray(xb0, dtype=float), np.asarray(yb0, dtype=float)
        ys = []
        for _ in range(N):
            yb = prob.prox_gtilde_star(0, yb + cfg.sigma_tilde * (p.K @ xb), cfg.sigma_tilde, cfg.rho_tilde)
            ys.append(yb)
        seqs.append((xb, ys))
    gaps = np.zeros((len(U0), N))
    res = np.zeros(N)
    for k in range(N):
        x_next, y_next, xi, ups = popd_step(prob, cfg, k, x, y)
        res[k] = _eta_m_sq(p, x_next - xi, y_next - ups, tp.phi[k + 1], tp.psi[k + 1], tp.eta[k + 1])
        Fx = p.F(x_next)
        Kx = p.K @ x_next
        for i, (xb, ys) in enumerate(seqs):
            gaps[i, k] = tp.eta[k] * (Fx + float(Kx @ ys[k]) - p.G_conj(ys[k]) - p.primal(xb))
        x, y = x_next, y_next
    init = np.array(
        [
            _eta_m_gamma_sq(p, np.asarray(x0) - xb0, np.asarray(y0) - yb0, cfg, tp.phi[0], tp.psi[0], tp.eta[0])
            for xb0, yb0 in U0
        ]
    )
    return RegretLedger(
        gaps=gaps,
        residuals=res,
        eps=np.zeros(N) if eps is None else eps,
        eps_tilde=np.zeros(N) if eps_tilde is None else eps_tilde,
        init=init,
        phi=tp.phi,
        psi=tp.psi,
        eta=tp.eta,
    )


def popd_regret_certificate(ledger: RegretLedger, cfg: StepConfig):
    """Primal-dual regret bound: sampled gap plus residuals against ``e_N``."""
    N = len(ledger)
    tp_ok = all(validate_conditions(cfg, _tp_view(ledger), k).ok for k in range(N))
    if not tp_ok:
        return CertificateReport(lhs=np.nan, rhs=np.nan, applicable=False, note="step conditions violated")
    lhs = float(ledger.gaps.sum(axis=1).max()) + 0.5 * float(ledger.residuals.sum())
    pen = sum(
        ledger.eps[k] * ledger.phi[k + 1]
        + cfg.kappa * (1.0 + cfg.sigma * cfg.rho) * ledger.psi[k] / (2.0 * cfg.Theta) * ledger.eps_tilde[k]
        for k in range(N)
    )
    rhs = 0.5 * float(ledger.init.max()) + float(pen)
    return CertificateReport(lhs=lhs, rhs=rhs)


def _tp_view(ledger):
    from .steprules import TestingParams

    return TestingParams(phi=ledger.phi, psi=ledger.psi, eta=ledger.eta)


# --- local strong convexity of the ball indicator -----------------------------------


@dataclass(frozen=True)
class StrongConvexityReport:
    margins: np.ndarray  # +inf outside the ball
    in_neighborhood: np.ndarray
    case: str

    @property
    def min_margin_inside(self):
        m = self.margins[self.in_neighborhood]
        return float(m.min()) if m.size else np.inf

    @property
    def violations_outside(self):
        return int(np.sum((self.margins < 0) & ~self.in_neighborhood))

    @property
    def ok(self):
        return self.min_margin_inside >= -1e-10


def ball_local_strong_convexity_check(alpha, gamma, x, xstar, samples, rtol=1e-9):
    """Margins of ``F(x') - F(x) - <x*, x'-x> - gamma/2 |x'-x|^2`` for the ball indicator.

    ``x`` must lie on the sphere of radius ``alpha`` and ``x* = lambda x`` with
    ``lambda > 0``. Samples are flagged by membership of the neighbourhood
    ``U_x`` (the whole space when ``gamma alpha <= |x*|``, otherwise the
    complement of the ball joined with ``B(x, alpha)``).

    Inside the ball the margin equals
    ``[lambda (alpha^2 - |x'|^2) - (gamma - lambda) |x' - x|^2] / 2``, so in the
    second case it is negative at every sphere point other than ``x``.
    """
    x = np.asarray(x, dtype=float)
    xstar = np.asarray(xstar, dtype=float)
    if abs(np.linalg.norm(x) - alpha) > rtol * max(alpha, 1.0):
        raise ValueError("x must lie on the sphere of radius alpha")
    lam = float(xstar @ x) / alpha**2
    if lam <= 0 or np.linalg.norm(xstar - lam * x) > rtol * max(np.linalg.norm(xstar), 1.0):
        raise ValueError("x* must be a positive multiple of x")
    S = np.atleast_2d(np.asarray(samples, dtype=float))
    diff = S - x
    inside = np.linalg.norm(S, axis=1) <= alpha
    margins = np.where(inside, -(diff @ xstar) - 0.5 * gamma * np.sum(diff**2, axis=1), np.inf)
    if gamma * alpha <= np.linalg.norm(xstar):
        case = "all"
        in_u = np.ones(len(S), dtype=bool)
    else:
        case = "local"
        in_u = ~inside | (np.linalg.norm(diff, axis=1) <= alpha)
    return StrongConvexityReport(margins=margins, in_neighborhood=in_u, case=case)


# --- smoothness inequalities -----------------------------------------------------------


def _dot(a, b):
    # works for scalars as well as arrays
    return float(np.vdot(np.asarray(a, dtype=float), np.asarray(b, dtype=float)))


def smoothness_three_point(F, gradF, L, xbar, z, x, gamma=0.0, beta=1.0):
    """Margins of the two smoothness three-point inequalities.

    Returns ``(m1, m2)`` with
    ``m1 = <gradF(z), x - xbar> - F(x) + F(xbar) + L/2 |x - z|^2`` and
    ``m2 = <gradF(z), x - xbar> - F(x) + F(xbar) - (gamma - beta L^2)/2 |x - xbar|^2 + |x - z|^2/(2 beta)``.
    """
    base = _dot(gradF(z), x - xbar) - F(x) + F(xbar)
    m1 = base + 0.5 * L * _dot(x - z, x - z)
    m2 = base - 0.5 * (gamma - beta * L**2) * _dot(x - xbar, x - xbar) + _dot(x - z, x - z) / (2 * beta)
    return m1, m2


def fb_condition_margin(F, gradF, G, prox_G, cfg: FbStepConfig, z, xbar):
    """Margin of the forward-backward descent condition at the step from ``z``.

    With ``x = prox_{tau G}(z - tau gradF(z))`` and the subgradient
    ``q = (z - tau gradF(z) - x)/tau`` of ``G`` at ``x``, returns
    ``<q + gradF(z), x - xbar> - [J(x) - J(xbar) + gamma/2 |x-xbar|^2 - zeta/(2 tau)|x - z|^2]``.
    """
    tau = cfg.tau
    w = z - tau * gradF(z)
    x = prox_G(w, tau)
    q = (w - x) / tau
    lhs = _dot(q + gradF(z), x - xbar)
    J = lambda v: F(v) + G(v)
    rhs = J(x) - J(xbar) + 0.5 * fb_gamma(cfg) * _dot(x - xbar, x - xbar) - cfg.zeta / (2 * tau) * _dot(x - z, x - z)
    return lhs - rhs
