"""Step lengths and testing parameters for the online splitting methods.

The primal-dual conditions checked here are, at frame ``k``:

* coupling: ``eta_k = phi_k tau = psi_k sigma``
* proximal predictor restriction:
  ``rho_tilde >= Theta eta_{k+1} / (2 kappa (1+sigma rho) psi_k sigma_tilde^2)
  + 1/(2 sigma) - 1/sigma_tilde``
* primal metric update:
  ``phi_k (1+gamma tau) >= phi_{k+1} Lambda + phi_k tau sigma ||K||^2 / ((1-kappa)(1+sigma rho))``
* metric positivity: ``1 >= tau sigma ||K||^2``
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "InfeasibleStepsError",
    "StepConfig",
    "TestingParams",
    "ConditionReport",
    "FbStepConfig",
    "constant_steps",
    "exponential_steps",
    "steps_for_sigma",
    "constant_testing",
    "exponential_testing",
    "validate_conditions",
    "fb_gamma",
    "fb_regret_applicable",
]

CONDITION_NAMES = (
    "coupling",
    "predictor_restriction",
    "primal_metric_update",
    "metric_positivity",
)


class InfeasibleStepsError(ValueError):
    """No positive step satisfies the named inequality."""

    def __init__(self, condition, message):
        self.condition = condition
        super().__init__(f"{condition}: {message}")


@dataclass(frozen=True)
class StepConfig:
    """Constant step lengths of the primal-dual method and their parameters.

    ``regime`` is ``"constant"`` (testing parameters ``phi=1``, ``psi=tau/sigma``)
    or ``"exponential"`` (``phi_{k+1} = phi_k (1 + rho sigma)``).
    """

    tau: float
    sigma: float
    sigma_tilde: float
    rho_tilde: float
    kappa: float
    gamma: float
    rho: float
    Lambda: float
    Theta: float
    Knorm_sq: float
    regime: str = "constant"

    def testing(self, N, phi0=1.0):
        if self.regime == "exponential":
            return exponential_testing(self, phi0, N)
        return constant_testing(self, N, phi0)


@dataclass(frozen=True)
class TestingParams:
    """Testing parameter sequences ``phi_k, psi_k, eta_k`` for ``k = 0..N``."""

    __test__ = False  # not a pytest class

    phi: np.ndarray
    psi: np.ndarray
    eta: np.ndarray

    def __len__(self):
        return len(self.phi)


@dataclass(frozen=True)
class ConditionReport:
    k: int
    margins: dict = field(default_factory=dict)

    @property
    def ok(self):
        return all(v >= 0 for v in self.margins.values())

    @property
    def violated(self):
        return [name for name in CONDITION_NAMES if self.margins[name] < 0]

    @property
    def first_violation(self):
        v = self.violated
        return v[0] if v else None

    def __str__(self):
        lines = [f"conditions at k={self.k}:"]
        for name in CONDITION_NAMES:
            m = self.margins[name]
            lines.append(f"  {name:<22s} margin {m: .6e} {'ok' if m >= 0 else 'VIOLATED'}")
        return "\n".join(lines)


@dataclass(frozen=True)
class FbStepConfig:
    """Step parameters of the forward-backward method."""

    tau: float
    zeta: float = 1.0
    L: float = 1.0
    gammaF: float = 0.0
    gammaG: float = 0.0
    Lambda: float = 1.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0 < self.zeta <= 1:
            raise ValueError("zeta must lie in (0, 1]")
        if self.L < 0 or self.gammaF < 0 or self.gammaG < 0:
            raise ValueError("L, gammaF and gammaG must be non-negative")

    @property
    def gamma(self):
        return fb_gamma(self)


# --- condition margins --------------------------------------------------------


def _check_common(tau, kappa, Theta, Knorm_sq):
    if not tau > 0:
        raise ValueError("tau must be positive")
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    if not Theta > 0:
        raise ValueError("Theta must be positive")
    if not Knorm_sq >= 0:
        raise ValueError("Knorm_sq must be non-negative")


def _metric_margin(tau, sigma, kappa, gamma, rho, Lambda, Knorm_sq, growth=1.0):
    # primal metric update with phi_{k+1} / phi_k = growth
    return (1.0 + gamma * tau) - growth * Lambda - tau * sigma * Knorm_sq / ((1.0 - kappa) * (1.0 + sigma * rho))


def _restriction_rhs(sigma, sigma_tilde, kappa, rho, Theta, eta_next, psi_k, sigma_next=None):
    sigma_next = sigma if sigma_next is None else sigma_next
    return (
        Theta * eta_next / (2.0 * kappa * (1.0 + sigma * rho) * psi_k * sigma_tilde**2)
        + 1.0 / (2.0 * sigma_next)
        - 1.0 / sigma_tilde
    )


def _largest_sigma(sigma, ok):
    # shrink by a growing number of ulps until the floating-point margins are non-negative
    step = np.finfo(float).eps
    for _ in range(64):
        if ok(sigma):
            return sigma
        sigma = sigma * (1.0 - step)
        step *= 2.0
    raise InfeasibleStepsError("primal_metric_update", "could not find a sigma satisfying the conditions in floating point")


# --- step rules ----------------------------------------------------------------


def steps_for_sigma(tau, sigma, kappa, gamma, rho, Lambda, Theta, Knorm_sq=8.0, regime="constant"):
    """Complete a step configuration for a given ``sigma`` without checking it.

    ``sigma_tilde`` and the minimal ``rho_tilde`` follow the chosen regime.
    """
    _check_common(tau, kappa, Theta, Knorm_sq)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if regime == "constant":
        sigma_tilde = Theta * sigma / (kappa * (1.0 + sigma * rho))
        eta_next, psi_k = tau, tau / sigma
    elif regime == "exponential":
        sigma_tilde = Theta * sigma / kappa
        growth = 1.0 + rho * sigma
        eta_next, psi_k = tau * growth, tau / sigma
    else:
        raise ValueError(f"unknown regime {regime!r}")
    rhs = _restriction_rhs(sigma, sigma_tilde, kappa, rho, Theta, eta_next, psi_k)
    if regime == "constant":
        closed = (1.0 - kappa * (1.0 + sigma * rho) / Theta) / (2.0 * sigma)
    else:
        closed = (1.0 - kappa / Theta) / (2.0 * sigma)
    rho_tilde = max(0.0, closed, rhs)
    return StepConfig(
        tau=float(tau),
        sigma=float(sigma),
        sigma_tilde=float(sigma_tilde),
        rho_tilde=float(rho_tilde),
        kappa=float(kappa),
        gamma=float(gamma),
        rho=float(rho),
        Lambda=float(Lambda),
        Theta=float(Theta),
        Knorm_sq=float(Knorm_sq),
        regime=regime,
    )


def constant_steps(tau, kappa, gamma, rho, Lambda, Theta, Knorm_sq=8.0):
    """Maximal ``sigma`` and minimal ``rho_tilde`` for constant testing parameters.

    Raises
    ------
    InfeasibleStepsError
        If no positive ``sigma`` satisfies the primal metric update.
    """
    _check_common(tau, kappa, Theta, Knorm_sq)
    if gamma < 0 or rho < 0 or Lambda <= 0:
        raise ValueError("need gamma >= 0, rho >= 0, Lambda > 0")
    a = 1.0 + gamma * tau - Lambda
    if not a > 0:
        raise InfeasibleStepsError(
            "primal_metric_update",
            f"1 + gamma*tau = {1.0 + gamma * tau:g} does not exceed Lambda = {Lambda:g}; no sigma > 0 is feasible",
        )
    c = tau * Knorm_sq / (1.0 - kappa)
    cap = math.inf if Knorm_sq == 0 else 1.0 / (tau * Knorm_sq)
    if rho == 0:
        sigma = a / c if c > 0 else math.inf
    elif c > a * rho:
        sigma = a / (c - a * rho)
    else:
        sigma = math.inf
    sigma = min(sigma, cap)
    if not math.isfinite(sigma):
        raise InfeasibleStepsError("metric_positivity", "sigma is unbounded since ||K|| = 0")

    def ok(s):
        return (
            _metric_margin(tau, s, kappa, gamma, rho, Lambda, Knorm_sq) >= 0
            and 1.0 - tau * s * Knorm_sq >= 0
        )

    sigma = _largest_sigma(sigma, ok)
    return steps_for_sigma(tau, sigma, kappa, gamma, rho, Lambda, Theta, Knorm_sq, "constant")


def exponential_steps(tau, kappa, gamma, rho, Lambda, Theta, Knorm_sq=8.0):
    """Maximal ``sigma`` for exponentially growing testing parameters.

    The primal metric update then reads
    ``1 + gamma tau >= tau sigma ||K||^2 / ((1-kappa)(1+rho sigma)) + (1+rho sigma) Lambda``.
    """
    _check_common(tau, kappa, Theta, Knorm_sq)
    if gamma < 0 or rho < 0 or Lambda <= 0:
        raise ValueError("need gamma >= 0, rho >= 0, Lambda > 0")
    a = 1.0 + gamma * tau
    if not a > Lambda:
        raise InfeasibleStepsError(
            "primal_metric_update",
            f"1 + gamma*tau = {a:g} does not exceed Lambda = {Lambda:g}; no sigma > 0 is feasible",
        )
    c = tau * Knorm_sq / (1.0 - kappa)
    # Lambda rho^2 s^2 + (c + 2 Lambda rho - a rho) s + (Lambda - a) <= 0
    qa = Lambda * rho * rho
    qb = c + 2.0 * Lambda * rho - a * rho
    qc = Lambda - a
    if qa == 0:
        sigma = -qc / qb if qb > 0 else math.inf
    else:
        # positive root in the cancellation-free form (qc < 0)
        sigma = -2.0 * qc / (qb + math.sqrt(qb * qb - 4.0 * qa * qc))
    cap = math.inf if Knorm_sq == 0 else 1.0 / (tau * Knorm_sq)
    sigma = min(sigma, cap)
    if not math.isfinite(sigma):
        raise InfeasibleStepsError("metric_positivity", "sigma is unbounded since ||K|| = 0")

    def ok(s):
        g = 1.0 + rho * s
        return (
            _metric_margin(tau, s, kappa, gamma, rho, Lambda, Knorm_sq, growth=g) >= 0
            and 1.0 - tau * s * Knorm_sq >= 0
        )

    sigma = _largest_sigma(sigma, ok)
    return steps_for_sigma(tau, sigma, kappa, gamma, rho, Lambda, Theta, Knorm_sq, "exponential")


# --- testing parameters ---------------------------------------------------------


def constant_testing(cfg: StepConfig, N, phi0=1.0):
    """``phi_k = phi0``, ``eta_k = phi0 tau``, ``psi_k = phi0 tau / sigma`` for ``k = 0..N``."""
    phi = np.full(N + 1, float(phi0))
    return TestingParams(phi=phi, psi=phi * cfg.tau / cfg.sigma, eta=phi * cfg.tau)


def exponential_testing(cfg: StepConfig, phi0, N):
    """Geometric testing parameters ``phi_{k+1} = phi_k (1 + rho sigma)``."""
    if not phi0 > 0:
        raise ValueError("phi0 must be positive")
    phi = phi0 * (1.0 + cfg.rho * cfg.sigma) ** np.arange(N + 1, dtype=float)
    return TestingParams(phi=phi, psi=(cfg.tau / cfg.sigma) * phi, eta=cfg.tau * phi)


def _snap(margin, scale):
    # conditions that hold with equality in exact arithmetic may come out a
    # few ulps negative; those are reported as zero
    return 0.0 if -16 * np.finfo(float).eps * scale <= margin < 0 else float(margin)


def validate_conditions(cfg: StepConfig, tp: TestingParams, k=0):
    """Margins of the four step conditions at frame ``k``; negative means violated."""
    if k + 1 >= len(tp):
        raise ValueError(f"testing parameters too short for k={k}")
    phi, psi, eta = tp.phi, tp.psi, tp.eta
    s, t = cfg.sigma, cfg.tau
    scale = max(abs(eta[k]), abs(phi[k] * t), abs(psi[k] * s), 1e-300)
    coupling = -max(abs(eta[k] - phi[k] * t), abs(eta[k] - psi[k] * s)) / scale
    # tolerate rounding in the products
    if coupling > -8 * np.finfo(float).eps:
        coupling = 0.0
    rhs_b = _restriction_rhs(s, cfg.sigma_tilde, cfg.kappa, cfg.rho, cfg.Theta, eta[k + 1], psi[k])
    growth = phi[k + 1] / phi[k]
    metric = _metric_margin(t, s, cfg.kappa, cfg.gamma, cfg.rho, cfg.Lambda, cfg.Knorm_sq, growth=growth)
    metric_scale = 1.0 + cfg.gamma * t + growth * cfg.Lambda
    restriction_scale = max(abs(cfg.rho_tilde), 1.0 / s, 1.0 / cfg.sigma_tilde)
    margins = {
        "coupling": coupling,
        "predictor_restriction": _snap(cfg.rho_tilde - rhs_b, restriction_scale),
        "primal_metric_update": phi[k] * _snap(metric, metric_scale),
        "metric_positivity": 1.0 - t * s * cfg.Knorm_sq,
    }
    return ConditionReport(k=k, margins=margins)


# --- forward-backward -----------------------------------------------------------


def fb_gamma(cfg: FbStepConfig):
    """Effective strong convexity factor of the forward-backward step.

    ``gammaG + gammaF - tau L^2 / zeta`` when ``gammaF > 0``, otherwise
    ``gammaG`` subject to ``tau L <= zeta``.
    """
    if cfg.gammaF > 0:
        g = cfg.gammaG + cfg.gammaF - cfg.tau * cfg.L**2 / cfg.zeta
    else:
        if cfg.tau * cfg.L > cfg.zeta:
            raise InfeasibleStepsError("fb_step", f"tau*L = {cfg.tau * cfg.L:g} exceeds zeta = {cfg.zeta:g}")
        g = cfg.gammaG
    if g < 0:
        raise InfeasibleStepsError("fb_step", f"effective gamma = {g:g} is negative")
    return g


def fb_regret_applicable(cfg: FbStepConfig):
    """Whether ``1 + gamma tau >= Lambda`` holds, so the constant-step regret bound applies."""
    return 1.0 + fb_gamma(cfg) * cfg.tau >= cfg.Lambda
