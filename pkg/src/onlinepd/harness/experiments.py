"""Construction of scenes, problems and solvers from an :class:`ExperimentConfig`."""
from __future__ import annotations

import numpy as np

from ..flow import (
    KnownFlowPofbProblem,
    KnownFlowProblem,
    SyntheticScene,
    UnknownFlowProblem,
    generate_scene,
    synthetic_source,
)
from ..proxops import FlowEnergyParams
from ..solvers import PofbSolver, PopdSolver
from ..steprules import constant_steps
from .config import ExperimentConfig
from .imageio import load_image


def build_source(cfg: ExperimentConfig):
    if cfg.source:
        return load_image(cfg.source)
    n = cfg.source_size
    return synthetic_source(cfg.synthetic, (n, n), cfg.seed)


def build_scene(cfg: ExperimentConfig, source=None):
    src = build_source(cfg) if source is None else source
    return SyntheticScene(
        src,
        crop=(cfg.crop_h, cfg.crop_w),
        std=cfg.motion_std,
        noise=cfg.noise,
        disp_noise=cfg.disp_noise,
        seed=cfg.seed,
        integer_motion=cfg.integer_motion,
    )


def frame_stream(cfg: ExperimentConfig, source=None):
    return generate_scene(build_scene(cfg, source), cfg.N)


def step_config(cfg: ExperimentConfig):
    """Maximal ``sigma`` and minimal ``rho_tilde`` for the configured inputs."""
    return constant_steps(cfg.tau, cfg.kappa, cfg.gamma, cfg.rho, cfg.Lambda, cfg.Theta, 8.0)


def flow_params(cfg: ExperimentConfig):
    return FlowEnergyParams(
        theta=cfg.flow_theta,
        lambda1=cfg.lambda1,
        T=cfg.T,
        window=cfg.window,
        kernel_std=cfg.kernel_std,
        kernel_window=cfg.kernel_window,
    )


def build_solver(cfg: ExperimentConfig):
    """Solver for the configured mode; raises ``InfeasibleStepsError`` for bad steps."""
    x0 = np.zeros((cfg.crop_h, cfg.crop_w))
    kw = dict(compute_objective=cfg.compute_objective, timing=cfg.timing)
    if cfg.mode == "pofb":
        return PofbSolver(KnownFlowPofbProblem(cfg.alpha, cfg.fista_iters), cfg.tau, x0, **kw)
    steps = step_config(cfg)
    if cfg.mode == "popd-known":
        return PopdSolver(KnownFlowProblem(cfg.alpha), steps, x0, **kw)
    if cfg.mode == "popd-unknown":
        return PopdSolver(UnknownFlowProblem(cfg.alpha, flow_params(cfg), cfg.tau), steps, x0, **kw)
    raise ValueError(f"mode {cfg.mode!r} does not run a solver")
