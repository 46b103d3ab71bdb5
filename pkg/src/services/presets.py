"""Pinned experiments with acceptance predicates, one per coupling result being reproduced."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.config.exception_handler import config_exception
from src.config.settings import EstimatorSection, ExperimentConfig, parse_config
from src.entities.binding.cascade import build_zeta_cascade, dump_cascade
from src.entities.binding.forces import build_binding
from src.entities.polynomial.calculus import lie_derivative
from src.entities.polynomial.models import IndexedPolynomial
from src.entities.report import estimators
from src.entities.report.schemes import AcceptanceCheck
from src.entities.system.catalog import build_model, chain
from src.entities.system.operations import chain_vector_field
from src.entities.trajectory.engine import integrate_coupled, sample_noise
from .harness import (
    DISTANCE_STREAM_A,
    DISTANCE_STREAM_B,
    Acceptance,
    RunOutcome,
    run,
    run_free_ensemble,
    zeta_relative_error,
)

logger = logging.getLogger(__name__)

CHAIN_A_SQUARED = (0.0, 2.0, 5.0)
CHAIN_K_STAR = (2, 3, 3)
# Relative tolerance in units of dt for exact exponential identities.
EXACT_DECAY_SLACK = 10.0
CI_SIGMAS = 3.0
# The a^2 = 2 and 5 chains only leave their transient after t = 5.
CHAIN_RATE_HORIZON = 15
CHAIN_RATE_MEMBERS = 50
CHAIN_DECAY_HORIZON = 2.0
CHAIN_DECAY_MEMBERS = 20


@dataclass(frozen=True)
class Preset:
    name: str
    summary: str
    config_text: str
    acceptance: Acceptance
    banner: Callable[[], str] | None = None

    def config(self) -> ExperimentConfig:
        return parse_config(self.config_text, source=f"{self.name}.ini")


def _check(
    name: str, passed: bool, value: float | None = None, threshold: float | None = None, detail: str = ""
) -> AcceptanceCheck:
    return AcceptanceCheck(
        name=name,
        passed=bool(passed),
        value=None if value is None else float(value),
        threshold=None if threshold is None else float(threshold),
        detail=detail,
    )


def _slack(dt: float, times: np.ndarray) -> np.ndarray:
    return 1.0 + EXACT_DECAY_SLACK * dt * times


# ================================================
# toy-contraction
# ================================================
def _toy_contraction(outcome: RunOutcome) -> list[AcceptanceCheck]:
    report, dt = outcome.report, outcome.config.integrator.dt
    gamma = report.contraction.gamma if report.contraction else float("nan")
    zeta_err = report.zeta_max_relative_error
    return [
        _check("rho mean decay rate >= 0.9", gamma >= 0.9, gamma, 0.9),
        _check(
            "zeta(t) = zeta(0) e^{-2t} within 10 dt",
            zeta_err is not None and zeta_err <= EXACT_DECAY_SLACK * dt,
            zeta_err,
            EXACT_DECAY_SLACK * dt,
        ),
    ]


# ================================================
# gl-gap
# ================================================
def _gl_gap(outcome: RunOutcome) -> list[AcceptanceCheck]:
    traj, dt = outcome.trajectory, outcome.config.integrator.dt
    gap = float(outcome.model.params["gap"])
    norms = traj.rho_norm()
    envelope = np.exp(-gap * traj.times)[:, None] * norms[0][None, :] * _slack(dt, traj.times)[:, None]
    ratio = float(np.max(norms / np.maximum(envelope, np.finfo(float).tiny)))
    horizon = float(traj.times[-1])
    worst = float(np.min(-np.log(norms[-1] / norms[0]) / horizon))
    floor = gap - float(np.log(_slack(dt, horizon))) / horizon
    return [
        _check("pathwise |rho(t)| <= e^{-at}|rho(0)|(1 + 10 dt t)", ratio <= 1.0, ratio, 1.0),
        _check("worst measured rate >= gap", worst >= floor, worst, gap),
    ]


# ================================================
# rd-zeta
# ================================================
def _rd_zeta(outcome: RunOutcome) -> list[AcceptanceCheck]:
    traj, model, dt = outcome.trajectory, outcome.model, outcome.config.integrator.dt
    n = model.basis.n_modes
    t = traj.times[:, None]
    zeta2 = np.sum(traj.zeta_path**2, axis=-1)
    zeta_ratio = float(np.max(zeta2 / (zeta2[0][None] * np.exp(-t) * _slack(dt, t))))
    rho_v2 = np.sum(traj.rho_path[..., n:] ** 2, axis=-1)
    bound = rho_v2[0][None] * np.exp(-t) + 0.5 * (1.0 + zeta2[0][None]) * np.exp(-t)
    excess = float(np.max(rho_v2.mean(axis=1) - bound.mean(axis=1)))
    return [
        _check("pathwise |zeta(t)|^2 <= |zeta(0)|^2 e^{-t}(1 + 10 dt t)", zeta_ratio <= 1.0, zeta_ratio, 1.0),
        _check("ensemble |rho_v(t)|^2 below its envelope", excess <= 0.0, excess, 0.0),
    ]


# ================================================
# chain-cascade
# ================================================
def cascade_identities_hold(a_squared: float) -> tuple[bool, int]:
    """zeta_1 = rho_{k*-1}, L zeta_l = zeta_{l+1} - zeta_l, and L zeta_k* + G = -zeta_k*."""
    model = chain(a_squared)
    cascade = build_zeta_cascade(model)
    field = chain_vector_field(model)
    ks = cascade.k_star
    ok = cascade.zetas[0] == IndexedPolynomial.var("rho", ks - 1)
    for lower, upper in zip(cascade.zetas, cascade.zetas[1:]):
        ok &= (lie_derivative(lower, field) - (upper - lower)).is_zero()
    last = cascade.zetas[-1]
    ok &= (lie_derivative(last, field) + cascade.g_poly + last).is_zero()
    return bool(ok), ks


def _chain_start(model) -> tuple[np.ndarray, np.ndarray]:
    x0 = np.zeros(model.dim)
    x0[:2] = 0.5
    y0 = x0.copy()
    y0[:3] -= 0.5
    return x0, y0


def chain_zeta_decay_error(a_squared: float, dt: float, horizon: float, members: int, seed: int) -> float:
    """Max relative deviation of zeta_k*(t) from zeta_k*(0) e^{-t} over a noisy coupled ensemble."""
    model = chain(a_squared)
    binding = build_binding(model)
    x0, y0 = _chain_start(model)
    noise = sample_noise(model, round(horizon / dt), dt, seed, members=members)
    traj = integrate_coupled(model, binding, x0, y0, noise, record_every=10)
    err = zeta_relative_error(binding, traj, until=horizon)
    return float("nan") if err is None else err


def chain_noisy_rate(a_squared: float, dt: float, horizon: int, members: int, seed: int) -> float:
    model = chain(a_squared)
    binding = build_binding(model)
    x0, y0 = _chain_start(model)
    noise = sample_noise(model, round(horizon / dt), dt, seed, members=members)
    traj = integrate_coupled(model, binding, x0, y0, noise, record_every=round(0.1 / dt))
    series = [(float(t), float(v)) for t, v in zip(traj.times, traj.rho_norm().mean(axis=1))]
    return estimators.fit_contraction(series).gamma


def _chain_cascade(outcome: RunOutcome) -> list[AcceptanceCheck]:
    dt, seed = outcome.config.integrator.dt, outcome.config.ensemble.seed
    checks = []
    for a2, expected in zip(CHAIN_A_SQUARED, CHAIN_K_STAR):
        ok, ks = cascade_identities_hold(a2)
        checks.append(_check(f"a^2={a2:g}: cascade identities, k*={expected}", ok and ks == expected, ks, expected))
        err = chain_zeta_decay_error(a2, dt, CHAIN_DECAY_HORIZON, CHAIN_DECAY_MEMBERS, seed)
        checks.append(
            _check(f"a^2={a2:g}: zeta_k* exact decay within 10 dt", err <= EXACT_DECAY_SLACK * dt, err, EXACT_DECAY_SLACK * dt)
        )
        rate = chain_noisy_rate(a2, dt, CHAIN_RATE_HORIZON, CHAIN_RATE_MEMBERS, seed)
        checks.append(_check(f"a^2={a2:g}: fitted rho decay rate > 0", rate > 0.0, rate, 0.0))
    return checks


def _chain_banner() -> str:
    return "".join(dump_cascade(build_zeta_cascade(chain(a2))) for a2 in CHAIN_A_SQUARED)


# ================================================
# girsanov-martingale
# ================================================
def mean_density_ci(model_id: str, x0: np.ndarray, y0: np.ndarray, members: int, horizon: int, dt: float, seed: int):
    model = build_model(model_id)
    binding = build_binding(model)
    noise = sample_noise(model, round(horizon / dt), dt, seed, members=members)
    traj = integrate_coupled(model, binding, x0, y0, noise, record_every=round(1.0 / dt))
    valid = ~traj.girsanov.overflow
    density = np.exp(traj.girsanov.log_density[valid])
    return float(density.mean()), float(density.std(ddof=1) / np.sqrt(density.size))


def _girsanov(outcome: RunOutcome) -> list[AcceptanceCheck]:
    checks = []
    for row in outcome.report.density:
        dev = abs(row.mean_density - 1.0)
        checks.append(
            _check(f"toy2d: mean D^{row.n} within 3 se of 1", dev <= CI_SIGMAS * row.density_se, dev, CI_SIGMAS * row.density_se)
        )
    cfg = outcome.config
    model = chain()
    x0 = np.zeros(model.dim)
    x0[:2] = 0.5
    y0 = x0.copy()
    y0[1] += 0.2
    mean, se = mean_density_ci("chain", x0, y0, cfg.estimators.density_members, max(cfg.estimators.density_horizons), cfg.integrator.dt, cfg.ensemble.seed)
    checks.append(_check("chain: mean D within 3 se of 1", abs(mean - 1.0) <= CI_SIGMAS * se, abs(mean - 1.0), CI_SIGMAS * se))
    return checks


# ================================================
# mixing-distance
# ================================================
MIXING_MODELS = {
    "ginzburg_landau": ([1.0], [-1.0]),
    "reaction_diffusion": ([1.0], [-1.0]),
    "chain": ([1.0, 0.5], [-1.0, -0.5]),
}


def _start_distance(x0: np.ndarray, y0: np.ndarray) -> float:
    return estimators.dual_lipschitz_distance(x0[None, :], y0[None, :])


def model_distance_decay(
    model_id: str, xs: list[float], ys: list[float], opts: EstimatorSection, dt: float, seed: int
) -> tuple[bool, float, float]:
    """(monotone up to the floor, fitted rate, noise floor) for two free ensembles of one model."""
    model = build_model(model_id)
    x0, y0 = np.zeros(model.dim), np.zeros(model.dim)
    x0[: len(xs)], y0[: len(ys)] = xs, ys
    horizon = max(opts.distance_times)
    ens_a = run_free_ensemble(model, x0, horizon, dt, opts.distance_members, seed, DISTANCE_STREAM_A)
    ens_b = run_free_ensemble(model, y0, horizon, dt, opts.distance_members, seed, DISTANCE_STREAM_B)
    points = estimators.distance_series(ens_a, ens_b, opts.distance_times, cap=opts.sample_cap, seed=seed)
    floor = estimators.bootstrap_noise_floor(
        estimators.subsample(ens_a.final(), opts.sample_cap, seed),
        estimators.subsample(ens_b.final(), opts.sample_cap, seed + 1),
        n_boot=opts.noise_floor_boot,
        seed=seed,
        cap=opts.sample_cap,
    )
    monotone, fit = estimators.fit_distance_decay(points, floor, _start_distance(x0, y0))
    return monotone, fit.gamma, floor


def _mixing(outcome: RunOutcome) -> list[AcceptanceCheck]:
    cfg = outcome.config
    opts, dt, seed = cfg.estimators, cfg.integrator.dt, cfg.ensemble.seed
    report = outcome.report
    floor = report.noise_floor or 0.0
    monotone, fit = estimators.fit_distance_decay(
        report.distance_series, floor, _start_distance(*cfg.initial_states(outcome.model))
    )
    checks = [
        _check("toy2d: distance monotone up to noise floor", monotone, floor),
        _check("toy2d: fitted distance rate > 0", fit.gamma > 0.0, fit.gamma, 0.0),
    ]
    for model_id, (xs, ys) in MIXING_MODELS.items():
        monotone, gamma, floor = model_distance_decay(model_id, xs, ys, opts, dt, seed)
        checks.append(_check(f"{model_id}: distance monotone up to noise floor", monotone, floor))
        checks.append(_check(f"{model_id}: fitted distance rate > 0", gamma > 0.0, gamma, 0.0))
    return checks


# ================================================
# Registro
# ================================================
PRESETS: dict[str, Preset] = {
    p.name: p
    for p in [
        Preset(
            name="toy-contraction",
            summary="toy2d: zeta decays as e^{-2t}, mean |rho| at rate >= 0.9",
            config_text="""
[model]
id = toy2d
[integrator]
dt = 0.001
horizon = 5
[ensemble]
members = 200
seed = 1
[coupling]
x0 = 1.0, 0.0
y0 = -1.0, 0.5
[output]
name = toy-contraction
""",
            acceptance=_toy_contraction,
        ),
        Preset(
            name="gl-gap",
            summary="Ginzburg-Landau: |rho(t)| <= e^{-at}|rho(0)| on every path",
            config_text="""
[model]
id = ginzburg_landau
n_modes = 64
forced = 5
[integrator]
dt = 0.001
horizon = 3
record_every = 10
[ensemble]
members = 50
seed = 2
[coupling]
x0 = 1.0
y0 = -1.0, 0.5, 0.5
[estimators]
zeta_check = false
[output]
name = gl-gap
""",
            acceptance=_gl_gap,
        ),
        Preset(
            name="rd-zeta",
            summary="reaction-diffusion: mode-wise zeta decay and the rho_v envelope",
            config_text="""
[model]
id = reaction_diffusion
n_modes = 16
[integrator]
dt = 0.001
horizon = 5
record_every = 10
[ensemble]
members = 50
seed = 3
[coupling]
x0 = 1.0
y0 = 0.5
[output]
name = rd-zeta
""",
            acceptance=_rd_zeta,
        ),
        Preset(
            name="chain-cascade",
            summary="chain: derived zeta cascade, exact zeta_k* decay, positive rho decay",
            config_text="""
[model]
id = chain
a_squared = 0
[integrator]
dt = 0.001
horizon = 5
[ensemble]
members = 50
seed = 4
[coupling]
x0 = 0.5, 0.5
y0 = 0.0, 0.0, -0.5
[output]
name = chain-cascade
""",
            acceptance=_chain_cascade,
            banner=_chain_banner,
        ),
        Preset(
            name="girsanov-martingale",
            summary="mean Girsanov density within 3 standard errors of 1 (toy2d, chain)",
            config_text="""
[model]
id = toy2d
[integrator]
dt = 0.001
horizon = 1
[ensemble]
members = 20
seed = 5
[coupling]
x0 = 1.0, 0.0
y0 = 0.8, 0.1
[estimators]
density = true
density_horizons = 1..2
density_members = 2000
[output]
name = girsanov-martingale
""",
            acceptance=_girsanov,
        ),
        Preset(
            name="mixing-distance",
            summary="dual-Lipschitz distance between ensembles decays for all four models",
            config_text="""
[model]
id = toy2d
[integrator]
dt = 0.01
horizon = 1
[ensemble]
members = 20
seed = 6
[coupling]
x0 = 1.0, 0.0
y0 = -1.0, 0.5
[estimators]
distance = true
distance_times = 1..8
distance_members = 300
noise_floor_boot = 10
[output]
name = mixing-distance
""",
            acceptance=_mixing,
        ),
    ]
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise config_exception(
            f"unknown preset {name!r}; valid presets: {', '.join(PRESETS)}", details={"valid": list(PRESETS)}
        ) from None


def reproduce(
    name: str, out: str | Path | None = None, seed: int | None = None, jobs: int | None = None
) -> RunOutcome:
    preset = get_preset(name)
    config = preset.config().with_overrides(seed=seed, out=out, jobs=jobs)
    logger.info("reproducing %s (fingerprint %s)", name, config.fingerprint())
    return run(config, acceptance=preset.acceptance)
