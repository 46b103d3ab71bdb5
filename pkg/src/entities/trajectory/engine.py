"""Exponential time differencing for single and coupled ensembles with shared noise."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np

from src.config.exception_handler import blow_up_exception, config_exception, domain_exception
from src.entities.binding.models import BindingSpec
from src.entities.system.models import ModelSpec
from src.entities.system.operations import apply_noise
from .models import CoupledTrajectory, GirsanovAccumulator, NoisePath, Trajectory

logger = logging.getLogger(__name__)

Scheme = Literal["etd1", "etd2"]
SCHEMES: tuple[str, ...] = ("etd1", "etd2")
ROOTS_OF_UNITY = 32


def phi_functions(z: np.ndarray, n_roots: int = ROOTS_OF_UNITY) -> tuple[np.ndarray, np.ndarray]:
    """phi_1(z) = (e^z - 1)/z and phi_2(z) = (e^z - 1 - z)/z^2.

    Evaluated as contour means over a half circle of radius 1 around each
    real z, which avoids the cancellation of the closed forms near 0.
    """
    z = np.asarray(z, dtype=float)
    roots = np.exp(1j * np.pi * (np.arange(n_roots) + 0.5) / n_roots)
    lr = z[..., None] + roots
    e = np.exp(lr)
    phi1 = ((e - 1.0) / lr).mean(axis=-1).real
    phi2 = ((e - 1.0 - lr) / lr**2).mean(axis=-1).real
    return phi1, phi2


@dataclass(frozen=True)
class StepCoefficients:
    """Per-mode factors of one step of size h for the diagonal spectrum."""

    h: float
    exp: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray

    @classmethod
    def build(cls, model: ModelSpec, h: float) -> StepCoefficients:
        z = h * model.linear_spectrum
        phi1, phi2 = phi_functions(z)
        return cls(h=h, exp=np.exp(z), phi1=phi1, phi2=phi2)


def sample_noise(
    model: ModelSpec,
    steps: int,
    dt: float,
    seed: int,
    stream: int = 0,
    members: int = 1,
) -> NoisePath:
    """Member j draws from SeedSequence(seed, spawn_key=(stream + j,)).

    The result only depends on (seed, stream + j) per member, so an ensemble
    split into chunks reproduces the unsplit one bit for bit.
    """
    if not dt > 0:
        raise config_exception("dt must be > 0", details={"dt": dt})
    if steps < 0 or members < 1:
        raise config_exception("steps must be >= 0 and members >= 1", details={"steps": steps, "members": members})
    increments = np.empty((steps, members, model.noise_dim))
    scale = np.sqrt(dt)
    for j in range(members):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream + j,)))
        increments[:, j, :] = rng.standard_normal((steps, model.noise_dim)) * scale
    return NoisePath(dt=dt, increments=increments, seed=seed, stream=stream)


def zero_noise(model: ModelSpec, steps: int, dt: float, members: int = 1) -> NoisePath:
    if not dt > 0:
        raise config_exception("dt must be > 0", details={"dt": dt})
    return NoisePath(dt=dt, increments=np.zeros((steps, members, model.noise_dim)))


def _initial(model: ModelSpec, x0: np.ndarray, members: int) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.shape[-1] != model.dim:
        raise domain_exception("state dimension mismatch", details={"expected": model.dim, "got": x0.shape[-1]})
    if x0.ndim == 1:
        x0 = np.broadcast_to(x0, (members, model.dim))
    if x0.shape[0] != members:
        raise domain_exception(
            "initial ensemble and noise members differ", details={"states": x0.shape[0], "noise": members}
        )
    return x0.copy()


def _check_scheme(scheme: str) -> None:
    if scheme not in SCHEMES:
        raise config_exception(f"unknown scheme {scheme!r}", details={"valid": list(SCHEMES)})


def _x_step(
    model: ModelSpec, coef: StepCoefficients, x: np.ndarray, dw: np.ndarray, scheme: Scheme
) -> tuple[np.ndarray, np.ndarray]:
    """(stage, new x): the exponential Euler stage and, under etd2, its corrected value."""
    n_x = model.nonlinearity(x)
    stage = coef.exp * x + coef.h * coef.phi1 * n_x + coef.phi1 * apply_noise(model, dw)
    if scheme == "etd1":
        return stage, stage
    return stage, stage + coef.h * coef.phi2 * (model.nonlinearity(stage) - n_x)


def _check_noise(model: ModelSpec, noise: NoisePath) -> None:
    if noise.noise_dim != model.noise_dim:
        raise domain_exception(
            "noise dimension mismatch", details={"expected": model.noise_dim, "got": noise.noise_dim}
        )


def _record_steps(steps: int, every: int) -> list[int]:
    if every < 1:
        raise config_exception("record_every must be >= 1", details={"record_every": every})
    marks = list(range(0, steps + 1, every))
    if marks[-1] != steps:
        marks.append(steps)
    return marks


def _steps_per_unit(dt: float) -> int | None:
    per_unit = round(1.0 / dt)
    return per_unit if per_unit >= 1 and abs(per_unit * dt - 1.0) < 1e-9 else None


class _UnitSup:
    """Running sup of V over each unit interval [n, n+1], endpoints included."""

    def __init__(self, dt: float, steps: int, members: int):
        self.per_unit = _steps_per_unit(dt)
        units = steps // self.per_unit if self.per_unit else 0
        self.values = np.zeros((units, members))

    def update(self, step: int, v: np.ndarray) -> None:
        if not self.per_unit:
            return
        unit, offset = divmod(step, self.per_unit)
        if unit < len(self.values):
            np.maximum(self.values[unit], v, out=self.values[unit])
        if offset == 0 and unit > 0:
            np.maximum(self.values[unit - 1], v, out=self.values[unit - 1])


def integrate(
    model: ModelSpec, x0: np.ndarray, noise: NoisePath, record_every: int = 1, scheme: Scheme = "etd1"
) -> Trajectory:
    """x_{n+1} = E x_n + h phi_1 F(x_n) + phi_1 Q dw_n.

    ``etd2`` corrects the step by h phi_2 (F(stage) - F(x_n)).
    """
    _check_noise(model, noise)
    _check_scheme(scheme)
    coef = StepCoefficients.build(model, noise.dt)
    x = _initial(model, x0, noise.members)
    marks = _record_steps(noise.steps, record_every)
    records = [x.copy()]
    sup = _UnitSup(noise.dt, noise.steps, noise.members)
    sup.update(0, model.lyapunov(x))
    next_mark = 1
    for n in range(noise.steps):
        _, x = _x_step(model, coef, x, noise.increments[n], scheme)
        if not np.all(np.isfinite(x)):
            t = (n + 1) * noise.dt
            logger.warning("blow-up at t=%g in %d members", t, int((~np.isfinite(x)).any(axis=-1).sum()))
            partial = Trajectory(
                times=np.array(marks[: len(records)]) * noise.dt,
                states=np.stack(records),
                w_sup=sup.values,
                dt=noise.dt,
            )
            raise blow_up_exception(t, partial)
        sup.update(n + 1, model.lyapunov(x))
        if next_mark < len(marks) and marks[next_mark] == n + 1:
            records.append(x.copy())
            next_mark += 1
    return Trajectory(times=np.array(marks) * noise.dt, states=np.stack(records), w_sup=sup.values, dt=noise.dt)


def integrate_coupled(
    model: ModelSpec,
    binding: BindingSpec,
    x0: np.ndarray,
    y0: np.ndarray,
    noise: NoisePath,
    scheme: Scheme = "etd2",
    record_every: int = 1,
    keep_forcing: bool = False,
) -> CoupledTrajectory:
    """Integrates x under w and rho = y - x pathwise; y = x + rho sees w + int G dt.

    The rho equation carries no noise. ``etd1`` treats rho exactly like x, so
    x + rho coincides with y integrated alone under the shifted noise;
    ``etd2`` corrects x and rho from one shared stage, so the step seen by
    any function of (x, rho), such as zeta, is the same second-order step.
    """
    _check_noise(model, noise)
    if binding.model_id is not model.id or binding.noise_dim != model.noise_dim:
        raise domain_exception(
            "binding does not match model", details={"binding": str(binding.model_id), "model": str(model.id)}
        )
    _check_scheme(scheme)
    coef = StepCoefficients.build(model, noise.dt)
    h, members = noise.dt, noise.members
    x = _initial(model, x0, members)
    rho = _initial(model, y0, members) - x
    marks = _record_steps(noise.steps, record_every)
    acc = GirsanovAccumulator.start(members)
    forcing = np.empty((noise.steps, members, model.noise_dim)) if keep_forcing else None
    sup_x = _UnitSup(h, noise.steps, members)
    sup_y = _UnitSup(h, noise.steps, members)
    sup_x.update(0, model.lyapunov(x))
    sup_y.update(0, model.lyapunov(x + rho))
    xs, rhos, zetas, logs = [x.copy()], [rho.copy()], [binding.zeta_rho(x, rho)], [acc.log_density.copy()]

    def partial() -> CoupledTrajectory:
        return CoupledTrajectory(
            times=np.array(marks[: len(xs)]) * h,
            x_path=np.stack(xs),
            rho_path=np.stack(rhos),
            zeta_path=np.stack(zetas),
            log_density_path=np.stack(logs),
            girsanov=acc,
            w_sup_x=sup_x.values,
            w_sup_y=sup_y.values,
            dt=h,
            scheme=scheme,
            forcing=forcing,
        )

    next_mark = 1
    for n in range(noise.steps):
        dw = noise.increments[n]
        g = binding.force_rho(x, rho)
        acc.update(g, dw, h)
        if forcing is not None:
            forcing[n] = g
        n_rho = model.difference(x, rho) + apply_noise(model, g)
        x_stage, x_new = _x_step(model, coef, x, dw, scheme)
        rho_new = coef.exp * rho + h * coef.phi1 * n_rho
        if scheme == "etd2":
            n_pred = model.difference(x_stage, rho_new) + apply_noise(model, binding.force_rho(x_stage, rho_new))
            rho_new = rho_new + h * coef.phi2 * (n_pred - n_rho)
        x, rho = x_new, rho_new
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(rho))):
            t = (n + 1) * h
            logger.warning("blow-up at t=%g in the coupled ensemble", t)
            raise blow_up_exception(t, partial())
        sup_x.update(n + 1, model.lyapunov(x))
        sup_y.update(n + 1, model.lyapunov(x + rho))
        if next_mark < len(marks) and marks[next_mark] == n + 1:
            xs.append(x.copy())
            rhos.append(rho.copy())
            zetas.append(binding.zeta_rho(x, rho))
            logs.append(acc.log_density.copy())
            next_mark += 1
    if acc.overflow.any():
        logger.warning("girsanov overflow in %d of %d members", int(acc.overflow.sum()), members)
    return partial()


def girsanov_density(traj: CoupledTrajectory) -> float | np.ndarray:
    """exp(int G dw - 1/2 int |G|^2 dt); a float for a single member."""
    density = traj.girsanov.density()
    return float(density[0]) if density.shape == (1,) else density


def shift_noise(noise: NoisePath, traj: CoupledTrajectory, inverse: bool = False) -> NoisePath:
    """dw~ = dw + G dt (or dw - G dt with ``inverse``) from the recorded forcing."""
    if traj.forcing is None:
        raise domain_exception("trajectory was integrated without keep_forcing")
    if traj.forcing.shape != noise.increments.shape or not np.isclose(traj.dt, noise.dt):
        raise domain_exception(
            "noise and trajectory length mismatch",
            details={"noise": list(noise.increments.shape), "forcing": list(traj.forcing.shape)},
        )
    sign = -1.0 if inverse else 1.0
    return NoisePath(
        dt=noise.dt,
        increments=noise.increments + sign * traj.forcing * noise.dt,
        seed=noise.seed,
        stream=noise.stream,
    )


def resimulate_bound_copy(
    model: ModelSpec, y0: np.ndarray, shifted: NoisePath, record_every: int = 1
) -> Trajectory:
    """y integrated on its own under the shifted noise."""
    return integrate(model, y0, shifted, record_every=record_every)
