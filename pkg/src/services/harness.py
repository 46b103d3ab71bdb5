"""Runs one experiment: coupled ensemble, estimators, report files and the ledger row."""

from __future__ import annotations

import csv
import json
import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sqlmodel import Session

from src.config.base import configure_ledger
from src.config.exception_handler import (
    EXIT_ACCEPTANCE,
    EXIT_BLOW_UP,
    EXIT_OK,
    BlowUpError,
    CouplingException,
)
from src.config.settings import ExperimentConfig
from src.entities.binding.forces import build_binding
from src.entities.binding.models import BindingSpec
from src.entities.report import estimators
from src.entities.report.repository import experiment_run_repository
from src.entities.report.schemes import AcceptanceCheck, EstimatorReport, ExperimentRunCreate
from src.entities.system.models import ModelSpec
from src.entities.trajectory.engine import integrate, integrate_coupled, sample_noise
from src.entities.trajectory.io import write_trajectory_csv
from src.entities.trajectory.models import CoupledTrajectory, GirsanovAccumulator, Trajectory

logger = logging.getLogger(__name__)

# Stream offsets keep the auxiliary ensembles disjoint from the coupled one.
DISTANCE_STREAM_A = 1_000_000
DISTANCE_STREAM_B = 2_000_000
LYAPUNOV_STREAM = 3_000_000
QUANTILES = (0.05, 0.5, 0.95)


@dataclass
class RunOutcome:
    config: ExperimentConfig
    model: ModelSpec
    binding: BindingSpec
    report: EstimatorReport
    trajectory: CoupledTrajectory | None
    out_dir: Path
    files: dict[str, Path] = field(default_factory=dict)
    exit_code: int = EXIT_OK


Acceptance = Callable[[RunOutcome], list[AcceptanceCheck]]


# ================================================
# Ensamble
# ================================================
def _chunks(members: int, size: int) -> list[tuple[int, int]]:
    return [(start, min(size, members - start)) for start in range(0, members, size)]


def merge_coupled(parts: list[CoupledTrajectory]) -> CoupledTrajectory:
    """Concatenates chunked ensembles along the member axis."""
    if len(parts) == 1:
        return parts[0]
    first = parts[0]
    return CoupledTrajectory(
        times=first.times,
        x_path=np.concatenate([p.x_path for p in parts], axis=1),
        rho_path=np.concatenate([p.rho_path for p in parts], axis=1),
        zeta_path=np.concatenate([p.zeta_path for p in parts], axis=1),
        log_density_path=np.concatenate([p.log_density_path for p in parts], axis=1),
        girsanov=GirsanovAccumulator(
            log_density=np.concatenate([p.girsanov.log_density for p in parts]),
            g_l2=np.concatenate([p.girsanov.g_l2 for p in parts]),
            overflow=np.concatenate([p.girsanov.overflow for p in parts]),
        ),
        w_sup_x=np.concatenate([p.w_sup_x for p in parts], axis=1),
        w_sup_y=np.concatenate([p.w_sup_y for p in parts], axis=1),
        dt=first.dt,
        scheme=first.scheme,
    )


def run_coupled_ensemble(
    config: ExperimentConfig, model: ModelSpec, binding: BindingSpec
) -> CoupledTrajectory:
    """Chunks share nothing but the config; member j always uses stream j."""
    x0, y0 = config.initial_states(model)
    dt, steps, seed = config.integrator.dt, config.steps, config.ensemble.seed
    chunks = _chunks(config.ensemble.members, config.ensemble.chunk)
    logger.info(
        "dispatching %d members of %s in %d chunks on %d workers",
        config.ensemble.members,
        model.id,
        len(chunks),
        config.ensemble.jobs,
    )

    def work(chunk: tuple[int, int]) -> CoupledTrajectory:
        start, size = chunk
        noise = sample_noise(model, steps, dt, seed, stream=start, members=size)
        return integrate_coupled(
            model, binding, x0, y0, noise, scheme=config.integrator.scheme, record_every=config.record_every
        )

    with ThreadPoolExecutor(max_workers=config.ensemble.jobs) as pool:
        parts = list(pool.map(work, chunks))
    return merge_coupled(parts)


def run_free_ensemble(
    model: ModelSpec, x0: np.ndarray, horizon: int, dt: float, members: int, seed: int, stream: int
) -> Trajectory:
    """Uncoupled ensemble recorded at integer times."""
    per_unit = round(1.0 / dt)
    noise = sample_noise(model, horizon * per_unit, dt, seed, stream=stream, members=members)
    return integrate(model, x0, noise, record_every=per_unit)


# ================================================
# Estimadores
# ================================================
def zeta_relative_error(binding: BindingSpec, traj: CoupledTrajectory, until: float) -> float | None:
    """Max |zeta(t) - zeta(0) e^{-rt}| / |zeta(0) e^{-rt}| over components with a claimed rate r."""
    rates = binding.zeta_rates
    claimed = np.flatnonzero(np.isfinite(rates)) if rates.size else np.array([], dtype=int)
    if claimed.size == 0:
        return None
    mask = traj.times <= until + 1e-12
    times = traj.times[mask]
    zeta = traj.zeta_path[mask][..., claimed]
    start = zeta[0]
    valid = np.abs(start) > 1e-12
    if not valid.any():
        return None
    rate = np.broadcast_to(rates[claimed], start.shape)[valid]
    exact = start[valid][None, :] * np.exp(-rate[None, :] * times[:, None])
    return float((np.abs(zeta[:, valid] - exact) / np.abs(exact)).max())


def _mean_rho_series(traj: CoupledTrajectory) -> list[tuple[float, float]]:
    means = traj.rho_norm().mean(axis=1)
    return [(float(t), float(m)) for t, m in zip(traj.times, means)]


def _lyapunov_direction(x0: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(x0)
    if norm > 0:
        return x0 / norm
    e = np.zeros_like(x0)
    e[0] = 1.0
    return e


def compute_estimators(
    config: ExperimentConfig,
    model: ModelSpec,
    binding: BindingSpec,
    traj: CoupledTrajectory,
    report: EstimatorReport,
) -> None:
    opts = config.estimators
    dt, seed = config.integrator.dt, config.ensemble.seed
    x0, y0 = config.initial_states(model)

    if opts.contraction:
        series = _mean_rho_series(traj)
        if all(v > 0 for _, v in series):
            report.contraction = estimators.fit_contraction(series)
        else:
            logger.info("contraction fit skipped: rho vanishes on the recorded grid")
    if opts.zeta_check:
        report.zeta_max_relative_error = zeta_relative_error(binding, traj, opts.zeta_check_until)

    if opts.distance:
        horizon = max(opts.distance_times)
        ens_a = run_free_ensemble(model, x0, horizon, dt, opts.distance_members, seed, DISTANCE_STREAM_A)
        ens_b = run_free_ensemble(model, y0, horizon, dt, opts.distance_members, seed, DISTANCE_STREAM_B)
        if opts.distance_members > opts.sample_cap:
            logger.info("subsampling %d members to the cap %d", opts.distance_members, opts.sample_cap)
        report.distance_series = estimators.distance_series(
            ens_a, ens_b, opts.distance_times, cap=opts.sample_cap, seed=seed
        )
        if opts.noise_floor_boot:
            a = estimators.subsample(ens_a.final(), opts.sample_cap, seed)
            b = estimators.subsample(ens_b.final(), opts.sample_cap, seed + 1)
            report.noise_floor = estimators.bootstrap_noise_floor(
                a, b, n_boot=opts.noise_floor_boot, seed=seed, cap=opts.sample_cap
            )
        if len(report.distance_series) + 1 >= estimators.MIN_FIT_POINTS:
            start = estimators.dual_lipschitz_distance(x0[None, :], y0[None, :])
            _, report.distance_fit = estimators.fit_distance_decay(
                report.distance_series, report.noise_floor or 0.0, start
            )

    if opts.lyapunov:
        direction = _lyapunov_direction(x0)
        states = [s * direction for s in opts.lyapunov_scales]
        report.lyapunov = estimators.lyapunov_fit(
            model, states, opts.samples_per_state, dt=dt, seed=seed + LYAPUNOV_STREAM
        )

    if opts.axk:
        report.axk = estimators.axk_sweep(
            model, x0, opts.axk_ks, opts.axk_horizon, opts.axk_members, dt=dt, seed=seed
        )

    if opts.density:
        report.density, report.gamma2_hat = estimators.density_diagnostics(
            model, binding, x0, y0, opts.density_horizons, opts.density_members, dt=dt, seed=seed, k=opts.density_k
        )

    if opts.growth:
        xs = traj.x_path[-1]
        report.growth = estimators.fit_growth_bound(binding, model, xs, np.roll(xs, 1, axis=0) + (y0 - x0))


# ================================================
# Salidas
# ================================================
def report_json(report: EstimatorReport) -> str:
    return json.dumps(report.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def write_plot_csv(path: Path, traj: CoupledTrajectory, fingerprint: str) -> None:
    rho = traj.rho_norm()
    zeta = np.abs(traj.zeta_path)
    columns = ["t", "rho_mean", *(f"rho_q{int(q * 100):02d}" for q in QUANTILES)]
    columns += [f"zeta_{i + 1}_abs_mean" for i in range(zeta.shape[-1])]
    with open(path, "w", newline="") as handle:
        handle.write(f"# fingerprint={fingerprint} columns={','.join(columns)}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for r, t in enumerate(traj.times):
            row = [f"{t:.6f}", repr(float(rho[r].mean()))]
            row += [repr(float(q)) for q in np.quantile(rho[r], QUANTILES)]
            row += [repr(float(z)) for z in zeta[r].mean(axis=0)]
            writer.writerow(row)


def write_distance_csv(path: Path, report: EstimatorReport) -> None:
    with open(path, "w", newline="") as handle:
        handle.write(f"# fingerprint={report.fingerprint} columns=t,distance,n_a,n_b\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["t", "distance", "n_a", "n_b"])
        for p in report.distance_series:
            writer.writerow([f"{p.t:.6f}", repr(p.distance), p.n_a, p.n_b])


def record_run(out_dir: Path, report: EstimatorReport, status: str, exit_code: int) -> str:
    engine = configure_ledger(out_dir)
    with Session(engine) as session:
        row = experiment_run_repository.create(
            session,
            ExperimentRunCreate(
                experiment=report.experiment,
                model_id=report.model_id,
                fingerprint=report.fingerprint,
                status=status,
                exit_code=exit_code,
                report_json=report_json(report),
            ),
        )
        return row.id


def _write_outputs(outcome: RunOutcome, traj: CoupledTrajectory | None) -> None:
    out, report, config = outcome.out_dir, outcome.report, outcome.config
    out.mkdir(parents=True, exist_ok=True)
    if traj is not None:
        outcome.files["trajectory"] = out / "trajectory.csv"
        write_trajectory_csv(
            outcome.files["trajectory"], outcome.model, traj, report.fingerprint, config.output.trajectory_members
        )
        outcome.files["plot"] = out / "plot.csv"
        write_plot_csv(outcome.files["plot"], traj, report.fingerprint)
    if report.distance_series:
        outcome.files["distance"] = out / "distance.csv"
        write_distance_csv(outcome.files["distance"], report)
    outcome.files["report"] = out / "report.json"
    outcome.files["report"].write_text(report_json(report))


def run(config: ExperimentConfig, acceptance: Acceptance | None = None) -> RunOutcome:
    """Runs the experiment and writes every artifact under <directory>/<name>/.

    A blow-up writes the partial trajectory and a diagnostics block and
    returns exit code 3; configuration errors propagate.
    """
    model = config.build_model()
    binding = build_binding(model, enabled=config.coupling.enabled)
    fp = config.fingerprint()
    report = EstimatorReport(
        experiment=config.output.name,
        model_id=str(model.id),
        fingerprint=fp,
        seeds=[config.ensemble.seed],
    )
    out_dir = Path(config.output.directory) / config.output.name
    outcome = RunOutcome(config=config, model=model, binding=binding, report=report, trajectory=None, out_dir=out_dir)

    try:
        traj = run_coupled_ensemble(config, model, binding)
    except BlowUpError as exc:
        logger.error("%s; writing partial outputs", exc.message)
        report.blow_up = {"message": exc.message, "time": exc.time, **exc.details}
        outcome.exit_code = EXIT_BLOW_UP
        partial = exc.partial if isinstance(exc.partial, CoupledTrajectory) else None
        if partial is not None:
            report.blow_up["recorded_until"] = float(partial.times[-1])
        _write_outputs(outcome, partial)
        record_run(Path(config.output.directory), report, "blow-up", outcome.exit_code)
        return outcome

    outcome.trajectory = traj
    try:
        compute_estimators(config, model, binding, traj, report)
    except BlowUpError as exc:
        logger.error("%s in an estimator ensemble", exc.message)
        report.blow_up = {"message": exc.message, "time": exc.time, "stage": "estimators"}
        outcome.exit_code = EXIT_BLOW_UP
    if acceptance is not None and outcome.exit_code == EXIT_OK:
        try:
            report.acceptance = acceptance(outcome)
        except CouplingException as exc:
            report.acceptance = [AcceptanceCheck(name="predicate", passed=False, detail=exc.message)]
        for check in report.acceptance:
            logger.info("%s %s", "PASS" if check.passed else "FAIL", check.name)
        if not report.passed:
            outcome.exit_code = EXIT_ACCEPTANCE

    _write_outputs(outcome, traj)
    status = {EXIT_OK: "pass", EXIT_ACCEPTANCE: "fail", EXIT_BLOW_UP: "blow-up"}[outcome.exit_code]
    record_run(Path(config.output.directory), report, status, outcome.exit_code)
    return outcome
