from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from src.config.exception_handler import domain_exception
from src.entities.system.models import ModelSpec
from .models import CoupledTrajectory, NoisePath

NOISE_FORMAT_VERSION = 1


def trajectory_columns(traj: CoupledTrajectory) -> list[str]:
    zeta = [f"zeta_{i + 1}" for i in range(traj.zeta_path.shape[-1])]
    return ["t", "member", "V_x", "V_y", "rho_norm", *zeta, "log_density"]


def write_trajectory_csv(
    path: Path, model: ModelSpec, traj: CoupledTrajectory, fingerprint: str, members: int | None = None
) -> None:
    """One row per (record, member); the first line documents the columns."""
    columns = trajectory_columns(traj)
    members = traj.members if members is None else min(members, traj.members)
    v_x = model.lyapunov(traj.x_path)
    v_y = model.lyapunov(traj.y_path)
    rho = traj.rho_norm()
    with open(path, "w", newline="") as handle:
        handle.write(f"# fingerprint={fingerprint} model={model.id} columns={','.join(columns)}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for r, t in enumerate(traj.times):
            for m in range(members):
                writer.writerow(
                    [
                        f"{t:.6f}",
                        m,
                        repr(float(v_x[r, m])),
                        repr(float(v_y[r, m])),
                        repr(float(rho[r, m])),
                        *(repr(float(z)) for z in traj.zeta_path[r, m]),
                        repr(float(traj.log_density_path[r, m])),
                    ]
                )


def read_trajectory_csv(path: Path) -> tuple[dict[str, str], list[dict[str, float]]]:
    with open(path, newline="") as handle:
        comment = handle.readline()
        if not comment.startswith("#"):
            raise domain_exception("trajectory CSV lacks its header comment", details={"path": str(path)})
        meta = dict(item.split("=", 1) for item in comment[1:].split())
        rows = [{k: float(v) for k, v in row.items()} for row in csv.DictReader(handle)]
    return meta, rows


def write_noise(path: Path, noise: NoisePath) -> None:
    with open(path, "wb") as handle:
        np.savez(
            handle,
            version=NOISE_FORMAT_VERSION,
            seed=noise.seed,
            stream=noise.stream,
            dt=noise.dt,
            steps=noise.steps,
            increments=noise.increments,
        )


def read_noise(path: Path) -> NoisePath:
    with np.load(path) as data:
        if int(data["version"]) != NOISE_FORMAT_VERSION or int(data["steps"]) != data["increments"].shape[0]:
            raise domain_exception("corrupt noise file", details={"path": str(path)})
        return NoisePath(
            dt=float(data["dt"]),
            increments=data["increments"].copy(),
            seed=int(data["seed"]),
            stream=int(data["stream"]),
        )
