from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from src.config.exception_handler import DensityOverflowError

# exp() of anything beyond this overflows or underflows double precision.
LOG_DENSITY_LIMIT = 700.0


@dataclass(frozen=True)
class NoisePath:
    """Brownian increments on a fixed grid, one independent stream per member.

    Attributes:
        dt: Step size.
        increments: (steps, members, noise_dim) array, each entry ~ N(0, dt).
        seed: Root seed the increments were drawn from.
        stream: Stream id of member 0; member j uses stream + j.
    """

    dt: float
    increments: np.ndarray
    seed: int = 0
    stream: int = 0

    @property
    def steps(self) -> int:
        return self.increments.shape[0]

    @property
    def members(self) -> int:
        return self.increments.shape[1]

    @property
    def noise_dim(self) -> int:
        return self.increments.shape[2]

    @property
    def horizon(self) -> float:
        return self.steps * self.dt

    def path(self) -> np.ndarray:
        """w at grid times 0, dt, ..., shape (steps + 1, members, noise_dim)."""
        w = np.zeros((self.steps + 1,) + self.increments.shape[1:])
        np.cumsum(self.increments, axis=0, out=w[1:])
        return w

    def coarsen(self, factor: int) -> NoisePath:
        """Same Brownian path seen on a grid ``factor`` times coarser."""
        if factor < 1 or self.steps % factor:
            raise ValueError(f"cannot coarsen {self.steps} steps by {factor}")
        grouped = self.increments.reshape((self.steps // factor, factor) + self.increments.shape[1:])
        return NoisePath(self.dt * factor, grouped.sum(axis=1), self.seed, self.stream)

    def refine(self, factor: int, seed: int) -> NoisePath:
        """Brownian-bridge refinement: the refined path coarsens back to this one."""
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(self.stream,)))
        fine_dt = self.dt / factor
        z = rng.standard_normal((self.steps, factor) + self.increments.shape[1:]) * np.sqrt(fine_dt)
        z += (self.increments[:, None] - z.sum(axis=1, keepdims=True)) / factor
        return NoisePath(fine_dt, z.reshape((self.steps * factor,) + self.increments.shape[1:]), self.seed, self.stream)

    def member(self, index: int) -> NoisePath:
        return NoisePath(self.dt, self.increments[:, index : index + 1], self.seed, self.stream + index)


@dataclass
class GirsanovAccumulator:
    """Running log of the Girsanov density of the shifted noise.

    log_density accumulates G.dw - |G|^2 dt / 2 with G evaluated at the left
    end of every step; g_l2 accumulates |G|^2 dt.
    """

    log_density: np.ndarray
    g_l2: np.ndarray
    overflow: np.ndarray

    @classmethod
    def start(cls, members: int) -> GirsanovAccumulator:
        return cls(np.zeros(members), np.zeros(members), np.zeros(members, dtype=bool))

    def update(self, force: np.ndarray, dw: np.ndarray, dt: float) -> None:
        sq = np.einsum("bi,bi->b", force, force)
        self.log_density += np.einsum("bi,bi->b", force, dw) - 0.5 * sq * dt
        self.g_l2 += sq * dt
        self.overflow |= ~(np.abs(self.log_density) <= LOG_DENSITY_LIMIT)

    def density(self) -> np.ndarray:
        if self.overflow.any():
            raise DensityOverflowError(
                "density overflow",
                details={"members": np.flatnonzero(self.overflow).tolist()},
            )
        return np.exp(self.log_density)


@dataclass(frozen=True)
class Trajectory:
    """Recorded states of an ensemble of single solutions.

    ``states`` has shape (records, members, dim); ``w_sup`` holds the sup of
    V over every completed unit interval, shape (units, members).
    """

    times: np.ndarray
    states: np.ndarray
    w_sup: np.ndarray
    dt: float

    @property
    def members(self) -> int:
        return self.states.shape[1]

    def final(self) -> np.ndarray:
        return self.states[-1]

    def at(self, t: float) -> np.ndarray:
        index = int(np.argmin(np.abs(self.times - t)))
        return self.states[index]


@dataclass(frozen=True)
class CoupledTrajectory:
    """Pair (x, y = x + rho) driven by w and w + int G dt.

    ``forcing`` is the left-point G of every step, shape (steps, members,
    noise_dim); it is only kept when requested since shift_noise needs it.
    """

    times: np.ndarray
    x_path: np.ndarray
    rho_path: np.ndarray
    zeta_path: np.ndarray
    log_density_path: np.ndarray
    girsanov: GirsanovAccumulator
    w_sup_x: np.ndarray
    w_sup_y: np.ndarray
    dt: float
    scheme: str
    forcing: np.ndarray | None = field(default=None, repr=False)

    @property
    def y_path(self) -> np.ndarray:
        return self.x_path + self.rho_path

    @property
    def members(self) -> int:
        return self.x_path.shape[1]

    def rho_norm(self) -> np.ndarray:
        """(records, members)."""
        return np.linalg.norm(self.rho_path, axis=-1)
