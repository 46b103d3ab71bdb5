from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any

import numpy as np

from .spectral import SpectralBasis

# (batch, dim) -> (batch, dim)
VectorMap = Callable[[np.ndarray], np.ndarray]
# (batch, dim) -> (batch,)
ScalarMap = Callable[[np.ndarray], np.ndarray]
# (x, rho) -> F(x + rho) - F(x)
DifferenceMap = Callable[[np.ndarray, np.ndarray], np.ndarray]


def cubic_difference(x: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """(x + rho)^3 - x^3 without cancellation when rho is small."""
    return rho * (3.0 * x * x + 3.0 * x * rho + rho * rho)


class ModelId(StrEnum):
    TOY2D = "toy2d"
    GINZBURG_LANDAU = "ginzburg_landau"
    REACTION_DIFFUSION = "reaction_diffusion"
    CHAIN = "chain"
    LINEAR = "linear"


class LyapunovName(StrEnum):
    L2_NORM = "l2_norm"
    LINF_NORM = "linf_norm"
    L2_NORM_POW_P = "l2_norm_pow_p"


@dataclass(frozen=True)
class LyapunovSpec:
    """Lyapunov function V of a model.

    Attributes:
        name: Which norm V is built from.
        func: Vectorized V over a batch of states.
        p: Exponent for ``l2_norm_pow_p``.
        norm_constant: C with ||x|| <= C (1 + V(x)).
    """

    name: LyapunovName
    func: ScalarMap
    p: float = 1.0
    norm_constant: float = 1.0

    def __call__(self, states: np.ndarray) -> np.ndarray:
        return self.func(states)


@dataclass(frozen=True)
class ModelSpec:
    """Finite Galerkin truncation dx = (Lambda x + F(x)) dt + Q dw.

    ``linear_spectrum`` is the diagonal of the linear part in the model's
    basis; every off-diagonal linear coupling is part of ``nonlinearity``.
    ``difference`` evaluates F(x + rho) - F(x) directly from rho. Noise
    enters only at ``noise_dims`` with strengths ``noise_coeffs``.
    """

    id: ModelId
    dim: int
    linear_spectrum: np.ndarray
    nonlinearity: VectorMap
    difference: DifferenceMap
    noise_dims: tuple[int, ...]
    noise_coeffs: np.ndarray
    lyapunov: LyapunovSpec
    params: Mapping[str, Any] = field(default_factory=dict)
    basis: SpectralBasis | None = None
    # Number of grid-valued fields sharing ``basis`` (RD has u and v).
    fields: int = 1

    @property
    def noise_dim(self) -> int:
        return len(self.noise_dims)

    @property
    def is_spectral(self) -> bool:
        return self.basis is not None

    def noise_matrix(self) -> np.ndarray:
        """Q as a (dim, noise_dim) matrix."""
        q = np.zeros((self.dim, self.noise_dim))
        q[list(self.noise_dims), np.arange(self.noise_dim)] = self.noise_coeffs
        return q

    def describe(self) -> dict[str, Any]:
        return {
            "id": str(self.id),
            "dim": self.dim,
            "noise_dims": list(self.noise_dims),
            "noise_coeffs": [float(q) for q in self.noise_coeffs],
            "lyapunov": str(self.lyapunov.name),
            "params": {k: v for k, v in self.params.items()},
        }
