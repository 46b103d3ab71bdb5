from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from src.entities.polynomial.models import IndexedPolynomial
from src.entities.system.models import ModelId

# (x, rho) -> array over a trailing axis
PairMap = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ZetaCascade:
    """Variables zeta_1..zeta_k* of the chain in (x, rho), plus the forcing polynomial.

    Attributes:
        k_star: First index with k^2 - a^2 >= 3.
        zetas: zeta_1 = rho[k*-1], ..., zeta_k*.
        remainders: Q_l = zeta_l - rho[k*-l], one per level.
        g_poly: G such that d/dt zeta_k* = -zeta_k* once G enters rho_0.
        a_squared: Chain constant a^2.
        truncation: Galerkin dimension M the cascade was derived for.
    """

    k_star: int
    zetas: tuple[IndexedPolynomial, ...]
    remainders: tuple[IndexedPolynomial, ...]
    g_poly: IndexedPolynomial
    a_squared: float
    truncation: int

    @property
    def c1(self) -> float:
        """Coefficient of rho[k*-1] in d/dt zeta_1."""
        return self.a_squared - (self.k_star - 1) ** 2


@dataclass(frozen=True)
class BindingSpec:
    """Binding drift G of a model, expressed in noise space.

    ``force_rho`` and ``zeta_rho`` take the pair (x, rho) with rho = y - x,
    which is how the engine carries the coupled state. ``zeta_rates`` holds
    the exact decay rate of each zeta component, NaN where none is claimed.
    """

    model_id: ModelId
    name: str
    noise_dim: int
    force_rho: PairMap
    zeta_rho: PairMap
    zeta_rates: np.ndarray
    formula: str = ""
    cascade: ZetaCascade | None = None

    @property
    def zeta_dim(self) -> int:
        return len(self.zeta_rates)

    def force(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.force_rho(x, np.asarray(y, dtype=float) - x)

    def zeta(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.zeta_rho(x, np.asarray(y, dtype=float) - x)
