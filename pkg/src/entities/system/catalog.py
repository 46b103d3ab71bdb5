"""Factories for the concrete systems: toy2d, Ginzburg-Landau, reaction-diffusion, chain, linear."""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from src.config.exception_handler import config_exception
from .models import LyapunovName, LyapunovSpec, ModelId, ModelSpec, cubic_difference
from .spectral import SpectralBasis

DEFAULT_HALF_LENGTH = 2.0 * math.pi


def l2_norm() -> LyapunovSpec:
    return LyapunovSpec(
        name=LyapunovName.L2_NORM,
        func=lambda s: np.linalg.norm(s, axis=-1),
    )


def l2_norm_pow(p: float) -> LyapunovSpec:
    if p < 1:
        raise config_exception("lyapunov exponent p must be >= 1", details={"p": p})
    return LyapunovSpec(
        name=LyapunovName.L2_NORM_POW_P,
        func=lambda s: np.linalg.norm(s, axis=-1) ** p,
        p=p,
    )


def grid_linf(basis: SpectralBasis, fields: int) -> LyapunovSpec:
    n = basis.n_modes

    def func(states: np.ndarray) -> np.ndarray:
        return sum(basis.sup_norm(states[..., i * n : (i + 1) * n]) for i in range(fields))

    return LyapunovSpec(
        name=LyapunovName.LINF_NORM,
        func=func,
        norm_constant=math.sqrt(2.0 * basis.half_length),
    )


def toy2d(p: float = 2.0) -> ModelSpec:
    """dx1 = (2x1 + x2 - x1^3) dt + dw, dx2 = (2x2 + x1 - x2^3) dt."""

    def nonlinearity(x: np.ndarray) -> np.ndarray:
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([x2 - x1**3, x1 - x2**3], axis=-1)

    def difference(x: np.ndarray, rho: np.ndarray) -> np.ndarray:
        d = cubic_difference(x, rho)
        return np.stack([rho[..., 1] - d[..., 0], rho[..., 0] - d[..., 1]], axis=-1)

    return ModelSpec(
        id=ModelId.TOY2D,
        dim=2,
        linear_spectrum=np.array([2.0, 2.0]),
        nonlinearity=nonlinearity,
        difference=difference,
        noise_dims=(0,),
        noise_coeffs=np.array([1.0]),
        lyapunov=l2_norm_pow(p),
        params={"p": p},
    )


def _forcing(q: float | Sequence[float], forced: int) -> np.ndarray:
    coeffs = np.broadcast_to(np.asarray(q, dtype=float), (forced,)).copy()
    if np.any(coeffs < 0) or not np.all(np.isfinite(coeffs)):
        raise config_exception("noise coefficients must be finite and >= 0", details={"q": coeffs.tolist()})
    return coeffs


def ginzburg_landau(
    half_length: float = DEFAULT_HALF_LENGTH,
    n_modes: int = 64,
    forced: int = 5,
    q: float | Sequence[float] = 1.0,
) -> ModelSpec:
    """du = (Laplacian u + u - u^3) dt + sum_k<N q_k e_k dw_k, periodic on [-L, L].

    The first unforced mode must satisfy lambda_N + 1 < 0; the coupled
    difference then contracts at rate a = min(1, -lambda_N - 1).
    """
    if not 0 < forced < n_modes:
        raise config_exception(
            "ginzburg_landau requires 0 < forced < n_modes",
            details={"forced": forced, "n_modes": n_modes},
        )
    basis = SpectralBasis(half_length, n_modes)
    lam = basis.eigenvalues
    if not lam[forced] + 1.0 < 0.0:
        raise config_exception(
            "ginzburg_landau requires lambda_N + 1 < 0 for the first unforced mode",
            details={"forced": forced, "lambda_N": float(lam[forced])},
        )
    coeffs = _forcing(q, forced)

    def nonlinearity(u: np.ndarray) -> np.ndarray:
        return -basis.cube(u)

    def difference(u: np.ndarray, rho: np.ndarray) -> np.ndarray:
        return -basis.from_grid(cubic_difference(basis.to_grid(u), basis.to_grid(rho)))

    return ModelSpec(
        id=ModelId.GINZBURG_LANDAU,
        dim=n_modes,
        linear_spectrum=lam + 1.0,
        nonlinearity=nonlinearity,
        difference=difference,
        noise_dims=tuple(range(forced)),
        noise_coeffs=coeffs,
        lyapunov=l2_norm(),
        params={
            "half_length": float(half_length),
            "n_modes": n_modes,
            "forced": forced,
            "gap": min(1.0, float(-lam[forced] - 1.0)),
        },
        basis=basis,
    )


def reaction_diffusion(half_length: float = DEFAULT_HALF_LENGTH, n_modes: int = 16) -> ModelSpec:
    """du = (Lu + 2u + v - u^3) dt + dW, dv = (Lv + 2v + u - v^3) dt.

    State layout is [u modes, v modes]; the noise forces every retained
    u-mode with unit strength.
    """
    basis = SpectralBasis(half_length, n_modes)
    block = basis.eigenvalues + 2.0

    def nonlinearity(state: np.ndarray) -> np.ndarray:
        u, v = state[..., :n_modes], state[..., n_modes:]
        return np.concatenate([v - basis.cube(u), u - basis.cube(v)], axis=-1)

    def difference(state: np.ndarray, rho: np.ndarray) -> np.ndarray:
        u, v = state[..., :n_modes], state[..., n_modes:]
        ru, rv = rho[..., :n_modes], rho[..., n_modes:]
        du = basis.from_grid(cubic_difference(basis.to_grid(u), basis.to_grid(ru)))
        dv = basis.from_grid(cubic_difference(basis.to_grid(v), basis.to_grid(rv)))
        return np.concatenate([rv - du, ru - dv], axis=-1)

    return ModelSpec(
        id=ModelId.REACTION_DIFFUSION,
        dim=2 * n_modes,
        linear_spectrum=np.concatenate([block, block]),
        nonlinearity=nonlinearity,
        difference=difference,
        noise_dims=tuple(range(n_modes)),
        noise_coeffs=np.ones(n_modes),
        lyapunov=grid_linf(basis, fields=2),
        params={"half_length": float(half_length), "n_modes": n_modes},
        basis=basis,
        fields=2,
    )


def k_star(a_squared: float) -> int:
    """Smallest k > 0 with k^2 - a^2 >= 3."""
    if a_squared < 0:
        raise config_exception("a^2 must be >= 0", details={"a_squared": a_squared})
    k = 1
    while k * k - a_squared < 3:
        k += 1
    return k


def chain(a_squared: float = 0.0, truncation: int | None = None, p: float = 2.0) -> ModelSpec:
    """Nearest-neighbour chain, noise on x_0 only, closed by x_M = 0."""
    ks = k_star(a_squared)
    m = truncation if truncation is not None else 4 * ks
    if m < 2 or a_squared >= (m - 1) ** 2:
        raise config_exception(
            "chain truncation too small: need a^2 < (M-1)^2",
            details={"a_squared": a_squared, "truncation": m},
        )

    def neighbours(x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x)
        out[..., 1:] += x[..., :-1]
        out[..., :-1] += x[..., 1:]
        return out

    def nonlinearity(x: np.ndarray) -> np.ndarray:
        return neighbours(x) - x**3

    def difference(x: np.ndarray, rho: np.ndarray) -> np.ndarray:
        return neighbours(rho) - cubic_difference(x, rho)

    return ModelSpec(
        id=ModelId.CHAIN,
        dim=m,
        linear_spectrum=a_squared - np.arange(m, dtype=float) ** 2,
        nonlinearity=nonlinearity,
        difference=difference,
        noise_dims=(0,),
        noise_coeffs=np.array([1.0]),
        lyapunov=l2_norm_pow(p),
        params={"a_squared": float(a_squared), "k_star": ks, "truncation": m, "p": p},
    )


def linear(
    spectrum: Sequence[float],
    noise_dims: Sequence[int] = (),
    noise_coeffs: Sequence[float] | None = None,
) -> ModelSpec:
    """Diagonal reference system dx = Lambda x dt + Q dw with F = 0."""
    spectrum = np.asarray(spectrum, dtype=float)
    dims = tuple(int(i) for i in noise_dims)
    coeffs = np.ones(len(dims)) if noise_coeffs is None else np.asarray(noise_coeffs, dtype=float)
    if len(coeffs) != len(dims) or any(not 0 <= i < len(spectrum) for i in dims):
        raise config_exception("linear model noise dims/coeffs mismatch", details={"noise_dims": list(dims)})
    if np.any(coeffs <= 0):
        raise config_exception("noise coefficients must be > 0", details={"q": coeffs.tolist()})
    return ModelSpec(
        id=ModelId.LINEAR,
        dim=len(spectrum),
        linear_spectrum=spectrum,
        nonlinearity=lambda x: np.zeros_like(x),
        difference=lambda x, rho: np.zeros_like(rho),
        noise_dims=dims,
        noise_coeffs=coeffs,
        lyapunov=l2_norm(),
        params={"spectrum": spectrum.tolist()},
    )


def build_model(model_id: ModelId | str, **params) -> ModelSpec:
    """Dispatches on the model id; unknown keyword parameters are a config error."""
    factories = {
        ModelId.TOY2D: toy2d,
        ModelId.GINZBURG_LANDAU: ginzburg_landau,
        ModelId.REACTION_DIFFUSION: reaction_diffusion,
        ModelId.CHAIN: chain,
        ModelId.LINEAR: linear,
    }
    try:
        factory = factories[ModelId(model_id)]
    except ValueError as exc:
        raise config_exception(
            f"unknown model id {model_id!r}", details={"valid": [m.value for m in ModelId]}
        ) from exc
    try:
        return factory(**params)
    except TypeError as exc:
        raise config_exception(f"invalid parameters for {model_id}: {exc}") from exc
