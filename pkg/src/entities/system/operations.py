"""Model-level operations: drift, Lyapunov function, noise map, dissipativity radius."""

from __future__ import annotations

import numpy as np

from src.config.exception_handler import domain_exception
from src.entities.polynomial.models import IndexedPolynomial, PolyVectorField, Variable
from .models import ModelId, ModelSpec


def _check_state(model: ModelSpec, state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != model.dim:
        raise domain_exception(
            "state dimension mismatch", details={"expected": model.dim, "got": state.shape[-1]}
        )
    return state


def drift(model: ModelSpec, state: np.ndarray) -> np.ndarray:
    """Lambda x + F(x); accepts a single state or a (batch, dim) array."""
    state = _check_state(model, state)
    if not np.all(np.isfinite(state)):
        raise domain_exception("non-finite state")
    return model.linear_spectrum * state + model.nonlinearity(state)


def lyapunov(model: ModelSpec, state: np.ndarray) -> float | np.ndarray:
    values = model.lyapunov(_check_state(model, state))
    return float(values) if np.ndim(values) == 0 else values


def apply_noise(model: ModelSpec, increments: np.ndarray) -> np.ndarray:
    """Places q_i dw_i at the forced coordinates, zero elsewhere."""
    increments = np.asarray(increments, dtype=float)
    if increments.shape[-1] != model.noise_dim:
        raise domain_exception(
            "noise increment length mismatch",
            details={"expected": model.noise_dim, "got": increments.shape[-1]},
        )
    out = np.zeros(increments.shape[:-1] + (model.dim,))
    out[..., list(model.noise_dims)] = model.noise_coeffs * increments
    return out


def sup_norm(model: ModelSpec, state: np.ndarray) -> float | np.ndarray:
    """Max over sites (toy, chain, linear) or over grid points of every field."""
    state = _check_state(model, state)
    if not model.is_spectral:
        values = np.abs(state).max(axis=-1)
    else:
        n = model.basis.n_modes
        values = np.max(
            [model.basis.sup_norm(state[..., i * n : (i + 1) * n]) for i in range(model.fields)], axis=0
        )
    return float(values) if np.ndim(values) == 0 else values


def linearization(model: ModelSpec, eps: float = 1e-6) -> np.ndarray:
    """Jacobian of the drift at 0. F has no quadratic part, so the error is O(eps^2)."""
    steps = eps * np.eye(model.dim)
    jac = (model.nonlinearity(steps) - model.nonlinearity(-steps)) / (2.0 * eps)
    return np.diag(model.linear_spectrum) + jac.T


def dissipativity_radius(model: ModelSpec) -> float:
    """R0 with <x, drift(x)> < 0 whenever sup_norm(x) > R0.

    Uses <x, Jx> <= lambda+ ||x||^2 <= lambda+ w n m^2 and the cubic bound
    <x, -x^3> <= -w m^4, where m is the sup norm, n the number of
    sites (or grid points over all fields) and w the quadrature weight.
    """
    jac = linearization(model)
    lam_plus = max(float(np.linalg.eigvalsh(0.5 * (jac + jac.T)).max()), 0.0)
    if model.id is ModelId.LINEAR:
        return 0.0 if lam_plus == 0.0 else float("inf")
    points = model.dim if not model.is_spectral else model.basis.grid_size * model.fields
    return float(np.sqrt(lam_plus * points))


# Chain in polynomial form; y is eliminated through y = x + rho.
def _chain_site_drift(model: ModelSpec, family: str, k: int) -> IndexedPolynomial:
    var = IndexedPolynomial.var
    m = model.dim
    rhs = float(model.linear_spectrum[k]) * var(family, k)
    if k > 0:
        rhs = rhs + var(family, k - 1)
    if k + 1 < m:
        rhs = rhs + var(family, k + 1)
    return rhs


def chain_vector_field(model: ModelSpec, with_rho: bool = True) -> PolyVectorField:
    """Drift of the chain (noise and G removed) as a polynomial vector field.

    With ``with_rho`` the field also carries the difference process
    rho_k' = c_k rho_k + rho_{k-1} + rho_{k+1} - rho_k (3x_k^2 + 3x_k rho_k + rho_k^2).
    """
    if model.id is not ModelId.CHAIN:
        raise domain_exception("chain_vector_field requires the chain model", details={"model": str(model.id)})
    var = IndexedPolynomial.var
    rows: dict[Variable, IndexedPolynomial] = {}
    for k in range(model.dim):
        x = var("x", k)
        rows[Variable("x", k)] = _chain_site_drift(model, "x", k) - x**3
        if with_rho:
            rho = var("rho", k)
            cubic = rho * (3.0 * x**2 + 3.0 * x * rho + rho**2)
            rows[Variable("rho", k)] = _chain_site_drift(model, "rho", k) - cubic
    return PolyVectorField(rows=rows, truncation=model.dim)
