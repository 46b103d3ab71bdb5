"""Binding drifts G for every model, evaluated on (x, rho) batches."""

from __future__ import annotations

import numpy as np

from src.config.exception_handler import config_exception, domain_exception
from src.entities.polynomial.compiled import CompiledPolynomial
from src.entities.polynomial.models import Variable
from src.entities.polynomial.text_format import dump
from src.entities.system import catalog
from src.entities.system.models import ModelId, ModelSpec
from .cascade import build_zeta_cascade
from .models import BindingSpec, ZetaCascade

_NO_RATES = np.zeros(0)


def _require(model: ModelSpec, model_id: ModelId) -> None:
    if model.id is not model_id:
        raise domain_exception(
            f"binding for {model_id} applied to {model.id}",
            details={"expected": str(model_id), "got": str(model.id)},
        )


def _free_rho_drift(model: ModelSpec, x: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """rho' without G: Lambda rho + F(x + rho) - F(x)."""
    return model.linear_spectrum * rho + model.difference(x, rho)


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    return x, np.asarray(y, dtype=float) - x


# toy2d: zeta = rho_1 + 3 rho_2 and zeta' = -2 zeta.
def _toy_zeta(x: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return (rho[..., 0] + 3.0 * rho[..., 1])[..., None]


def _toy_force(model: ModelSpec, x: np.ndarray, rho: np.ndarray) -> np.ndarray:
    r = _free_rho_drift(model, x, rho)
    zeta = _toy_zeta(x, rho)[..., 0]
    return (-2.0 * zeta - (r[..., 0] + 3.0 * r[..., 1]))[..., None]


def toy_binding(x, y) -> np.ndarray:
    """G(x, y) for toy2d, shape (..., 1)."""
    x, rho = _pair(x, y)
    return _toy_force(catalog.toy2d(), x, rho)


def toy_binding_spec(model: ModelSpec) -> BindingSpec:
    _require(model, ModelId.TOY2D)
    return BindingSpec(
        model_id=model.id,
        name="toy",
        noise_dim=1,
        force_rho=lambda x, rho: _toy_force(model, x, rho),
        zeta_rho=_toy_zeta,
        zeta_rates=np.array([2.0]),
        formula="G = -2 zeta - (r_1 + 3 r_2), zeta = rho_1 + 3 rho_2, r = Lambda rho + F(x + rho) - F(x)",
    )


# Ginzburg-Landau: G_k = -(2 + lambda_k)/q_k rho_k on the forced modes.
def _gl_gains(model: ModelSpec) -> np.ndarray:
    q = model.noise_coeffs
    if np.any(q == 0.0):
        raise config_exception(
            "G_k requires q_k != 0 on every forced mode",
            details={"zero_modes": np.flatnonzero(q == 0.0).tolist()},
        )
    lam = model.basis.eigenvalues[list(model.noise_dims)]
    return -(2.0 + lam) / q


def gl_binding(x, y, model: ModelSpec) -> np.ndarray:
    _require(model, ModelId.GINZBURG_LANDAU)
    x, rho = _pair(x, y)
    return _gl_gains(model) * rho[..., list(model.noise_dims)]


def gl_binding_spec(model: ModelSpec) -> BindingSpec:
    _require(model, ModelId.GINZBURG_LANDAU)
    gains = _gl_gains(model)
    forced = list(model.noise_dims)
    return BindingSpec(
        model_id=model.id,
        name="gl",
        noise_dim=model.noise_dim,
        force_rho=lambda x, rho: gains * rho[..., forced],
        zeta_rho=lambda x, rho: np.zeros(rho.shape[:-1] + (0,)),
        zeta_rates=_NO_RATES,
        formula="G_k = -(2 + lambda_k) / q_k rho_k on the forced modes",
    )


def coupled_linear_spectrum(model: ModelSpec) -> np.ndarray:
    """Diagonal of the rho operator once Q G is added; -1 on the forced modes."""
    _require(model, ModelId.GINZBURG_LANDAU)
    spectrum = model.linear_spectrum.copy()
    spectrum[list(model.noise_dims)] += model.noise_coeffs * _gl_gains(model)
    return spectrum


# Reaction-diffusion: zeta = rho_u + 3 rho_v mode-wise and zeta' = (Laplacian - 1) zeta.
def _rd_zeta(model: ModelSpec, rho: np.ndarray) -> np.ndarray:
    n = model.basis.n_modes
    return rho[..., :n] + 3.0 * rho[..., n:]


def _rd_force(model: ModelSpec, x: np.ndarray, rho: np.ndarray) -> np.ndarray:
    n = model.basis.n_modes
    r = _free_rho_drift(model, x, rho)
    target = (model.basis.eigenvalues - 1.0) * _rd_zeta(model, rho)
    return target - (r[..., :n] + 3.0 * r[..., n:])


def rd_binding(x, y, model: ModelSpec) -> np.ndarray:
    _require(model, ModelId.REACTION_DIFFUSION)
    x, rho = _pair(x, y)
    return _rd_force(model, x, rho)


def rd_binding_spec(model: ModelSpec) -> BindingSpec:
    _require(model, ModelId.REACTION_DIFFUSION)
    return BindingSpec(
        model_id=model.id,
        name="rd",
        noise_dim=model.noise_dim,
        force_rho=lambda x, rho: _rd_force(model, x, rho),
        zeta_rho=lambda x, rho: _rd_zeta(model, rho),
        zeta_rates=1.0 - model.basis.eigenvalues,
        formula="G = (lambda - 1) zeta - (r_u + 3 r_v) mode-wise, zeta = rho_u + 3 rho_v",
    )


# Chain: G and zeta_l from the cascade polynomials.
def _chain_layout(m: int) -> dict[Variable, int]:
    layout = {Variable("x", k): k for k in range(m)}
    layout.update({Variable("rho", k): m + k for k in range(m)})
    return layout


class _ChainEvaluator:
    def __init__(self, cascade: ZetaCascade):
        layout = _chain_layout(cascade.truncation)
        self.m = cascade.truncation
        self.g = CompiledPolynomial(cascade.g_poly, layout)
        self.zetas = [CompiledPolynomial(z, layout) for z in cascade.zetas]

    def _stack(self, x: np.ndarray, rho: np.ndarray) -> tuple[np.ndarray, tuple[int, ...]]:
        if x.shape[-1] < self.m or rho.shape[-1] < self.m:
            raise domain_exception(
                "unbound variable", details={"needed": self.m, "got": int(min(x.shape[-1], rho.shape[-1]))}
            )
        lead = x.shape[:-1]
        joint = np.concatenate([x[..., : self.m], rho[..., : self.m]], axis=-1)
        return joint.reshape(-1, 2 * self.m), lead

    def force(self, x: np.ndarray, rho: np.ndarray) -> np.ndarray:
        joint, lead = self._stack(x, rho)
        return self.g(joint).reshape(lead + (1,))

    def zeta(self, x: np.ndarray, rho: np.ndarray) -> np.ndarray:
        joint, lead = self._stack(x, rho)
        return np.stack([z(joint) for z in self.zetas], axis=-1).reshape(lead + (len(self.zetas),))


def chain_binding(cascade: ZetaCascade, x, y) -> np.ndarray:
    x, rho = _pair(x, y)
    return _ChainEvaluator(cascade).force(x, rho)


def chain_binding_spec(model: ModelSpec, cascade: ZetaCascade | None = None) -> BindingSpec:
    _require(model, ModelId.CHAIN)
    cascade = cascade or build_zeta_cascade(model)
    evaluator = _ChainEvaluator(cascade)
    rates = np.full(cascade.k_star, np.nan)
    rates[-1] = 1.0
    return BindingSpec(
        model_id=model.id,
        name="chain",
        noise_dim=1,
        force_rho=evaluator.force,
        zeta_rho=evaluator.zeta,
        zeta_rates=rates,
        formula="G = -zeta_k* - L zeta_k*\n" + dump(cascade.g_poly),
        cascade=cascade,
    )


def null_binding(model: ModelSpec) -> BindingSpec:
    """G = 0: the uncoupled copy under the same noise."""
    return BindingSpec(
        model_id=model.id,
        name="null",
        noise_dim=model.noise_dim,
        force_rho=lambda x, rho: np.zeros(rho.shape[:-1] + (model.noise_dim,)),
        zeta_rho=lambda x, rho: np.zeros(rho.shape[:-1] + (0,)),
        zeta_rates=_NO_RATES,
        formula="G = 0",
    )


def build_binding(model: ModelSpec, enabled: bool = True) -> BindingSpec:
    if not enabled:
        return null_binding(model)
    match model.id:
        case ModelId.TOY2D:
            return toy_binding_spec(model)
        case ModelId.GINZBURG_LANDAU:
            return gl_binding_spec(model)
        case ModelId.REACTION_DIFFUSION:
            return rd_binding_spec(model)
        case ModelId.CHAIN:
            return chain_binding_spec(model)
    return null_binding(model)
