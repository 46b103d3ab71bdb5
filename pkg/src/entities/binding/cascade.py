"""Mechanical construction of the chain's zeta variables and forcing polynomial."""

from __future__ import annotations

import logging

import numpy as np

from src.config.exception_handler import config_exception, domain_exception
from src.entities.polynomial.calculus import derivative, lie_derivative
from src.entities.polynomial.models import IndexedPolynomial, Variable
from src.entities.polynomial.text_format import dump, parse
from src.entities.system.models import ModelId, ModelSpec
from src.entities.system.operations import chain_vector_field
from .models import ZetaCascade

logger = logging.getLogger(__name__)

# Coefficients stay exact dyadics while their denominators fit the float64
# mantissa; past it, the cascade identities only hold up to rounding.
MAX_DENOMINATOR = 2 ** np.finfo(np.float64).nmant


def _check_shape(level: int, k_star: int, remainder: IndexedPolynomial) -> None:
    lowest = remainder.min_index()
    if lowest is not None and lowest < k_star - level + 1:
        raise domain_exception(
            "cascade locality violated", details={"level": level, "min_index": lowest}
        )
    for mono, _ in remainder:
        if not any(var.family == "rho" for var, _ in mono):
            raise domain_exception("cascade term without rho factor", details={"level": level})


def _check_coefficients(level: int, poly: IndexedPolynomial) -> None:
    worst = max((c.as_integer_ratio()[1] for _, c in poly), default=1)
    if worst > MAX_DENOMINATOR:
        logger.warning("zeta_%d has non-dyadic coefficients (denominator %d)", level, worst)


def build_zeta_cascade(model: ModelSpec) -> ZetaCascade:
    """zeta_1 = rho[k*-1], zeta_{l+1} = L zeta_l + zeta_l, G = -zeta_k* - L zeta_k*.

    L is the Lie derivative along the noise-free, G-free joint field in
    (x, rho). No zeta_l contains x_0, so d zeta_k* carries no noise.
    """
    if model.id is not ModelId.CHAIN:
        raise domain_exception("zeta cascade requires the chain model", details={"model": str(model.id)})
    a_squared = float(model.params["a_squared"])
    k_star = int(model.params["k_star"])
    m = model.dim
    if a_squared >= (m - 1) ** 2:
        raise config_exception(
            "chain truncation too small: need a^2 < (M-1)^2",
            details={"a_squared": a_squared, "truncation": m},
        )
    if m < k_star + 2:
        raise domain_exception("truncation overflow", details={"k_star": k_star, "truncation": m})

    field = chain_vector_field(model)
    zetas = [IndexedPolynomial.var("rho", k_star - 1)]
    remainders = [IndexedPolynomial.zero()]
    for level in range(1, k_star):
        nxt = lie_derivative(zetas[-1], field) + zetas[-1]
        remainder = nxt - IndexedPolynomial.var("rho", k_star - level - 1)
        _check_shape(level + 1, k_star, remainder)
        _check_coefficients(level + 1, nxt)
        zetas.append(nxt)
        remainders.append(remainder)
        logger.debug("zeta_%d: %d terms, degree %d", level + 1, len(nxt), nxt.degree())

    last = zetas[-1]
    if derivative(last, Variable("rho", 0)) != IndexedPolynomial.const(1.0):
        raise domain_exception("zeta_k* is not affine in rho_0 with unit slope")
    g_poly = -last - lie_derivative(last, field)
    logger.info(
        "zeta cascade a^2=%g k*=%d: %s terms, G has %d terms",
        a_squared,
        k_star,
        [len(z) for z in zetas],
        len(g_poly),
    )
    return ZetaCascade(
        k_star=k_star,
        zetas=tuple(zetas),
        remainders=tuple(remainders),
        g_poly=g_poly,
        a_squared=a_squared,
        truncation=m,
    )


def dump_cascade(cascade: ZetaCascade) -> str:
    """Sectioned text: k*, every zeta_l, every Q_l and G, each in the polynomial text form."""
    lines = [f"# a^2 = {cascade.a_squared!r}", f"# k* = {cascade.k_star}", f"# M = {cascade.truncation}"]
    for level, (zeta, remainder) in enumerate(zip(cascade.zetas, cascade.remainders), start=1):
        lines += [f"[zeta_{level}]", dump(zeta), f"[Q_{level}]", dump(remainder)]
    lines += ["[G]", dump(cascade.g_poly)]
    return "\n".join(lines) + "\n"


def parse_cascade_dump(text: str) -> dict[str, IndexedPolynomial]:
    """Inverse of dump_cascade for the polynomial sections."""
    sections: dict[str, list[str]] = {}
    current = None
    for line in text.splitlines():
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
        elif current is not None and not line.startswith("#"):
            sections[current].append(line)
    return {name: parse("\n".join(body)) for name, body in sections.items()}
