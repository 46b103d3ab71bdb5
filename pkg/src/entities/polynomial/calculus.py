"""Arithmetic, evaluation and differentiation of indexed polynomials."""

from __future__ import annotations

import math
from collections.abc import Mapping
from typing import Literal

from src.config.exception_handler import domain_exception
from .models import IndexedPolynomial, PolyVectorField, Variable, monomial

CombineOp = Literal["add", "mul", "scale"]


def combine(op: CombineOp, p: IndexedPolynomial, q: IndexedPolynomial | float) -> IndexedPolynomial:
    match op:
        case "add":
            return p + q
        case "mul":
            return p * q
        case "scale":
            if isinstance(q, IndexedPolynomial):
                raise domain_exception("scale expects a scalar")
            return p * q
    raise domain_exception(f"unknown operation {op!r}")


def evaluate(p: IndexedPolynomial, assignment: Mapping[Variable, float]) -> float:
    """Direct sum of monomials; every variable of p must be bound."""
    total = []
    for mono, coef in p:
        value = coef
        for var, exp in mono:
            if var not in assignment:
                raise domain_exception("unbound variable", details={"variable": str(var)})
            value *= assignment[var] ** exp
        total.append(value)
    return math.fsum(total)


def derivative(p: IndexedPolynomial, v: Variable) -> IndexedPolynomial:
    terms = []
    for mono, coef in p:
        powers = dict(mono)
        exp = powers.get(v, 0)
        if exp == 0:
            continue
        powers[v] = exp - 1
        terms.append((monomial(*powers.items()), coef * exp))
    return IndexedPolynomial.from_terms(terms)


def lie_derivative(p: IndexedPolynomial, f: PolyVectorField) -> IndexedPolynomial:
    """Sum over the variables v of p of (dp/dv) * f(v)."""
    result = IndexedPolynomial.zero()
    for var in sorted(p.variables()):
        if var.index >= f.truncation:
            raise domain_exception(
                "truncation overflow",
                details={"variable": str(var), "truncation": f.truncation},
            )
        if var not in f:
            raise domain_exception("unbound variable", details={"variable": str(var)})
        result = result + derivative(p, var) * f[var]
    return result


def substitute(p: IndexedPolynomial, mapping: Mapping[Variable, IndexedPolynomial]) -> IndexedPolynomial:
    """Replaces variables by polynomials; unmapped variables are kept."""
    result = IndexedPolynomial.zero()
    for mono, coef in p:
        term = IndexedPolynomial.const(coef)
        for var, exp in mono:
            factor = mapping.get(var)
            if factor is None:
                factor = IndexedPolynomial({((var, 1),): 1.0})
            term = term * factor**exp
        result = result + term
    return result
