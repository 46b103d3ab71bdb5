"""Line-oriented text form: one term per line, ``coef * x[3]*rho[2]^2``."""

from __future__ import annotations

import re

from src.config.exception_handler import domain_exception
from .models import IndexedPolynomial, Variable

_FACTOR = re.compile(r"^\s*([A-Za-z_]\w*)\[(\d+)\](?:\^(\d+))?\s*$")


def dump_term(coef: float, mono) -> str:
    if not mono:
        return repr(coef)
    factors = "*".join(
        f"{var}^{exp}" if exp > 1 else str(var) for var, exp in mono
    )
    return f"{coef!r} * {factors}"


def dump(p: IndexedPolynomial) -> str:
    if p.is_zero():
        return "0.0"
    return "\n".join(dump_term(coef, mono) for mono, coef in p)


def parse(text: str) -> IndexedPolynomial:
    terms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        coef_text, _, factors_text = line.partition(" * ")
        try:
            coef = float(coef_text)
        except ValueError as exc:
            raise domain_exception(
                "malformed polynomial term", details={"line": lineno, "text": raw}
            ) from exc
        mono = []
        if factors_text:
            for factor in factors_text.split("*"):
                match = _FACTOR.match(factor)
                if match is None:
                    raise domain_exception(
                        "malformed polynomial factor", details={"line": lineno, "text": factor}
                    )
                family, index, exp = match.groups()
                mono.append((Variable(family, int(index)), int(exp or 1)))
        terms.append((tuple(mono), coef))
    return IndexedPolynomial.from_terms(terms)
