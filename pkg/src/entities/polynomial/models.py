from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import NamedTuple

from src.config.exception_handler import domain_exception


class Variable(NamedTuple):
    """One member of an indexed variable family, e.g. x[3] or rho[0]."""

    family: str
    index: int

    def __str__(self) -> str:
        return f"{self.family}[{self.index}]"


# A monomial is a sorted tuple of (variable, exponent) pairs; () is the constant 1.
Monomial = tuple[tuple[Variable, int], ...]


def monomial(*factors: tuple[Variable, int]) -> Monomial:
    powers: dict[Variable, int] = {}
    for var, exp in factors:
        if exp < 0:
            raise domain_exception("negative exponent", details={"variable": str(var)})
        powers[var] = powers.get(var, 0) + exp
    return tuple(sorted((v, e) for v, e in powers.items() if e > 0))


def monomial_degree(mono: Monomial) -> int:
    return sum(exp for _, exp in mono)


def monomial_product(a: Monomial, b: Monomial) -> Monomial:
    return monomial(*a, *b)


def _sort_key(mono: Monomial):
    # Graded lexicographic on (family, index).
    return monomial_degree(mono), mono


@dataclass(frozen=True)
class IndexedPolynomial:
    """Sparse polynomial in indexed variables with float coefficients.

    Zero coefficients are never stored and terms are kept in graded
    lexicographic order, so two equal polynomials compare equal and dump to
    the same text.
    """

    terms: Mapping[Monomial, float] = field(default_factory=dict)

    def __post_init__(self):
        merged: dict[Monomial, float] = {}
        for mono, coef in self.terms.items():
            key = monomial(*mono)
            merged[key] = merged.get(key, 0.0) + float(coef)
        ordered = {m: merged[m] for m in sorted(merged, key=_sort_key) if merged[m] != 0.0}
        object.__setattr__(self, "terms", ordered)

    @classmethod
    def var(cls, family: str, index: int) -> IndexedPolynomial:
        return cls({((Variable(family, index), 1),): 1.0})

    @classmethod
    def const(cls, value: float) -> IndexedPolynomial:
        return cls({(): value})

    @classmethod
    def zero(cls) -> IndexedPolynomial:
        return cls()

    @classmethod
    def from_terms(cls, items: Iterable[tuple[Monomial, float]]) -> IndexedPolynomial:
        merged: dict[Monomial, float] = {}
        for mono, coef in items:
            key = monomial(*mono)
            merged[key] = merged.get(key, 0.0) + coef
        return cls(merged)

    def __iter__(self) -> Iterator[tuple[Monomial, float]]:
        return iter(self.terms.items())

    def __len__(self) -> int:
        return len(self.terms)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, mono: Monomial) -> float:
        return self.terms.get(monomial(*mono), 0.0)

    def variables(self) -> set[Variable]:
        return {var for mono in self.terms for var, _ in mono}

    def degree(self) -> int:
        return max((monomial_degree(m) for m in self.terms), default=0)

    def max_index(self) -> int | None:
        return max((v.index for v in self.variables()), default=None)

    def min_index(self) -> int | None:
        return min((v.index for v in self.variables()), default=None)

    def __add__(self, other: IndexedPolynomial | float) -> IndexedPolynomial:
        if not isinstance(other, IndexedPolynomial):
            other = IndexedPolynomial.const(other)
        return IndexedPolynomial.from_terms([*self, *other])

    __radd__ = __add__

    def __neg__(self) -> IndexedPolynomial:
        return IndexedPolynomial({m: -c for m, c in self})

    def __sub__(self, other: IndexedPolynomial | float) -> IndexedPolynomial:
        return self + (-other)

    def __rsub__(self, other: float) -> IndexedPolynomial:
        return (-self) + other

    def __mul__(self, other: IndexedPolynomial | float) -> IndexedPolynomial:
        if not isinstance(other, IndexedPolynomial):
            return IndexedPolynomial({m: c * other for m, c in self})
        return IndexedPolynomial.from_terms(
            (monomial_product(ma, mb), ca * cb) for ma, ca in self for mb, cb in other
        )

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> IndexedPolynomial:
        if exponent < 0:
            raise domain_exception("negative exponent", details={"exponent": exponent})
        result = IndexedPolynomial.const(1.0)
        for _ in range(exponent):
            result = result * self
        return result

    def __str__(self) -> str:
        from .text_format import dump

        return dump(self)


@dataclass(frozen=True)
class PolyVectorField:
    """Polynomial right-hand side: variable -> its time derivative.

    Attributes:
        rows: Map from each dynamic variable to its drift polynomial.
        truncation: Galerkin dimension M; no row may reference an index >= M.
    """

    rows: Mapping[Variable, IndexedPolynomial]
    truncation: int

    def __post_init__(self):
        for var, rhs in self.rows.items():
            for ref in (var, *rhs.variables()):
                if ref.index >= self.truncation or ref.index < 0:
                    raise domain_exception(
                        "truncation overflow",
                        details={"variable": str(ref), "truncation": self.truncation},
                    )

    def __contains__(self, var: Variable) -> bool:
        return var in self.rows

    def __getitem__(self, var: Variable) -> IndexedPolynomial:
        return self.rows[var]
