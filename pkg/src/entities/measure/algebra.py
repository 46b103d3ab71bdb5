"""Lattice operations, pushforwards and kernel composition on finite measures."""

from __future__ import annotations

import math
from collections.abc import Callable, Collection, Mapping

from src.config.exception_handler import domain_exception
from .models import DiscreteKernel, DiscreteMeasure, Point


def _union(mu: DiscreteMeasure, nu: DiscreteMeasure) -> list[Point]:
    points = list(mu.weights)
    points.extend(p for p in nu.weights if p not in mu.weights)
    return points


def meet(mu: DiscreteMeasure, nu: DiscreteMeasure) -> DiscreteMeasure:
    """mu ^ nu: pointwise minimum of the weights."""
    return DiscreteMeasure({p: min(mu[p], nu[p]) for p in _union(mu, nu)})


def subtract(mu: DiscreteMeasure, nu: DiscreteMeasure) -> DiscreteMeasure:
    """mu \\ nu: pointwise positive part of mu - nu."""
    return DiscreteMeasure({p: max(mu[p] - nu[p], 0.0) for p in _union(mu, nu)})


def add(mu: DiscreteMeasure, nu: DiscreteMeasure) -> DiscreteMeasure:
    return mu + nu


def restrict(mu: DiscreteMeasure, a: Collection[Point]) -> DiscreteMeasure:
    return DiscreteMeasure({p: w for p, w in mu if p in a})


def total_variation(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    return math.fsum(abs(mu[p] - nu[p]) for p in _union(mu, nu))


def pushforward(f: Callable[[Point], Point] | Mapping[Point, Point], mu: DiscreteMeasure) -> DiscreteMeasure:
    """(f*mu)(A) = mu(f^-1(A)); colliding images add up."""
    lookup = f.get if isinstance(f, Mapping) else f
    pairs = []
    for point, weight in mu:
        try:
            image = lookup(point)
        except (KeyError, TypeError, ValueError) as exc:
            raise domain_exception("partial map", details={"point": repr(point)}) from exc
        if image is None:
            raise domain_exception("partial map", details={"point": repr(point)})
        pairs.append((image, weight))
    return DiscreteMeasure.from_pairs(pairs)


def compose(r: DiscreteKernel, q: DiscreteKernel, y: Point) -> DiscreteMeasure:
    """(RQ)_y(A x B) = sum over z in A of Q_y(z) R_z(B), as a measure on pairs (z, w)."""
    if y not in q:
        raise domain_exception("kernel domain mismatch", details={"start": repr(y)})
    pairs = []
    for z, qz in q[y]:
        if z not in r:
            raise domain_exception("kernel domain mismatch", details={"point": repr(z)})
        pairs.extend(((z, w), qz * rw) for w, rw in r[z])
    return DiscreteMeasure.from_pairs(pairs)


def product(mu: DiscreteMeasure, nu: DiscreteMeasure) -> DiscreteMeasure:
    """Independent coupling mu x nu on pairs."""
    return DiscreteMeasure.from_pairs(((p, q), wp * wq) for p, wp in mu for q, wq in nu)


def marginal(joint: DiscreteMeasure, axis: int) -> DiscreteMeasure:
    """Projection of a measure on tuples onto one component."""
    return pushforward(lambda pair: pair[axis], joint)


def _density_on(mu1: DiscreteMeasure, mu2: DiscreteMeasure, a: Collection[Point]) -> dict[Point, float]:
    density = {}
    for p in a:
        if mu1[p] == 0.0:
            if mu2[p] > 0.0:
                raise domain_exception(
                    "not absolutely continuous on A", details={"point": repr(p)}
                )
            continue
        density[p] = mu2[p] / mu1[p]
    return density


def overlap_lower_bound(
    mu1: DiscreteMeasure, mu2: DiscreteMeasure, a: Collection[Point]
) -> tuple[float, float]:
    """Returns ((mu1 ^ mu2)(A), 1 - eps1 - sqrt(eps2)).

    eps1 = 1 - mu1(A) and eps2 = integral over A of (1 - D)^2 dmu1 with
    D = dmu2/dmu1. The caller checks lhs >= rhs.
    """
    density = _density_on(mu1, mu2, a)
    lhs = math.fsum(min(mu1[p], mu2[p]) for p in density)
    eps1 = 1.0 - math.fsum(mu1[p] for p in density)
    eps2 = math.fsum((1.0 - d) ** 2 * mu1[p] for p, d in density.items())
    return lhs, 1.0 - eps1 - math.sqrt(eps2)


def overlap_lower_bound_inverse(
    mu1: DiscreteMeasure, mu2: DiscreteMeasure, a: Collection[Point]
) -> tuple[float, float]:
    """Returns ((mu1 ^ mu2)(A), mu1(A)^2 / (4c)).

    c dominates the integral over A of D^-2 dmu1 and is raised to at least
    mu1(A)/3, the range in which the quadratic bound is valid. A vanishing
    density on A makes c infinite and the bound zero.
    """
    density = _density_on(mu1, mu2, a)
    lhs = math.fsum(min(mu1[p], mu2[p]) for p in density)
    mass_a = math.fsum(mu1[p] for p in density)
    if mass_a == 0.0:
        return lhs, 0.0
    if any(d == 0.0 for d in density.values()):
        return lhs, 0.0
    c = math.fsum(mu1[p] / d**2 for p, d in density.items())
    c = max(c, mass_a / 3.0)
    return lhs, mass_a**2 / (4.0 * c)


def meet_mass_from_density(p: DiscreteMeasure, density: Mapping[Point, float]) -> float:
    """||D.P ^ P|| = integral of min(1, D) dP."""
    return math.fsum(min(1.0, density.get(point, 0.0)) * w for point, w in p)
