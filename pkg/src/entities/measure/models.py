from __future__ import annotations

import json
import math
from collections.abc import Hashable, Iterable, Iterator, Mapping
from dataclasses import dataclass, field

from src.config.exception_handler import domain_exception

# Weights below this are dropped after every operation.
PRUNE_TOL = 1e-15
PROBABILITY_TOL = 1e-12

Point = Hashable


def _canonical(items: Iterable[tuple[Point, float]]) -> dict[Point, float]:
    weights: dict[Point, float] = {}
    for point, weight in items:
        if weight < 0 or math.isnan(weight):
            raise domain_exception(
                "negative weight", details={"point": repr(point), "weight": weight}
            )
        weights[point] = weights.get(point, 0.0) + float(weight)
    return {p: w for p, w in weights.items() if w > PRUNE_TOL}


@dataclass(frozen=True)
class DiscreteMeasure:
    """Non-negative measure with finite support.

    Support points are compared by exact equality; insertion order is kept so
    that iteration (and therefore serialization) is deterministic.
    """

    weights: Mapping[Point, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "weights", _canonical(self.weights.items()))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Point, float]]) -> DiscreteMeasure:
        return cls(_canonical(pairs))

    @classmethod
    def dirac(cls, point: Point, mass: float = 1.0) -> DiscreteMeasure:
        return cls({point: mass})

    @classmethod
    def uniform(cls, points: Iterable[Point]) -> DiscreteMeasure:
        points = list(points)
        return cls({p: 1.0 / len(points) for p in points})

    @property
    def support(self) -> list[Point]:
        return list(self.weights)

    def __getitem__(self, point: Point) -> float:
        return self.weights.get(point, 0.0)

    def __iter__(self) -> Iterator[tuple[Point, float]]:
        return iter(self.weights.items())

    def __len__(self) -> int:
        return len(self.weights)

    def __add__(self, other: DiscreteMeasure) -> DiscreteMeasure:
        return DiscreteMeasure.from_pairs([*self, *other])

    def mass(self) -> float:
        return math.fsum(self.weights.values())

    def is_probability(self) -> bool:
        return abs(self.mass() - 1.0) <= PROBABILITY_TOL

    def isclose(self, other: DiscreteMeasure, tol: float = 1e-12) -> bool:
        points = set(self.weights) | set(other.weights)
        return all(abs(self[p] - other[p]) <= tol for p in points)

    def dominated_by(self, other: DiscreteMeasure, tol: float = 1e-12) -> bool:
        """mu <= nu pointwise, i.e. mu ^ nu = mu."""
        return all(w <= other[p] + tol for p, w in self)

    def to_json(self) -> str:
        return json.dumps([[_encode_point(p), w] for p, w in self])

    @classmethod
    def from_json(cls, text: str) -> DiscreteMeasure:
        return cls.from_pairs((_decode_point(p), w) for p, w in json.loads(text))


@dataclass(frozen=True)
class DiscreteKernel:
    """Transition kernel: source point -> probability measure over targets."""

    rows: Mapping[Point, DiscreteMeasure]

    def __post_init__(self):
        for source, row in self.rows.items():
            if not row.is_probability():
                raise domain_exception(
                    "kernel row is not a probability measure",
                    details={"source": repr(source), "mass": row.mass()},
                )

    @classmethod
    def deterministic(cls, mapping: Mapping[Point, Point]) -> DiscreteKernel:
        return cls({s: DiscreteMeasure.dirac(t) for s, t in mapping.items()})

    def __contains__(self, point: Point) -> bool:
        return point in self.rows

    def __getitem__(self, point: Point) -> DiscreteMeasure:
        return self.rows[point]

    @property
    def domain(self) -> list[Point]:
        return list(self.rows)


# JSON fixtures store tuples as lists.
def _encode_point(point: Point):
    if isinstance(point, tuple):
        return [_encode_point(p) for p in point]
    return point


def _decode_point(raw) -> Point:
    if isinstance(raw, list):
        return tuple(_decode_point(p) for p in raw)
    return raw
