import numpy as np

from src.entities.measure.models import DiscreteMeasure


def random_measure(rng: np.random.Generator, points: list, mass: float = 1.0, holes: float = 0.3) -> DiscreteMeasure:
    """Random weights on ``points`` with some zeros, normalised to ``mass``."""
    weights = rng.random(len(points)) * (rng.random(len(points)) > holes)
    if not weights.any():
        weights[rng.integers(len(points))] = 1.0
    weights *= mass / weights.sum()
    return DiscreteMeasure(dict(zip(points, weights.tolist())))
