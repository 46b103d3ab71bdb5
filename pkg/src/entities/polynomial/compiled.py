from __future__ import annotations

from collections.abc import Mapping

import numpy as np

from src.config.exception_handler import domain_exception
from .models import IndexedPolynomial, Variable


class CompiledPolynomial:
    """Vectorized evaluation of a fixed polynomial over a batch of states.

    Each variable is bound to a column of the input array. Evaluation builds
    a power table once per call and gathers every term's factors in a single
    fancy-indexing pass, so the cost is independent of the Python term loop.
    """

    def __init__(self, poly: IndexedPolynomial, layout: Mapping[Variable, int]):
        self.poly = poly
        missing = sorted(v for v in poly.variables() if v not in layout)
        if missing:
            raise domain_exception(
                "unbound variable", details={"variables": [str(v) for v in missing]}
            )
        self.width = max(layout.values(), default=-1) + 1
        width = max((len(m) for m, _ in poly), default=0) or 1
        n_terms = len(poly)
        # Padding factors point at the constant column with exponent 0.
        self._columns = np.full((n_terms, width), self.width, dtype=np.intp)
        self._exponents = np.zeros((n_terms, width), dtype=np.intp)
        self._coefs = np.zeros(n_terms)
        for t, (mono, coef) in enumerate(poly):
            self._coefs[t] = coef
            for f, (var, exp) in enumerate(mono):
                self._columns[t, f] = layout[var]
                self._exponents[t, f] = exp
        self.max_degree = int(self._exponents.max(initial=0))

    def __call__(self, states: np.ndarray) -> np.ndarray:
        """states: (batch, width) -> (batch,)."""
        states = np.atleast_2d(states)
        if states.shape[1] < self.width:
            raise domain_exception(
                "unbound variable",
                details={"expected_columns": self.width, "got": states.shape[1]},
            )
        batch = states.shape[0]
        if not len(self._coefs):
            return np.zeros(batch)
        padded = np.concatenate([states[:, : self.width], np.ones((batch, 1))], axis=1)
        table = np.empty((self.max_degree + 1, batch, self.width + 1))
        table[0] = 1.0
        for d in range(1, self.max_degree + 1):
            table[d] = table[d - 1] * padded
        # (terms, width, batch)
        factors = table[self._exponents, :, self._columns]
        return self._coefs @ factors.prod(axis=1)
