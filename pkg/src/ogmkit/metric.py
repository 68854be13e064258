"""Primal/dual geometry used by every solver.

The norm is induced by a positive definite operator B: the primal norm is
sqrt(<Bx, x>) and the dual norm of a gradient g is sqrt(<g, B^{-1}g>).
Only the identity and strictly positive diagonal cases are supported; both
keep B^{-1} trivial, which is all the benchmark problems need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Metric:
    """Norm-inducing operator B, either the identity or a positive diagonal."""

    diag: np.ndarray | None = None

    def __post_init__(self):
        if self.diag is not None:
            d = np.asarray(self.diag, dtype=float)
            if d.ndim != 1:
                raise ValueError("diagonal metric must be a 1-D vector")
            if not np.all(d > 0):
                raise ValueError("diagonal metric entries must be strictly positive")
            object.__setattr__(self, "diag", d)

    @classmethod
    def identity(cls) -> "Metric":
        return cls(None)

    @classmethod
    def diagonal(cls, d) -> "Metric":
        return cls(np.asarray(d, dtype=float))

    def apply(self, x: np.ndarray) -> np.ndarray:
        """B x."""
        return x if self.diag is None else self.diag * x

    def solve(self, g: np.ndarray) -> np.ndarray:
        """B^{-1} g."""
        return g if self.diag is None else g / self.diag

    def norm_sq(self, x: np.ndarray) -> float:
        """<Bx, x>, the squared primal norm."""
        if self.diag is None:
            return float(x @ x)
        return float(x @ (self.diag * x))

    def norm(self, x: np.ndarray) -> float:
        return np.sqrt(self.norm_sq(x))

    def dual_norm_sq(self, g: np.ndarray) -> float:
        """<g, B^{-1}g>, the squared dual norm."""
        if self.diag is None:
            return float(g @ g)
        return float(g @ (g / self.diag))

    def dual_norm(self, g: np.ndarray) -> float:
        return np.sqrt(self.dual_norm_sq(g))
