"""Problem oracles, gradient and proximal steps, and the lower-bound evaluators.

A smooth oracle exposes (f, f') together with a gradient Lipschitz constant L
and a strong convexity parameter mu in [0, L).  A composite oracle adds an
extended-value regularizer psi with an exact proximal map.  Oracles are pure
and immutable; call counting is done by the harness through
:class:`OracleCounter`.

The bound evaluators compute, for a state (y_k, x_k, g_k) with
x_k = y_k - (1/L) B^{-1} g_k:

* a primal-dual global lower bound on f parameterized by a point x and a
  dual variable g,
      w_k(x, g) = f(y_k) + |g_k|_*^2/(2L) + <g_k, x - y_k>
                  + (mu r / 2) |x - x_k|^2 + |g|_*^2/(2L),
* the known-at-the-optimum part
      w_hat_k(x) = (mu r / 2) |x - x_k|^2 + |g_k|_*^2/(2L),

with r = 1/(1 - mu/L).  Both are the raw material for the estimate functions
maintained by the solvers and are exercised directly by the property tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .metric import Metric


@dataclass(frozen=True)
class SmoothOracle:
    """Differentiable convex objective with known smoothness constants.

    ``x_star``/``f_star`` are optional benchmark metadata (a known optimum);
    solvers never require them, diagnostics and relative-error stopping do.
    """

    dim: int
    f: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    L: float
    mu: float = 0.0
    x_star: np.ndarray | None = None
    f_star: float | None = None
    x0: np.ndarray | None = None
    name: str = "smooth"

    def __post_init__(self):
        if not (self.L > 0):
            raise ValueError("gradient Lipschitz constant must be positive")
        if not (0 <= self.mu < self.L):
            raise ValueError("strong convexity parameter must lie in [0, L)")

    @property
    def q(self) -> float:
        """Inverse condition number mu / L."""
        return self.mu / self.L

    @property
    def r(self) -> float:
        """1 / (1 - q) >= 1."""
        return 1.0 / (1.0 - self.q)


@dataclass(frozen=True)
class CompositeOracle:
    """Objective F = f + psi with smooth f and proximable extended-value psi.

    ``prox(x, tau)`` must return the exact minimizer of
    tau*psi(z) + |z - x|^2/2 and always lands in the feasible set (finite
    psi).  ``psi`` returns ``np.inf`` outside the feasible set.
    """

    dim: int
    f: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    psi: Callable[[np.ndarray], float]
    prox: Callable[[np.ndarray, float], np.ndarray]
    mu_f: float = 0.0
    mu_psi: float = 0.0
    L_hint: float | None = None
    x_star: np.ndarray | None = None
    F_star: float | None = None
    x0: np.ndarray | None = None
    name: str = "composite"

    def __post_init__(self):
        if self.mu_f < 0 or self.mu_psi < 0:
            raise ValueError("strong convexity parameters must be nonnegative")

    @property
    def mu(self) -> float:
        return self.mu_f + self.mu_psi

    def F(self, x: np.ndarray) -> float:
        return self.f(x) + self.psi(x)


class OracleCounter:
    """Counting proxy around an oracle; diagnostics use the raw oracle instead."""

    def __init__(self, oracle):
        self.oracle = oracle
        self.calls = 0

    def f(self, x):
        self.calls += 1
        return self.oracle.f(x)

    def grad(self, x):
        self.calls += 1
        return self.oracle.grad(x)

    def psi(self, x):
        self.calls += 1
        return self.oracle.psi(x)

    def prox(self, x, tau):
        self.calls += 1
        return self.oracle.prox(x, tau)


def gradient_step(oracle: SmoothOracle, metric: Metric, y: np.ndarray,
                  g: np.ndarray) -> np.ndarray:
    """One exact-smoothness gradient step, y - (1/L) B^{-1} g with g = f'(y)."""
    return y - metric.solve(g) / oracle.L


def prox_grad_step(oracle: CompositeOracle, metric: Metric, y: np.ndarray,
                   L: float, grad_y: np.ndarray | None = None) -> np.ndarray:
    """Proximal gradient step at curvature L.

    Returns prox_{(1/L) psi}(y - (1/L) B^{-1} f'(y)), the unique minimizer of
    the composite upper model around y.  ``grad_y`` lets callers reuse an
    already computed gradient.
    """
    if L <= 0:
        raise ValueError("curvature estimate must be positive")
    g = oracle.grad(y) if grad_y is None else grad_y
    return oracle.prox(y - metric.solve(g) / L, 1.0 / L)


def composite_gradient_mapping(y: np.ndarray, x: np.ndarray, L_bar: float,
                               metric: Metric) -> np.ndarray:
    """Gradient surrogate L_bar * B (y - x) after a proximal step x from y."""
    return L_bar * metric.apply(y - x)


def eval_w_bound(oracle: SmoothOracle, metric: Metric, y_k: np.ndarray,
                 x_k: np.ndarray, g_k: np.ndarray, x: np.ndarray,
                 g: np.ndarray) -> float:
    """Primal-dual lower bound w_k(x, g) anchored at the oracle state (y_k, g_k)."""
    mu_r = oracle.mu * oracle.r
    return (oracle.f(y_k)
            + metric.dual_norm_sq(g_k) / (2.0 * oracle.L)
            + float(g_k @ (x - y_k))
            + 0.5 * mu_r * metric.norm_sq(x - x_k)
            + metric.dual_norm_sq(g) / (2.0 * oracle.L))


def eval_w_hat(mu: float, r: float, L: float, metric: Metric, x_k: np.ndarray,
               g_k: np.ndarray, x: np.ndarray) -> float:
    """Auxiliary bound (mu r / 2)|x - x_k|^2 + |g_k|_*^2 / (2L)."""
    return 0.5 * mu * r * metric.norm_sq(x - x_k) \
        + metric.dual_norm_sq(g_k) / (2.0 * L)


def smooth_as_composite(oracle: SmoothOracle) -> CompositeOracle:
    """View a smooth problem as composite with psi identically zero.

    Lets the composite solvers run on the smooth benchmark; the proximal map
    is the identity and all strong convexity sits in the smooth part.
    """
    return CompositeOracle(
        dim=oracle.dim,
        f=oracle.f,
        grad=oracle.grad,
        psi=lambda x: 0.0,
        prox=lambda x, tau: x,
        mu_f=oracle.mu,
        mu_psi=0.0,
        L_hint=oracle.L,
        x_star=oracle.x_star,
        F_star=oracle.f_star,
        x0=oracle.x0,
        name=oracle.name,
    )
