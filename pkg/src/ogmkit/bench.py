"""Seeded synthetic benchmark problems.

Four generators, each deterministic in (kind, dims, seed, params):

* ``SPL``  : smoothed piecewise-linear objective
             s * logsumexp((A x - b)/s) + (mu/2)|x|^2, with the matrix
             shifted so the optimum is exactly the origin;
* ``QUAD`` : ill-conditioned diagonal quadratic (eigenvalues i/n) plus a
             small quadratic regularizer; its intrinsic strong convexity
             1/n is deliberately withheld from the reported constants;
* ``EN``   : dense least squares with an elastic-net regularizer;
* ``ENLR`` : sparse logistic regression with an elastic-net regularizer.

Randomness comes from the pinned generator in :mod:`ogmkit.rng`.  Stream
order per generator (matrices filled row-major):

* SPL : entries of A_hat, then b, then x0 (all uniform on [-1, 1]);
* QUAD: no draws;
* EN  : entries of A, then b (scale 5), then x0 (all standard normal),
        then n normals starting the largest-singular-value power iteration;
* ENLR: nonzero positions as (row, col) pairs of uniforms (duplicates
        skipped until the target count is reached), then the nonzero values,
        then x0 (scale 0.5), then one uniform per label, then n normals for
        the power iteration.

The label probabilities exp(-(A x0)_i) may exceed one; they are clamped to
[0, 1] before sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .oracles import CompositeOracle, SmoothOracle, smooth_as_composite
from .rng import Xoshiro256StarStar

KINDS = ("SPL", "QUAD", "EN", "ENLR")

DEFAULT_DIMS = {
    "SPL": {"desk": (240, 40), "paper": (2400, 400)},
    "QUAD": {"desk": (100, 100), "paper": (1000, 1000)},
    "EN": {"desk": (250, 250), "paper": (2500, 2500)},
    "ENLR": {"desk": (5000, 1000), "paper": (50000, 10000)},
}

DEFAULT_PARAMS = {
    "SPL": {"s": 0.05, "mu_ratio": 1e-4},
    "QUAD": {"mu_ratio": 1e-4},
    "EN": {"lam": 4.0, "mu_ratio": 1e-4, "b_scale": 5.0},
    "ENLR": {"lam": 1e-3, "mu_ratio": 1e-4, "density": 1e-3,
             "x0_scale": 0.5},
}


@dataclass
class ProblemSpec:
    """Identity of one generated problem instance."""

    kind: str
    seed: int = 0
    scale: str = "desk"
    dims: tuple[int, int] | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.dims is None and self.scale not in ("desk", "paper"):
            raise ValueError("scale must be 'desk' or 'paper'")

    @property
    def resolved_dims(self) -> tuple[int, int]:
        if self.dims is not None:
            return tuple(self.dims)
        return DEFAULT_DIMS[self.kind][self.scale]

    @property
    def resolved_params(self) -> dict:
        out = dict(DEFAULT_PARAMS[self.kind])
        out.update(self.params)
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "scale": self.scale,
                "dims": None if self.dims is None else list(self.dims),
                "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        dims = d.get("dims")
        return cls(kind=d["kind"], seed=int(d.get("seed", 0)),
                   scale=d.get("scale", "desk"),
                   dims=None if dims is None else tuple(dims),
                   params=dict(d.get("params", {})))


def logsumexp(z: np.ndarray) -> float:
    """log(sum(exp(z))), overflow-safe via max subtraction."""
    m = float(np.max(z))
    return m + math.log(float(np.sum(np.exp(z - m))))


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z))
    return e / e.sum()


def shrinkage(x: np.ndarray, tau: float) -> np.ndarray:
    """Componentwise soft threshold at level tau > 0."""
    if tau <= 0:
        raise ValueError("threshold must be positive")
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def sigma_max(matvec, rmatvec, n: int, start: np.ndarray,
              rel_tol: float = 1e-6, max_iter: int = 20000) -> float:
    """Largest singular value by power iteration on A^T A.

    Power iteration converges from below at rate (sigma_2/sigma_1)^2, so the
    per-step change understates the remaining error; the stop threshold is
    therefore two orders tighter than the target and the result is inflated
    by the tolerance to serve as an upper Lipschitz estimate.
    """
    v = start / np.linalg.norm(start)
    sigma = 0.0
    for _ in range(max_iter):
        av = matvec(v)
        sigma_new = float(np.linalg.norm(av))
        w = rmatvec(av)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(sigma_new - sigma) <= 1e-2 * rel_tol * sigma_new:
            sigma = sigma_new
            break
        sigma = sigma_new
    return sigma * (1.0 + rel_tol)


def make_spl(spec: ProblemSpec) -> SmoothOracle:
    """Smoothed piecewise-linear problem with optimum at the origin."""
    if spec.kind != "SPL":
        raise ValueError("spec.kind must be SPL")
    M, n = spec.resolved_dims
    p = spec.resolved_params
    s = p["s"]
    rng = Xoshiro256StarStar(spec.seed)
    A_hat = rng.uniform_symmetric(M * n).reshape(M, n)
    b = rng.uniform_symmetric(M)
    x0 = rng.uniform_symmetric(n)
    x0 /= np.linalg.norm(x0)
    w = softmax(-b / s)
    # rank-one correction makes the gradient at the origin vanish exactly
    A = A_hat - np.outer(np.ones(M), w @ A_hat)
    L_smooth = float(np.max(np.linalg.norm(A, axis=0))) / s
    mu = p["mu_ratio"] * L_smooth

    def f(x):
        return s * logsumexp((A @ x - b) / s) + 0.5 * mu * float(x @ x)

    def grad(x):
        return A.T @ softmax((A @ x - b) / s) + mu * x

    return SmoothOracle(dim=n, f=f, grad=grad, L=L_smooth + mu, mu=mu,
                        x_star=np.zeros(n), f_star=s * logsumexp(-b / s),
                        x0=x0, name="SPL")


def make_quad(spec: ProblemSpec) -> SmoothOracle:
    """Diagonal quadratic with spectrum i/n and hidden strong convexity."""
    if spec.kind != "QUAD":
        raise ValueError("spec.kind must be QUAD")
    _, n = spec.resolved_dims
    p = spec.resolved_params
    sigma = np.arange(1, n + 1) / n
    x0 = 1.0 / sigma
    L_smooth = 1.0
    mu = p["mu_ratio"] * L_smooth

    def f(x):
        return 0.5 * float(x @ (sigma * x)) + 0.5 * mu * float(x @ x)

    def grad(x):
        return sigma * x + mu * x

    # reported strong convexity is only the explicit regularizer; the 1/n
    # from the spectrum is withheld on purpose
    return SmoothOracle(dim=n, f=f, grad=grad, L=L_smooth + mu, mu=mu,
                        x_star=np.zeros(n), f_star=0.0, x0=x0, name="QUAD")


def _elastic_net_parts(lam: float, mu: float):
    def psi(x):
        return lam * float(np.abs(x).sum()) + 0.5 * mu * float(x @ x)

    def prox(x, tau):
        return shrinkage(x, tau * lam) / (1.0 + tau * mu)

    return psi, prox


def make_en(spec: ProblemSpec) -> CompositeOracle:
    """Dense least squares with elastic-net regularizer."""
    if spec.kind != "EN":
        raise ValueError("spec.kind must be EN")
    M, n = spec.resolved_dims
    p = spec.resolved_params
    rng = Xoshiro256StarStar(spec.seed)
    A = rng.normal(M * n).reshape(M, n)
    b = rng.normal(M, scale=p["b_scale"])
    x0 = rng.normal(n)
    start = rng.normal(n)
    sig = sigma_max(lambda v: A @ v, lambda u: A.T @ u, n, start)
    L_f = sig * sig
    mu = p["mu_ratio"] * L_f
    lam = p["lam"]

    def f(x):
        res = A @ x - b
        return 0.5 * float(res @ res)

    def grad(x):
        return A.T @ (A @ x - b)

    psi, prox = _elastic_net_parts(lam, mu)
    return CompositeOracle(dim=n, f=f, grad=grad, psi=psi, prox=prox,
                           mu_f=0.0, mu_psi=mu, L_hint=L_f, x0=x0, name="EN")


def make_enlr(spec: ProblemSpec) -> CompositeOracle:
    """Sparse logistic regression with elastic-net regularizer."""
    if spec.kind != "ENLR":
        raise ValueError("spec.kind must be ENLR")
    M, n = spec.resolved_dims
    p = spec.resolved_params
    rng = Xoshiro256StarStar(spec.seed)
    nnz = int(round(p["density"] * M * n))
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    seen = set()
    filled = 0
    while filled < nnz:
        u = rng.uniform(2)
        i = min(int(u[0] * M), M - 1)
        j = min(int(u[1] * n), n - 1)
        if (i, j) in seen:
            continue
        seen.add((i, j))
        rows[filled] = i
        cols[filled] = j
        filled += 1
    vals = rng.normal(nnz)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(M, n))
    x0 = rng.normal(n, scale=p["x0_scale"])
    prob = np.minimum(np.exp(-(A @ x0)), 1.0)
    labels = (rng.uniform(M) < prob).astype(float)
    start = rng.normal(n)
    sig = sigma_max(lambda v: A @ v, lambda u: A.T @ u, n, start)
    L_f = 0.25 * sig * sig
    mu = p["mu_ratio"] * L_f
    lam = p["lam"]

    def f(x):
        z = A @ x
        return float(np.sum(np.logaddexp(0.0, z))) - float(labels @ z)

    def grad(x):
        z = A @ x
        # logistic(z) via the stable complement form
        return A.T @ (0.5 * (1.0 + np.tanh(0.5 * z)) - labels)

    psi, prox = _elastic_net_parts(lam, mu)
    return CompositeOracle(dim=n, f=f, grad=grad, psi=psi, prox=prox,
                           mu_f=0.0, mu_psi=mu, L_hint=L_f, x0=x0,
                           name="ENLR")


_MAKERS = {"SPL": make_spl, "QUAD": make_quad, "EN": make_en,
           "ENLR": make_enlr}


def make_oracle(spec: ProblemSpec, composite: bool = False):
    """Build the oracle for a spec; ``composite=True`` wraps smooth problems
    so composite solvers can run on them."""
    oracle = _MAKERS[spec.kind](spec)
    if composite and isinstance(oracle, SmoothOracle):
        return smooth_as_composite(oracle)
    return oracle
