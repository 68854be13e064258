"""Generalized optimized gradient method for smooth problems.

One solver covers the classical optimal methods through its starting weights:
with guarantee weight A_1 and regularizer curvature gamma_1,

* ``OGM``  : mu = 0, A_1 = 0;
* ``ITEM`` : A_1 = 0, gamma_1 = 1 (strongly convex allowed);
* ``TMM``  : mu > 0, A_1 > 0, gamma_1 = 2 mu r A_1.

State per iteration: guarantee A_k, estimate-function curvature gamma_k,
iterate x_k, estimate-function optimum v_k, oracle point y_k.  The scalar
recursion picks the step weight a_{k+1} so that

    L * abar^2 = 2 r A_{k+1} gamma_{k+1}    (held with equality),

with abar = r (a + q A_{k+1}), gamma_{k+1} = gamma_k + 2 mu r a, and
gbar = gamma_{k+1} - mu abar, which also forces gbar^2 = gamma_k gamma_{k+1}.
The oracle point is the affine combination cancelling the mixed term

    Y = r A_k (x_k - y) + (abar gamma_k / gbar)(v_k - y),

and the optimum update is v' = (gbar v - abar (B^{-1} g' - mu y')) / gamma'.
Maintaining these identities keeps A_k f(y_k) below the running estimate
function minimum, which yields the convergence certificates checked by
:func:`rate_certificate` and :func:`potential_diagnostics`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import CertificateError
from .metric import Metric
from .oracles import OracleCounter, SmoothOracle, eval_w_hat, gradient_step
from .trace import RunRecord, StoppingRule, iterations_to_threshold

MODES = ("custom", "OGM", "ITEM", "TMM")


@dataclass
class OgmConfig:
    """Starting weights and preset mode for the generalized method.

    ``v1`` selects the initial estimate-function optimum: the post-step point
    ``"x1"`` (recommended), the raw starting point ``"x0"``, or an explicit
    vector.
    """

    mode: str = "custom"
    A1: float = 0.0
    gamma1: float = 1.0
    v1: str | np.ndarray = "x1"

    @classmethod
    def ogm(cls, gamma1: float = 1.0) -> "OgmConfig":
        return cls(mode="OGM", A1=0.0, gamma1=gamma1)

    @classmethod
    def item(cls) -> "OgmConfig":
        return cls(mode="ITEM", A1=0.0, gamma1=1.0)

    @classmethod
    def tmm(cls, A1: float = 1.0) -> "OgmConfig":
        return cls(mode="TMM", A1=A1)

    def resolve(self, oracle: SmoothOracle) -> tuple[float, float, float]:
        """Apply mode restrictions; returns (A1, gamma1, mu_effective)."""
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "OGM":
            return 0.0, self.gamma1, 0.0
        if self.mode == "ITEM":
            return 0.0, 1.0, oracle.mu
        if self.mode == "TMM":
            if oracle.mu <= 0:
                raise ValueError("TMM preset needs a strongly convex oracle")
            if self.A1 <= 0:
                raise ValueError("TMM preset needs A1 > 0")
            return self.A1, 2.0 * oracle.mu * oracle.r * self.A1, oracle.mu
        if self.A1 < 0:
            raise ValueError("A1 must be nonnegative")
        if self.gamma1 <= 0:
            raise ValueError("gamma1 must be positive")
        return self.A1, self.gamma1, oracle.mu


@dataclass
class OgmState:
    """Algorithm state at the start of iteration k."""

    k: int
    A: float
    gamma: float
    x: np.ndarray
    v: np.ndarray
    y: np.ndarray
    g: np.ndarray
    f_y: float | None = None


def weight_update(A_k: float, gamma_k: float, L: float, mu: float):
    """Advance the scalar weights by one iteration.

    Returns (a, A_next, gamma_next, a_bar, gamma_bar) where a is the positive
    root of (L - mu) a^2 - 2 mu a A_k ... arranged so that
    L a_bar^2 = 2 r A_next gamma_next holds with equality.
    """
    if L <= mu:
        raise ValueError("need L > mu")
    q = mu / L
    r = 1.0 / (1.0 - q)
    a = (gamma_k + mu * A_k
         + np.sqrt(gamma_k * (gamma_k + 2.0 * L * A_k))) / (L - mu)
    A_next = A_k + a
    gamma_next = gamma_k + 2.0 * mu * r * a
    a_bar = r * (a + q * A_next)
    gamma_bar = gamma_next - mu * a_bar
    return a, A_next, gamma_next, a_bar, gamma_bar


def oracle_point(A_k: float, gamma_k: float, a_bar: float, gamma_bar: float,
                 x_k: np.ndarray, v_k: np.ndarray, r: float) -> np.ndarray:
    """Next oracle point: the x/v combination that zeroes the mixed term Y."""
    wx = r * A_k * gamma_bar
    wv = a_bar * gamma_k
    den = wx + wv
    assert den > 0, "degenerate oracle-point denominator"
    return (wx * x_k + wv * v_k) / den


def optimum_update(gamma_next: float, gamma_bar: float, a_bar: float,
                   v_k: np.ndarray, y_next: np.ndarray, g_next: np.ndarray,
                   mu: float, metric: Metric) -> np.ndarray:
    """Estimate-function optimum update."""
    return (gamma_bar * v_k
            - a_bar * (metric.solve(g_next) - mu * y_next)) / gamma_next


def rate_certificate(config: OgmConfig, oracle: SmoothOracle, k: int) -> float:
    """Worst-case factor multiplying the scaled initial gap 2*D1/gamma1.

    For mu = 0 the factor L/k^2 bounds f(x_k) - f*; for mu > 0 the factor
    (1 - sqrt(q))^(2k-4) (1-q)^2 / (4q) bounds |v_k - x*|^2.  Requires k >= 2
    and, when mu > 0, gamma1 >= 2 mu r A1.
    """
    if k < 2:
        raise ValueError("certificates start at k = 2")
    A1, gamma1, mu = config.resolve(oracle)
    L = oracle.L
    if mu == 0.0:
        return L / float(k) ** 2
    q = mu / L
    r = 1.0 / (1.0 - q)
    if gamma1 < 2.0 * mu * r * A1 * (1.0 - 1e-12):
        raise ValueError("mu > 0 certificate needs gamma1 >= 2 mu r A1")
    return (1.0 - np.sqrt(q)) ** (2 * k - 4) * (1.0 - q) ** 2 / (4.0 * q)


def _resolve_v1(choice, x0, x1):
    if isinstance(choice, str):
        if choice == "x1":
            return x1.copy()
        if choice == "x0":
            return x0.copy()
        raise ValueError(f"unknown v1 choice {choice!r}")
    v1 = np.asarray(choice, dtype=float)
    if v1.shape != x1.shape:
        raise ValueError("explicit v1 has wrong shape")
    return v1.copy()


def ogm_run(oracle: SmoothOracle, metric: Metric, config: OgmConfig,
            x0: np.ndarray, max_iter: int, stop: StoppingRule | None = None,
            keep_vectors: bool = False) -> RunRecord:
    """Run the generalized method; returns the per-iteration trace.

    The first iteration is always the plain gradient step from y_1 = x0; all
    certificates in the trace account for it.  Iterate-error stopping and the
    potential column need the oracle to carry a known optimum.
    """
    t0 = time.perf_counter()
    A1, gamma1, mu = config.resolve(oracle)
    L = oracle.L
    q = mu / L
    r = 1.0 / (1.0 - q)
    x_star, f_star = oracle.x_star, oracle.f_star
    counted = OracleCounter(oracle)
    stop = stop or StoppingRule()
    if stop.eps_rel is not None and x_star is None:
        raise ValueError("eps_rel stopping needs a known optimum")

    x0 = np.asarray(x0, dtype=float)
    y = x0.copy()
    g = counted.grad(y)
    x = gradient_step(oracle, metric, y, g)
    v = _resolve_v1(config.v1, x0, x)
    A, gamma = A1, gamma1

    record = RunRecord()
    if keep_vectors:
        record.points = []
    dist0_sq = None
    D1 = None
    if x_star is not None:
        dist0_sq = metric.norm_sq(x0 - x_star)
        if f_star is not None:
            w_hat1 = eval_w_hat(mu, r, L, metric, x, g, x_star)
            D1 = A1 * (oracle.f(y) - f_star - w_hat1) \
                + 0.5 * gamma1 * metric.norm_sq(v - x_star)

    def potential(A_k, gamma_k, y_k, x_k, g_k, v_k):
        if x_star is None or f_star is None:
            return None
        w_hat = eval_w_hat(mu, r, L, metric, x_k, g_k, x_star)
        return A_k * (oracle.f(y_k) - f_star - w_hat) \
            + 0.5 * gamma_k * metric.norm_sq(v_k - x_star)

    def snapshot(k, y_k, x_k, v_k, g_k):
        if record.points is not None:
            record.points.append(
                {"k": k, "y": y_k.copy(), "x": x_k.copy(),
                 "v": v_k.copy(), "g": g_k.copy()})

    record.add(
        k=1, A=A, gamma=gamma, L=L,
        dist_sq=None if x_star is None else metric.norm_sq(v - x_star),
        f_val=oracle.f(x), oracle_calls=counted.calls,
        potential=potential(A, gamma, y, x, g, v))
    snapshot(1, y, x, v, g)

    k = 1
    for _ in range(max_iter):
        a, A_next, gamma_next, a_bar, gamma_bar = weight_update(A, gamma, L, mu)
        y_next = oracle_point(A, gamma, a_bar, gamma_bar, x, v, r)
        g_next = counted.grad(y_next)
        x_next = gradient_step(oracle, metric, y_next, g_next)
        v_next = optimum_update(gamma_next, gamma_bar, a_bar, v, y_next,
                                g_next, mu, metric)
        # potential decrease surrogate; ~0 up to rounding along this scheme
        gap_inc = (0.5 * gamma * metric.norm_sq(v - y_next)
                   - 0.5 * gamma_next * metric.norm_sq(v_next - y_next)
                   + r * A * float(g_next @ (x - y_next))
                   + r * A_next / L * metric.dual_norm_sq(g_next))
        k += 1
        record.add(
            k=k, A=A_next, gamma=gamma_next, L=L,
            dist_sq=None if x_star is None else metric.norm_sq(v_next - x_star),
            f_val=oracle.f(x_next), gap_increment=gap_inc,
            oracle_calls=counted.calls,
            potential=potential(A_next, gamma_next, y_next, x_next, g_next,
                                v_next))
        snapshot(k, y_next, x_next, v_next, g_next)
        y, g, x, v, A, gamma = y_next, g_next, x_next, v_next, A_next, gamma_next
        if stop.eps_rel is not None \
                and metric.norm_sq(v - x_star) < stop.eps_rel ** 2 * dist0_sq:
            break
        if stop.grad_tol is not None and metric.dual_norm(g) < stop.grad_tol:
            break

    record.summary = {
        "solver_kind": "smooth",
        "mode": config.mode,
        "A1": A1, "gamma1": gamma1, "mu": mu, "L": L, "q": q, "r": r,
        "iterations": record.iterations,
        "oracle_calls": counted.calls,
        "D1": D1,
        "dist0_sq": dist0_sq,
        "wall_time_s": time.perf_counter() - t0,
    }
    if stop.eps_rel is not None:
        record.summary["eps_rel"] = stop.eps_rel
        record.summary["iters_to_threshold"] = iterations_to_threshold(
            record, stop.eps_rel, dist0_sq)
    try:
        record.summary["rate_factor"] = rate_certificate(config, oracle, k)
        # with A1 = 0 the first gradient step can be discounted, which shifts
        # the certificate index by one
        if A1 == 0.0:
            record.summary["rate_factor_shifted"] = rate_certificate(
                config, oracle, k + 1)
    except ValueError:
        pass
    return record


@dataclass
class PotentialRecord:
    """Potential value D_k and the guaranteed decrease surrogate at step k."""

    D: float
    gap_increment: float | None


def potential_diagnostics(record: RunRecord, oracle: SmoothOracle,
                          metric: Metric) -> list[PotentialRecord]:
    """Potential sequence D_k along a recorded trajectory.

    D_k = A_k (f(y_k) - f* - w_hat_k(x*)) + (gamma_k/2)|v_k - x*|^2 must never
    exceed D_1; a violation raises :class:`CertificateError`.  The per-step
    ``gap_increment`` reproduces the guaranteed lower bound on D_k - D_{k+1}
    (zero up to rounding when the update identities hold).  Needs a trace
    recorded with ``keep_vectors=True`` and an oracle with known optimum.
    """
    if oracle.x_star is None or oracle.f_star is None:
        raise ValueError("potential diagnostics need a known optimum")
    if record.points is None:
        raise ValueError("trace was recorded without vectors")
    mu = record.summary["mu"]
    L = record.summary["L"]
    q = mu / L
    r = 1.0 / (1.0 - q)
    x_star, f_star = oracle.x_star, oracle.f_star

    A = record.column("A")
    gamma = record.column("gamma")
    out = []
    for i, pt in enumerate(record.points):
        w_hat = eval_w_hat(mu, r, L, metric, pt["x"], pt["g"], x_star)
        D = A[i] * (oracle.f(pt["y"]) - f_star - w_hat) \
            + 0.5 * gamma[i] * metric.norm_sq(pt["v"] - x_star)
        gap = None
        if i + 1 < len(record.points):
            nxt = record.points[i + 1]
            a = A[i + 1] - A[i]
            a_bar = r * (a + q * A[i + 1])
            g_bar = gamma[i + 1] - mu * a_bar
            dy_v = pt["v"] - nxt["y"]
            Y = r * A[i] * (pt["x"] - nxt["y"]) + a_bar * gamma[i] / g_bar * dy_v
            bracket = r * A[i + 1] / L - a_bar ** 2 / (2.0 * gamma[i + 1])
            gnrm = metric.dual_norm_sq(nxt["g"])
            gap = (bracket * (gnrm - mu ** 2 * gamma[i] * gamma[i + 1]
                              / g_bar ** 2 * metric.norm_sq(dy_v))
                   + float((g_bar / gamma[i + 1] * nxt["g"]
                            + mu * metric.apply(gamma[i] / g_bar * dy_v
                                                - mu / (2 * gamma[i + 1]) * Y))
                           @ Y))
        out.append(PotentialRecord(D=D, gap_increment=gap))

    D1 = out[0].D
    worst = max(p.D for p in out)
    if worst > D1 + 1e-9 * abs(D1) + 1e-12:
        k_bad = int(np.argmax([p.D for p in out])) + 1
        raise CertificateError(
            f"potential exceeded its initial value at k={k_bad}: "
            f"{worst!r} > {D1!r}")
    return out
