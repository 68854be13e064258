"""Optimized gradient method with memory.

Extends the generalized smooth solver with a bundle of aggregated lower
bounds and a safeguarded Newton scheme that raises the convergence guarantee
A at runtime while keeping the estimate-sequence property.

Every oracle visit (y, f(y), g, x) is re-centered around the fixed point v_1
into an affine piece (h_bar, g_bar) such that, for all x and g,

    w(x, g) = h_bar + <g_bar, x> + (mu r / 2)|x - v_1|^2 + |g|_*^2/(2L)

is a global lower bound on f; the split parts (h_hat, g_hat) describe the
bound with the oracle values removed.  The bundle keeps a compacted entry
(the running lambda-weighted aggregate), the newest bound, and a cyclic ring
of older raw bounds, together with the Gram matrix Q = G B^{-1} G^T of its
gradients.

For a candidate guarantee A, the normalized estimate function minimum over x
reduces to a simplex QP in the bundle weights lambda,

    omega*(A) = max_lam  -(P(A)/2) lam^T Q lam + <S(A), lam> + R(A),

and the normalized gap phi(A) = omega*(A) - f(y_k) is nonnegative exactly
when the estimate-sequence property holds at A.  Newton iterations on phi
(with the Danskin derivative, lambda held fixed) push A upward, reverting to
the last valid pair whenever inexact inner solves drive phi negative.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .metric import Metric
from .oracles import OracleCounter, SmoothOracle, eval_w_hat, gradient_step
from .ogm import OgmConfig, _resolve_v1, weight_update, oracle_point
from .simplex import simplex_qp_solve
from .trace import RunRecord, StoppingRule, iterations_to_threshold

_GRAM_REFRESH = 64  # full Gram recomputation cadence, bounds drift


@dataclass(frozen=True)
class RecenteredBound:
    """Lower-bound pieces of one oracle visit, re-centered around v_1.

    ``g_bar = g_hat + g`` and, with mu = 0, ``g_hat`` vanishes while
    ``h_hat`` reduces to |g|_*^2/(2L).
    """

    h_bar: float
    g_bar: np.ndarray
    h_hat: float
    g_hat: np.ndarray


def recenter(f_y: float, y: np.ndarray, g: np.ndarray, x: np.ndarray,
             v1: np.ndarray, mu: float, r: float, L: float,
             metric: Metric) -> RecenteredBound:
    """Re-center the bound anchored at (y, g, x) around the fixed point v1."""
    mur = mu * r
    h_hat = 0.5 * mur * (metric.norm_sq(x) - metric.norm_sq(v1)) \
        + metric.dual_norm_sq(g) / (2.0 * L)
    g_hat = mur * metric.apply(v1 - x)
    return RecenteredBound(
        h_bar=h_hat + f_y - float(g @ y),
        g_bar=g_hat + g,
        h_hat=h_hat,
        g_hat=g_hat,
    )


@dataclass
class MemoryConfig:
    """Bundle size and inner/middle scheme budgets."""

    m_max: int = 8
    newton_iters: int = 2
    inner_iters: int = 100
    inner_tol: float = 1e-12

    def __post_init__(self):
        if self.m_max < 1:
            raise ValueError("bundle needs at least one slot")
        if self.newton_iters < 0 or self.inner_iters < 0:
            raise ValueError("iteration budgets must be nonnegative")


class Bundle:
    """Aggregated lower-bound model (H, G) with Gram matrix Q.

    Logical slot 0 is the compacted aggregate, slot 1 the newest raw bound,
    the remaining slots a cyclic ring of older raw bounds where the newest
    displaces the oldest once full.  Gram rows are refreshed exactly for the
    touched slots and fully recomputed every few dozen updates.
    """

    def __init__(self, m_max: int, h0: float, g0: np.ndarray, metric: Metric):
        self.m_max = m_max
        self.H = np.array([h0], dtype=float)
        self.G = np.asarray(g0, dtype=float)[None, :].copy()
        self.Q = np.array([[float(g0 @ metric.solve(g0))]])
        self.slot_cursor = 2
        self._has_newest = False
        self._advances = 0

    @property
    def m(self) -> int:
        return self.H.shape[0]

    def _refresh_rows(self, rows, metric: Metric):
        for i in rows:
            col = self.G @ metric.solve(self.G[i])
            self.Q[i, :] = col
            self.Q[:, i] = col

    def recompute_gram(self, metric: Metric):
        BinvGT = np.column_stack([metric.solve(g) for g in self.G])
        self.Q = self.G @ BinvGT

    def gram_residual(self, metric: Metric) -> float:
        BinvGT = np.column_stack([metric.solve(g) for g in self.G])
        return float(np.max(np.abs(self.Q - self.G @ BinvGT)))

    def replace_single(self, h: float, g: np.ndarray, metric: Metric):
        """Single-slot mode: the whole model is one pre-aggregated entry."""
        assert self.m_max == 1 and self.m == 1
        self.H[0] = h
        self.G[0] = g
        self.Q[0, 0] = float(g @ metric.solve(g))

    def advance(self, h_tilde: float, g_tilde: np.ndarray, h_new: float,
                g_new: np.ndarray, metric: Metric):
        """Install the compacted aggregate and the newest bound.

        The previous newest bound (if any) moves into the ring, displacing
        the oldest entry once the bundle is full.
        """
        assert self.m_max >= 2
        touched = [0, 1]
        if not self._has_newest:
            # grow from the initial single compacted slot
            self.H = np.array([h_tilde, h_new])
            self.G = np.vstack([g_tilde[None, :], g_new[None, :]])
            self.Q = np.zeros((2, 2))
            self._has_newest = True
        else:
            old_h = self.H[1]
            old_g = self.G[1].copy()
            if self.m < self.m_max:
                self.H = np.append(self.H, old_h)
                self.G = np.vstack([self.G, old_g[None, :]])
                q = np.zeros((self.m, self.m))
                q[:-1, :-1] = self.Q
                self.Q = q
                touched.append(self.m - 1)
            elif self.m_max > 2:
                j = self.slot_cursor
                self.H[j] = old_h
                self.G[j] = old_g
                self.slot_cursor = 2 + (j - 2 + 1) % (self.m_max - 2)
                touched.append(j)
            self.H[0] = h_tilde
            self.G[0] = g_tilde
            self.H[1] = h_new
            self.G[1] = g_new
        self._refresh_rows(touched, metric)
        self._advances += 1
        if self._advances % _GRAM_REFRESH == 0:
            self.recompute_gram(metric)


@dataclass(frozen=True)
class NefContext:
    """Quantities fixed for a whole run that the normalized estimate
    function depends on: initial weights, the anchor v_1, and the first
    re-centered bound."""

    A1: float
    gamma1: float
    v1: np.ndarray
    h_hat1: float
    g_hat1: np.ndarray
    f_y1: float
    mu: float
    r: float
    L: float
    metric: Metric

    def gamma_at(self, A: float) -> float:
        return self.gamma1 + 2.0 * self.mu * self.r * (A - self.A1)


@dataclass(frozen=True)
class NefCoefficients:
    """QP form of the normalized estimate function minimum at guarantee A."""

    P: float
    S: np.ndarray
    R: float
    nu: np.ndarray
    A: float


class _Products(NamedTuple):
    """Bundle/bound inner products reused across Newton candidates."""

    Hv: np.ndarray   # H + G v1
    Gk: np.ndarray   # G B^{-1} g_hat_k
    G1: np.ndarray   # G B^{-1} g_hat_1
    kk: float        # <g_hat_k, B^{-1} g_hat_k>
    k1: float        # <g_hat_1, B^{-1} g_hat_k>
    oo: float        # <g_hat_1, B^{-1} g_hat_1>
    vk: float        # <g_hat_k, v1>
    v1: float        # <g_hat_1, v1>


def _products(bundle: Bundle, rb_k: RecenteredBound,
              ctx: NefContext) -> _Products:
    metric = ctx.metric
    bk = metric.solve(rb_k.g_hat)
    b1 = metric.solve(ctx.g_hat1)
    return _Products(
        Hv=bundle.H + bundle.G @ ctx.v1,
        Gk=bundle.G @ bk,
        G1=bundle.G @ b1,
        kk=float(rb_k.g_hat @ bk),
        k1=float(ctx.g_hat1 @ bk),
        oo=float(ctx.g_hat1 @ b1),
        vk=float(rb_k.g_hat @ ctx.v1),
        v1=float(ctx.g_hat1 @ ctx.v1),
    )


def _guarded(A: float, A1: float) -> float:
    return max(A, A1, np.finfo(float).tiny)


def nef_coefficients(bundle: Bundle, rb_k: RecenteredBound, ctx: NefContext,
                     A: float, products: _Products | None = None
                     ) -> NefCoefficients:
    """QP coefficients (P, S, R) of the normalized estimate function at A."""
    if A < ctx.A1 * (1.0 - 1e-12):
        raise ValueError("guarantee candidate below its starting value")
    A = _guarded(A, ctx.A1)
    p = products if products is not None else _products(bundle, rb_k, ctx)
    A1 = ctx.A1
    gam = ctx.gamma_at(A)
    diff = A - A1
    nu = rb_k.g_hat - (A1 / A) * ctx.g_hat1
    P = diff * diff / (A * gam)
    S = (diff / A) * p.Hv - (diff / gam) * (p.Gk - (A1 / A) * p.G1)
    nu_sq = p.kk - 2.0 * (A1 / A) * p.k1 + (A1 / A) ** 2 * p.oo
    R = rb_k.h_hat + (A1 / A) * (ctx.f_y1 - ctx.h_hat1) \
        + (p.vk - (A1 / A) * p.v1) - A / (2.0 * gam) * nu_sq
    return NefCoefficients(P=P, S=S, R=R, nu=nu, A=A)


def nef_gap_value(coeffs: NefCoefficients, bundle: Bundle, lam: np.ndarray,
                  f_yk: float) -> float:
    """phi(A) at fixed weights lam."""
    return float(-0.5 * coeffs.P * (lam @ (bundle.Q @ lam))
                 + coeffs.S @ lam + coeffs.R) - f_yk


def nef_gap_and_derivative(coeffs: NefCoefficients, bundle: Bundle,
                           lam: np.ndarray, f_yk: float,
                           rb_k: RecenteredBound, ctx: NefContext,
                           products: _Products | None = None
                           ) -> tuple[float, float]:
    """Normalized gap phi(A) and its Danskin derivative at fixed lam.

    Uses (A gamma(A))' = gamma(2A) and (A/gamma(A))' = gamma(0)/gamma(A)^2
    to differentiate the QP coefficients in the guarantee variable.
    """
    p = products if products is not None else _products(bundle, rb_k, ctx)
    A = _guarded(coeffs.A, ctx.A1)
    A1, gamma1 = ctx.A1, ctx.gamma1
    mur = ctx.mu * ctx.r
    gam = ctx.gamma_at(A)
    gam2A = ctx.gamma_at(2.0 * A)
    gam0 = ctx.gamma_at(0.0)

    phi = nef_gap_value(coeffs, bundle, lam, f_yk)

    Pp = (A - A1) * (A * gamma1 + A1 * gam) / (A * A * gam * gam)
    Sp = (A1 / (A * A)) * p.Hv \
        - (1.0 / (gam * gam)) * (gamma1 * p.Gk
                                 - (A1 * gam2A / (A * A) - 2.0 * mur)
                                 * A1 * p.G1)
    Rp = -(A1 / (A * A)) * (ctx.f_y1 - ctx.h_hat1 - p.v1) \
        - (1.0 / (2.0 * gam * gam)) * (gam0 * p.kk
                                       - A1 * A1 * gam2A / (A * A) * p.oo
                                       + 4.0 * mur * A1 * p.k1)
    phi_prime = float(-0.5 * Pp * (lam @ (bundle.Q @ lam)) + Sp @ lam + Rp)
    return phi, phi_prime


class NewtonStats(NamedTuple):
    newton_iters: int
    inner_iters: int
    phi_acc: float


def newton_adjust(bundle: Bundle, rb_k: RecenteredBound, f_yk: float,
                  ctx: NefContext, lam0: np.ndarray, A0: float,
                  mem: MemoryConfig) -> tuple[np.ndarray, float, NewtonStats]:
    """Safeguarded Newton increase of the guarantee.

    Starts from a pair (lam0, A0) whose gap is nonnegative by construction
    and returns the last pair observed valid; terminates early when the gap
    turns negative (inexact inner solve) or the derivative loses its sign.
    The guarantee never decreases.
    """
    products = _products(bundle, rb_k, ctx)
    lam_valid, A_valid = np.asarray(lam0, dtype=float), A0
    A = A0
    inner_total = 0
    used = 0
    for t in range(mem.newton_iters):
        coeffs = nef_coefficients(bundle, rb_k, ctx, A, products)
        res = simplex_qp_solve(coeffs.P, bundle.Q, coeffs.S, lam0,
                               mem.inner_iters, mem.inner_tol)
        inner_total += res.iterations
        used = t + 1
        phi, phi_prime = nef_gap_and_derivative(
            coeffs, bundle, res.lam, f_yk, rb_k, ctx, products)
        if phi < 0.0:
            break
        lam_valid, A_valid = res.lam, A
        if phi_prime >= 0.0:
            break
        A = A - phi / phi_prime
    coeffs_v = nef_coefficients(bundle, rb_k, ctx, A_valid, products)
    phi_acc = nef_gap_value(coeffs_v, bundle, lam_valid, f_yk)
    return lam_valid, A_valid, NewtonStats(used, inner_total, phi_acc)


def ogmm_run(oracle: SmoothOracle, metric: Metric, config: OgmConfig,
             mem: MemoryConfig, x0: np.ndarray, max_iter: int,
             stop: StoppingRule | None = None,
             keep_vectors: bool = False) -> RunRecord:
    """Run the memory method; trace rows carry the guarantee before and
    after the Newton adjustment plus middle/inner scheme effort."""
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
    f_y = counted.f(y)
    g = counted.grad(y)
    x = gradient_step(oracle, metric, y, g)
    v1 = _resolve_v1(config.v1, x0, x)
    v = v1.copy()
    rb1 = recenter(f_y, y, g, x, v1, mu, r, L, metric)
    ctx = NefContext(A1=A1, gamma1=gamma1, v1=v1, h_hat1=rb1.h_hat,
                     g_hat1=rb1.g_hat, f_y1=f_y, mu=mu, r=r, L=L,
                     metric=metric)
    A, gamma = A1, gamma1

    record = RunRecord()
    if keep_vectors:
        record.points = []
    dist0_sq = None
    D1 = None
    if x_star is not None:
        dist0_sq = metric.norm_sq(x0 - x_star)
        if f_star is not None:
            D1 = A1 * (f_y - f_star
                       - eval_w_hat(mu, r, L, metric, x, g, x_star)) \
                + 0.5 * gamma1 * metric.norm_sq(v - x_star)

    def snapshot(k, y_k, x_k, v_k, g_k):
        if record.points is not None:
            record.points.append({"k": k, "y": y_k.copy(), "x": x_k.copy(),
                                  "v": v_k.copy(), "g": g_k.copy()})

    record.add(k=1, A=A, gamma=gamma, L=L,
               dist_sq=None if x_star is None else metric.norm_sq(v - x_star),
               f_val=oracle.f(x), oracle_calls=counted.calls)
    snapshot(1, y, x, v, g)

    bundle: Bundle | None = None
    h_tilde = 0.0
    g_tilde = np.zeros_like(x0)
    k = 1
    for _ in range(max_iter):
        a, _, gamma_prov, a_bar, gamma_bar = weight_update(A, gamma, L, mu)
        y_next = oracle_point(A, gamma, a_bar, gamma_bar, x, v, r)
        f_next = counted.f(y_next)
        g_next = counted.grad(y_next)
        x_next = gradient_step(oracle, metric, y_next, g_next)
        rb = recenter(f_next, y_next, g_next, x_next, v1, mu, r, L, metric)

        if bundle is None:
            bundle = Bundle(mem.m_max, rb.h_bar, rb.g_bar, metric)
            lam0 = np.array([1.0])
        elif mem.m_max == 1:
            total = A + a - A1
            w_old = (A - A1) / total
            w_new = a / total
            bundle.replace_single(w_old * h_tilde + w_new * rb.h_bar,
                                  w_old * g_tilde + w_new * rb.g_bar, metric)
            lam0 = np.array([1.0])
        else:
            bundle.advance(h_tilde, g_tilde, rb.h_bar, rb.g_bar, metric)
            lam0 = np.zeros(bundle.m)
            lam0[0] = A - A1
            lam0[1] = a
            lam0 /= A + a - A1

        lam, A_next, stats = newton_adjust(bundle, rb, f_next, ctx, lam0,
                                           A + a, mem)
        gamma_next = gamma1 + 2.0 * mu * r * (A_next - A1)
        h_tilde = float(bundle.H @ lam)
        g_tilde = bundle.G.T @ lam
        rho = (1.0 - A1 / A_next) * g_tilde + rb.g_hat \
            - (A1 / A_next) * ctx.g_hat1
        v_next = v1 - (A_next / gamma_next) * metric.solve(rho)

        k += 1
        record.add(
            k=k, A=A_next, gamma=gamma_next, L=L,
            dist_sq=None if x_star is None
            else metric.norm_sq(v_next - x_star),
            f_val=oracle.f(x_next), oracle_calls=counted.calls,
            inner_iters=stats.inner_iters, A_before=A + a,
            newton_iters=stats.newton_iters, phi_acc=stats.phi_acc)
        snapshot(k, y_next, x_next, v_next, g_next)
        y, g, x, v, A, gamma = y_next, g_next, x_next, v_next, A_next, gamma_next
        if stop.eps_rel is not None \
                and metric.norm_sq(v - x_star) < stop.eps_rel ** 2 * dist0_sq:
            break
        if stop.grad_tol is not None and metric.dual_norm(g) < stop.grad_tol:
            break

    record.summary = {
        "solver_kind": "ogmm",
        "mode": config.mode,
        "A1": A1, "gamma1": gamma1, "mu": mu, "L": L, "q": q, "r": r,
        "m_max": mem.m_max, "newton_iters": mem.newton_iters,
        "inner_iters": mem.inner_iters, "inner_tol": mem.inner_tol,
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
    return record
