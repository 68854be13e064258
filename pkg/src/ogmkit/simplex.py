"""Euclidean simplex projection and the simplex-constrained QP inner solver.

The inner solver maximizes the concave quadratic

    -(P/2) lam^T Q lam + <S, lam>      over the probability simplex,

with Q positive semidefinite and P >= 0.  It is a projected fast gradient
method warm-started at ``lam0`` and keeps the best iterate seen, so the
returned point never has a worse objective than the starting point.  A
Frank-Wolfe gap certifies absolute accuracy for early exit.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum(x) = 1} (sorting based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, v.size + 1)
    rho = idx[u + (1.0 - css) / idx > 0][-1]
    theta = (1.0 - css[rho - 1]) / rho
    return np.maximum(v + theta, 0.0)


class QpResult(NamedTuple):
    lam: np.ndarray
    iterations: int
    objective: float


def _objective(P, Q, S, lam):
    return float(-0.5 * P * (lam @ (Q @ lam)) + S @ lam)


def simplex_qp_solve(P: float, Q: np.ndarray, S: np.ndarray,
                     lam0: np.ndarray, max_iter: int = 100,
                     tol: float = 1e-12) -> QpResult:
    """Approximately maximize -(P/2) lam^T Q lam + <S, lam> on the simplex.

    Exhausting ``max_iter`` is not an error; the best point found so far is
    returned.  With P = 0 (or a curvature-free Q) the problem is linear and
    the maximizing vertex is returned directly, ties resolved to the lowest
    index.
    """
    m = S.shape[0]
    if P < 0:
        raise ValueError("quadratic coefficient must be nonnegative")
    if m == 1:
        return QpResult(np.array([1.0]), 0, _objective(P, Q, S, np.array([1.0])))

    curvature = P * float(np.linalg.eigvalsh(Q).max()) if P > 0 else 0.0
    if curvature <= 0.0:
        lam = np.zeros(m)
        lam[int(np.argmax(S))] = 1.0
        return QpResult(lam, 0, _objective(P, Q, S, lam))

    best = np.asarray(lam0, dtype=float)
    best_obj = _objective(P, Q, S, best)
    x = best.copy()
    y = x.copy()
    t = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        grad = P * (Q @ y) - S          # gradient of the minimized negative
        x_next = project_simplex(y - grad / curvature)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x_next + ((t - 1.0) / t_next) * (x_next - x)
        x, t = x_next, t_next
        obj = _objective(P, Q, S, x)
        if obj > best_obj:
            best_obj, best = obj, x.copy()
        gx = P * (Q @ x) - S
        fw_gap = float(gx @ x) - float(gx.min())
        if fw_gap <= tol:
            break
    return QpResult(best, it, best_obj)
