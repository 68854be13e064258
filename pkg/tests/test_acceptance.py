"""Acceptance gate: one test per release criterion, each printing a summary
line (run with ``pytest tests/test_acceptance.py -v -s``).

Criterion 5 contains one sub-check that is expected to fail at desk scale;
see the trailing note in README.md ("Known deviations") for the analysis.
"""

import dataclasses
import time

import numpy as np
import pytest

import ogmkit.memory as memory_mod
from ogmkit import (EacgmConfig, MemoryConfig, Metric, OgmConfig, ProblemSpec,
                    StoppingRule, alpha_max, eacgm_run, eacgm_step_weight,
                    make_en, make_quad, make_spl, nef_coefficients,
                    nef_gap_and_derivative, nef_gap_value, ogm_run, ogmm_run,
                    simplex_qp_solve, weight_quadratics)
from ogmkit.harness import TABLE2_Q, TABLE2_RATIOS, reference_optimum, table2
from conftest import random_quadratic
from test_simplex import grid_search, qp_objective

METRIC = Metric.identity()

PAPER_TABLE2 = {
    "alpha_max": [0.9998, 0.9993, 0.9978, 0.9930, 0.9780, 0.9337, 0.8268,
                  0.7614, 0.7542, 1.0000],
    "r_ideal": [1.4139, 1.4132, 1.4111, 1.4043, 1.3833, 1.3213, 1.1670,
                1.0556, 1.0286, 1.0000],
    "grid": [
        [1.4138, 1.4130, 1.4103, 1.4019, 1.3762, 1.3037, 1.1449, 1.0465,
         1.0240, 1.0000],
        [1.4140, 1.4136, 1.4124, 1.4086, 1.3967, 1.3617, 1.2745, 1.2049,
         1.1838, 1.1670],
        [1.4141, 1.4139, 1.4131, 1.4107, 1.4033, 1.3813, 1.3260, 1.2849,
         1.2749, 1.3213],
        [1.4141, 1.4139, 1.4133, 1.4114, 1.4055, 1.3876, 1.3434, 1.3134,
         1.3083, 1.3833],
        [1.4141, 1.4140, 1.4134, 1.4116, 1.4061, 1.3897, 1.3490, 1.3228,
         1.3193, 1.4043],
        [1.4141, 1.4140, 1.4134, 1.4117, 1.4063, 1.3903, 1.3508, 1.3258,
         1.3228, 1.4111],
    ],
}


def report(num, ok, detail):
    print(f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


@pytest.fixture(scope="module")
def desk_quad():
    return make_quad(ProblemSpec("QUAD", seed=0, scale="desk"))


@pytest.fixture(scope="module")
def desk_spl():
    return make_spl(ProblemSpec("SPL", seed=0, scale="desk"))


@pytest.fixture(scope="module")
def desk_en_with_optimum():
    oracle = make_en(ProblemSpec("EN", seed=0, scale="desk"))
    x_star, F_star, _ = reference_optimum(oracle, METRIC, tol=1e-12)
    return dataclasses.replace(oracle, x_star=x_star, F_star=F_star)


def test_c01_table2_reproduction():
    t0 = time.perf_counter()
    t = table2()
    elapsed = time.perf_counter() - t0
    assert list(t["q_l"]) == list(TABLE2_Q)
    assert list(t["ratios"]) == list(TABLE2_RATIOS)
    worst = 0.0
    for computed, printed in zip(t["alpha_max"], PAPER_TABLE2["alpha_max"]):
        worst = max(worst, abs(computed - printed))
    for computed, printed in zip(t["r_ideal"], PAPER_TABLE2["r_ideal"]):
        worst = max(worst, abs(computed - printed))
    for row_c, row_p in zip(t["grid"], PAPER_TABLE2["grid"]):
        for computed, printed in zip(row_c, row_p):
            worst = max(worst, abs(computed - printed))
    report(1, worst <= 5e-5 and elapsed < 1.0,
           f"all 82 table entries within {worst:.2e} <= 5e-5, "
           f"runtime {elapsed:.3f}s < 1s")


def test_c02_smooth_rate(desk_quad):
    t0 = time.perf_counter()
    rec = ogm_run(desk_quad, METRIC, OgmConfig.ogm(), desk_quad.x0, 500)
    A = rec.column("A")
    f_val = rec.column("f_val")
    L = desk_quad.L
    ks = np.arange(1, len(A) + 1)
    growth_ok = bool(np.all(A[1:] >= 1.0 / (2 * L) * ks[1:] ** 2
                            * (1 - 1e-12)))
    D1 = rec.summary["D1"]
    resid_ok = bool(np.all(f_val[1:] - desk_quad.f_star
                           <= D1 / A[1:] * (1 + 1e-9)))
    elapsed = time.perf_counter() - t0
    report(2, growth_ok and resid_ok and elapsed < 1.0,
           f"A_k >= k^2/(2L) for k<=500 ({growth_ok}), "
           f"f(x_k)-f* <= D1/A_k ({resid_ok}), runtime {elapsed:.3f}s < 1s")


def test_c03_strongly_convex_rate(desk_quad):
    rec = ogm_run(desk_quad, METRIC, OgmConfig.item(), desk_quad.x0, 200)
    A = rec.column("A")
    gamma = rec.column("gamma")
    dist = rec.column("dist_sq")
    q = desk_quad.mu / desk_quad.L
    factor = (1.0 - np.sqrt(q)) ** -2
    growth_ok = bool(np.all(A[2:] >= factor * A[1:-1] * (1 - 1e-9)))
    D1 = rec.summary["D1"]
    bound_ok = bool(np.all(dist <= 2 * D1 / gamma * (1 + 1e-9)))
    report(3, growth_ok and bound_ok,
           f"A growth factor >= (1-sqrt(q))^-2 over 200 iters ({growth_ok}), "
           f"|v_k - x*|^2 <= 2 D1/gamma_k ({bound_ok})")


def test_c04_tmm_equivalence():
    rng = np.random.default_rng(4)
    worst = 0.0
    for trial in range(4):
        mu = 10 ** rng.uniform(-4, -1)
        oracle = random_quadratic(rng, 20, mu, 1.0)
        q = oracle.mu / oracle.L
        sq = np.sqrt(q)
        rec = ogm_run(oracle, METRIC, OgmConfig.tmm(A1=1.0),
                      rng.standard_normal(20), 100, keep_vectors=True)
        A = rec.column("A")
        L = oracle.L
        for i in range(len(rec.points) - 1):
            cur, nxt = rec.points[i], rec.points[i + 1]
            y_ref = (1 - sq) / (1 + sq) * (cur["y"] - cur["g"] / L) \
                + 2 * sq / (1 + sq) * cur["v"]
            v_ref = (1 - sq) * cur["v"] + sq * (nxt["y"] - nxt["g"] / oracle.mu)
            A_ref = A[i] / (1 - sq) ** 2
            worst = max(
                worst,
                np.max(np.abs(nxt["y"] - y_ref)) / (1 + np.max(np.abs(y_ref))),
                np.max(np.abs(nxt["v"] - v_ref)) / (1 + np.max(np.abs(v_ref))),
                abs(A[i + 1] - A_ref) / A_ref)
    report(4, worst <= 1e-10,
           f"momentum-form updates match within {worst:.2e} <= 1e-10 "
           "per iteration (4 random quadratics, n=20, 100 iters)")


def test_c05_memory_esp_and_dominance(desk_spl, desk_quad):
    mem = MemoryConfig(m_max=8, newton_iters=2, inner_iters=100,
                      inner_tol=1e-12)
    stop = StoppingRule(eps_rel=1e-5)
    checks = []
    for name, oracle, cap in (("SPL", desk_spl, 4000),
                              ("QUAD", desk_quad, 4000)):
        base = ogm_run(oracle, METRIC, OgmConfig.item(), oracle.x0, cap, stop)
        mrec = ogmm_run(oracle, METRIC, OgmConfig.item(), mem, oracle.x0,
                        cap, stop)
        phi = mrec.column("phi_acc")[1:]
        phi_ok = bool(np.all(phi >= -1e-9))
        checks.append((f"{name}: phi_k(A_k) >= -1e-9 "
                       f"(min {phi.min():.1e})", phi_ok))
        Ab = base.column("A")
        Am = mrec.column("A")
        n = min(len(Ab), len(Am))
        dom_ok = bool(np.all(Am[:n] >= Ab[:n] * (1 - 1e-12)))
        checks.append((f"{name}: A(memory) >= A(base) pointwise", dom_ok))
        ib = base.summary["iters_to_threshold"]
        im = mrec.summary["iters_to_threshold"]
        iter_ok = im is not None and ib is not None and im <= ib
        checks.append((f"{name}: iterations to 1e-5, memory {im} <= "
                       f"base {ib}", iter_ok))
    for detail, ok in checks:
        print(f"  criterion 5 sub-check [{'ok' if ok else 'FAIL'}]: {detail}")
    report(5, all(ok for _, ok in checks),
           "; ".join(f"{d}: {'ok' if ok else 'FAIL'}" for d, ok in checks))


def test_c06_simplex_qp_oracle_equivalence():
    rng = np.random.default_rng(6)
    sizes = [1] * 10 + [2] * 30 + [3] * 52 + [4] * 8
    worst = 0.0
    for m in sizes:
        B = rng.standard_normal((m, m)) * 0.5
        Q = B @ B.T
        S = rng.standard_normal(m)
        lam0 = rng.dirichlet(np.ones(m))
        res = simplex_qp_solve(1.0, Q, S, lam0, max_iter=100, tol=1e-12)
        ref = grid_search(1.0, Q, S, step=1e-3)
        worst = max(worst, abs(res.objective - ref))
    report(6, worst <= 1e-4,
           f"100 instances (m <= 4): inner-solver objective within "
           f"{worst:.2e} <= 1e-4 of the dense grid")


def test_c07_composite_collapse_to_base_recursions():
    oracle = make_en(ProblemSpec("EN", seed=0, scale="desk"))
    rec = eacgm_run(oracle, METRIC, EacgmConfig(alpha=0.0), oracle.x0, 300)
    A = rec.column("A")
    gamma = rec.column("gamma")
    L = rec.column("L")
    mu = oracle.mu
    a = A[1:] - A[:-1]
    L_bar = L[1:] + oracle.mu_psi
    # with zero dampening the shifted weight abar equals a and the weight
    # equality must reduce to the base method's A' gamma' = Lbar a^2
    w_resid = np.max(np.abs(A[1:] * gamma[1:] - L_bar * a ** 2)
                     / (A[1:] * gamma[1:]))
    g_resid = np.max(np.abs(gamma[1:] - (gamma[:-1] + mu * a))
                     / gamma[1:])
    ok = w_resid <= 1e-10 and g_resid <= 1e-10
    report(7, ok,
           f"zero-dampening recursions over 300 iters: weight equality "
           f"residual {w_resid:.2e}, curvature-update residual "
           f"{g_resid:.2e} (both <= 1e-10)")


def test_c08_composite_certificates_and_ordering(desk_en_with_optimum):
    oracle = desk_en_with_optimum
    q_l = oracle.mu / (0.1 * oracle.L_hint + oracle.mu_psi)
    configs = [
        ("alpha=0", EacgmConfig(alpha=0.0)),
        ("alpha=0.7542", EacgmConfig(alpha="worst_case")),
        (f"alpha=alpha_max({q_l:.2e})",
         EacgmConfig(alpha="from_Ll", L_l=0.1 * oracle.L_hint)),
    ]
    iters = []
    gap_ok = True
    bound_ok = True
    details = []
    for name, cfg in configs:
        rec = eacgm_run(oracle, METRIC, cfg, oracle.x0, 20000,
                        StoppingRule(eps_rel=1e-5))
        gaps = rec.column("gap_increment")[1:]
        f_prev = rec.column("f_val")[:-1]
        floor = -1e-9 * (1 + np.abs(f_prev))
        this_gap_ok = bool(np.all(gaps >= floor))
        dist = rec.column("dist_sq")
        gamma = rec.column("gamma")
        D0 = rec.summary["D0"]
        this_bound_ok = bool(np.all(dist <= 2 * D0 / gamma * (1 + 1e-9)))
        gap_ok &= this_gap_ok
        bound_ok &= this_bound_ok
        iters.append(rec.summary["iters_to_threshold"])
        details.append(f"{name}: {iters[-1]} iters, gaps {this_gap_ok}, "
                       f"bound {this_bound_ok}")
    order_ok = all(i is not None for i in iters) \
        and iters[0] >= iters[1] >= iters[2]
    report(8, gap_ok and bound_ok and order_ok,
           "; ".join(details)
           + f"; larger dampening never slower: {order_ok}")


def test_c09_dampening_sweep():
    rng = np.random.default_rng(9)
    trials = 10000
    all_ok = True
    details = []
    for q_l in (1e-4, 1e-2, 0.3):
        alpha = alpha_max(q_l)
        order_ok = True
        gap_worst = np.inf
        for _ in range(trials):
            mu = np.exp(rng.uniform(-3, 3))
            q = rng.uniform(0.0, 1.0) * q_l
            q = max(q, 1e-12 * q_l)
            L_bar = mu / q
            A = np.exp(rng.uniform(-3, 6))
            gamma = mu * (1 + alpha) * A * (1 + np.exp(rng.uniform(-6, 3)))
            a1, a2 = weight_quadratics(A, gamma, alpha, alpha, q, L_bar, mu)
            if a2 > a1 + 1e-12 * max(1.0, a1):
                order_ok = False
            gt = gamma + mu * (1 - alpha) * A
            a = eacgm_step_weight(A, gamma, gt, alpha, alpha, q, L_bar, mu)
            A2 = A + a
            abar = a + q * alpha * A2
            gamma2 = gamma + mu * (1 + alpha) * a
            gbar = gamma2 - mu * alpha * abar
            gap_worst = min(gap_worst,
                            (gbar ** 2 - gamma * gamma2) / gamma ** 2)
        ok = order_ok and gap_worst >= -1e-10
        all_ok &= ok
        details.append(f"q_l={q_l:g}: a2<=a1 {order_ok}, min curvature-gap "
                       f"{gap_worst:.1e}")
    report(9, all_ok, f"{trials} states per q_l; " + "; ".join(details))


def test_c10_derivative_fidelity(desk_spl):
    states = []
    orig = memory_mod.newton_adjust

    def capture(bundle, rbk, f_yk, ctx, lam0, A0, mem):
        if len(states) < 50:
            states.append((bundle.H.copy(), bundle.G.copy(),
                           dataclasses.replace(rbk), f_yk, ctx,
                           lam0.copy(), A0))
        return orig(bundle, rbk, f_yk, ctx, lam0, A0, mem)

    import unittest.mock as mock
    rng = np.random.default_rng(10)
    with mock.patch.object(memory_mod, "newton_adjust", capture):
        ogmm_run(desk_spl, METRIC, OgmConfig.item(), MemoryConfig(),
                 desk_spl.x0, 30)
        oracle = random_quadratic(rng, 12, 1e-3, 1.0)
        ogmm_run(oracle, METRIC, OgmConfig.tmm(1.0), MemoryConfig(),
                 rng.standard_normal(12) * 3, 30)
    assert len(states) == 50
    from ogmkit.memory import Bundle

    worst = 0.0
    for H, G, rbk, f_yk, ctx, lam, A in states:
        bundle = Bundle(len(H) + 1, 0.0, np.zeros(G.shape[1]), METRIC)
        bundle.H, bundle.G = H, G
        bundle.recompute_gram(METRIC)
        coeffs = nef_coefficients(bundle, rbk, ctx, A)
        phi, dphi = nef_gap_and_derivative(coeffs, bundle, lam, f_yk, rbk,
                                           ctx)
        h = 1e-6 * A
        cp = nef_coefficients(bundle, rbk, ctx, A + h)
        cm = nef_coefficients(bundle, rbk, ctx, A - h)
        fd = (nef_gap_value(cp, bundle, lam, f_yk)
              - nef_gap_value(cm, bundle, lam, f_yk)) / (2 * h)
        worst = max(worst, abs(dphi - fd) / max(abs(dphi), abs(fd), 1e-12))
    report(10, worst <= 1e-5,
           f"gap derivative vs central differences on 50 captured states: "
           f"max relative error {worst:.2e} <= 1e-5")
