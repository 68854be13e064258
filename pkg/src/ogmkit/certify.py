"""Post-hoc convergence certificate checks on recorded traces.

Every check works from the scalar trace columns plus the run summary, so a
trace loaded back from CSV is as checkable as a live one.  Checks that need
a known optimum (the iterate-distance bound, the potential ceiling) are
skipped when the summary lacks it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trace import RunRecord


@dataclass
class CheckResult:
    name: str
    passed: bool
    max_violation: float
    tol: float
    row: int | None = None
    skipped: bool = False

    def line(self) -> str:
        if self.skipped:
            return f"  [skip] {self.name}"
        mark = "ok" if self.passed else "FAIL"
        loc = "" if self.row is None else f" (row {self.row})"
        return (f"  [{mark:4s}] {self.name}: max violation "
                f"{self.max_violation:.3e} vs tol {self.tol:.1e}{loc}")


@dataclass
class CertReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed or c.skipped for c in self.checks)

    def format(self) -> str:
        lines = ["certificate report:"]
        lines += [c.line() for c in self.checks]
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def _worst(values: np.ndarray) -> tuple[float, int | None]:
    if values.size == 0:
        return 0.0, None
    i = int(np.argmax(values))
    return float(values[i]), i


def _check(name, violations, tol, row_offset=0) -> CheckResult:
    violations = np.asarray(violations, dtype=float)
    worst, idx = _worst(violations)
    return CheckResult(name=name, passed=bool(worst <= tol),
                       max_violation=worst, tol=tol,
                       row=None if idx is None else idx + row_offset)


def certify(record: RunRecord, summary: dict | None = None,
            tol: float = 1e-9) -> CertReport:
    """Check the invariants appropriate to the trace's solver kind."""
    s = summary if summary is not None else record.summary
    kind = s.get("solver_kind")
    if kind not in ("smooth", "ogmm", "composite"):
        raise ValueError(f"cannot certify solver kind {kind!r}")
    checks: list[CheckResult] = []

    A = record.column("A")
    gamma = record.column("gamma")
    checks.append(_check("guarantee A strictly increasing",
                         A[:-1] - A[1:], 0.0, row_offset=1))

    mu = s["mu"]
    if kind in ("smooth", "ogmm"):
        L = s["L"]
        q = mu / L
        r = 1.0 / (1.0 - q)
        A1, gamma1 = s["A1"], s["gamma1"]
        gam_model = gamma1 + 2.0 * mu * r * (A - A1)
        checks.append(_check(
            "curvature tracks the guarantee",
            np.abs(gamma - gam_model) / np.maximum(1.0, gamma), tol))
        if kind == "smooth":
            a = A[1:] - A[:-1]
            a_bar = r * (a + q * A[1:])
            lhs = L * a_bar ** 2
            rhs = 2.0 * r * A[1:] * gamma[1:]
            checks.append(_check(
                "weight identity L abar^2 = 2 r A gamma",
                np.abs(lhs - rhs) / np.maximum(1.0, np.abs(lhs)), tol,
                row_offset=1))
            pot = record.column("potential")
            if np.all(np.isnan(pot)):
                checks.append(CheckResult("potential never exceeds D1", True,
                                          0.0, tol, skipped=True))
            else:
                D1 = pot[0]
                checks.append(_check(
                    "potential never exceeds D1",
                    (pot - D1) / max(1.0, abs(D1)), tol))
        else:
            A_before = record.column("A_before")
            mask = ~np.isnan(A_before)
            checks.append(_check(
                "adjustment never lowers the guarantee",
                (A_before[mask] - A[mask]) / np.maximum(1.0, A[mask]),
                1e-12, row_offset=int(np.argmax(mask))))
            phi = record.column("phi_acc")
            checks.append(_check(
                "normalized gap nonnegative at acceptance",
                -phi[~np.isnan(phi)], tol, row_offset=1))
        D = s.get("D1")
    else:
        alpha = record.column("alpha")
        Lcol = record.column("L")
        mu_psi = s["mu_psi"]
        a = A[1:] - A[:-1]
        gam_step = gamma[:-1] + mu * (a + alpha[1:] * A[1:]
                                      - alpha[:-1] * A[:-1])
        checks.append(_check(
            "curvature recursion",
            np.abs(gamma[1:] - gam_step) / np.maximum(1.0, gamma[1:]), tol,
            row_offset=1))
        L_bar = Lcol[1:] + mu_psi
        q_loc = mu / L_bar
        a_bar = a + q_loc * alpha[1:] * A[1:]
        lhs = (1.0 + q_loc * alpha[1:]) * A[1:] * gamma[1:]
        rhs = L_bar * a_bar ** 2
        checks.append(_check(
            "weight equality (1+q a)A gamma = Lbar abar^2",
            np.abs(lhs - rhs) / np.maximum(1.0, np.abs(lhs)), tol,
            row_offset=1))
        gap = record.column("gap_increment")
        f_prev = record.column("f_val")[:-1]
        floor = -tol * (1.0 + np.abs(f_prev))
        checks.append(_check(
            "estimate-sequence gap increments nonnegative",
            floor - gap[1:], 0.0, row_offset=1))
        D = s.get("D0")

    dist = record.column("dist_sq")
    if D is None or np.all(np.isnan(dist)):
        checks.append(CheckResult("iterate bound dist^2 <= 2 D / gamma",
                                  True, 0.0, tol, skipped=True))
    else:
        bound = 2.0 * D / gamma
        checks.append(_check(
            "iterate bound dist^2 <= 2 D / gamma",
            (dist - bound) / np.maximum(1.0, bound), tol))

    return CertReport(checks)
