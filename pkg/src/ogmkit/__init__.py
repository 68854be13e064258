"""Accelerated first-order convex solvers with runtime guarantee adjustment.

Three solver families share one estimate-function framework:

* :func:`ogm_run` -- generalized optimized gradient method for smooth
  problems, covering the classical optimal methods through presets;
* :func:`ogmm_run` -- the same scheme extended with a bundle of aggregated
  lower bounds and a Newton procedure that raises the convergence guarantee
  at runtime;
* :func:`eacgm_run` -- composite proximal solver with fully adaptive
  curvature search and a dampening parameter improving iterate-space rates.

:mod:`ogmkit.bench` generates the seeded synthetic benchmark problems and
:mod:`ogmkit.harness` runs experiments, writes traces/figures, and checks
convergence certificates.
"""

from .bench import (ProblemSpec, logsumexp, make_en, make_enlr, make_oracle,
                    make_quad, make_spl, shrinkage, softmax)
from .certify import CertReport, certify
from .eacgm import (EacgmConfig, EacgmState, WORST_CASE_ALPHA, alpha_max,
                    delta, eacgm_rate_certificate, eacgm_run,
                    eacgm_step_weight, line_search_step, rate_ratio,
                    weight_quadratics)
from .errors import CertificateError, ConfigError, LineSearchError, OgmkitError
from .memory import (Bundle, MemoryConfig, NefCoefficients, NefContext,
                     RecenteredBound, nef_coefficients, nef_gap_and_derivative,
                     nef_gap_value, newton_adjust, ogmm_run, recenter)
from .metric import Metric
from .ogm import (OgmConfig, OgmState, PotentialRecord, ogm_run, oracle_point,
                  optimum_update, potential_diagnostics, rate_certificate,
                  weight_update)
from .oracles import (CompositeOracle, OracleCounter, SmoothOracle,
                      composite_gradient_mapping, eval_w_bound, eval_w_hat,
                      gradient_step, prox_grad_step, smooth_as_composite)
from .rng import Xoshiro256StarStar
from .simplex import project_simplex, simplex_qp_solve
from .trace import RunRecord, StoppingRule

__all__ = [
    "Bundle", "CertReport", "CertificateError", "CompositeOracle",
    "ConfigError", "EacgmConfig", "EacgmState", "LineSearchError",
    "MemoryConfig", "Metric", "NefCoefficients", "NefContext", "OgmConfig",
    "OgmState", "OgmkitError", "OracleCounter", "PotentialRecord",
    "ProblemSpec", "RecenteredBound", "RunRecord", "SmoothOracle",
    "StoppingRule", "WORST_CASE_ALPHA", "Xoshiro256StarStar", "alpha_max",
    "certify", "composite_gradient_mapping", "delta",
    "eacgm_rate_certificate", "eacgm_run", "eacgm_step_weight",
    "eval_w_bound", "eval_w_hat", "gradient_step", "line_search_step",
    "logsumexp", "make_en", "make_enlr", "make_oracle", "make_quad",
    "make_spl", "nef_coefficients", "nef_gap_and_derivative", "nef_gap_value",
    "newton_adjust", "ogm_run", "ogmm_run", "optimum_update", "oracle_point",
    "potential_diagnostics", "project_simplex", "prox_grad_step",
    "rate_certificate", "rate_ratio", "recenter", "shrinkage",
    "simplex_qp_solve", "smooth_as_composite", "softmax", "weight_quadratics",
    "weight_update",
]

__version__ = "0.1.0"
