"""Experiment harness: config parsing, experiment execution, benchmark suite.

The config file is YAML (a key tree of strings, numbers and booleans):

    problem:
      kind: QUAD            # SPL | QUAD | EN | ENLR
      scale: desk           # desk | paper; or explicit dims: [M, n]
      seed: 0
      params: {}            # kind-specific overrides
    solver:
      name: ITEM            # OGM | ITEM | TMM | OGMM | ACGM | EACGM
      # OGMM: preset (ITEM|TMM), A1, m_max, newton_iters, inner_iters, inner_tol
      # EACGM: alpha (number | worst_case | from_Ll), L0, L_l, r_u, r_d
    stop:
      max_iter: 1000
      eps_rel: 1.0e-5       # optional; needs a known optimum
    known_optimum: auto     # auto | analytic | none | oracle_run | <path.npy>
    outputs:
      trace_csv: runs/trace.csv
      summary: runs/summary.json
      figure: runs/figure.png   # optional; omit or null to skip

CLI flags override the seed and redirect outputs.  Runs are deterministic
given (config, seed): the trace CSV is byte-identical across repetitions.
"""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .bench import ProblemSpec, make_oracle
from .certify import CertReport, certify
from .eacgm import EacgmConfig, alpha_max, eacgm_run, rate_ratio
from .errors import ConfigError
from .memory import MemoryConfig, ogmm_run
from .metric import Metric
from .ogm import OgmConfig, ogm_run
from .oracles import CompositeOracle
from .trace import RunRecord, StoppingRule

SMOOTH_SOLVERS = ("OGM", "ITEM", "TMM", "OGMM")
COMPOSITE_SOLVERS = ("ACGM", "EACGM")
COMPOSITE_PROBLEMS = ("EN", "ENLR")

TABLE2_Q = (1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0 / 3.0, 0.4733, 1.0)
TABLE2_RATIOS = (1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5)


@dataclass
class ExperimentConfig:
    problem: ProblemSpec
    solver: str = "ITEM"
    solver_options: dict = field(default_factory=dict)
    max_iter: int = 1000
    eps_rel: float | None = None
    known_optimum: str = "auto"
    trace_csv: str | None = None
    summary_path: str | None = None
    figure_path: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            problem = ProblemSpec.from_dict(d["problem"])
            solver = dict(d.get("solver", {}))
            name = solver.pop("name", "ITEM")
            stop = d.get("stop", {}) or {}
            outputs = d.get("outputs", {}) or {}
            return cls(
                problem=problem,
                solver=str(name),
                solver_options=solver,
                max_iter=int(stop.get("max_iter", 1000)),
                eps_rel=(None if stop.get("eps_rel") is None
                         else float(stop["eps_rel"])),
                known_optimum=str(d.get("known_optimum", "auto")),
                trace_csv=outputs.get("trace_csv"),
                summary_path=outputs.get("summary"),
                figure_path=outputs.get("figure"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad experiment config: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "problem": self.problem.to_dict(),
            "solver": {"name": self.solver, **self.solver_options},
            "stop": {"max_iter": self.max_iter, "eps_rel": self.eps_rel},
            "known_optimum": self.known_optimum,
            "outputs": {"trace_csv": self.trace_csv,
                        "summary": self.summary_path,
                        "figure": self.figure_path},
        }


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"{path} does not contain a config mapping")
    return ExperimentConfig.from_dict(data)


def reference_optimum(oracle: CompositeOracle, metric: Metric,
                      tol: float = 1e-12, max_iter: int = 50000):
    """High-accuracy optimum via a long dampened run (the "oracle run").

    With starting weight 0 the iterate bound reads
    |v_k - x*|^2 <= (gamma_0/gamma_k) |x0 - x*|^2, so running until
    gamma_k >= gamma_0 / tol^2 certifies relative accuracy tol in iterate
    space.  Requires mu > 0.
    """
    if oracle.mu <= 0:
        raise ConfigError("reference optimum needs a strongly convex problem")
    # the rounding allowance keeps the curvature search making progress past
    # the double-precision floor; no certificate floors are asserted here
    cfg = EacgmConfig(alpha="worst_case", A0=0.0, gamma0=1.0,
                      descent_slack_rel=1e-12)
    target = cfg.gamma0 / (tol * tol)
    from .eacgm import EacgmState, line_search_step  # local to avoid cycle noise

    x0 = np.asarray(oracle.x0, dtype=float)
    state = EacgmState(k=0, A=0.0, gamma=cfg.gamma0, x=x0.copy(),
                       v=x0.copy(), L=cfg.resolve_L0(oracle),
                       alpha=cfg.resolve_alpha(oracle))
    for _ in range(max_iter):
        ls = line_search_step(oracle, metric, state, state.alpha, cfg.L_l,
                              cfg.r_u, cfg.r_d,
                              slack_rel=cfg.descent_slack_rel)
        v_next = (state.gamma / ls.gamma_bar) * state.v \
            + (1.0 - state.gamma / ls.gamma_bar) * ls.y \
            - (ls.a_bar / ls.gamma_next) * metric.solve(ls.g)
        state = EacgmState(k=state.k + 1, A=ls.A_next, gamma=ls.gamma_next,
                           x=ls.x, v=v_next, L=ls.L, alpha=state.alpha)
        if state.gamma >= target:
            break
    return state.v.copy(), oracle.F(state.x), state.k


def _solver_is_composite(name: str) -> bool:
    if name in COMPOSITE_SOLVERS:
        return True
    if name in SMOOTH_SOLVERS:
        return False
    raise ConfigError(f"unknown solver {name!r}")


def _build_smooth_config(name: str, opts: dict) -> tuple[OgmConfig, MemoryConfig | None]:
    mem = None
    if name == "OGM":
        cfg = OgmConfig.ogm(gamma1=float(opts.get("gamma1", 1.0)))
    elif name == "ITEM":
        cfg = OgmConfig.item()
    elif name == "TMM":
        cfg = OgmConfig.tmm(A1=float(opts.get("A1", 1.0)))
    elif name == "OGMM":
        preset = opts.get("preset", "ITEM")
        if preset == "ITEM":
            cfg = OgmConfig.item()
        elif preset == "TMM":
            cfg = OgmConfig.tmm(A1=float(opts.get("A1", 1.0)))
        else:
            cfg = OgmConfig(mode="custom", A1=float(opts.get("A1", 0.0)),
                            gamma1=float(opts.get("gamma1", 1.0)))
        mem = MemoryConfig(
            m_max=int(opts.get("m_max", 8)),
            newton_iters=int(opts.get("newton_iters", 2)),
            inner_iters=int(opts.get("inner_iters", 100)),
            inner_tol=float(opts.get("inner_tol", 1e-12)),
        )
    else:
        raise ConfigError(f"unknown smooth solver {name!r}")
    return cfg, mem


def _build_composite_config(name: str, opts: dict) -> EacgmConfig:
    alpha = 0.0 if name == "ACGM" else opts.get("alpha", 0.0)
    if not isinstance(alpha, str):
        alpha = float(alpha)
    return EacgmConfig(
        alpha=alpha,
        L0=(None if opts.get("L0") is None else float(opts["L0"])),
        L_l=float(opts.get("L_l", 0.0)),
        r_u=float(opts.get("r_u", 2.0)),
        r_d=float(opts.get("r_d", 0.9)),
        A0=float(opts.get("A0", 0.0)),
        gamma0=float(opts.get("gamma0", 1.0)),
    )


def _resolve_known_optimum(config: ExperimentConfig, oracle, metric):
    mode = config.known_optimum
    if mode == "none":
        return dataclasses.replace(oracle, x_star=None,
                                   **({"f_star": None} if hasattr(oracle, "f_star")
                                      else {"F_star": None}))
    if mode in ("auto", "analytic"):
        if oracle.x_star is None and mode == "analytic":
            raise ConfigError(
                f"problem {oracle.name} has no analytic optimum")
        return oracle
    if mode == "oracle_run":
        if oracle.x_star is not None:
            return oracle
        if not isinstance(oracle, CompositeOracle):
            raise ConfigError("oracle_run optimum is for composite problems")
        x_star, F_star, _ = reference_optimum(oracle, metric)
        return dataclasses.replace(oracle, x_star=x_star, F_star=F_star)
    path = Path(mode)
    if not path.exists():
        raise ConfigError(f"known_optimum file not found: {mode}")
    x_star = np.load(path)
    if isinstance(oracle, CompositeOracle):
        return dataclasses.replace(oracle, x_star=x_star,
                                   F_star=oracle.F(x_star))
    return dataclasses.replace(oracle, x_star=x_star,
                               f_star=oracle.f(x_star))


def run_experiment(config: ExperimentConfig, out_dir=None,
                   seed: int | None = None) -> tuple[RunRecord, dict]:
    """Execute one experiment; writes trace/summary/figure as configured."""
    spec = config.problem
    if seed is not None:
        spec = dataclasses.replace(spec, seed=seed)
    composite = _solver_is_composite(config.solver)
    if not composite and spec.kind in COMPOSITE_PROBLEMS:
        raise ConfigError(
            f"smooth solver {config.solver} cannot run on composite "
            f"problem {spec.kind}")

    oracle = make_oracle(spec, composite=composite)
    metric = Metric.identity()
    oracle = _resolve_known_optimum(config, oracle, metric)
    if config.eps_rel is not None and oracle.x_star is None:
        raise ConfigError("eps_rel stopping needs a known optimum; set "
                          "known_optimum to analytic/oracle_run or a file")
    stop = StoppingRule(eps_rel=config.eps_rel)
    x0 = oracle.x0

    if composite:
        ecfg = _build_composite_config(config.solver, config.solver_options)
        record = eacgm_run(oracle, metric, ecfg, x0, config.max_iter, stop)
    else:
        ocfg, mem = _build_smooth_config(config.solver, config.solver_options)
        if mem is None:
            record = ogm_run(oracle, metric, ocfg, x0, config.max_iter, stop)
        else:
            record = ogmm_run(oracle, metric, ocfg, mem, x0, config.max_iter,
                              stop)

    record.summary["solver"] = config.solver
    record.summary["problem"] = spec.to_dict()
    record.summary["config"] = config.to_dict()

    paths = {}
    out_dir = Path(out_dir) if out_dir is not None else None

    def _place(p):
        p = Path(p)
        return out_dir / p.name if out_dir is not None else p

    if config.trace_csv:
        paths["trace_csv"] = _place(config.trace_csv)
        record.write_csv(paths["trace_csv"])
    if config.summary_path:
        paths["summary"] = _place(config.summary_path)
        record.write_summary(paths["summary"])
    if config.figure_path:
        from .plots import convergence_figure
        paths["figure"] = _place(config.figure_path)
        convergence_figure({f"{config.solver}": record}, paths["figure"],
                           title=f"{spec.kind} ({spec.scale}), seed {spec.seed}")
    return record, paths


def certify_files(trace_path, summary_path, tol: float = 1e-9) -> CertReport:
    """Re-check the certificates of a serialized run."""
    record = RunRecord.read_csv(trace_path)
    with open(summary_path) as fh:
        summary = json.load(fh)
    return certify(record, summary, tol=tol)


def table2(q_list=None, ratios=None) -> dict:
    """Dampening limits and rate ratios over a grid of condition numbers.

    Returns the largest admissible dampening for each lower condition number
    q_l, the ideal ratio at full dampening, and the grid of ratios at
    q_u = ratio * q_l under the q_l-admissible dampening.
    """
    q_list = list(TABLE2_Q if q_list is None else q_list)
    ratios = list(TABLE2_RATIOS if ratios is None else ratios)
    for q in q_list:
        if not (0.0 <= q <= 1.0):
            raise ConfigError("q values must lie in [0, 1]")
    amax = [alpha_max(q) for q in q_list]
    r_ideal = [rate_ratio(q, 1.0) for q in q_list]
    grid = [[rate_ratio(q * ratio, a) for q, a in zip(q_list, amax)]
            for ratio in ratios]
    return {"q_l": q_list, "alpha_max": amax, "r_ideal": r_ideal,
            "ratios": ratios, "grid": grid}


def format_table2(t: dict) -> str:
    head = "q_l             " + "  ".join(f"{q:<9.3g}" for q in t["q_l"])
    lines = [head,
             "alpha_max(q_l)  " + "  ".join(f"{a:<9.4f}" for a in t["alpha_max"]),
             "r(q_l, 1)       " + "  ".join(f"{r:<9.4f}" for r in t["r_ideal"])]
    lines.append("r(q_u, alpha_max(q_l)) for q_u/q_l:")
    for ratio, row in zip(t["ratios"], t["grid"]):
        lines.append(f"  {ratio:<8.0e}      "
                     + "  ".join(f"{v:<9.4f}" for v in row))
    return "\n".join(lines)


def write_table2_csv(t: dict, path) -> None:
    import csv

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["q_l"] + [format(q, ".17g") for q in t["q_l"]])
        w.writerow(["alpha_max"] + [format(a, ".17g") for a in t["alpha_max"]])
        w.writerow(["r_ideal"] + [format(r, ".17g") for r in t["r_ideal"]])
        for ratio, row in zip(t["ratios"], t["grid"]):
            w.writerow([format(ratio, ".17g")]
                       + [format(v, ".17g") for v in row])


def _bench_experiments(scale: str, seed: int) -> list[ExperimentConfig]:
    exps = []
    smooth_eps = 1e-5
    for kind in ("SPL", "QUAD"):
        prob = ProblemSpec(kind=kind, seed=seed, scale=scale)
        for solver, opts in (
                ("ITEM", {}),
                ("TMM", {"A1": 1.0}),
                ("OGMM", {"preset": "ITEM"}),
                ("OGMM", {"preset": "TMM", "A1": 1.0}),
                ("ACGM", {}),
        ):
            label = solver if solver != "OGMM" else f"OGMM-{opts['preset']}"
            exps.append(ExperimentConfig(
                problem=prob, solver=solver, solver_options=dict(opts),
                max_iter=20000, eps_rel=smooth_eps, known_optimum="analytic",
                trace_csv=f"{kind}_{label}_trace.csv".lower(),
                summary_path=f"{kind}_{label}_summary.json".lower()))
    for kind, eps in (("EN", 1e-5), ("ENLR", 1e-4)):
        prob = ProblemSpec(kind=kind, seed=seed, scale=scale)
        for alpha, opts in (
                (0.0, {}),
                (0.7542, {}),
                ("from_Ll", {"L_l_factor": 0.1}),
                (1.0, {}),
        ):
            label = {0.0: "acgm", 0.7542: "worst_case", 1.0: "alpha1",
                     "from_Ll": "alpha_l"}[alpha]
            solver_opts = {"alpha": alpha}
            if "L_l_factor" in opts:
                solver_opts["L_l_factor"] = opts["L_l_factor"]
            exps.append(ExperimentConfig(
                problem=prob, solver="EACGM", solver_options=solver_opts,
                max_iter=30000, eps_rel=eps, known_optimum="oracle_run",
                trace_csv=f"{kind}_eacgm_{label}_trace.csv".lower(),
                summary_path=f"{kind}_eacgm_{label}_summary.json".lower()))
    return exps


def bench(scale: str, out_dir, seed: int = 0) -> dict:
    """Run the full benchmark suite and render comparison figures.

    Thread count is capped by the OGMKIT_MAX_THREADS environment variable
    (default 1, which keeps execution fully sequential).
    """
    from .plots import convergence_figure, gap_increment_figure

    if scale not in ("desk", "paper"):
        raise ConfigError("scale must be 'desk' or 'paper'")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    exps = _bench_experiments(scale, seed)

    # the reference optimum of a composite problem is shared by all its
    # solver instances; compute it once and hand the runs a file
    xstar_paths: dict[str, Path] = {}

    def _xstar_file(problem: ProblemSpec) -> Path:
        key = problem.kind
        if key not in xstar_paths:
            oracle = make_oracle(problem, composite=True)
            x_star, _, _ = reference_optimum(oracle, Metric.identity())
            path = out_dir / f"{key.lower()}_xstar.npy"
            np.save(path, x_star)
            xstar_paths[key] = path
        return xstar_paths[key]

    # the lambda_l instance needs the problem's measured smoothness, which is
    # only known after generation; resolve L_l here
    def _run(cfg: ExperimentConfig):
        opts = dict(cfg.solver_options)
        factor = opts.pop("L_l_factor", None)
        if factor is not None:
            oracle = make_oracle(cfg.problem, composite=True)
            opts["L_l"] = factor * oracle.L_hint
            opts["alpha"] = "from_Ll"
        cfg = dataclasses.replace(cfg, solver_options=opts)
        if cfg.known_optimum == "oracle_run":
            cfg = dataclasses.replace(
                cfg, known_optimum=str(_xstar_file(cfg.problem)))
        return cfg, run_experiment(cfg, out_dir=out_dir)[0]

    workers = max(1, int(os.environ.get("OGMKIT_MAX_THREADS", "1")))
    if workers == 1:
        results = [_run(c) for c in exps]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run, exps))

    by_problem: dict[str, dict[str, RunRecord]] = {}
    for cfg, rec in results:
        kind = cfg.problem.kind
        if cfg.solver == "OGMM":
            label = f"OGMM-{cfg.solver_options.get('preset', 'ITEM')}"
        elif cfg.solver == "EACGM":
            label = f"EACGM alpha={rec.summary['alpha']:.4f}"
        else:
            label = cfg.solver
        by_problem.setdefault(kind, {})[label] = rec
    summary = {}
    for kind, recs in by_problem.items():
        convergence_figure(recs, out_dir / f"{kind.lower()}_convergence.png",
                           title=f"{kind} ({scale})")
        if kind in COMPOSITE_PROBLEMS:
            gap_increment_figure(
                recs, out_dir / f"{kind.lower()}_gap_increase.png",
                title=f"{kind} ({scale}) estimate-sequence gap increase")
        summary[kind] = {label: rec.summary.get("iters_to_threshold")
                         for label, rec in recs.items()}
    with open(out_dir / "bench_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary
