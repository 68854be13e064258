import json

import numpy as np
import pytest
import yaml

from ogmkit import (CertificateError, ConfigError, Metric, OgmConfig,
                    ProblemSpec, RunRecord, certify, make_quad, ogm_run)
from ogmkit.cli import main as cli_main
from ogmkit.harness import (ExperimentConfig, certify_files, format_table2,
                            load_config, run_experiment, table2,
                            write_table2_csv)


def quad_config(tmp_path, **kw):
    base = dict(
        problem=ProblemSpec("QUAD", seed=0, dims=(40, 40)),
        solver="ITEM",
        max_iter=2000,
        eps_rel=1e-3,
        known_optimum="analytic",
        trace_csv=str(tmp_path / "trace.csv"),
        summary_path=str(tmp_path / "summary.json"),
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestRunExperiment:
    def test_reaches_threshold(self, tmp_path):
        cfg = quad_config(tmp_path)
        record, paths = run_experiment(cfg)
        assert record.summary["iters_to_threshold"] is not None
        dist = record.column("dist_sq")
        assert dist[-1] < 1e-6 * record.summary["dist0_sq"]
        assert paths["trace_csv"].exists()
        assert paths["summary"].exists()

    def test_deterministic_csv(self, tmp_path):
        cfg = quad_config(tmp_path, problem=ProblemSpec("SPL", seed=5,
                                                        dims=(60, 20)))
        run_experiment(cfg)
        first = (tmp_path / "trace.csv").read_bytes()
        run_experiment(cfg)
        assert (tmp_path / "trace.csv").read_bytes() == first

    def test_solver_problem_mismatch(self, tmp_path):
        cfg = quad_config(tmp_path, problem=ProblemSpec("EN", seed=0,
                                                        dims=(30, 30)))
        with pytest.raises(ConfigError):
            run_experiment(cfg)

    def test_composite_solver_on_smooth_problem(self, tmp_path):
        cfg = quad_config(tmp_path, solver="ACGM", max_iter=400)
        record, _ = run_experiment(cfg)
        assert record.summary["solver_kind"] == "composite"
        assert record.summary["alpha"] == 0.0

    def test_eacgm_oracle_run_optimum(self, tmp_path):
        cfg = quad_config(
            tmp_path,
            problem=ProblemSpec("EN", seed=0, dims=(40, 40)),
            solver="EACGM",
            solver_options={"alpha": "worst_case"},
            eps_rel=1e-4,
            max_iter=20000,
            known_optimum="oracle_run",
        )
        record, _ = run_experiment(cfg)
        assert record.summary["iters_to_threshold"] is not None

    def test_seed_override_and_out_dir(self, tmp_path):
        cfg = quad_config(tmp_path, problem=ProblemSpec("SPL", seed=0,
                                                        dims=(60, 20)))
        out = tmp_path / "redirect"
        record, paths = run_experiment(cfg, out_dir=out, seed=123)
        assert record.summary["problem"]["seed"] == 123
        assert paths["trace_csv"].parent == out

    def test_figure_rendering(self, tmp_path):
        cfg = quad_config(tmp_path, max_iter=50, eps_rel=None,
                          figure_path=str(tmp_path / "fig.png"))
        _, paths = run_experiment(cfg)
        assert paths["figure"].stat().st_size > 1000

    def test_ogmm_solver_options(self, tmp_path):
        cfg = quad_config(tmp_path, solver="OGMM",
                          solver_options={"preset": "ITEM", "m_max": 4,
                                          "newton_iters": 1},
                          max_iter=60, eps_rel=None)
        record, _ = run_experiment(cfg)
        assert record.summary["m_max"] == 4
        assert record.summary["newton_iters"] == 1


class TestConfigFile:
    def test_yaml_round_trip(self, tmp_path):
        doc = {
            "problem": {"kind": "QUAD", "dims": [40, 40], "seed": 2},
            "solver": {"name": "TMM", "A1": 1.0},
            "stop": {"max_iter": 100, "eps_rel": 1e-2},
            "known_optimum": "analytic",
            "outputs": {"trace_csv": str(tmp_path / "t.csv"),
                        "summary": str(tmp_path / "s.json")},
        }
        path = tmp_path / "config.yaml"
        path.write_text(yaml.safe_dump(doc))
        cfg = load_config(path)
        assert cfg.solver == "TMM"
        assert cfg.solver_options == {"A1": 1.0}
        assert cfg.max_iter == 100
        record, _ = run_experiment(cfg)
        assert record.summary["mode"] == "TMM"

    def test_rejects_malformed(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("just a string")
        with pytest.raises(ConfigError):
            load_config(path)
        path.write_text(yaml.safe_dump({"solver": {"name": "ITEM"}}))
        with pytest.raises(ConfigError):
            load_config(path)


class TestCertify:
    def test_smooth_trace_passes(self, metric, tmp_path):
        oracle = make_quad(ProblemSpec("QUAD", seed=0, dims=(40, 40)))
        rec = ogm_run(oracle, metric, OgmConfig.item(), oracle.x0, 80)
        report = certify(rec)
        assert report.passed
        assert "PASS" in report.format()

    def test_detects_corrupted_guarantee(self, metric):
        oracle = make_quad(ProblemSpec("QUAD", seed=0, dims=(40, 40)))
        rec = ogm_run(oracle, metric, OgmConfig.item(), oracle.x0, 80)
        rec.rows[37]["A"] *= 1.001
        report = certify(rec)
        assert not report.passed
        bad = [c for c in report.checks if not c.passed and not c.skipped]
        assert any(c.row in (37, 38) for c in bad)

    def test_round_trip_files(self, metric, tmp_path):
        cfg = quad_config(tmp_path)
        record, paths = run_experiment(cfg)
        report = certify_files(paths["trace_csv"], paths["summary"])
        assert report.passed

    def test_composite_trace(self, tmp_path):
        cfg = quad_config(
            tmp_path, problem=ProblemSpec("EN", seed=0, dims=(40, 40)),
            solver="EACGM", solver_options={"alpha": 0.7542},
            eps_rel=None, max_iter=200, known_optimum="none")
        record, paths = run_experiment(cfg)
        report = certify_files(paths["trace_csv"], paths["summary"])
        assert report.passed
        skipped = [c for c in report.checks if c.skipped]
        assert skipped  # the iterate bound needs a known optimum

    def test_csv_round_trip_preserves_rows(self, metric, tmp_path):
        oracle = make_quad(ProblemSpec("QUAD", seed=0, dims=(30, 30)))
        rec = ogm_run(oracle, metric, OgmConfig.item(), oracle.x0, 20)
        p = tmp_path / "t.csv"
        rec.write_csv(p)
        back = RunRecord.read_csv(p)
        assert len(back.rows) == len(rec.rows)
        for a, b in zip(rec.rows, back.rows):
            for col in ("k", "A", "gamma", "dist_sq", "f_val"):
                assert a[col] == b[col]


class TestTable2:
    def test_reference_entries(self):
        t = table2()
        by_q = dict(zip(t["q_l"], t["alpha_max"]))
        assert by_q[1e-7] == pytest.approx(0.9998, abs=5e-5)
        assert by_q[1e-2] == pytest.approx(0.9337, abs=5e-5)
        i = t["q_l"].index(1e-2)
        j = t["ratios"].index(1e-1)
        assert t["grid"][j][i] == pytest.approx(1.3617, abs=5e-5)

    def test_degenerate_q(self):
        t = table2(q_list=[0.0], ratios=[1.0])
        assert t["alpha_max"][0] == pytest.approx(1.0, abs=1e-12)
        assert t["r_ideal"][0] == pytest.approx(np.sqrt(2.0))

    def test_formatting_and_csv(self, tmp_path):
        t = table2(q_list=[1e-3, 1e-2], ratios=[1.0, 0.1])
        text = format_table2(t)
        assert "alpha_max" in text
        p = tmp_path / "t2.csv"
        write_table2_csv(t, p)
        assert p.read_text().startswith("q_l")

    def test_rejects_bad_q(self):
        with pytest.raises(ConfigError):
            table2(q_list=[2.0])


class TestCli:
    def test_run_and_certify(self, tmp_path, capsys):
        doc = {
            "problem": {"kind": "QUAD", "dims": [40, 40], "seed": 0},
            "solver": {"name": "ITEM"},
            "stop": {"max_iter": 300, "eps_rel": 1e-2},
            "known_optimum": "analytic",
            "outputs": {"trace_csv": str(tmp_path / "t.csv"),
                        "summary": str(tmp_path / "s.json")},
        }
        cfg_path = tmp_path / "c.yaml"
        cfg_path.write_text(yaml.safe_dump(doc))
        assert cli_main(["run", "--config", str(cfg_path)]) == 0
        out = capsys.readouterr().out
        assert "iterations" in out
        assert cli_main(["certify", "--trace", str(tmp_path / "t.csv"),
                         "--config", str(cfg_path)]) == 0

    def test_table2_command(self, tmp_path, capsys):
        assert cli_main(["table2", "--ql", "0.001", "0.01",
                         "--out-csv", str(tmp_path / "t.csv")]) == 0
        assert (tmp_path / "t.csv").exists()

    def test_mismatch_exit_code(self, tmp_path):
        doc = {
            "problem": {"kind": "EN", "dims": [30, 30], "seed": 0},
            "solver": {"name": "ITEM"},
            "stop": {"max_iter": 10},
            "outputs": {},
        }
        cfg_path = tmp_path / "c.yaml"
        cfg_path.write_text(yaml.safe_dump(doc))
        assert cli_main(["run", "--config", str(cfg_path)]) == 3

    def test_config_error_exit_code(self, tmp_path):
        p = tmp_path / "broken.yaml"
        p.write_text("[]")
        assert cli_main(["run", "--config", str(p)]) == 2

    def test_certify_failure_exit_code(self, tmp_path):
        doc = {
            "problem": {"kind": "QUAD", "dims": [30, 30], "seed": 0},
            "solver": {"name": "ITEM"},
            "stop": {"max_iter": 50},
            "known_optimum": "analytic",
            "outputs": {"trace_csv": str(tmp_path / "t.csv"),
                        "summary": str(tmp_path / "s.json")},
        }
        cfg_path = tmp_path / "c.yaml"
        cfg_path.write_text(yaml.safe_dump(doc))
        assert cli_main(["run", "--config", str(cfg_path)]) == 0
        # corrupt one guarantee entry in place
        rec = RunRecord.read_csv(tmp_path / "t.csv")
        rec.rows[20]["A"] *= 1.01
        rec.write_csv(tmp_path / "t.csv")
        assert cli_main(["certify", "--trace", str(tmp_path / "t.csv"),
                         "--config", str(cfg_path)]) == 4

    def test_io_error_exit_code(self, tmp_path):
        assert cli_main(["certify", "--trace", str(tmp_path / "none.csv"),
                         "--summary", str(tmp_path / "none.json")]) == 5


class TestBenchPlumbing:
    def test_reduced_suite(self, tmp_path, monkeypatch):
        import ogmkit.harness as harness

        def tiny(scale, seed):
            prob = ProblemSpec("QUAD", seed=seed, dims=(30, 30))
            en = ProblemSpec("EN", seed=seed, dims=(30, 30))
            return [
                ExperimentConfig(problem=prob, solver="ITEM", max_iter=300,
                                 eps_rel=1e-3, known_optimum="analytic",
                                 trace_csv="quad_item_trace.csv",
                                 summary_path="quad_item_summary.json"),
                ExperimentConfig(problem=en, solver="EACGM",
                                 solver_options={"alpha": 0.7542},
                                 max_iter=3000, eps_rel=1e-3,
                                 known_optimum="oracle_run",
                                 trace_csv="en_wc_trace.csv",
                                 summary_path="en_wc_summary.json"),
            ]

        monkeypatch.setattr(harness, "_bench_experiments", tiny)
        summary = harness.bench("desk", tmp_path, seed=0)
        assert summary["QUAD"]["ITEM"] is not None
        assert (tmp_path / "quad_convergence.png").exists()
        assert (tmp_path / "en_convergence.png").exists()
        assert (tmp_path / "en_gap_increase.png").exists()
        assert (tmp_path / "bench_summary.json").exists()
        with open(tmp_path / "bench_summary.json") as fh:
            assert json.load(fh) == summary
