"""Experiment plans, sweeps, reports, configuration and the invariant suite."""

import math

import numpy as np
import pytest

from rnslab.config import (
    ConfigError,
    build_plan,
    parse_assignment,
    parse_values,
    read_config,
    reference_page,
    solver_overrides,
)
from rnslab.experiments import (
    BREACHED,
    ERROR,
    HELD,
    KINDS,
    ExperimentPlan,
    Report,
    besov_bound,
    classify_run,
    gnuplot_script,
    model_phase,
    run_eps_sweep,
    run_eta_sweep,
    single_run,
    _run_cell,
    with_overrides,
)
from rnslab.invariants import MUTATIONS, all_passed, run_invariant_suite
from rnslab.rns.solver import run
from rnslab.rns.state import SolverConfig

TINY = {"n_h": 16, "n_v": 32, "t_max": 0.02, "dt": 1e-3, "checkpoint_every": 10}


class TestPlan:
    def test_defaults(self):
        plan = ExperimentPlan("eps-sweep")
        assert plan.resolved_values == (1.0, 0.5, 0.25, 0.1)
        assert plan.seed == 0 and plan.out_dir == "results"

    @pytest.mark.parametrize("kw", [{"kind": "nope"}, {"kind": "eps-sweep", "workers": 0}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            ExperimentPlan(**kw)

    def test_overrides_reach_solver(self):
        plan = with_overrides(ExperimentPlan("single-run"), **TINY)
        assert plan.solver_config(eps=0.25).n_h == 16
        assert plan.solver_config(eps=0.25).eps == 0.25

    def test_every_kind_constructs(self):
        assert all(ExperimentPlan(k).kind == k for k in KINDS)


class TestReport:
    def test_write_and_gnuplot(self, tmp_path):
        rep = Report("eps-sweep", ["eps", "theta_final", "eps_hminus1"],
                     [{"eps": 0.5, "theta_final": 1e-3, "eps_hminus1": 0.1}])
        path = rep.write(tmp_path)
        assert path.read_text() == "eps,theta_final,eps_hminus1\n0.5,0.001,0.1\n"
        gp = (tmp_path / "eps-sweep.gp").read_text()
        assert "set logscale x" in gp and "using 1:2" in gp and "using 1:3" in gp

    def test_gnuplot_fallback_columns(self):
        assert "using 1:2" in gnuplot_script("invariant-suite", "x.csv", ["a", "b"])


class TestClassification:
    def test_held(self):
        assert classify_run(run(SolverConfig(**TINY))) == HELD

    def test_breached(self):
        assert classify_run(run(SolverConfig(**{**TINY, "t_max": 0.5, "eta": 4.0, "lam": 64.0}))) == BREACHED


class TestSweeps:
    def test_eps_sweep_small(self, tmp_path):
        plan = ExperimentPlan("eps-sweep", values=(0.25, 1.0), overrides=dict(TINY, eta=1 / 128))
        rep = run_eps_sweep(plan)
        assert rep.column("eps") == [1.0, 0.25]
        assert rep.summary["all_held"]
        assert rep.summary["eps_hminus1_spread"] < 1.2
        assert all(r["max_divergence"] <= 1e-10 for r in rep.rows)

    def test_eps_sweep_zero_data(self):
        plan = ExperimentPlan("eps-sweep", values=(1.0, 0.5), overrides=dict(TINY, profile="zero"))
        rep = run_eps_sweep(plan)
        assert rep.column("status") == [HELD, HELD]
        assert rep.column("theta_final") == [0.0, 0.0] and rep.column("v0_norm") == [0.0, 0.0]

    def test_eta_sweep_bisects(self):
        plan = ExperimentPlan("eta-sweep", values=(1 / 1024, 8.0), bisection_steps=2,
                              overrides=dict(TINY, t_max=0.2, lam=64.0))
        rep = run_eta_sweep(plan)
        assert rep.column("status")[0] == HELD and rep.column("status")[1] != HELD
        assert 1 / 1024 < rep.summary["eta_star"] < 8.0
        assert rep.summary["size_condition_consistent"]
        assert rep.column("admissible_by_size") == [True, False]

    def test_eta_to_zero_holds(self):
        rep = run_eta_sweep(ExperimentPlan("eta-sweep", values=(1e-8,), overrides=TINY))
        assert rep.column("status") == [HELD] and math.isnan(rep.summary["eta_star"])

    def test_besov_bound_small(self):
        rep = besov_bound(ExperimentPlan("besov-bound", values=(1.0, 0.5), overrides=TINY))
        assert rep.summary["min_lower_ratio"] >= 0.25
        assert rep.summary["f_norm"] == pytest.approx(1 / math.sqrt(2 * math.e * 16), rel=1e-3)

    def test_model_phase_small(self):
        rep = model_phase(ExperimentPlan("model-phase", values=(1.0,), amplitudes=(0.0, 5.0)), steps=500,
                          locate=False)
        assert rep.column("classification") == ["GLOBAL", "LOST-ADMISSIBILITY"]
        assert len(set(rep.column("config_hash"))) == 1

    def test_single_run(self):
        rep, res = single_run(ExperimentPlan("single-run", overrides=TINY))
        assert len(rep.rows) == len(res.history) + 1
        assert rep.summary["classification"] == HELD
        assert np.isfinite(rep.summary["c1"]) and np.isfinite(rep.summary["c2"])

    def test_failed_cell_is_reported(self):
        plan = ExperimentPlan("eps-sweep", overrides=dict(TINY, profile="nope"))
        row = _run_cell(plan.solver_config(eps=0.5))
        assert row["status"] == ERROR and "nope" in row["message"]


class TestConfig:
    def test_values(self):
        assert parse_values("1, 1/2, 0.25") == (1.0, 0.5, 0.25)
        for bad in ("", "x", "1/0", "nan"):
            with pytest.raises(ConfigError):
                parse_values(bad)

    def test_assignment(self):
        assert parse_assignment(" eps = 0.5 ") == ("eps", "0.5")
        with pytest.raises(ConfigError):
            parse_assignment("eps")

    def test_solver_types(self):
        assert solver_overrides({"eta": "1/128"}) == {"eta": 1 / 128}
        out = solver_overrides({"eps": "0.25", "n_h": "32", "eta": "none", "nonlinear": "false", "profile": "zero"})
        assert out == {"eps": 0.25, "n_h": 32, "eta": None, "nonlinear": False, "profile": "zero"}
        for bad in ({"bogus": "1"}, {"n_h": "x"}, {"nonlinear": "maybe"}, {"eps": "1, 2"}, {"dt": "1/0"}):
            with pytest.raises(ConfigError):
                solver_overrides(bad)

    def test_file_and_precedence(self, tmp_path):
        path = tmp_path / "c.ini"
        path.write_text("[solver]\neps = 0.25\nn_h = 16\nn_v = 32\n[experiment]\nseed = 3\nvalues = 1, 1/2\n")
        sections = read_config(path)
        plan = build_plan("eps-sweep", sections, {"seed": 7, "set": ["eps=0.5"]})
        assert plan.seed == 7 and plan.values == (1.0, 0.5)
        assert plan.overrides["eps"] == 0.5 and plan.overrides["n_h"] == 16

    @pytest.mark.parametrize("text", ["[bogus]\nx = 1\n", "[experiment]\nnope = 1\n", "not an ini"])
    def test_bad_files(self, tmp_path, text):
        path = tmp_path / "c.ini"
        path.write_text(text)
        with pytest.raises(ConfigError):
            read_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            read_config(tmp_path / "missing.ini")

    def test_invalid_combination(self):
        with pytest.raises(ConfigError):
            build_plan("single-run", {}, {"set": ["eps=2.0"]})
        with pytest.raises(ConfigError):
            build_plan("model-phase", {}, {"set": ["gamma=x"]})

    def test_model_keys(self):
        plan = build_plan("model-phase", {"model": {"lam": "8"}}, {"set": ["gamma=2"]})
        assert plan.overrides == {"lam": 8.0, "gamma": 2.0}

    def test_reference_page_lists_every_key(self):
        page = reference_page()
        for key in ("eps = 0.5", "lam = 32.0", "n_h = 64", "gamma = 1.0", "seed = 0", "bisection_steps = 6"):
            assert key in page
        assert "[solver]" in page and "[model]" in page and "[experiment]" in page


class TestInvariantSuite:
    def test_all_pass(self):
        results = run_invariant_suite(seed=0)
        assert all_passed(results), "\n".join(r.line() for r in results if not r.passed)
        assert len({r.name for r in results}) == len(results)

    def test_mutation_fails_loudly(self):
        results = run_invariant_suite(seed=0, mutation=MUTATIONS[0], refinement=False)
        failed = [r for r in results if not r.passed]
        assert [r.name for r in failed] == ["paraproduct reconstruction"]
        assert failed[0].value > 1e-3
        assert failed[0].line().startswith("FAIL")

    def test_unknown_mutation(self):
        with pytest.raises(ValueError):
            run_invariant_suite(mutation="nope")
