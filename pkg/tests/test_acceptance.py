"""End-to-end acceptance criteria, one test and one PASS/FAIL line each.

The reference solver run (64^2 x 128, 10^4 steps) takes roughly 20 minutes on
one core; deselect with ``-m "not acceptance"`` for a quick run.
"""

import time
import warnings

import numpy as np
import pytest

from rnslab.besov import PhaseState, phase_weight, young_slack
from rnslab.corpus import random_field, random_solenoidal
from rnslab.experiments import HELD, ExperimentPlan, besov_bound, classify_run
from rnslab.model import LOST, LineGrid, ModelParams, cosine_profile, gain_integral_check, locate_threshold, \
    run_model, x_norm
from rnslab.paraproduct import phase_domination_check, reconstruction_error
from rnslab.rns.dynamics import (max_relative_gap, paradifferential_identity, pressure_solve, pressure_split_eps,
                                 pressure_split_horizontal)
from rnslab.rns.monitor import proposition_monitor, refinement_stable
from rnslab.rns.solver import OK, SpectralTailWarning, energy_check, run
from rnslab.rns.state import SolverConfig, VelocityState
from rnslab.spectral import Grid

pytestmark = pytest.mark.acceptance

CORPUS_GRID = Grid(32, 64)
PAIRS = 100
PHASES = (PhaseState(1.0, 2.0, 0.2, 0.5), PhaseState(1.0, 32.0, 1 / 64, 1.0), PhaseState(0.5, 2.0, 0.0, 0.1))
GAMMAS = (0.5, 1.0, 2.0)
EPS_SWEEP = (1.0, 0.5, 0.25, 0.1)


def corpus(seed: int = 0):
    rng = np.random.default_rng(seed)
    return [(random_field(CORPUS_GRID, rng), random_field(CORPUS_GRID, rng)) for _ in range(PAIRS)]


def quiet_run(cfg: SolverConfig):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SpectralTailWarning)
        return run(cfg)


@pytest.fixture(scope="module")
def pairs():
    return corpus()


@pytest.fixture(scope="module")
def model_campaign():
    """Threshold c per gamma, then runs at c*gamma, c*gamma/2 and 10 c*gamma (timed)."""
    grid = LineGrid()
    unit = x_norm(cosine_profile(grid, 1.0), grid, ModelParams().delta)
    cs = {g: locate_threshold(ModelParams(gamma=g), grid, iters=12) for g in GAMMAS}
    c = min(cs.values())
    runs = {}
    for g in GAMMAS:
        params = ModelParams(gamma=g)
        for factor in (0.5, 1.0, 10.0):
            amp = factor * c * g / unit
            start = time.perf_counter()
            res = run_model(cosine_profile(grid, amp), params, grid, amplitude=amp)
            runs[(g, factor)] = (res, time.perf_counter() - start)
    return grid, c, cs, runs


@pytest.fixture(scope="module")
def reference_run():
    cfg = SolverConfig()
    assert (cfg.n_h, cfg.n_v, cfg.steps) == (64, 128, 10_000)
    return quiet_run(cfg)


@pytest.fixture(scope="module")
def coarse_run():
    return quiet_run(SolverConfig(n_h=32, n_v=64))


def test_01_reconstruction(verdict):
    start = time.perf_counter()
    worst = max(reconstruction_error(a, b) for a, b in corpus())
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 60.0
    assert verdict(1, "paraproduct reconstruction", ok,
                   f"max relative gap {worst:.2e} over {PAIRS} pairs on 32^2x64 in {elapsed:.1f} s")


def test_02_phase_domination(verdict, pairs):
    worst = -np.inf
    for ps in PHASES:
        psi = phase_weight(ps, CORPUS_GRID)
        for a, b in pairs:
            worst = max(worst, *phase_domination_check(a, b, psi))
    assert verdict(2, "phase domination", worst <= 1e-10,
                   f"max pointwise excess {worst:.2e} over {PAIRS} pairs x {len(PHASES)} phases")


def test_03_gain_integral(verdict, model_campaign):
    grid, _, _, runs = model_campaign
    xis = grid.xi[1:][grid.dealias_mask[1:]]
    worst, checked, bounded = 0.0, 0, True
    for res, _ in runs.values():
        for xi in xis:
            g = gain_integral_check(res.params.lam, float(xi), res.times, res.theta_dot)
            worst = max(worst, g.rel_error)
            bounded &= g.quadrature < 1.0 / res.params.lam
            checked += 1
    ok = worst <= 1e-6 and bounded
    assert verdict(3, "gain integral", ok,
                   f"max relative error {worst:.2e} over {len(runs)} runs x {len(xis)} frequencies, "
                   f"below 1/lam: {bounded}")


def test_04_relaxed_phase_heat(verdict):
    # half uniform, half near the tight curve t' = 0, sqrt(t)|xi_h| = 1
    rng = np.random.default_rng(4)
    n, half = 100_000, 50_000
    kh = np.exp(rng.uniform(0.0, np.log(1e3), n))
    t = np.concatenate([rng.uniform(0.0, 100.0, half), (rng.uniform(0.5, 1.5, half) / kh[half:]) ** 2])
    tp = t * np.concatenate([rng.uniform(0.0, 1.0, half), rng.uniform(0.0, 1.0, half) ** 4])
    slack = young_slack(t, tp, kh)
    violations = int(np.sum(slack < 0.0))
    assert verdict(4, "relaxed phase-heat inequality", violations == 0,
                   f"{violations} violations in {n} samples, min slack {slack.min():.2e}")


def test_05_model_bootstrap(verdict, model_campaign):
    grid, c, cs, runs = model_campaign
    problems = []
    slowest = max(dt for _, dt in runs.values())
    for g in GAMMAS:
        delta = ModelParams().delta
        for factor in (0.5, 1.0):
            res, _ = runs[(g, factor)]
            t_end = res.times[-1]
            terminal = x_norm(res.final.u, grid, delta) / res.x_norm0
            if not (np.isclose(t_end, 100.0 / g) and res.min_margin > delta / 2 and terminal < 1e-6):
                problems.append(f"gamma={g} x{factor}: T={t_end:.4g} margin={res.min_margin:.3g} "
                                f"terminal={terminal:.2e}")
        if runs[(g, 10.0)][0].classification != LOST:
            problems.append(f"gamma={g} x10: {runs[(g, 10.0)][0].classification}")
    ok = not problems and slowest < 120.0
    detail = (f"c = {c:.5f} (per gamma {', '.join(f'{k}: {v:.5f}' for k, v in cs.items())}), "
              f"slowest run {slowest:.1f} s" + ("" if not problems else "; " + "; ".join(problems)))
    assert verdict(5, "model-problem bootstrap", ok, detail)


def test_06_besov_lower_bound(verdict):
    rep = besov_bound(ExperimentPlan("besov-bound", values=(1.0, 0.5, 0.25, 0.125)))
    small = [r["lower_ratio"] for r in rep.rows if r["eps"] <= 1 / 8]
    spread = rep.summary["eps_hminus1_spread"]
    ok = bool(small) and min(small) >= 0.25 and spread <= 1.2
    assert verdict(6, "B^-1_inf,inf lower bound", ok,
                   f"ratio at eps=1/8 {min(small):.4f} (need >= 1/4), eps*norm spread {spread:.4f}")


def test_07_solver_conservation(verdict, reference_run):
    res = reference_run
    div = float(res.column("divergence").max())
    leak = float(res.column("outside_support").max())
    monotone = bool(np.all(np.diff(res.theta) >= 0.0))
    complete = res.status == OK and len(res.history) == res.config.steps
    cs = []
    for dt in (1e-3, 5e-4):
        cfg = SolverConfig(t_max=0.1, dt=dt, eta=2.0, lam=0.01)
        cs.append(energy_check(quiet_run(cfg)) / dt**2)
    drift = max(cs) / min(cs)
    ok = complete and div <= 1e-10 and leak == 0.0 and monotone and drift < 2.0 and res.wall_time < 1800.0
    assert verdict(7, "solver conservation", ok,
                   f"{len(res.history)} steps in {res.wall_time:.0f} s, divergence {div:.2e}, "
                   f"outside support {leak:.1e}, theta monotone {monotone}, "
                   f"energy C {cs[0]:.3e} -> {cs[1]:.3e} (x{drift:.3f})")


def test_08_bootstrap_eps_sweep(verdict):
    problems, parts = [], []
    for eps in EPS_SWEEP:
        cfg = SolverConfig(eps=eps, a=1.0, lam=32.0, eta=1.0 / 128.0, n_h=32, n_v=64)
        assert 4 * cfg.lam * cfg.eta <= cfg.a
        res = quiet_run(cfg)
        rows = [res.initial] + [d for d in res.history if d.step % cfg.checkpoint_every == 0]
        growth = max(d.v_phi_tilde for d in rows) / res.norms0.v
        theta_ok = res.phase.theta <= cfg.a / cfg.lam
        if not (res.status == OK and len(res.history) == cfg.steps and theta_ok and growth <= 3.0):
            problems.append(f"eps={eps}: {res.status} {classify_run(res)}")
        parts.append(f"eps={eps:g} theta*lam/a={res.phase.theta * cfg.lam / cfg.a:.3g} growth={growth:.3f}")
    assert verdict(8, "bootstrap eps-sweep", not problems, "; ".join(parts + problems))


def test_09_proposition_constants(verdict, reference_run, coarse_run):
    fine, coarse = proposition_monitor(reference_run), proposition_monitor(coarse_run)
    ok = fine.finite and coarse.finite and refinement_stable(coarse, fine)
    assert verdict(9, "proposition constants", ok,
                   f"C1 {coarse.c1:.4g} -> {fine.c1:.4g}, C2 {coarse.c2:.4g} -> {fine.c2:.4g} "
                   f"(32^2x64 -> 64^2x128)")


def test_10_identity_and_pressure(verdict):
    rng = np.random.default_rng(10)
    worst = {"identity": 0.0, "q = q_h + q_3": 0.0, "eps q = q1 - q2": 0.0}
    for grid in (Grid(16, 32), CORPUS_GRID):
        for eps in (1.0, 0.3, 0.1):
            for _ in range(3):
                st = VelocityState.from_fields(random_solenoidal(grid, rng))
                lines = paradifferential_identity(st.fields, random_field(grid, rng))
                worst["identity"] = max(worst["identity"], *(max_relative_gap(lines[0], x) for x in lines[1:]))
                q = pressure_solve(st, eps)
                q_h, q_3 = pressure_split_horizontal(st, eps)
                q1, q2 = pressure_split_eps(st, eps)
                worst["q = q_h + q_3"] = max(worst["q = q_h + q_3"], max_relative_gap(q, q_h + q_3))
                worst["eps q = q1 - q2"] = max(worst["eps q = q1 - q2"], max_relative_gap(eps * q, q1 - q2))
    ok = max(worst.values()) <= 1e-10
    assert verdict(10, "identity and pressure splits", ok, ", ".join(f"{k} {v:.2e}" for k, v in worst.items()))


def test_classification_matches_hold(reference_run):
    assert classify_run(reference_run) == HELD

