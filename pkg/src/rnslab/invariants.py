"""Module-level invariants on seeded random corpora, as one pass/fail ledger."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .besov import PhaseState, phase_weight, young_slack
from .corpus import random_field, random_phase_field, random_solenoidal
from .model import LineGrid, ModelParams, cosine_profile, gain_integral_check, run_model
from .paraproduct import low_radius, phase_domination_check, product_estimate_check, reconstruction_error
from .rns.dynamics import (keep_mask, max_relative_gap, nonlinear_tendency, paradifferential_identity,
                           pressure_solve, pressure_split_eps, pressure_split_horizontal)
from .rns.solver import energy_check, run
from .rns.state import SolverConfig, VelocityState
from .spectral import Grid

MUTATIONS = ("paraproduct-complement",)


@dataclass(frozen=True)
class InvariantResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    seed: int

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: {self.value:.3e} (tol {self.tolerance:.1e}, seed {self.seed})"


def _le(name, value, tol, seed) -> InvariantResult:
    return InvariantResult(name, bool(np.isfinite(value) and value <= tol), float(value), tol, seed)


def _mutated_radius(j: int) -> float:
    return low_radius(j + 1)


def check_reconstruction(grid: Grid, rng, pairs: int, seed: int, mutation: str | None = None):
    radius = _mutated_radius if mutation == "paraproduct-complement" else low_radius
    worst = 0.0
    for _ in range(pairs):
        a, b = random_field(grid, rng), random_field(grid, rng)
        worst = max(worst, reconstruction_error(a, b, radius))
    return _le("paraproduct reconstruction", worst, 1e-12, seed)


def check_phase_domination(grid: Grid, rng, pairs: int, seed: int):
    ps = PhaseState(a=1.0, lam=2.0, theta=0.2, t=0.5)
    psi = phase_weight(ps, grid)
    worst = -np.inf
    for _ in range(pairs):
        a, b = random_field(grid, rng), random_field(grid, rng)
        scale = float(np.max(np.abs(a.coeffs)) * np.max(np.abs(b.coeffs)) * np.exp(psi.max()))
        st, sr = phase_domination_check(a, b, psi)
        worst = max(worst, max(st, sr) / max(scale, 1e-300))
    return _le("phase domination", worst, 1e-10, seed)


def check_relaxed_phase_heat(rng, samples: int, seed: int):
    t = rng.uniform(0.0, 10.0, samples)
    tp = t * rng.uniform(0.0, 1.0, samples)
    kh = 1.0 + rng.exponential(5.0, samples)
    violations = int(np.sum(young_slack(t, tp, kh) < 0.0))
    return _le("relaxed phase-heat inequality violations", violations, 0, seed)


def check_gain_integral(seed: int, steps: int = 2000):
    grid = LineGrid()
    params = ModelParams()
    res = run_model(cosine_profile(grid, 0.05), params, grid, t_max=10.0, steps=steps)
    worst = 0.0
    for xi in (1 / 16, 1.0, 8.0, 32.0):
        g = gain_integral_check(params.lam, xi, res.times, res.theta_dot)
        worst = max(worst, g.rel_error if g.closed_form < 1.0 / params.lam else np.inf)
    return _le("gain integral quadrature", worst, 1e-6, seed)


def _states(grid: Grid, rng, count: int):
    for _ in range(count):
        yield VelocityState.from_fields(random_solenoidal(grid, rng))


def check_pressure(grid: Grid, rng, count: int, seed: int, eps: float = 0.3):
    worst_h = worst_e = 0.0
    for st in _states(grid, rng, count):
        q = pressure_solve(st, eps)
        q_h, q_3 = pressure_split_horizontal(st, eps)
        q1, q2 = pressure_split_eps(st, eps)
        worst_h = max(worst_h, max_relative_gap(q, q_h + q_3))
        worst_e = max(worst_e, max_relative_gap(eps * q, q1 - q2))
    return [_le("pressure split q_h + q_3", worst_h, 1e-10, seed),
            _le("pressure split eps q = q1 - q2", worst_e, 1e-10, seed)]


def check_identity(grid: Grid, rng, count: int, seed: int):
    worst = 0.0
    for st in _states(grid, rng, count):
        a = random_field(grid, rng)
        lines = paradifferential_identity(st.fields, a)
        worst = max(worst, max(max_relative_gap(lines[0], x) for x in lines[1:]))
    return _le("paradifferential identity", worst, 1e-10, seed)


def check_tendency_divergence(grid: Grid, rng, count: int, seed: int, eps: float = 0.3):
    n = grid.default_friedrichs_radius()
    keep = keep_mask(grid, n, eps)
    worst = 0.0
    for st in _states(grid, rng, count):
        g = nonlinear_tendency(st.v, grid, eps, keep)
        div = sum(np.broadcast_to(k, grid.spectral_shape) * g[i]
                  for i, k in enumerate((grid.k1, grid.k2, grid.k3)))
        scale = float(np.max(grid.xi_abs * np.sqrt(np.sum(np.abs(g) ** 2, axis=0))))
        worst = max(worst, float(np.max(np.abs(div))) / max(scale, 1e-300))
    return _le("tendency divergence", worst, 1e-10, seed)


def check_energy(seed: int):
    base = SolverConfig(n_h=16, n_v=32, t_max=0.05, dt=1e-3, eta=2.0, lam=0.01)
    lin = run(base.with_(nonlinear=False))
    scale = lin.initial.energy / base.dt
    out = [_le("linear energy residual", energy_check(lin) / scale, 1e-12, seed)]
    c = [energy_check(run(base.with_(dt=dt, t_max=0.1))) / dt**2 for dt in (1e-3, 5e-4)]
    out.append(_le("energy residual dt^2 constant drift", max(c) / max(min(c), 1e-300), 2.0, seed))
    return out


def _ratio(x: float, y: float) -> float:
    lo = min(x, y)
    return max(x, y) / lo if lo > 0 else np.inf


def check_product_refinement(seed: int, pairs: int = 10, s: float = 3.5, decay: float = 4.0):
    consts = []
    for grid in (Grid(16, 32), Grid(32, 64)):
        rng = np.random.default_rng(seed)
        corpus = ((random_phase_field(grid, rng, decay), random_phase_field(grid, rng, decay))
                  for _ in range(pairs))
        consts.append(product_estimate_check(corpus, s))
    coarse, fine = consts
    drift = max(_ratio(coarse.c_T, fine.c_T), _ratio(coarse.c_R, fine.c_R))
    return _le("product constants refinement drift", drift, 2.0, seed)


def run_invariant_suite(seed: int = 0, grid: Grid | None = None, pairs: int = 10,
                        mutation: str | None = None, refinement: bool = True) -> list[InvariantResult]:
    """Every module-level invariant on seeded random inputs.

    ``mutation`` injects a known defect; the suite must then fail.
    """
    if mutation is not None and mutation not in MUTATIONS:
        raise ValueError(f"unknown mutation {mutation!r}; choose from {MUTATIONS}")
    grid = Grid(16, 32) if grid is None else grid
    rng = np.random.default_rng(seed)
    results = [
        check_reconstruction(grid, rng, pairs, seed, mutation),
        check_phase_domination(grid, rng, pairs, seed),
        check_relaxed_phase_heat(rng, 100_000, seed),
        check_gain_integral(seed),
        *check_pressure(grid, rng, 3, seed),
        check_identity(grid, rng, 3, seed),
        check_tendency_divergence(grid, rng, 3, seed),
        *check_energy(seed),
    ]
    if refinement:
        results.append(check_product_refinement(seed))
    return results


def all_passed(results) -> bool:
    return all(r.passed for r in results)

