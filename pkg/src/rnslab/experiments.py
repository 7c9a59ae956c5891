"""Experiment plans, sweeps and their CSV / gnuplot reports."""

from __future__ import annotations

import csv
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .besov import hminus1_inf_norm
from .model import LineGrid, ModelParams, locate_threshold, phase_diagram
from .rns.monitor import proposition_monitor
from .rns.profiles import DEFAULT_WAVENUMBER, make_initial_data, profile
from .rns.solver import BREACH, OK, RunResult, energy_check, run
from .rns.state import SolverConfig, StepDiagnostics
from .spectral import Grid, forward_transform

KINDS = ("single-run", "eps-sweep", "eta-sweep", "model-phase", "besov-bound", "invariant-suite")

HELD = "HELD"
BREACHED = "BREACHED"
GROWTH = "NORM-GROWTH"
BLOWUP = "BLOWUP"
ERROR = "ERROR"

DEFAULT_VALUES = {
    "eps-sweep": (1.0, 0.5, 0.25, 0.1),
    "eta-sweep": (1 / 1024, 1 / 256, 1 / 64, 1 / 16, 1 / 4, 1.0),
    "besov-bound": (1.0, 0.5, 0.25, 0.125),
    "model-phase": (0.5, 1.0, 2.0),
}


@dataclass(frozen=True)
class ExperimentPlan:
    """What to run and where to write it.

    ``values`` is the swept parameter (eps, eta, or gamma); ``amplitudes``
    is the second axis of the model phase diagram.  ``overrides`` are
    :class:`SolverConfig` fields (or :class:`ModelParams` fields for the
    model problem).
    """

    kind: str
    values: tuple = ()
    amplitudes: tuple = (0.0, 0.05, 0.1, 0.5, 1.0)
    seed: int = 0
    out_dir: str = "results"
    overrides: dict = field(default_factory=dict)
    workers: int = 1
    bisection_steps: int = 6

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.kind in DEFAULT_VALUES and not self.resolved_values:
            raise ValueError(f"{self.kind} needs a nonempty range")

    @property
    def resolved_values(self) -> tuple:
        return tuple(self.values) if self.values else DEFAULT_VALUES.get(self.kind, ())

    def solver_config(self, **kw) -> SolverConfig:
        return SolverConfig(**{**self.overrides, **kw})


@dataclass
class Report:
    kind: str
    columns: list
    rows: list
    summary: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]

    def write(self, out_dir) -> Path:
        """CSV plus a gnuplot script; returns the CSV path."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{self.kind}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([_fmt(r[c]) for c in self.columns])
        (out / f"{self.kind}.gp").write_text(gnuplot_script(self.kind, path.name, self.columns))
        return path


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


_PLOTS = {
    "eps-sweep": ("eps", ["theta_final", "eps_hminus1"], True),
    "eta-sweep": ("eta", ["theta_final", "v_phi_tilde"], True),
    "besov-bound": ("eps", ["eps_hminus1", "lower_ratio"], True),
    "model-phase": ("amplitude", ["theta_final"], False),
    "single-run": ("t", ["theta", "w3_phi", "eps_wh_phi"], False),
}


def gnuplot_script(kind: str, csv_name: str, columns: list) -> str:
    x, ys, logx = _PLOTS.get(kind, (columns[0], columns[1:2], False))
    lines = ["set datafile separator ','", "set key autotitle columnhead",
             "set terminal pngcairo size 800,600", f"set output '{kind}.png'",
             f"set xlabel '{x}'"]
    if logx:
        lines.append("set logscale x")
    xi = columns.index(x) + 1
    plots = [f"'{csv_name}' using {xi}:{columns.index(y) + 1} with linespoints" for y in ys if y in columns]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def param_block(cfg: SolverConfig) -> dict:
    return {"config_hash": cfg.digest(), "a": cfg.a, "lam": cfg.lam, "eps": cfg.eps,
            "eta": cfg.eta if cfg.eta is not None else float("nan"), "n": cfg.friedrichs_radius}


PARAM_COLUMNS = ["config_hash", "a", "lam", "eps", "eta", "n"]


def classify_run(result: RunResult, growth_factor: float = 3.0) -> str:
    """HELD when theta <= a/lam and the L~^inf norm of v_Phi stays within 3x the data."""
    if result.status == BREACH:
        return BREACHED
    if result.status != OK:
        return BLOWUP
    cfg = result.config
    v_max = float(np.max(result.column("v_phi_tilde")))
    if result.phase.theta > cfg.a / cfg.lam:
        return BREACHED
    if v_max > growth_factor * result.norms0.v:
        return GROWTH
    return HELD


def _run_cell(cfg: SolverConfig) -> dict:
    row = {"status": ERROR, "message": "", "theta_final": float("nan"), "margin_final": float("nan"),
           "v_phi_tilde": float("nan"), "v0_norm": float("nan"), "steps": 0,
           "energy_residual": float("nan"), "max_divergence": float("nan"),
           "c1": float("nan"), "c2": float("nan")}
    try:
        res = run(cfg)
    except Exception as exc:  # report, do not abort the sweep
        row["message"] = f"{type(exc).__name__}: {exc}"
        return row
    mon = proposition_monitor(res)
    row.update(status=classify_run(res), message=res.message, theta_final=res.phase.theta,
               margin_final=res.phase.margin, v_phi_tilde=float(np.max(res.column("v_phi_tilde"))),
               v0_norm=res.norms0.v, steps=len(res.history), energy_residual=energy_check(res),
               max_divergence=float(np.max(res.column("divergence"))), c1=mon.c1, c2=mon.c2)
    return row


def _map(fn, jobs, workers: int):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


RUN_COLUMNS = ["status", "theta_final", "margin_final", "v_phi_tilde", "v0_norm", "steps",
               "energy_residual", "max_divergence", "c1", "c2", "message"]


def physical_hminus1(cfg: SolverConfig, k0: int = DEFAULT_WAVENUMBER) -> float:
    """||u0_eps||_{B^{-1}_{inf,inf}} of the ill-prepared profile at cfg.eps (unscaled)."""
    _, phys = make_initial_data(profile("ill-prepared", cfg.grid, k0), cfg.eps, cfg.friedrichs_radius)
    return hminus1_inf_norm(phys)


def run_eps_sweep(plan: ExperimentPlan) -> Report:
    eps_values = sorted(plan.resolved_values, reverse=True)
    cfgs = [plan.solver_config(eps=e) for e in eps_values]
    rows = []
    for cfg, cell in zip(cfgs, _map(_run_cell, cfgs, plan.workers)):
        h = physical_hminus1(cfg)
        rows.append({**param_block(cfg), **cell, "hminus1": h, "eps_hminus1": cfg.eps * h})
    scaled = [r["eps_hminus1"] for r in rows]
    summary = {"eps_hminus1_spread": max(scaled) / min(scaled) if min(scaled) > 0 else float("inf"),
               "all_held": all(r["status"] == HELD for r in rows)}
    return Report("eps-sweep", PARAM_COLUMNS + RUN_COLUMNS + ["hminus1", "eps_hminus1"], rows, summary)


def _held(cfg: SolverConfig) -> tuple[bool, dict]:
    cell = _run_cell(cfg)
    return cell["status"] == HELD, cell


def run_eta_sweep(plan: ExperimentPlan) -> Report:
    """Classify each eta and bisect (in log eta) for the first breach eta*."""
    etas = sorted(plan.resolved_values)
    cfgs = [plan.solver_config(eta=e) for e in etas]
    cells = _map(_run_cell, cfgs, plan.workers)
    rows = []
    for cfg, cell in zip(cfgs, cells):
        rows.append({**param_block(cfg), **cell, "admissible_by_size": 4 * cfg.lam * cfg.eta <= cfg.a})
    held = [r["eta"] for r in rows if r["status"] == HELD]
    failed = [r["eta"] for r in rows if r["status"] != HELD]
    eta_star = float("nan")
    lo = max((e for e in held if not failed or e < min(failed)), default=None)
    hi = min((e for e in failed if lo is None or e > lo), default=None)
    if lo is not None and hi is not None:
        for _ in range(plan.bisection_steps):
            mid = math.sqrt(lo * hi)
            ok, _ = _held(plan.solver_config(eta=mid))
            lo, hi = (mid, hi) if ok else (lo, mid)
        eta_star = math.sqrt(lo * hi)
    consistent = all(r["status"] == HELD for r in rows if r["admissible_by_size"])
    summary = {"eta_star": eta_star, "size_condition_consistent": consistent}
    return Report("eta-sweep", PARAM_COLUMNS + RUN_COLUMNS + ["admissible_by_size"], rows, summary)


def besov_bound(plan: ExperimentPlan, k0: int = DEFAULT_WAVENUMBER) -> Report:
    """Lower bound for f(x_h) g(eps x_3) and the 1/eps growth of u0_eps.

    f = cos(k0 x_1), g = exp(-x_3^2); the ratio column is
    ||f g(eps .)|| / (||f|| ||g||_inf) and must stay above 1/4.
    """
    base = plan.solver_config(eta=None)
    rows = []
    slow = base.grid
    x1, _, _ = slow.coordinates()
    f_norm = hminus1_inf_norm(forward_transform(np.cos(k0 * x1), slow))
    for eps in sorted(plan.resolved_values, reverse=True):
        cfg = base.with_(eps=eps)
        phys = Grid(slow.n_h, slow.n_v, slow.L / eps)
        y1, _, y3 = phys.coordinates()
        h = forward_transform(np.cos(k0 * y1) * np.exp(-((eps * y3) ** 2)), phys)
        ratio = hminus1_inf_norm(h) / f_norm
        u = physical_hminus1(cfg, k0)
        rows.append({**param_block(cfg), "lower_ratio": ratio, "hminus1": u, "eps_hminus1": eps * u})
    scaled = [r["eps_hminus1"] for r in rows]
    summary = {"f_norm": f_norm, "min_lower_ratio": min(r["lower_ratio"] for r in rows),
               "eps_hminus1_spread": max(scaled) / min(scaled)}
    return Report("besov-bound", PARAM_COLUMNS + ["lower_ratio", "hminus1", "eps_hminus1"], rows, summary)


_MODEL_FIELDS = {"gamma", "delta", "lam", "multiplier"}


def model_phase(plan: ExperimentPlan, steps: int = 10_000, locate: bool = True) -> Report:
    params = ModelParams(**{k: v for k, v in plan.overrides.items() if k in _MODEL_FIELDS})
    grid = LineGrid()
    cells = phase_diagram(plan.resolved_values, plan.amplitudes, params, grid, steps=steps,
                          workers=plan.workers)
    digest = hashlib.sha256(repr((params, steps, grid.n, grid.period_scale)).encode()).hexdigest()[:16]
    block = {"config_hash": digest, "delta": params.delta, "lam": params.lam, "multiplier": params.multiplier}
    rows = [{**block, "gamma": c.gamma, "amplitude": c.amplitude, "x_norm": c.x_norm,
             "classification": c.classification, "theta_final": c.theta_final,
             "margin_final": c.margin_final, "steps": c.steps} for c in cells]
    summary = {}
    if locate:
        summary["c"] = locate_threshold(params, grid, iters=12, steps=steps)
    cols = ["gamma", "amplitude", "x_norm", "classification", "theta_final", "margin_final", "steps",
            "config_hash", "delta", "lam", "multiplier"]
    return Report("model-phase", cols, rows, summary)


def single_run(plan: ExperimentPlan) -> tuple[Report, RunResult]:
    cfg = plan.solver_config()
    res = run(cfg, record_rows=False)
    mon = proposition_monitor(res)
    block = param_block(cfg)
    rows = []
    for d in [res.initial] + res.history:
        row = dict(zip(StepDiagnostics.COLUMNS, d.row()))
        row["energy_residual"] = d.extras.get("energy_residual", float("nan"))
        rows.append({**row, **block})
    summary = {"status": res.status, "message": res.message, "theta_final": res.phase.theta,
               "classification": classify_run(res), "c1": mon.c1, "c2": mon.c2,
               "lam_pred": mon.lam_pred, "eta_pred": mon.eta_pred,
               "energy_residual": energy_check(res), "wall_time": res.wall_time}
    cols = list(StepDiagnostics.COLUMNS) + ["energy_residual"] + PARAM_COLUMNS
    return Report("single-run", cols, rows, summary), res


def with_overrides(plan: ExperimentPlan, **kw) -> ExperimentPlan:
    return replace(plan, overrides={**plan.overrides, **kw})
