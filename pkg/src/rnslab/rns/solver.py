"""Time integration with the analyticity-loss ODE and norm monitoring.

Fields advance by an integrating-factor Heun step (the Delta_eps part is
exact).  theta then advances by Heun quadrature of

    theta_dot = ||w^3_Phi||_{B^{7/2}} + eps ||w^h_Phi||_{B^{7/2}},
    Phi(t, xi) = sqrt(t)|xi_h| + (a - lam theta)|xi_3|.

Weighted diagnostics ignore coefficients below ``noise_floor`` times the
largest coefficient of the state: the weights reach e^{100} on desk grids and
would otherwise turn rounding noise into the dominant contribution.
"""

from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..besov import NormSeries, PhaseState, n_shells, shell_index, shell_weights, top_shell_fraction
from ..errors import AnalyticBandwidthError, BootstrapBreach
from ..spectral import DealiasedBox, Grid
from .dynamics import keep_mask, tendency_core
from .profiles import analytic_norm, make_initial_data, profile
from .state import SolverConfig, StepDiagnostics, VelocityState

S_THETA = 3.5
TAIL_LIMIT = 0.01
_MAX_EXPONENT = 700.0

OK = "ok"
BREACH = "breach"
BLOWUP = "blowup"
CFL = "cfl"


class SpectralTailWarning(UserWarning):
    """The highest grid shell carries a noticeable part of a monitored norm."""


@dataclass
class Accumulators:
    """Running per-shell suprema of v_Phi, v^h_Phi and w^3_Phi."""

    v: NormSeries = field(default_factory=lambda: NormSeries(S_THETA))
    vh: NormSeries = field(default_factory=lambda: NormSeries(S_THETA))
    w3: NormSeries = field(default_factory=lambda: NormSeries(S_THETA))


@dataclass(frozen=True)
class WeightedShells:
    """Per-shell L^2 norms of the Phi-weighted pieces of a state."""

    w3: np.ndarray
    wh: np.ndarray
    vh: np.ndarray
    v: np.ndarray


class Integrator:
    """Precomputed multipliers for one configuration.

    All arrays live on the dealiased box (see :class:`DealiasedBox`); the
    solver never stores modes the 2/3 rule discards.
    """

    def __init__(self, config: SolverConfig):
        self.config = config
        self.grid = grid = config.grid
        self.box = box = DealiasedBox(grid)
        self.eps = config.eps
        keep = box.constant(keep_mask(grid, config.friedrichs_radius, config.eps))
        self.keep = keep
        self.outside = ~keep
        self.xi = tuple(box.constant(k) for k in (grid.k1, grid.k2, grid.k3))
        self.xi_abs = box.constant(grid.xi_abs)
        self.sym = box.constant(grid.xi_eps2(config.eps))
        self.mult = box.constant(grid.multiplicity)
        self.kh_abs = box.constant(grid.kh_abs)
        self.k3 = box.constant(grid.k3)
        self.decay = np.exp(-config.dt * self.sym)
        self.tanh_term = np.tanh(config.dt * self.sym) / config.dt * self.mult
        self.energy_weights = np.array([1.0, 1.0, 1.0 / config.eps**2]).reshape(3, 1, 1, 1)
        self.shells = box.constant(shell_index(grid)).astype(np.intp).ravel() + 1
        self.mean_shells = shell_index(grid)[0, 0, : box.nbv] + 1
        self.nshell = n_shells(grid)
        # storage index (shell + 1) of the highest shell reached by kept modes
        self.top_shell = int(self.shells.reshape(keep.shape)[keep].max())
        self.shell_w = shell_weights(self.nshell, S_THETA)

    def to_box(self, v: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(self.box.gather(v))

    def from_box(self, vb: np.ndarray) -> np.ndarray:
        return self.box.scatter(vb)

    def tendency(self, vb: np.ndarray) -> np.ndarray:
        if not self.config.nonlinear:
            return np.zeros_like(vb)
        return tendency_core(vb, self.box.inverse, self.box.forward, self.xi, self.sym,
                             self.keep, self.eps)

    def advance(self, vb: np.ndarray) -> np.ndarray:
        dt = self.config.dt
        n0 = self.tendency(vb)
        pred = self.decay * (vb + dt * n0)
        n1 = self.tendency(pred)
        return self.decay * vb + 0.5 * dt * (self.decay * n0 + n1)

    def _cleaned_power(self, vb: np.ndarray) -> np.ndarray:
        power = vb.real**2 + vb.imag**2
        top = float(power.max(initial=0.0))
        if top > 0.0 and self.config.noise_floor > 0.0:
            power[power < top * self.config.noise_floor**2] = 0.0
        return power

    def _weight2(self, t: float, margin: float) -> np.ndarray:
        hx = 2.0 * math.sqrt(t) * self.kh_abs
        vx = 2.0 * margin * self.k3
        if hx.max() + vx.max() > _MAX_EXPONENT:
            raise AnalyticBandwidthError("phase weight exceeds the representable range")
        return np.exp(hx + vx)

    def _energies(self, power: np.ndarray) -> np.ndarray:
        return np.bincount(self.shells, weights=(power * self.mult).ravel(), minlength=self.nshell)

    def weighted_shells(self, vb: np.ndarray, t: float, theta: float, full: bool = True) -> WeightedShells:
        margin = self.config.a - self.config.lam * theta
        power = self._cleaned_power(vb)
        w2 = self._weight2(t, margin)
        horiz = power[0] + power[1]
        mean_line = horiz[0, 0, :] * w2[0, 0, :] * self.mult[0, 0, :]
        mean_e = np.bincount(self.mean_shells, weights=mean_line, minlength=self.nshell)
        e3 = self._energies(power[2] * w2)
        eh_all = self._energies(horiz * w2)
        eh = np.maximum(eh_all - mean_e, 0.0)
        if not full:
            return WeightedShells(np.sqrt(e3), np.sqrt(eh), None, None)
        return WeightedShells(np.sqrt(e3), np.sqrt(eh), np.sqrt(eh_all), np.sqrt(eh_all + e3))

    def rate(self, shells: WeightedShells) -> float:
        return float(self.shell_w @ shells.w3 + self.eps * (self.shell_w @ shells.wh))

    def energy(self, vb: np.ndarray) -> tuple[float, float]:
        """(E, S): kinetic energy and the exponentially fitted dissipation sum."""
        dens = np.sum(self.energy_weights * (vb.real**2 + vb.imag**2), axis=0)
        return float(np.sum(self.mult * dens)), float(np.sum(self.tanh_term * dens))

    def outside_support(self, vb: np.ndarray) -> float:
        return float(np.max(np.abs(vb[:, self.outside]), initial=0.0))

    def divergence(self, vb: np.ndarray) -> float:
        """max |xi . v_hat| relative to max |xi| |v_hat|."""
        div = np.max(np.abs(self.xi[0] * vb[0] + self.xi[1] * vb[1] + self.xi[2] * vb[2]), initial=0.0)
        scale = np.max(self.xi_abs * np.sqrt(np.sum(vb.real**2 + vb.imag**2, axis=0)), initial=0.0)
        return float(div / scale) if scale > 0 else float(div)

    def cfl_number(self, vb: np.ndarray) -> float:
        phys = self.box.inverse(vb)
        dx_h = 2.0 * np.pi / self.grid.n_h
        dx_v = 2.0 * self.grid.L / self.grid.n_v
        speed = np.max(np.abs(phys[0]) + np.abs(phys[1])) / dx_h + np.max(np.abs(phys[2])) / dx_v
        return float(self.config.dt * speed)


@lru_cache(maxsize=8)
def integrator(config: SolverConfig) -> Integrator:
    return Integrator(config)


def _record(acc: Accumulators | None, shells: WeightedShells, t: float, step: int, record_rows: bool):
    if acc is None:
        return
    for series, norms in ((acc.v, shells.v), (acc.vh, shells.vh), (acc.w3, shells.w3)):
        if record_rows:
            series.update(norms, t=t, step=step)
        else:
            series._grow(norms.size)
            series.running_max[: norms.size] = np.maximum(series.running_max[: norms.size], norms)
            series.samples += 1


def _step_box(kern: Integrator, vb: np.ndarray, phase: PhaseState, rate0: float | None,
              acc: Accumulators | None, step: int, record_rows: bool):
    config = kern.config
    phase.require_admissible()
    dt = config.dt
    if rate0 is None:
        rate0 = kern.rate(kern.weighted_shells(vb, phase.t, phase.theta, full=False))
    e0, s0 = kern.energy(vb)
    v_new = kern.advance(vb)
    if not np.all(np.isfinite(v_new)):
        raise FloatingPointError(f"non-finite coefficients at t = {phase.t + dt:.6g}")
    t_new = phase.t + dt
    theta_pred = phase.theta + dt * rate0
    phase.advanced(t_new, theta_pred).require_admissible()
    rate_pred = kern.rate(kern.weighted_shells(v_new, t_new, theta_pred, full=False))
    theta_new = phase.theta + 0.5 * dt * (rate0 + rate_pred)
    phase_new = phase.advanced(t_new, theta_new)
    phase_new.require_admissible()
    shells = kern.weighted_shells(v_new, t_new, theta_new)
    rate_new = kern.rate(shells)
    _record(acc, shells, t_new, step, record_rows)
    e1, s1 = kern.energy(v_new)
    diag = StepDiagnostics(
        step=step, t=t_new, theta=theta_new, theta_dot=rate_new, margin=phase_new.margin,
        w3_phi=float(kern.shell_w @ shells.w3), eps_wh_phi=config.eps * float(kern.shell_w @ shells.wh),
        v_phi_tilde=acc.v.value if acc else float("nan"),
        vh_phi_tilde=acc.vh.value if acc else float("nan"),
        w3_phi_tilde=acc.w3.value if acc else float("nan"),
        energy=e1, dissipation_term=s1,
        divergence=kern.divergence(v_new),
        outside_support=kern.outside_support(v_new),
        extras={"energy_residual": (e1 - e0) / dt + s0 + s1},
    )
    return v_new, phase_new, diag


def time_step(state: VelocityState, config: SolverConfig, phase: PhaseState,
              rate0: float | None = None, acc: Accumulators | None = None, step: int = 0,
              record_rows: bool = False):
    """Advance fields and theta by one step.

    Returns ``(state', phase', diagnostics)``.  Raises
    :class:`BootstrapBreach` when a - lam*theta turns negative and
    :class:`AnalyticBandwidthError` or :class:`FloatingPointError` on
    numerical blow-up.
    """
    kern = integrator(config)
    vb, phase_new, diag = _step_box(kern, kern.to_box(state.v), phase, rate0, acc, step, record_rows)
    return state.with_(v=kern.from_box(vb), t=phase_new.t), phase_new, diag


@dataclass
class InitialNorms:
    """||e^{a|D_3|} .||_{B^{7/2}} of the pieces of v0."""

    wh: float
    w3: float
    vh: float
    v: float


def initial_norms(state: VelocityState, a: float) -> InitialNorms:
    wh, w3 = list(state.w_h), state.w3
    vh = state.fields[:2]
    return InitialNorms(analytic_norm(wh, a), analytic_norm([w3], a), analytic_norm(vh, a),
                        analytic_norm(state.fields, a))


@dataclass
class RunResult:
    config: SolverConfig
    status: str
    history: list
    initial: StepDiagnostics
    state: VelocityState
    phase: PhaseState
    norms0: InitialNorms
    accumulators: Accumulators
    wall_time: float
    message: str = ""

    @property
    def tail_fraction(self) -> float:
        """Share of the L~^inf(B^{7/2}) norm of v_Phi in the top grid shell."""
        top = integrator(self.config).top_shell
        return top_shell_fraction(self.accumulators.v.running_max[: top + 1], S_THETA)

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.initial.theta] + [d.theta for d in self.history])

    @property
    def times(self) -> np.ndarray:
        return np.array([self.initial.t] + [d.t for d in self.history])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(self.initial, name)] + [getattr(d, name) for d in self.history])

    def write_csv(self, path, extra: dict | None = None) -> None:
        extra = extra or {}
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(StepDiagnostics.COLUMNS) + ["energy_residual"] + list(extra))
            for d in [self.initial] + self.history:
                row = [repr(x) if isinstance(x, float) else x for x in d.row()]
                res = d.extras.get("energy_residual", float("nan"))
                w.writerow(row + [repr(res)] + list(extra.values()))


def initial_state(config: SolverConfig, fields=None, noise: float = 1e-14) -> VelocityState:
    """Profile from the configuration (or ``fields``), truncated, then scaled to eta.

    Coefficients below ``noise`` times the largest one are transform rounding
    and are zeroed before scaling; the analytic weight would amplify them.
    """
    grid = config.grid
    fields = profile(config.profile, grid) if fields is None else list(fields)
    state, _ = make_initial_data(fields, config.eps, config.friedrichs_radius)
    v = state.v.copy()
    v[np.abs(v) < noise * float(np.max(np.abs(v), initial=0.0))] = 0.0
    state = state.with_(v=v)
    if config.eta is not None:
        size = analytic_norm(state.fields, config.a)
        if size > 0.0:
            state = state.with_(v=(config.eta / size) * v)
    return state


def run(config: SolverConfig, state: VelocityState | None = None, record_rows: bool = False,
        max_steps: int | None = None) -> RunResult:
    """Integrate to ``config.t_max`` or until breach or blow-up."""
    start = time.perf_counter()
    state = initial_state(config) if state is None else state
    kern = integrator(config)
    vb = kern.to_box(state.v)
    phase = PhaseState(config.a, config.lam, 0.0, state.t, config.eps)
    acc = Accumulators()
    shells = kern.weighted_shells(vb, state.t, 0.0)
    _record(acc, shells, state.t, 0, record_rows)
    rate = kern.rate(shells)
    e0, s0 = kern.energy(vb)
    lost = float(np.max(np.abs(state.v - kern.from_box(vb)), initial=0.0))
    init = StepDiagnostics(0, state.t, 0.0, rate, phase.margin, float(kern.shell_w @ shells.w3),
                           config.eps * float(kern.shell_w @ shells.wh), acc.v.value, acc.vh.value,
                           acc.w3.value, e0, s0, kern.divergence(vb),
                           max(lost, kern.outside_support(vb)))
    norms0 = initial_norms(state, config.a)
    history = []
    status, message = OK, ""
    steps = config.steps if max_steps is None else min(config.steps, max_steps)
    if kern.cfl_number(vb) > config.cfl:
        status, message = CFL, f"CFL number {kern.cfl_number(vb):.3g} exceeds {config.cfl}"
        steps = 0
    for k in range(1, steps + 1):
        try:
            vb, phase, diag = _step_box(kern, vb, phase, rate, acc, k, record_rows)
        except BootstrapBreach as exc:
            status, message = BREACH, str(exc)
            break
        except (AnalyticBandwidthError, FloatingPointError) as exc:
            status, message = BLOWUP, str(exc)
            break
        history.append(diag)
        rate = diag.theta_dot
        if k % config.checkpoint_every == 0:
            cfl = kern.cfl_number(vb)
            if cfl > config.cfl:
                status, message = CFL, f"CFL number {cfl:.3g} exceeds {config.cfl} at t = {phase.t:.4g}"
                break
    final = VelocityState(kern.grid, kern.from_box(vb), phase.t)
    result = RunResult(config, status, history, init, final, phase, norms0, acc,
                       time.perf_counter() - start, message)
    if result.tail_fraction > TAIL_LIMIT:
        warnings.warn(f"top shell carries {result.tail_fraction:.1%} of the weighted norm; refine the grid",
                      SpectralTailWarning, stacklevel=2)
    return result


def energy_check(result: RunResult) -> float:
    """Largest |(E_{n+1} - E_n)/dt + S_n + S_{n+1}| over the run.

    S_n = sum tanh(dt |xi_eps|^2)/dt |v_n|^2 (energy-weighted), which makes the
    check exact for the linear flow and second order with the nonlinearity.
    """
    res = [abs(d.extras["energy_residual"]) for d in result.history]
    return max(res) if res else 0.0


def energy_nonincreasing(result: RunResult, rel_tol: float = 1e-12) -> bool:
    e = result.column("energy")
    return bool(np.all(np.diff(e) <= rel_tol * max(e[0], 1e-300)))


def grid_for(config: SolverConfig) -> Grid:
    return config.grid
