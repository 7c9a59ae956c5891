"""Scalar toy model du/dt + gamma u + a(D)(u^2) = 0 with analyticity tracking.

The model lives on a 1D periodic line of period 2*pi*P, so wavenumbers are
m/P.  A large period keeps delta * (largest wavenumber) moderate, which keeps
the weight e^{delta |xi|} from amplifying rounding noise into the norms.

Alongside u the run integrates

    theta_dot = sum_xi e^{(delta - lam theta)|xi|} |u_hat(xi)|,   theta(0) = 0,

and stops with a breach once delta - lam*theta reaches zero.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import AnalyticBandwidthError

GLOBAL = "GLOBAL"
LOST = "LOST-ADMISSIBILITY"
UNDECIDED = "UNDECIDED"

_MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class LineGrid:
    """n points on a line of period 2*pi*period_scale."""

    n: int = 1024
    period_scale: float = 16.0

    @cached_property
    def m(self) -> np.ndarray:
        return np.arange(self.n // 2 + 1)

    @cached_property
    def xi(self) -> np.ndarray:
        return self.m / self.period_scale

    @cached_property
    def multiplicity(self) -> np.ndarray:
        w = np.full(self.n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return self.m <= (self.n - 1) // 3

    def coordinates(self) -> np.ndarray:
        return 2.0 * np.pi * self.period_scale * np.arange(self.n) / self.n

    def forward(self, samples: np.ndarray) -> np.ndarray:
        return sfft.rfft(samples) / self.n

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        return sfft.irfft(coeffs * self.n, n=self.n)

    def multiplier(self, kind: str) -> np.ndarray:
        """Order-one symbol a(xi): 'ix' for i*xi, 'abs' for |xi|."""
        if kind == "ix":
            sym = 1j * self.xi
            sym = np.where(self.m == self.n // 2, 0.0, sym)
        elif kind == "abs":
            sym = self.xi.astype(complex)
        else:
            raise ValueError(f"unknown multiplier {kind!r}")
        return sym


def x_norm(u_hat: np.ndarray, grid: LineGrid, delta: float) -> float:
    """sum_xi e^{delta |xi|} |u_hat(xi)| over the full spectrum."""
    expo = delta * grid.xi
    if expo.max() > _MAX_EXPONENT:
        raise AnalyticBandwidthError(f"delta*|xi| reaches {expo.max():.4g}")
    val = float(np.sum(grid.multiplicity * np.exp(expo) * np.abs(u_hat)))
    if not math.isfinite(val):
        raise AnalyticBandwidthError("weighted norm overflowed")
    return val


def fourier_l1(u_hat: np.ndarray, grid: LineGrid) -> float:
    return float(np.sum(grid.multiplicity * np.abs(u_hat)))


@dataclass(frozen=True)
class ModelParams:
    gamma: float = 1.0
    delta: float = 1.0
    lam: float = 4.0
    multiplier: str = "ix"


@dataclass(frozen=True)
class ModelState:
    grid: LineGrid
    u: np.ndarray
    params: ModelParams
    theta: float = 0.0
    t: float = 0.0

    @property
    def margin(self) -> float:
        return self.params.delta - self.params.lam * self.theta

    @property
    def theta_dot(self) -> float:
        return theta_rate(self.u, self.grid, self.params, self.theta)


def theta_rate(u_hat: np.ndarray, grid: LineGrid, params: ModelParams, theta: float) -> float:
    """||u_theta||_{F L^1} with weight e^{(delta - lam theta)|xi|}."""
    return x_norm(u_hat, grid, params.delta - params.lam * theta)


def _nonlinear(u_hat: np.ndarray, grid: LineGrid, symbol: np.ndarray) -> np.ndarray:
    u = grid.inverse(u_hat)
    sq = np.where(grid.dealias_mask, grid.forward(u * u), 0.0)
    return -symbol * sq


@dataclass(frozen=True)
class StepInfo:
    theta_dot_start: float
    theta_dot_end: float
    breach: bool = False


def model_step(state: ModelState, dt: float, tol: float = 1e-14, max_iter: int = 100):
    """One integrating-factor Heun step for u and a trapezoid step for theta.

    The theta update solves theta_{n+1} = theta_n + dt/2 (rate_n + rate_{n+1})
    by fixed-point iteration, so theta is exactly the trapezoid integral of the
    recorded rates.  Returns ``(new_state, StepInfo)``.
    """
    grid, p = state.grid, state.params
    symbol = grid.multiplier(p.multiplier)
    decay = math.exp(-p.gamma * dt)
    n0 = _nonlinear(state.u, grid, symbol)
    u_pred = decay * (state.u + dt * n0)
    n1 = _nonlinear(u_pred, grid, symbol)
    u_new = decay * state.u + 0.5 * dt * (decay * n0 + n1)

    rate0 = theta_rate(state.u, grid, p, state.theta)
    theta = state.theta + dt * rate0
    rate1 = rate0
    for _ in range(max_iter):
        if p.delta - p.lam * theta <= 0.0:
            break
        rate1 = theta_rate(u_new, grid, p, theta)
        nxt = state.theta + 0.5 * dt * (rate0 + rate1)
        done = abs(nxt - theta) <= tol * max(1.0, abs(nxt))
        theta = nxt
        if done:
            break
    breach = p.delta - p.lam * theta <= 0.0
    new = replace(state, u=u_new, theta=theta, t=state.t + dt)
    return new, StepInfo(rate0, rate1, breach)


@dataclass(frozen=True)
class GainIntegral:
    quadrature: float
    closed_form: float
    lam: float

    @property
    def rel_error(self) -> float:
        scale = max(abs(self.closed_form), 1e-300)
        return abs(self.quadrature - self.closed_form) / scale if self.closed_form else abs(self.quadrature)

    def ok(self, tol: float = 1e-6) -> bool:
        return self.rel_error <= tol and self.quadrature < 1.0 / self.lam


def gain_integral_check(lam: float, xi_abs: float, times, theta_dot, nodes: int = 8) -> GainIntegral:
    """Quadrature of int_0^T e^{-lam|xi| int_{t'}^T theta_dot} |xi| theta_dot(t') dt'.

    ``theta_dot`` samples at ``times`` are interpolated linearly, which is the
    model the trapezoid theta update integrates exactly.  Each step is
    integrated by Gauss-Legendre with the exact quadratic theta inside the step.
    The closed form (1/lam)(1 - e^{-lam|xi| theta(T)}) uses the same theta(T).
    """
    t = np.asarray(times, dtype=float)
    r = np.asarray(theta_dot, dtype=float)
    if t.size < 2 or np.all(r == 0.0):
        return GainIntegral(0.0, 0.0, lam)
    h = np.diff(t)
    theta = np.concatenate([[0.0], np.cumsum(0.5 * h * (r[:-1] + r[1:]))])
    total = theta[-1]
    x, w = np.polynomial.legendre.leggauss(nodes)
    s = 0.5 * (x + 1.0)
    # rate and theta at the nodes of every interval, shape (steps, nodes)
    rate = r[:-1, None] + (r[1:] - r[:-1])[:, None] * s[None, :]
    th = theta[:-1, None] + h[:, None] * (r[:-1, None] * s + 0.5 * (r[1:] - r[:-1])[:, None] * s**2)
    integrand = np.exp(-lam * xi_abs * (total - th)) * xi_abs * rate
    quad = float(np.sum(0.5 * h[:, None] * w[None, :] * integrand))
    closed = (1.0 - math.exp(-lam * xi_abs * total)) / lam
    return GainIntegral(quad, closed, lam)


@dataclass
class ModelRun:
    params: ModelParams
    amplitude: float
    x_norm0: float
    classification: str
    times: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray
    l1: np.ndarray
    final: ModelState
    steps: int
    notes: list = field(default_factory=list)

    @property
    def theta_final(self) -> float:
        return float(self.theta[-1])

    @property
    def margin_final(self) -> float:
        return self.params.delta - self.params.lam * self.theta_final

    @property
    def min_margin(self) -> float:
        return self.params.delta - self.params.lam * float(self.theta.max())


def cosine_profile(grid: LineGrid, amplitude: float, wavenumber: float = 1.0) -> np.ndarray:
    """Coefficients of amplitude*cos(wavenumber*x)."""
    m = int(round(wavenumber * grid.period_scale))
    u = np.zeros(grid.n // 2 + 1, dtype=complex)
    u[m] = 0.5 * amplitude
    return u


def classify(run_theta_final: float, l1_final: float, l1_initial: float, breached: bool,
             params: ModelParams, decay_tol: float = 1e-6) -> str:
    if breached:
        return LOST
    if not (math.isfinite(run_theta_final) and math.isfinite(l1_final)):
        return UNDECIDED
    if run_theta_final < params.delta / (2.0 * params.lam) and l1_final <= decay_tol * l1_initial:
        return GLOBAL
    return UNDECIDED


def run_model(u0: np.ndarray, params: ModelParams, grid: LineGrid, t_max: float | None = None,
              steps: int = 10_000, amplitude: float = float("nan")) -> ModelRun:
    """Integrate to ``t_max`` (default 100/gamma) or until the margin breaks."""
    t_max = 100.0 / params.gamma if t_max is None else t_max
    dt = t_max / steps
    state = ModelState(grid, np.asarray(u0, dtype=complex), params)
    times, thetas, rates, l1 = [0.0], [0.0], [state.theta_dot], [fourier_l1(state.u, grid)]
    breached = False
    notes = []
    k = 0
    for k in range(1, steps + 1):
        try:
            state, info = model_step(state, dt)
        except AnalyticBandwidthError as exc:
            notes.append(str(exc))
            break
        if not np.all(np.isfinite(state.u)):
            notes.append("non-finite coefficients")
            break
        times.append(state.t)
        thetas.append(state.theta)
        rates.append(info.theta_dot_end)
        l1.append(fourier_l1(state.u, grid))
        if info.breach:
            breached = True
            break
    label = classify(thetas[-1], l1[-1], l1[0], breached, params)
    if notes and label == GLOBAL:
        label = UNDECIDED
    return ModelRun(params, amplitude, x_norm(np.asarray(u0), grid, params.delta), label,
                    np.array(times), np.array(thetas), np.array(rates), np.array(l1), state, k, notes)


def locate_threshold(params: ModelParams, grid: LineGrid, lo: float = 0.0, hi: float = 1.0,
                     iters: int = 30, steps: int = 10_000, wavenumber: float = 1.0) -> float:
    """Bisect on the cosine amplitude for the GLOBAL / not-GLOBAL boundary.

    Returns c = ||u0||_X / gamma at the largest amplitude found GLOBAL.  The
    upper end ``hi`` is doubled until it is not GLOBAL.
    """
    def is_global(amp):
        u0 = cosine_profile(grid, amp, wavenumber)
        return run_model(u0, params, grid, steps=steps, amplitude=amp).classification == GLOBAL

    while is_global(hi):
        lo, hi = hi, 2.0 * hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if is_global(mid):
            lo = mid
        else:
            hi = mid
    return x_norm(cosine_profile(grid, lo, wavenumber), grid, params.delta) / params.gamma


@dataclass(frozen=True)
class PhaseCell:
    gamma: float
    amplitude: float
    x_norm: float
    classification: str
    theta_final: float
    margin_final: float
    steps: int


def _cell(args) -> PhaseCell:
    gamma, amp, base, grid, steps, t_max = args
    params = replace(base, gamma=gamma)
    u0 = cosine_profile(grid, amp)
    run = run_model(u0, params, grid, t_max=t_max, steps=steps, amplitude=amp)
    return PhaseCell(gamma, amp, run.x_norm0, run.classification, run.theta_final,
                     run.margin_final, run.steps)


def phase_diagram(gammas, amplitudes, params: ModelParams, grid: LineGrid | None = None,
                  t_max: float | None = None, steps: int = 10_000, workers: int = 1) -> list[PhaseCell]:
    """Classify every (gamma, amplitude) cell; rows sorted by (gamma, amplitude)."""
    grid = LineGrid() if grid is None else grid
    jobs = [(float(g), float(a), params, grid, steps, t_max) for g in gammas for a in amplitudes]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_cell, jobs))
    else:
        cells = [_cell(j) for j in jobs]
    return sorted(cells, key=lambda c: (c.gamma, c.amplitude))


PHASE_COLUMNS = ["gamma", "amplitude", "x_norm", "classification", "theta_final", "margin_final", "steps"]


def write_phase_csv(cells, path, extra: dict | None = None) -> None:
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PHASE_COLUMNS + list(extra))
        for c in cells:
            w.writerow([repr(c.gamma), repr(c.amplitude), repr(c.x_norm), c.classification,
                        repr(c.theta_final), repr(c.margin_final), c.steps] + list(extra.values()))
