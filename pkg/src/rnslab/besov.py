"""Littlewood-Paley shells, Besov norms, analytic weights and the phase.

Shells use the exclusive dyadic partition: shell -1 is |xi| < 1 and shell
j >= 0 is 2^j <= |xi| < 2^(j+1), with the isotropic modulus of (xi_h, xi_3).
The L^2 shell seminorm is sqrt(sum |c|^2) over the shell (mean-square
normalization).  A vector field's shell seminorm is the Euclidean combination
of its components' seminorms.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence, Union

import numpy as np

from .errors import AnalyticBandwidthError, BootstrapBreach, GridMismatchError
from .spectral import Grid, SpectralField, raw_inverse

FieldLike = Union[SpectralField, Sequence[SpectralField]]

# exp(x) overflows double precision a little above 709
_MAX_EXPONENT = 700.0


@lru_cache(maxsize=32)
def shell_index(grid: Grid) -> np.ndarray:
    """Shell label j >= -1 of every stored coefficient."""
    xi2 = np.broadcast_to(grid.xi2, grid.spectral_shape)
    j = np.full(grid.spectral_shape, -1, dtype=np.int64)
    big = xi2 >= 1.0
    # frexp gives xi2 = mant * 2^e with mant in [0.5, 1), so floor(log2 xi2) = e - 1 exactly
    _, e = np.frexp(xi2[big])
    j[big] = (e - 1) // 2
    j.setflags(write=False)
    return j


def n_shells(grid: Grid) -> int:
    """Number of shells carried by the grid, counting shell -1."""
    return int(shell_index(grid).max()) + 2


def shell_restrict(f: SpectralField, j: int) -> SpectralField:
    if j < -1:
        raise ValueError(f"shell index must be >= -1, got {j}")
    return SpectralField(f.grid, np.where(shell_index(f.grid) == j, f.coeffs, 0.0))


def _stack(f: FieldLike) -> tuple[Grid, np.ndarray]:
    if isinstance(f, SpectralField):
        return f.grid, f.coeffs[None]
    fields = list(f)
    if not fields:
        raise ValueError("empty field sequence")
    grid = fields[0].grid
    if any(g.grid != grid for g in fields):
        raise GridMismatchError("components live on different grids")
    return grid, np.stack([g.coeffs for g in fields])


def shell_energies_from_power(power: np.ndarray, grid: Grid) -> np.ndarray:
    """Per-shell sums of a nonnegative array already summed over components.

    ``power`` holds |c|^2 per stored coefficient; multiplicities are applied here.
    Entry 0 of the result is shell -1.
    """
    weighted = np.broadcast_to(power * grid.multiplicity, grid.spectral_shape)
    return np.bincount(
        shell_index(grid).ravel() + 1, weights=weighted.ravel(), minlength=n_shells(grid)
    )


def shell_norms(f: FieldLike) -> np.ndarray:
    """L^2 seminorms of every shell; entry i belongs to shell j = i - 1."""
    grid, c = _stack(f)
    power = np.sum(c.real**2 + c.imag**2, axis=0)
    return np.sqrt(shell_energies_from_power(power, grid))


def shell_weights(n: int, s: float) -> np.ndarray:
    return 2.0 ** (s * (np.arange(n) - 1.0))


def besov_norm(f: FieldLike, s: float) -> float:
    """sum_j 2^(js) ||Delta_j f||_{L^2}."""
    norms = shell_norms(f)
    return float(np.dot(shell_weights(norms.size, s), norms))


def sobolev_norm(f: FieldLike, s: float) -> float:
    """The l^2 counterpart of :func:`besov_norm`."""
    norms = shell_norms(f)
    return float(np.sqrt(np.dot(shell_weights(norms.size, s) ** 2, norms**2)))


def top_shell_fraction(norms: np.ndarray, s: float) -> float:
    """Share of the B^s sum carried by the highest shell of ``norms``."""
    terms = shell_weights(np.size(norms), s) * np.asarray(norms, dtype=float)
    total = float(terms.sum())
    return float(terms[-1]) / total if total > 0 else 0.0


def fourier_l1_norm(f: FieldLike) -> float:
    """sum |c| over the full spectrum, summed over components."""
    grid, c = _stack(f)
    return float(np.sum(grid.multiplicity * np.abs(c)))


@dataclass
class NormSeries:
    """Running per-shell suprema realizing the tilde-L-infinity-in-time norm.

    ``running_max[i]`` is the largest L^2 seminorm of shell j = i - 1 seen so
    far.  ``rows`` records every sample for CSV export.
    """

    s: float
    running_max: np.ndarray = field(default_factory=lambda: np.zeros(0))
    rows: list = field(default_factory=list)
    samples: int = 0

    def _grow(self, n: int):
        if self.running_max.size < n:
            self.running_max = np.concatenate([self.running_max, np.zeros(n - self.running_max.size)])

    def update(self, norms: np.ndarray, t: float = 0.0, step: int | None = None) -> "NormSeries":
        """Fold in one time sample given its per-shell seminorms (in place)."""
        norms = np.asarray(norms, dtype=float)
        self._grow(norms.size)
        self.running_max[: norms.size] = np.maximum(self.running_max[: norms.size], norms)
        step = self.samples if step is None else step
        weights = shell_weights(norms.size, self.s)
        instant = float(np.dot(weights, norms))
        cumulative = self.value
        for i, v in enumerate(norms):
            self.rows.append((step, t, i - 1, float(weights[i] * v), instant, cumulative))
        self.samples += 1
        return self

    @property
    def value(self) -> float:
        return float(np.dot(shell_weights(self.running_max.size, self.s), self.running_max))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "t", "shell", "shell_value", "besov", "tilde_linf"])
            for row in self.rows:
                w.writerow([row[0], repr(row[1]), row[2], repr(row[3]), repr(row[4]), repr(row[5])])


def tilde_linf_accumulate(series: NormSeries, f_at_t: FieldLike, s: float | None = None,
                          t: float = 0.0) -> NormSeries:
    """Return a copy of ``series`` updated with the field at one more time."""
    if s is not None and s != series.s:
        raise ValueError(f"series was built for s={series.s}, got s={s}")
    out = NormSeries(series.s, series.running_max.copy(), list(series.rows), series.samples)
    return out.update(shell_norms(f_at_t), t=t)


@dataclass(frozen=True)
class PhaseState:
    """Parameters of Phi(t, xi) = sqrt(t)|xi_h| + (a - lam*theta)|xi_3|."""

    a: float
    lam: float
    theta: float = 0.0
    t: float = 0.0
    eps: float = 1.0

    @property
    def margin(self) -> float:
        return self.a - self.lam * self.theta

    @property
    def admissible(self) -> bool:
        return self.margin >= 0.0

    def advanced(self, t: float, theta: float) -> "PhaseState":
        return replace(self, t=t, theta=theta)

    def require_admissible(self):
        if not self.admissible:
            raise BootstrapBreach(
                f"phase margin a - lambda*theta = {self.margin:.6g} < 0 at t = {self.t:.6g}"
            )

    def horizontal_exponent(self, kh_abs):
        return np.sqrt(self.t) * kh_abs

    def vertical_exponent(self, k3_abs):
        return self.margin * k3_abs


def phi_eval(ps: PhaseState, xi) -> np.ndarray | float:
    """Phi at one wavevector or at an array of shape (..., 3)."""
    ps.require_admissible()
    xi = np.asarray(xi, dtype=float)
    kh = np.hypot(xi[..., 0], xi[..., 1])
    val = ps.horizontal_exponent(kh) + ps.vertical_exponent(np.abs(xi[..., 2]))
    return float(val) if val.ndim == 0 else val


def phase_weight(ps: PhaseState, grid: Grid) -> np.ndarray:
    """Phi on every stored coefficient of ``grid``."""
    ps.require_admissible()
    return ps.horizontal_exponent(grid.kh_abs) + ps.vertical_exponent(grid.k3)


def analytic_weight(grid: Grid, a: float) -> np.ndarray:
    """The exponent a|xi_3| of e^{a|D_3|}."""
    return a * grid.k3


def subadditivity_defect(ps: PhaseState, xi, eta) -> np.ndarray:
    """Phi(xi) - Phi(xi - eta) - Phi(eta); nonpositive when Phi is subadditive."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return phi_eval(ps, xi) - phi_eval(ps, xi - eta) - phi_eval(ps, eta)


def apply_weight(f: FieldLike, weight) -> FieldLike:
    """Multiply coefficients by exp(weight).

    ``weight`` is an array broadcastable to the spectral shape or a callable
    taking the grid.  Raises :class:`AnalyticBandwidthError` if the weight
    cannot be exponentiated in double precision.
    """
    if not isinstance(f, SpectralField):
        return [apply_weight(g, weight) for g in f]
    w = weight(f.grid) if callable(weight) else np.asarray(weight, dtype=float)
    if not np.all(np.isfinite(w)) or np.max(w, initial=-np.inf) > _MAX_EXPONENT:
        raise AnalyticBandwidthError(
            f"weight exponent {np.max(w):.4g} exceeds the representable range"
        )
    out = f.coeffs * np.exp(w)
    if not np.all(np.isfinite(out)):
        raise AnalyticBandwidthError("weighted coefficients overflowed")
    return SpectralField(f.grid, out)


def phase_decay_check(ps_t: PhaseState, ps_prev: PhaseState, xi, theta_dot_integral=None,
                      slack_constant: float = 0.5):
    """Slack of the phase-heat inequality in its relaxed form.

    Returns RHS - LHS of

        Phi(t, xi) - Phi(t', xi) <= -lam |xi_3| int_{t'}^{t} theta_dot
                                    + (t - t')/2 |xi_h|^2 + slack_constant

    together with a boolean array flagging violations (slack < 0).  The
    integral of theta_dot defaults to theta(t) - theta(t').  With
    ``slack_constant = 0`` the return value is the literal inequality's slack.
    """
    if ps_t.a != ps_prev.a or ps_t.lam != ps_prev.lam:
        raise ValueError("both phase states must share a and lambda")
    if ps_prev.t > ps_t.t:
        raise ValueError("t' must not exceed t")
    if theta_dot_integral is None:
        theta_dot_integral = ps_t.theta - ps_prev.theta
    xi = np.asarray(xi, dtype=float)
    kh = np.hypot(xi[..., 0], xi[..., 1])
    k3 = np.abs(xi[..., 2])
    lhs = phi_eval(ps_t, xi) - phi_eval(ps_prev, xi)
    rhs = -ps_t.lam * k3 * theta_dot_integral + 0.5 * (ps_t.t - ps_prev.t) * kh**2 + slack_constant
    slack = rhs - lhs
    return slack, np.asarray(slack < 0.0)


def young_slack(t, t_prev, kh):
    """1/2 - [(sqrt t - sqrt t')|xi_h| - (t - t')/2 |xi_h|^2]; nonnegative by Young."""
    t = np.asarray(t, dtype=float)
    t_prev = np.asarray(t_prev, dtype=float)
    kh = np.asarray(kh, dtype=float)
    return 0.5 - ((np.sqrt(t) - np.sqrt(t_prev)) * kh - 0.5 * (t - t_prev) * kh**2)


def heat_times(grid: Grid, per_decade: int = 64, decades: int = 6, t_max: float = 10.0) -> np.ndarray:
    """Log-spaced heat times from below 1/(2 kappa_max^2) up to at least ``t_max``."""
    kappa = max(grid.nyquist_radius(1.0), 1.0)
    t_lo = 0.25 / kappa**2
    span = max(float(decades), np.log10(t_max / t_lo))
    n = int(np.ceil(span * per_decade)) + 1
    return np.logspace(np.log10(t_lo), np.log10(t_lo) + span, n)


def hminus1_inf_norm(f: FieldLike, times=None) -> float:
    """max over sampled t of sqrt(t) * sup_x |e^{t Laplacian} f|.

    Vector fields use the pointwise Euclidean magnitude.  The heat flow uses
    the isotropic Laplacian of the field's own grid.
    """
    grid, c = _stack(f)
    if times is None:
        times = heat_times(grid)
    xi2 = np.broadcast_to(grid.xi2, grid.spectral_shape)
    best = 0.0
    if not np.any(c):
        return 0.0
    for t in np.asarray(times, dtype=float):
        damp = np.exp(-t * xi2)
        phys = raw_inverse(c * damp, grid)
        sup = float(np.sqrt(np.max(np.sum(phys**2, axis=0))))
        best = max(best, np.sqrt(t) * sup)
    return best
