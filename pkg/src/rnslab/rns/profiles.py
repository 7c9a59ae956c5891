"""Initial data on the slow grid and its physical rescaling."""

from __future__ import annotations

import warnings

import numpy as np

from ..besov import analytic_weight, apply_weight, besov_norm
from ..errors import DivergenceError
from ..spectral import Grid, SpectralField, forward_transform, raw_inverse
from .dynamics import divergence_residual, keep_mask
from .state import VelocityState

DEFAULT_WAVENUMBER = 4


class PeriodizationWarning(UserWarning):
    """The vertical profile is not negligible at the edge of [-L, L)."""


def envelope(grid: Grid) -> SpectralField:
    """g(x_3) = exp(-x_3^2)."""
    _, _, x3 = grid.coordinates()
    return forward_transform(np.exp(-(x3**2)), grid)


def stream_profile(grid: Grid, kx: int = 1, ky: int = 1) -> list[SpectralField]:
    """(d_2 phi, -d_1 phi, 0) for phi = cos(kx x_1 + ky x_2) g(x_3)."""
    x1, x2, x3 = grid.coordinates()
    g = np.exp(-(x3**2))
    arg = kx * x1 + ky * x2
    v1 = -ky * np.sin(arg) * g
    v2 = kx * np.sin(arg) * g
    return [forward_transform(v1, grid), forward_transform(v2, grid), SpectralField.zeros(grid)]


def ill_prepared_profile(grid: Grid, k0: int = DEFAULT_WAVENUMBER) -> list[SpectralField]:
    """v^3 = cos(k0 x_1) g(x_3) with the horizontal part closing the divergence.

    v^h = grad_h psi where Delta_h psi = -d_3 v^3, solved in Fourier so the
    discrete divergence vanishes mode by mode.
    """
    x1, _, x3 = grid.coordinates()
    v3 = forward_transform(np.cos(k0 * x1) * np.exp(-(x3**2)), grid)
    kh2 = np.broadcast_to(grid.kh2, grid.spectral_shape)
    safe = np.where(kh2 > 0, kh2, 1.0)
    psi = np.where(kh2 > 0, 1j * grid.k3 * v3.coeffs / safe, 0.0)
    v1 = SpectralField(grid, 1j * grid.k1 * psi)
    v2 = SpectralField(grid, 1j * grid.k2 * psi)
    return [v1, v2, v3]


def mean_flow_profile(grid: Grid) -> list[SpectralField]:
    """Horizontally constant shear (g(x_3), x_3 g(x_3), 0)."""
    _, _, x3 = grid.coordinates()
    g = np.exp(-(x3**2))
    return [forward_transform(g, grid), forward_transform(x3 * g, grid), SpectralField.zeros(grid)]


def _combine(parts, weights):
    out = [SpectralField.zeros(parts[0][0].grid) for _ in range(3)]
    for p, w in zip(parts, weights):
        out = [o + w * c for o, c in zip(out, p)]
    return out


PROFILES = ("zero", "stream", "ill-prepared", "mean-flow", "mixed")


def profile(name: str, grid: Grid, k0: int = DEFAULT_WAVENUMBER) -> list[SpectralField]:
    if name == "zero":
        return [SpectralField.zeros(grid) for _ in range(3)]
    if name == "stream":
        return stream_profile(grid)
    if name == "ill-prepared":
        return ill_prepared_profile(grid, k0)
    if name == "mean-flow":
        return mean_flow_profile(grid)
    if name == "mixed":
        parts = [ill_prepared_profile(grid, k0), stream_profile(grid), mean_flow_profile(grid)]
        return _combine(parts, [1.0, 0.5, 0.5])
    raise ValueError(f"unknown profile {name!r}; choose from {PROFILES}")


def analytic_norm(fields, a: float, s: float = 3.5) -> float:
    """||e^{a|D_3|} v||_{B^s} of a vector field."""
    return besov_norm(apply_weight(list(fields), analytic_weight(fields[0].grid, a)), s)


def scale_to_eta(fields, a: float, eta: float):
    size = analytic_norm(fields, a)
    if size == 0.0:
        return list(fields)
    return [(eta / size) * f for f in fields]


def vertical_tail(fields) -> float:
    """max |v(x_3 = -L)| relative to max |v|; small when the periodized data is faithful."""
    samples = [raw_inverse(f.coeffs * f.grid.vertical_sign, f.grid) for f in fields]
    top = max(float(np.max(np.abs(s))) for s in samples)
    edge = max(float(np.max(np.abs(s[..., 0]))) for s in samples)
    return edge / top if top > 0 else 0.0


def make_initial_data(v0, eps: float, n: float | None = None, tol: float = 1e-10,
                      tail_floor: float = 1e-8):
    """Rescaled state (vbar_0, w_0) = (M v0, M_perp v0) and physical u0_eps.

    ``v0`` is truncated to the modes kept by the solver.  Raises
    :class:`DivergenceError` if v0 is not divergence free and warns when the
    profile has not decayed below ``tail_floor`` at |x_3| = L.
    """
    v0 = list(v0)
    grid = v0[0].grid
    tail = vertical_tail(v0)
    if tail > tail_floor:
        warnings.warn(f"profile is {tail:.2e} of its peak at |x_3| = L; enlarge L", PeriodizationWarning,
                      stacklevel=2)
    n = grid.default_friedrichs_radius() if n is None else n
    keep = keep_mask(grid, n, eps)
    v = np.stack([np.where(keep, f.coeffs, 0.0) for f in v0]).astype(complex)
    residual = divergence_residual(v, grid)
    if residual > tol:
        raise DivergenceError(f"initial profile has relative divergence residual {residual:.3e}")
    if np.any(v[2, 0, 0, :]):
        mean3 = float(np.max(np.abs(v[2, 0, 0, :])))
        if mean3 > tol * max(float(np.max(np.abs(v))), 1e-300):
            raise DivergenceError(f"vertical component has nonzero horizontal mean {mean3:.3e}")
        v[2, 0, 0, :] = 0.0
    state = VelocityState(grid, v, 0.0)
    return state, rescale_to_physical(state, eps)


def rescale_to_physical(state: VelocityState, eps: float) -> list[SpectralField]:
    """u_eps(x) = (v^h(x_h, eps x_3), v^3(x_h, eps x_3)/eps) on a grid of half-period L/eps.

    Dilation in x_3 only relabels vertical wavenumbers, so the coefficient
    arrays carry over unchanged.
    """
    grid = state.grid
    phys = grid.with_half_period(grid.L / eps)
    return [SpectralField(phys, state.v[0].copy()), SpectralField(phys, state.v[1].copy()),
            SpectralField(phys, state.v[2] / eps)]


def physical_divergence_residual(u) -> float:
    u = list(u)
    return divergence_residual(np.stack([f.coeffs for f in u]), u[0].grid)
