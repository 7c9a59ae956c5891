"""Seeded random fields used by the invariant checks and the tests."""

from __future__ import annotations

import numpy as np

from .spectral import Grid, SpectralField, raw_forward


def random_field(grid: Grid, rng: np.random.Generator, decay: float = 2.0,
                 dealiased: bool = True) -> SpectralField:
    """Real random field with coefficient envelope (1 + |xi|)^(-decay)."""
    c = raw_forward(rng.standard_normal(grid.shape), grid)
    c *= np.sqrt(grid.size) * (1.0 + grid.xi_abs) ** (-decay)
    if dealiased:
        c = np.where(grid.dealias_mask, c, 0.0)
    return SpectralField(grid, c)


def random_solenoidal(grid: Grid, rng: np.random.Generator, decay: float = 2.0,
                      mean_flow: bool = True) -> list[SpectralField]:
    """Random divergence-free (v1, v2, v3) with v3 free of horizontal mean.

    The divergence is the plain one, d1 v1 + d2 v2 + d3 v3, so the result is
    admissible for the rescaled system at every eps.
    """
    comps = np.stack([random_field(grid, rng, decay).coeffs for _ in range(3)])
    k = [np.broadcast_to(kk, grid.spectral_shape) for kk in (grid.k1, grid.k2, grid.k3)]
    xi2 = np.broadcast_to(grid.xi2, grid.spectral_shape)
    dot = sum(k[i] * comps[i] for i in range(3))
    safe = np.where(xi2 > 0, xi2, 1.0)
    for i in range(3):
        comps[i] -= k[i] * dot / safe
    comps[2][0, 0, :] = 0.0
    if not mean_flow:
        comps[0][0, 0, :] = 0.0
        comps[1][0, 0, :] = 0.0
    # odd derivatives vanish at Nyquist indices, so those modes cannot be
    # constrained; dealiasing removes them anyway
    comps = np.where(grid.dealias_mask, comps, 0.0)
    return [SpectralField(grid, c) for c in comps]


def random_phase_field(grid: Grid, rng: np.random.Generator, decay: float = 2.0,
                       dealiased: bool = True) -> SpectralField:
    """Real field with |coefficient| = (1 + |xi|)^(-decay) exactly and random phases.

    Every B^s norm of such a field is deterministic, so ratio statistics over a
    corpus only fluctuate through the phases.
    """
    c = random_field(grid, rng, 0.0, dealiased).coeffs
    mod = np.abs(c)
    c = np.where(mod > 0, c / np.where(mod > 0, mod, 1.0), 0.0) * (1.0 + grid.xi_abs) ** (-decay)
    return SpectralField(grid, c)
