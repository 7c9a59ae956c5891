"""Bony decomposition ab = T_a b + R_a b on the spectral grid.

T_a b pairs each shell j of b with the part of a in the closed ball
|zeta| <= 2^j (radius 1/2 for j = -1).  R_a b is the rest of the dealiased
product, so the reconstruction is exact by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .besov import besov_norm, n_shells, shell_index
from .errors import GridMismatchError
from .spectral import Grid, SpectralField, full_spectrum, from_full_spectrum, raw_forward, raw_inverse


@dataclass(frozen=True)
class ParaproductPair:
    Tab: SpectralField
    Rab: SpectralField

    @property
    def total(self) -> SpectralField:
        return self.Tab + self.Rab


def low_radius(j: int) -> float:
    """Radius of the ball carrying the low-frequency factor for shell j."""
    return 2.0 ** j


def low_ball(f: SpectralField, radius: float) -> SpectralField:
    """Restriction of f to |zeta| <= radius."""
    return SpectralField(f.grid, np.where(f.grid.xi_abs <= radius, f.coeffs, 0.0))


def _paraproduct_coeffs(a: np.ndarray, b: np.ndarray, grid: Grid) -> np.ndarray:
    shells = shell_index(grid)
    xi_abs = np.broadcast_to(grid.xi_abs, grid.spectral_shape)
    acc = np.zeros(grid.shape)
    for j in range(-1, n_shells(grid) - 1):
        in_shell = shells == j
        if not np.any(b[in_shell]):
            continue
        low = np.where(xi_abs <= low_radius(j), a, 0.0)
        if not np.any(low):
            continue
        acc += raw_inverse(low, grid) * raw_inverse(np.where(in_shell, b, 0.0), grid)
    return np.where(grid.dealias_mask, raw_forward(acc, grid), 0.0)


def _remainder_region_coeffs(a: np.ndarray, b: np.ndarray, grid: Grid, radius=low_radius) -> np.ndarray:
    shells = shell_index(grid)
    xi_abs = np.broadcast_to(grid.xi_abs, grid.spectral_shape)
    acc = np.zeros(grid.shape)
    for j in range(-1, n_shells(grid) - 1):
        in_shell = shells == j
        high = np.where(xi_abs > radius(j), a, 0.0)
        if not (np.any(b[in_shell]) and np.any(high)):
            continue
        acc += raw_inverse(high, grid) * raw_inverse(np.where(in_shell, b, 0.0), grid)
    return np.where(grid.dealias_mask, raw_forward(acc, grid), 0.0)


def _product_coeffs(a: np.ndarray, b: np.ndarray, grid: Grid) -> np.ndarray:
    return np.where(grid.dealias_mask,
                    raw_forward(raw_inverse(a, grid) * raw_inverse(b, grid), grid), 0.0)


def paraproduct(a: SpectralField, b: SpectralField) -> SpectralField:
    """T_a b."""
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")
    return SpectralField(a.grid, _paraproduct_coeffs(a.coeffs, b.coeffs, a.grid))


def remainder(a: SpectralField, b: SpectralField) -> SpectralField:
    """R_a b = dealias(ab) - T_a b."""
    return bony_split(a, b).Rab


def remainder_direct(a: SpectralField, b: SpectralField, radius=low_radius) -> SpectralField:
    """R_a b summed over its own frequency region |zeta| > radius(j), not as a complement."""
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")
    return SpectralField(a.grid, _remainder_region_coeffs(a.coeffs, b.coeffs, a.grid, radius))


def reconstruction_error(a: SpectralField, b: SpectralField, radius=low_radius) -> float:
    """Relative max-norm gap between dealias(ab) and T_a b + R_a b with R evaluated directly.

    ``radius`` sets the region of the directly evaluated R; anything other
    than the paraproduct's own low radius breaks the tiling.
    """
    full = _product_coeffs(a.coeffs, b.coeffs, a.grid)
    gap = full - paraproduct(a, b).coeffs - remainder_direct(a, b, radius).coeffs
    scale = np.max(np.abs(full), initial=0.0)
    return float(np.max(np.abs(gap)) / scale) if scale > 0 else float(np.max(np.abs(gap), initial=0.0))


def bony_split(a: SpectralField, b: SpectralField) -> ParaproductPair:
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")
    grid = a.grid
    full = _product_coeffs(a.coeffs, b.coeffs, grid)
    t = _paraproduct_coeffs(a.coeffs, b.coeffs, grid)
    return ParaproductPair(SpectralField(grid, t), SpectralField(grid, full - t))


def _signed_full_indices(grid: Grid):
    kh = grid.kh_index
    kv = np.rint(np.fft.fftfreq(grid.n_v, 1.0 / grid.n_v)).astype(np.int64)
    return kh, kv


def direct_bony_split(a: SpectralField, b: SpectralField, max_points: int = 16**3) -> ParaproductPair:
    """Dense convolution evaluation of T and R; for small grids only.

    Enumerates every pair of nonzero modes, so it serves as an independent
    oracle for :func:`bony_split`.
    """
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")
    grid = a.grid
    if grid.size > max_points:
        raise ValueError(f"grid with {grid.size} points is too large for the dense oracle")
    A, B = full_spectrum(a), full_spectrum(b)
    kh, kv = _signed_full_indices(grid)
    ia = np.argwhere(A != 0)
    ib = np.argwhere(B != 0)
    if ia.size == 0 or ib.size == 0:
        z = SpectralField.zeros(grid)
        return ParaproductPair(z, z)

    def signed(idx):
        return np.stack([kh[idx[:, 0]], kh[idx[:, 1]], kv[idx[:, 2]]], axis=1)

    za, zb = signed(ia), signed(ib)
    scale = np.array([1.0, 1.0, grid.dxi3])
    mod_a = np.linalg.norm(za * scale, axis=1)
    mod_b2 = np.sum((zb * scale) ** 2, axis=1)
    jb = np.full(zb.shape[0], -1, dtype=np.int64)
    big = mod_b2 >= 1.0
    jb[big] = (np.frexp(mod_b2[big])[1] - 1) // 2
    radius_b = 2.0 ** jb.astype(float)

    ch, cv = (grid.n_h - 1) // 3, (grid.n_v - 1) // 3
    T = np.zeros(grid.shape, dtype=complex)
    R = np.zeros(grid.shape, dtype=complex)
    va = A[tuple(ia.T)]
    vb = B[tuple(ib.T)]
    for p in range(za.shape[0]):
        out = za[p] + zb
        keep = (np.abs(out[:, 0]) <= ch) & (np.abs(out[:, 1]) <= ch) & (np.abs(out[:, 2]) <= cv)
        if not np.any(keep):
            continue
        contrib = va[p] * vb[keep]
        low = mod_a[p] <= radius_b[keep]
        o = out[keep] % np.array([grid.n_h, grid.n_h, grid.n_v])
        np.add.at(T, (o[low, 0], o[low, 1], o[low, 2]), contrib[low])
        np.add.at(R, (o[~low, 0], o[~low, 1], o[~low, 2]), contrib[~low])
    return ParaproductPair(from_full_spectrum(T, grid), from_full_spectrum(R, grid))


def phase_domination_check(a: SpectralField, b: SpectralField, psi) -> tuple[float, float]:
    """Largest pointwise excess of |F((T_a b)_psi)| over F(T_{a+_psi} b+_psi), and the same for R.

    ``psi`` is an array of phase values on the grid.  For a subadditive phase
    both numbers are at rounding level or negative.
    """
    grid = a.grid
    w = np.exp(np.broadcast_to(np.asarray(psi, dtype=float), grid.spectral_shape))
    split = bony_split(a, b)
    ap = SpectralField(grid, (np.abs(a.coeffs) * w).astype(complex))
    bp = SpectralField(grid, (np.abs(b.coeffs) * w).astype(complex))
    dominant = bony_split(ap, bp)
    slack_t = np.abs(split.Tab.coeffs) * w - dominant.Tab.coeffs.real
    slack_r = np.abs(split.Rab.coeffs) * w - dominant.Rab.coeffs.real
    return float(slack_t.max()), float(slack_r.max())


@dataclass(frozen=True)
class ProductConstants:
    """Largest observed ratios for the paraproduct and remainder estimates."""

    c_T: float
    c_R: float
    samples: int


def product_ratios(a: SpectralField, b: SpectralField, s: float, psi=0.0) -> tuple[float, float]:
    """||(T_a b)_psi||_{B^s} / (||a_psi||_{B^{3/2}} ||b_psi||_{B^s}) and the R analogue."""
    grid = a.grid
    w = np.exp(np.broadcast_to(np.asarray(psi, dtype=float), grid.spectral_shape))
    aw = SpectralField(grid, a.coeffs * w)
    bw = SpectralField(grid, b.coeffs * w)
    denom = besov_norm(aw, 1.5) * besov_norm(bw, s)
    if denom == 0.0:
        return 0.0, 0.0
    split = bony_split(a, b)
    t = besov_norm(SpectralField(grid, split.Tab.coeffs * w), s)
    r = besov_norm(SpectralField(grid, split.Rab.coeffs * w), s)
    return t / denom, r / denom


def product_estimate_check(pairs: Iterable[tuple[SpectralField, SpectralField]], s: float,
                           psi=0.0) -> ProductConstants:
    """Fit the product-estimate constants as maxima over a corpus of pairs."""
    if s <= 0:
        raise ValueError(f"s must be positive, got {s}")
    c_t = c_r = 0.0
    n = 0
    for a, b in pairs:
        t, r = product_ratios(a, b, s, psi)
        c_t, c_r = max(c_t, t), max(c_r, r)
        n += 1
    return ProductConstants(c_t, c_r, n)
