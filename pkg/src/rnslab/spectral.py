"""Fourier representation of real fields on the slab T^2 x T_L.

The horizontal directions are 2*pi periodic, so horizontal wavenumbers are
integers.  The vertical direction is the interval [-L, L) made periodic, so
vertical wavenumbers are multiples of pi/L.

Coefficients are stored as the half spectrum produced by a real FFT along
the vertical axis: index m = 0 .. N_v/2 holds xi_3 = m*pi/L, and the modes
with negative vertical index are implied by Hermitian symmetry.  Every sum
over the full spectrum is therefore taken with the multiplicity weights in
``Grid.multiplicity``.  Coefficients are normalized so that

    f(x) = sum_xi c(xi) exp(i xi . x).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatchError, RealityError

_REALITY_TOL = 1e-10


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Tensor grid on T^2 x [-L, L) with ``n_h`` x ``n_h`` x ``n_v`` points."""

    n_h: int = 64
    n_v: int = 128
    L: float = 2.0 * np.pi

    def __post_init__(self):
        if not (_is_power_of_two(int(self.n_h)) and _is_power_of_two(int(self.n_v))):
            raise ValueError(f"mode counts must be powers of two, got {self.n_h}, {self.n_v}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"vertical half-period must be positive, got {self.L}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_h, self.n_h, self.n_v)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.n_h, self.n_h, self.n_v // 2 + 1)

    @property
    def size(self) -> int:
        return self.n_h * self.n_h * self.n_v

    @property
    def dxi3(self) -> float:
        """Vertical wavenumber spacing pi/L."""
        return np.pi / self.L

    @cached_property
    def kh_index(self) -> np.ndarray:
        """Signed integer horizontal wavenumbers in FFT order."""
        return np.rint(sfft.fftfreq(self.n_h, 1.0 / self.n_h)).astype(np.int64)

    @cached_property
    def k1(self) -> np.ndarray:
        return self.kh_index.astype(float).reshape(-1, 1, 1)

    @cached_property
    def k2(self) -> np.ndarray:
        return self.kh_index.astype(float).reshape(1, -1, 1)

    @cached_property
    def m_index(self) -> np.ndarray:
        return np.arange(self.n_v // 2 + 1)

    @cached_property
    def k3(self) -> np.ndarray:
        return (self.m_index * self.dxi3).reshape(1, 1, -1)

    @cached_property
    def kh2(self) -> np.ndarray:
        """|xi_h|^2, shape (n_h, n_h, 1)."""
        return self.k1**2 + self.k2**2

    @cached_property
    def kh_abs(self) -> np.ndarray:
        return np.sqrt(self.kh2)

    @cached_property
    def xi2(self) -> np.ndarray:
        """Isotropic |xi|^2 on the full spectral shape."""
        return self.kh2 + self.k3**2

    @cached_property
    def xi_abs(self) -> np.ndarray:
        return np.sqrt(self.xi2)

    def xi_eps2(self, eps: float) -> np.ndarray:
        """Anisotropic symbol |xi_h|^2 + eps^2 xi_3^2."""
        return self.kh2 + (eps * self.k3) ** 2

    @cached_property
    def multiplicity(self) -> np.ndarray:
        """Number of full-spectrum modes represented by each stored coefficient."""
        w = np.full(self.n_v // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w.reshape(1, 1, -1)

    @cached_property
    def mean_mask(self) -> np.ndarray:
        """True on the xi_h = 0 line (range of the horizontal average)."""
        return (self.kh2 == 0.0) & np.ones(self.spectral_shape, dtype=bool)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3 rule: keep |index| <= (N-1)//3 along every axis."""
        ch = (self.n_h - 1) // 3
        cv = (self.n_v - 1) // 3
        kh = np.abs(self.kh_index) <= ch
        kv = self.m_index <= cv
        return kh[:, None, None] & kh[None, :, None] & kv[None, None, :]

    def friedrichs_mask(self, n: float, eps: float) -> np.ndarray:
        return self.xi_eps2(eps) <= n * n

    def nyquist_radius(self, eps: float = 1.0) -> float:
        """Largest |xi_eps| carried by the grid."""
        return float(np.sqrt(self.xi_eps2(eps).max()))

    def dealiased_radius(self, eps: float = 1.0) -> float:
        """Largest |xi_eps| among modes kept by the 2/3 rule."""
        return float(np.sqrt(self.xi_eps2(eps)[self.dealias_mask].max()))

    def default_friedrichs_radius(self) -> float:
        return 0.9 * (self.n_h // 2)

    @cached_property
    def vertical_sign(self) -> np.ndarray:
        """(-1)^m, the phase from placing the first vertical sample at -L."""
        return np.where(self.m_index % 2 == 0, 1.0, -1.0).reshape(1, 1, -1)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable physical coordinates (x1, x2, x3)."""
        xh = 2.0 * np.pi * np.arange(self.n_h) / self.n_h
        x3 = -self.L + 2.0 * self.L * np.arange(self.n_v) / self.n_v
        return xh.reshape(-1, 1, 1), xh.reshape(1, -1, 1), x3.reshape(1, 1, -1)

    def with_half_period(self, L: float) -> "Grid":
        return Grid(self.n_h, self.n_v, L)


def raw_forward(samples: np.ndarray, grid: Grid) -> np.ndarray:
    """Coefficients of real samples, without the vertical phase convention.

    Only valid when paired with :func:`raw_inverse`; pointwise products do
    not care where the sample grid starts, so the solver uses this pair.
    """
    return sfft.rfftn(samples, axes=(-3, -2, -1)) * (1.0 / grid.size)


def raw_inverse(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.irfftn(coeffs * grid.size, s=grid.shape, axes=(-3, -2, -1))


def hermitian_defect(coeffs: np.ndarray, grid: Grid) -> float:
    """Max violation of c(-k) = conj(c(k)) on the self-conjugate vertical planes."""
    neg = (-np.arange(grid.n_h)) % grid.n_h
    worst = 0.0
    for m in (0, grid.n_v // 2):
        plane = coeffs[..., m]
        mirrored = np.conj(plane[neg][:, neg])
        worst = max(worst, float(np.max(np.abs(plane - mirrored))))
    return worst


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Half-spectrum Fourier coefficients of a real scalar field."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != self.grid.spectral_shape:
            raise GridMismatchError(
                f"coefficient shape {self.coeffs.shape} does not match {self.grid.spectral_shape}"
            )

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros(grid.spectral_shape, dtype=complex))

    def _check(self, other: "SpectralField"):
        if not isinstance(other, SpectralField) or other.grid != self.grid:
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField):
            return NotImplemented
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def physical(self) -> np.ndarray:
        return inverse_transform(self)


def forward_transform(samples: np.ndarray, grid: Grid) -> SpectralField:
    """Fourier coefficients of real samples taken at ``grid.coordinates()``.

    Samples may be any array broadcastable to ``grid.shape``.
    """
    samples = np.asarray(samples)
    try:
        samples = np.broadcast_to(samples, grid.shape)
    except ValueError:
        raise GridMismatchError(f"sample shape {samples.shape} does not match {grid.shape}") from None
    if np.iscomplexobj(samples):
        if np.max(np.abs(samples.imag), initial=0.0) > _REALITY_TOL * max(1.0, np.max(np.abs(samples))):
            raise RealityError("samples have a non-negligible imaginary part")
        samples = samples.real
    return SpectralField(grid, raw_forward(samples, grid) * grid.vertical_sign)


def inverse_transform(f: SpectralField) -> np.ndarray:
    """Physical samples of ``f``; rejects coefficients that are not Hermitian."""
    grid = f.grid
    scale = float(np.max(np.abs(f.coeffs), initial=0.0))
    if scale > 0.0 and hermitian_defect(f.coeffs, grid) > _REALITY_TOL * max(scale, 1.0):
        raise RealityError("coefficients are not Hermitian symmetric")
    return raw_inverse(f.coeffs * grid.vertical_sign, grid)


def derivative_symbol(grid: Grid, axis: int, order: int = 1) -> np.ndarray:
    """(i xi_axis)^order with odd orders zeroed at the Nyquist index."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if axis == 1:
        k, nyq = grid.k1, grid.kh_index.reshape(-1, 1, 1) == -grid.n_h // 2
    elif axis == 2:
        k, nyq = grid.k2, grid.kh_index.reshape(1, -1, 1) == -grid.n_h // 2
    elif axis == 3:
        k, nyq = grid.k3, grid.m_index.reshape(1, 1, -1) == grid.n_v // 2
    else:
        raise ValueError(f"axis must be 1, 2 or 3, got {axis}")
    if order == 2:
        return -(k**2)
    return np.where(nyq, 0.0, 1j * k)


def derivative(f: SpectralField, axis: int, order: int = 1) -> SpectralField:
    return SpectralField(f.grid, f.coeffs * derivative_symbol(f.grid, axis, order))


def horizontal_average(f: SpectralField) -> SpectralField:
    """The projector M onto functions of x_3 alone."""
    out = np.zeros_like(f.coeffs)
    out[0, 0, :] = f.coeffs[0, 0, :]
    return SpectralField(f.grid, out)


def horizontal_fluctuation(f: SpectralField) -> SpectralField:
    """The complementary projector M_perp = Id - M."""
    out = f.coeffs.copy()
    out[0, 0, :] = 0.0
    return SpectralField(f.grid, out)


def dealias(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, np.where(f.grid.dealias_mask, f.coeffs, 0.0))


def friedrichs_project(f: SpectralField, n: float, eps: float) -> SpectralField:
    """Keep the modes with |xi_h|^2 + eps^2 xi_3^2 <= n^2."""
    return SpectralField(f.grid, np.where(f.grid.friedrichs_mask(n, eps), f.coeffs, 0.0))


def plus_modulus(f: SpectralField) -> SpectralField:
    """The map f -> f^+ replacing every coefficient by its modulus."""
    return SpectralField(f.grid, np.abs(f.coeffs).astype(complex))


def product(a: SpectralField, b: SpectralField) -> SpectralField:
    """Dealiased pseudo-spectral product of two fields."""
    a._check(b)
    grid = a.grid
    c = raw_forward(raw_inverse(a.coeffs, grid) * raw_inverse(b.coeffs, grid), grid)
    return SpectralField(grid, np.where(grid.dealias_mask, c, 0.0))


def l2_norm(f: SpectralField) -> float:
    """sqrt of the sum of |c|^2 over the full spectrum (the mean-square norm)."""
    return float(np.sqrt(np.sum(f.grid.multiplicity * np.abs(f.coeffs) ** 2)))


def full_spectrum(f: SpectralField) -> np.ndarray:
    """Expand the half spectrum to the full (n_h, n_h, n_v) complex array."""
    grid = f.grid
    out = np.zeros(grid.shape, dtype=complex)
    nz = grid.n_v // 2 + 1
    out[..., :nz] = f.coeffs
    neg = (-np.arange(grid.n_h)) % grid.n_h
    for m in range(nz, grid.n_v):
        out[..., m] = np.conj(f.coeffs[neg][:, neg, grid.n_v - m])
    return out


def from_full_spectrum(full: np.ndarray, grid: Grid) -> SpectralField:
    if full.shape != grid.shape:
        raise GridMismatchError(f"full spectrum shape {full.shape} does not match {grid.shape}")
    return SpectralField(grid, np.array(full[..., : grid.n_v // 2 + 1], dtype=complex))


class DealiasedBox:
    """Compact storage of the modes kept by the 2/3 rule.

    Every dealiased field vanishes outside a box of (2c+1)^2 x (c_v+1)
    stored coefficients.  Arithmetic on the box touches about 30% of the full
    half spectrum, and the transforms skip the zero padding where that helps.
    Arrays may carry any number of leading axes.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        ch = (grid.n_h - 1) // 3
        self.nbv = (grid.n_v - 1) // 3 + 1
        self.hidx = np.r_[0 : ch + 1, grid.n_h - ch : grid.n_h]
        self.nbh = self.hidx.size
        self.shape = (self.nbh, self.nbh, self.nbv)

    def gather(self, full: np.ndarray) -> np.ndarray:
        return full[..., self.hidx, :, :][..., self.hidx, :][..., : self.nbv]

    def scatter(self, box: np.ndarray) -> np.ndarray:
        lead = box.shape[:-3]
        out = np.zeros(lead + self.grid.spectral_shape, dtype=complex)
        tmp = np.zeros(lead + (self.nbh, self.grid.n_h, self.nbv), dtype=complex)
        tmp[..., self.hidx, :] = box
        out[..., self.hidx, :, : self.nbv] = tmp
        return out

    def constant(self, arr: np.ndarray) -> np.ndarray:
        """Gather a grid-shaped (or broadcastable) array."""
        return np.ascontiguousarray(self.gather(np.broadcast_to(arr, self.grid.spectral_shape)))

    def inverse(self, box: np.ndarray) -> np.ndarray:
        """Physical samples (raw convention, see :func:`raw_inverse`)."""
        g = self.grid
        lead = box.shape[:-3]
        x = np.zeros(lead + (g.n_h, self.nbh, self.nbv), dtype=complex)
        x[..., self.hidx, :, :] = box
        x = sfft.ifft(x, axis=-3, norm="forward", overwrite_x=True)
        y = np.zeros(lead + (g.n_h, g.n_h, self.nbv), dtype=complex)
        y[..., self.hidx, :] = x
        y = sfft.ifft(y, axis=-2, norm="forward", overwrite_x=True)
        z = np.zeros(lead + g.spectral_shape, dtype=complex)
        z[..., : self.nbv] = y
        return sfft.irfft(z, n=g.n_v, axis=-1, norm="forward", overwrite_x=True)

    def forward(self, samples: np.ndarray) -> np.ndarray:
        """Dealiased coefficients of real samples (raw convention)."""
        y = sfft.rfft(samples, axis=-1, norm="forward")[..., : self.nbv]
        y = sfft.fft(y, axis=-2, norm="forward", overwrite_x=True)[..., self.hidx, :]
        return sfft.fft(y, axis=-3, norm="forward", overwrite_x=True)[..., self.hidx, :, :]
