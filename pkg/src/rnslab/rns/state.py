"""Solver configuration and the decomposed velocity state."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import GridMismatchError
from ..spectral import Grid, SpectralField


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of one run of the Friedrichs-truncated rescaled system.

    ``n`` is the Friedrichs radius; ``None`` selects 0.9 times the horizontal
    Nyquist wavenumber.  ``eta`` is the target size of e^{a|D_3|} v0 in
    B^{7/2}; ``None`` keeps the profile's own amplitude.
    """

    eps: float = 0.5
    a: float = 1.0
    lam: float = 32.0
    n: float | None = None
    dt: float = 1e-3
    t_max: float = 10.0
    n_h: int = 64
    n_v: int = 128
    L: float = 2.0 * np.pi
    profile: str = "mixed"
    eta: float | None = 1.0 / 256.0
    noise_floor: float = 1e-13
    checkpoint_every: int = 100
    cfl: float = 0.5
    nonlinear: bool = True

    def __post_init__(self):
        if not (0.0 < self.eps <= 1.0):
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        if self.a <= 0 or self.lam <= 0:
            raise ValueError("a and lambda must be positive")
        if self.dt <= 0 or self.t_max < 0:
            raise ValueError("dt must be positive and t_max nonnegative")
        if self.eta is not None and self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.friedrichs_radius > self.grid.nyquist_radius(self.eps):
            raise ValueError(
                f"Friedrichs radius {self.friedrichs_radius} exceeds the grid Nyquist radius "
                f"{self.grid.nyquist_radius(self.eps):.4g}"
            )

    @property
    def grid(self) -> Grid:
        return Grid(self.n_h, self.n_v, self.L)

    @property
    def friedrichs_radius(self) -> float:
        return self.grid.default_friedrichs_radius() if self.n is None else float(self.n)

    @property
    def steps(self) -> int:
        return int(round(self.t_max / self.dt))

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)

    def digest(self) -> str:
        text = repr(sorted(asdict(self).items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class VelocityState:
    """v = vbar + w stored as one (3, ...) coefficient array.

    The xi_h = 0 line of components 0 and 1 holds the horizontal average
    vbar^h; the same line of component 2 is identically zero because vbar^3
    vanishes for a divergence-free field.  Everything else is w = M_perp v.
    """

    grid: Grid
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if self.v.shape != (3,) + self.grid.spectral_shape:
            raise GridMismatchError(f"state array has shape {self.v.shape}")

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> "VelocityState":
        return cls(grid, np.zeros((3,) + grid.spectral_shape, dtype=complex), t)

    @classmethod
    def from_fields(cls, fields, t: float = 0.0) -> "VelocityState":
        """Build from three full components; the mean of the third is dropped."""
        fields = list(fields)
        grid = fields[0].grid
        v = np.stack([f.coeffs for f in fields]).astype(complex)
        v[2, 0, 0, :] = 0.0
        return cls(grid, v, t)

    @classmethod
    def from_components(cls, w_h, w3, vbar_h, t: float = 0.0) -> "VelocityState":
        grid = w3.grid
        v = np.stack([w_h[0].coeffs, w_h[1].coeffs, w3.coeffs]).astype(complex)
        v[:, 0, 0, :] = 0.0
        v[0, 0, 0, :] = vbar_h[0]
        v[1, 0, 0, :] = vbar_h[1]
        return cls(grid, v, t)

    def field(self, i: int) -> SpectralField:
        return SpectralField(self.grid, self.v[i])

    @property
    def fields(self) -> list[SpectralField]:
        return [self.field(i) for i in range(3)]

    def _fluct(self, i: int) -> SpectralField:
        c = self.v[i].copy()
        c[0, 0, :] = 0.0
        return SpectralField(self.grid, c)

    @property
    def w_h(self) -> tuple[SpectralField, SpectralField]:
        return self._fluct(0), self._fluct(1)

    @property
    def w3(self) -> SpectralField:
        return self._fluct(2)

    @property
    def vbar_h(self) -> np.ndarray:
        """Vertical half-spectrum coefficients of vbar^1, vbar^2, shape (2, n_v/2 + 1)."""
        return self.v[:2, 0, 0, :].copy()

    def with_(self, v: np.ndarray | None = None, t: float | None = None) -> "VelocityState":
        return VelocityState(self.grid, self.v if v is None else v, self.t if t is None else t)


@dataclass
class StepDiagnostics:
    step: int
    t: float
    theta: float
    theta_dot: float
    margin: float
    w3_phi: float
    eps_wh_phi: float
    v_phi_tilde: float
    vh_phi_tilde: float
    w3_phi_tilde: float
    energy: float
    dissipation_term: float
    divergence: float
    outside_support: float
    extras: dict = field(default_factory=dict)

    COLUMNS = ("step", "t", "theta", "theta_dot", "margin", "w3_phi", "eps_wh_phi",
               "v_phi_tilde", "vh_phi_tilde", "w3_phi_tilde", "energy", "dissipation_term",
               "divergence", "outside_support")

    def row(self) -> list:
        return [getattr(self, c) for c in self.COLUMNS]
