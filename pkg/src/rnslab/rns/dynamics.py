"""Nonlinear terms, pressure and tendencies of the rescaled system.

Sign convention: q solves  Delta_eps q = -sum_{j,k} d_j d_k (v^j v^k)  on the
modes with xi_h != 0, and M q = 0.  With this sign the momentum equations read

    d_t v^h - Delta_eps v^h + div(v v^h) + grad_h q       = 0
    d_t v^3 - Delta_eps v^3 + div(v v^3) + eps^2 d_3 q    = 0

and the divergence of the tendency vanishes identically.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import CompatibilityError
from ..paraproduct import bony_split, remainder
from ..spectral import Grid, SpectralField, derivative, product, raw_forward, raw_inverse
from .state import VelocityState

PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


@lru_cache(maxsize=16)
def _wavevectors(grid: Grid):
    shape = grid.spectral_shape
    return tuple(np.broadcast_to(k, shape) for k in (grid.k1, grid.k2, grid.k3))


def _products(v: np.ndarray, inverse, forward) -> dict:
    phys = inverse(v)
    buf = np.empty((len(PAIRS),) + phys.shape[1:])
    for i, (j, k) in enumerate(PAIRS):
        np.multiply(phys[j], phys[k], out=buf[i])
    spec = forward(buf)
    return {pair: spec[i] for i, pair in enumerate(PAIRS)}


def quadratic_products(v: np.ndarray, grid: Grid) -> dict:
    """Dealiased F(v^j v^k) for the six index pairs."""
    return _products(v, lambda c: raw_inverse(c, grid),
                     lambda p: np.where(grid.dealias_mask, raw_forward(p, grid), 0.0))


def _p(products: dict, j: int, k: int) -> np.ndarray:
    return products[(j, k)] if (j, k) in products else products[(k, j)]


def _pressure(products: dict, xi, sym: np.ndarray) -> np.ndarray:
    """-sum xi_j xi_k P_jk / |xi_eps|^2 off the mean line, zero on it."""
    source = (xi[0] ** 2 * products[(0, 0)] + xi[1] ** 2 * products[(1, 1)]
              + xi[2] ** 2 * products[(2, 2)]
              + 2.0 * (xi[0] * xi[1] * products[(0, 1)] + xi[0] * xi[2] * products[(0, 2)]
                       + xi[1] * xi[2] * products[(1, 2)]))
    scale = float(np.max(np.abs(source), initial=0.0))
    if scale > 0 and abs(source[0, 0, 0]) > 1e-12 * scale:
        raise CompatibilityError(f"nonzero pressure source {source[0, 0, 0]} at xi = 0")
    inv = np.zeros(sym.shape)
    np.divide(-1.0, sym, out=inv, where=sym > 0)
    q = source * inv
    q[0, 0, :] = 0.0
    return q


def pressure_from_products(products: dict, grid: Grid, eps: float) -> np.ndarray:
    sym = np.broadcast_to(grid.kh2, grid.spectral_shape) + (eps * grid.k3) ** 2
    return _pressure(products, _wavevectors(grid), sym)


def pressure_solve(state: VelocityState, eps: float) -> SpectralField:
    """Rescaled pressure on M_perp modes; zero horizontal average."""
    products = quadratic_products(state.v, state.grid)
    return SpectralField(state.grid, pressure_from_products(products, state.grid, eps))


def keep_mask(grid: Grid, n: float, eps: float) -> np.ndarray:
    """Modes kept by both the 2/3 rule and the Friedrichs projector."""
    return grid.dealias_mask & grid.friedrichs_mask(n, eps)


def tendency_core(v, inverse, forward, xi, sym, keep, eps, q=None) -> np.ndarray:
    """-P_{n,eps}[div(v v) + grad_eps q] given a transform pair and symbols.

    The xi_h = 0 line must sit at horizontal index (0, 0).  Components 0, 1
    on that line carry the vbar^h equation; component 2 there is zero.
    """
    products = _products(v, inverse, forward)
    if q is None:
        q = _pressure(products, xi, sym)
    out = np.empty(v.shape, dtype=complex)
    for i in range(3):
        n_i = 1j * (xi[0] * _p(products, i, 0) + xi[1] * _p(products, i, 1) + xi[2] * _p(products, i, 2))
        grad = 1j * xi[i] * q
        if i == 2:
            grad *= eps**2
        out[i] = -(n_i + grad)
    out[2, 0, 0, :] = 0.0
    out *= keep
    return out


def nonlinear_tendency(v: np.ndarray, grid: Grid, eps: float, keep: np.ndarray,
                       q: np.ndarray | None = None) -> np.ndarray:
    """Nonlinear tendency on the full half spectrum."""
    sym = np.broadcast_to(grid.xi_eps2(eps), grid.spectral_shape)
    return tendency_core(v, lambda c: raw_inverse(c, grid),
                         lambda p: np.where(grid.dealias_mask, raw_forward(p, grid), 0.0),
                         _wavevectors(grid), sym, keep, eps, q)


def rhs_eval(state: VelocityState, q: SpectralField | None, eps: float, n: float):
    """Full tendencies (linear plus nonlinear) for (w^h, w^3, vbar^h).

    Returns ``(dw_h, dw3, dvbar_h)`` with the first two as SpectralFields
    and ``dvbar_h`` of shape (2, n_v/2 + 1).
    """
    grid = state.grid
    keep = keep_mask(grid, n, eps)
    g = nonlinear_tendency(state.v, grid, eps, keep, None if q is None else q.coeffs)
    g = g - grid.xi_eps2(eps) * state.v
    return _split(g, grid)


def _split(g: np.ndarray, grid: Grid):
    w = g.copy()
    w[:, 0, 0, :] = 0.0
    dvbar = g[:2, 0, 0, :].copy()
    return ((SpectralField(grid, w[0]), SpectralField(grid, w[1])),
            SpectralField(grid, w[2]), dvbar)


def _mperp(f: SpectralField) -> SpectralField:
    c = f.coeffs.copy()
    c[0, 0, :] = 0.0
    return SpectralField(f.grid, c)


def _mean(f: SpectralField) -> SpectralField:
    c = np.zeros_like(f.coeffs)
    c[0, 0, :] = f.coeffs[0, 0, :]
    return SpectralField(f.grid, c)


def rhs_term_by_term(state: VelocityState, eps: float, n: float):
    """Tendencies assembled term by term from the (w^h, w^3, vbar^h) form.

    w^h:    -P M_perp[div_h(v^h (x) w^h) + d_3(w^3 w^h) + w^3 d_3 vbar^h + grad_h q]
    w^3:    -P M_perp[div_h(v^h w^3) + d_3(w^3 w^3) + eps^2 d_3 q]
    vbar^h: -P d_3 M(w^3 w^h)
    plus the linear Delta_eps terms.  Independent of :func:`rhs_eval` except
    for the pressure, which both obtain from :func:`pressure_solve`.
    """
    grid = state.grid
    keep = keep_mask(grid, n, eps)
    q = pressure_solve(state, eps)
    v = state.fields
    wh = state.w_h
    w3 = state.w3
    vbar = [_mean(v[0]), _mean(v[1])]

    def proj(f: SpectralField) -> SpectralField:
        return SpectralField(grid, np.where(keep, f.coeffs, 0.0))

    dwh = []
    for i in range(2):
        adv = derivative(product(v[0], wh[i]), 1) + derivative(product(v[1], wh[i]), 2)
        adv = adv + derivative(product(w3, wh[i]), 3) + product(w3, derivative(vbar[i], 3))
        adv = adv + derivative(q, i + 1)
        lin = SpectralField(grid, -grid.xi_eps2(eps) * wh[i].coeffs)
        dwh.append(lin - proj(_mperp(adv)))
    adv3 = derivative(product(v[0], w3), 1) + derivative(product(v[1], w3), 2)
    adv3 = adv3 + derivative(product(w3, w3), 3) + eps**2 * derivative(q, 3)
    dw3 = SpectralField(grid, -grid.xi_eps2(eps) * w3.coeffs) - proj(_mperp(adv3))
    dvbar = np.empty((2, grid.n_v // 2 + 1), dtype=complex)
    for i in range(2):
        src = proj(derivative(_mean(product(w3, wh[i])), 3))
        dvbar[i] = -src.coeffs[0, 0, :] - (eps * grid.k3[0, 0, :]) ** 2 * vbar[i].coeffs[0, 0, :]
    return (dwh[0], dwh[1]), dw3, dvbar


def divergence(v: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectral coefficients of d_1 v^1 + d_2 v^2 + d_3 v^3."""
    xi = _wavevectors(grid)
    return sum(1j * xi[i] * v[i] for i in range(3))


def divergence_residual(v: np.ndarray, grid: Grid) -> float:
    """max |xi . v_hat| relative to max |xi| |v_hat|."""
    div = np.max(np.abs(divergence(v, grid)), initial=0.0)
    scale = np.max(np.broadcast_to(grid.xi_abs, grid.spectral_shape) * np.sqrt(np.sum(np.abs(v) ** 2, axis=0)),
                   initial=0.0)
    return float(div / scale) if scale > 0 else float(div)


# Cross-check evaluators for the pressure and the paraproduct identity.


def _inverse_laplacian_eps(f: SpectralField, eps: float) -> SpectralField:
    """Delta_eps^{-1} on M_perp modes, zero on the mean line."""
    grid = f.grid
    out = np.zeros_like(f.coeffs)
    fluct = ~grid.mean_mask
    sym = np.broadcast_to(grid.xi_eps2(eps), grid.spectral_shape)
    out[fluct] = -f.coeffs[fluct] / sym[fluct]
    return SpectralField(grid, out)


def pressure_split_horizontal(state: VelocityState, eps: float) -> tuple[SpectralField, SpectralField]:
    """(q_h, q_3) with q = q_h + q_3.

    q_h = -Delta_eps^{-1}[(div_h w^h)^2 + sum_{k,l<=2} d_k w^l d_l w^k]
    q_3 = -2 Delta_eps^{-1}[sum_{l<=2} d_3 v^l d_l w^3]
    """
    v = state.fields
    wh = state.w_h
    w3 = state.w3
    divh = derivative(wh[0], 1) + derivative(wh[1], 2)
    src_h = product(divh, divh)
    for k in range(2):
        for l in range(2):
            src_h = src_h + product(derivative(wh[l], k + 1), derivative(wh[k], l + 1))
    src_3 = product(derivative(v[0], 3), derivative(w3, 1)) + product(derivative(v[1], 3), derivative(w3, 2))
    q_h = -_inverse_laplacian_eps(src_h, eps)
    q_3 = -2.0 * _inverse_laplacian_eps(src_3, eps)
    return q_h, q_3


def pressure_split_eps(state: VelocityState, eps: float, literal: bool = False):
    """(q1, q2) with eps*q = q1 - q2.

    q1 = -sum_{k<=2} sum_{l<=3} d_k d_l Delta_eps^{-1}(eps v^k v^l)
         - sum_{k<=2} d_k (eps d_3) Delta_eps^{-1}(w^3 v^k)
    q2 = -2 eps d_3 Delta_eps^{-1}(w^3 div_h w^h)

    With ``literal=True`` the first sum uses w^k v^l in place of v^k v^l;
    that variant reproduces eps*q only when vbar^h = 0.
    """
    v = state.fields
    wh = state.w_h
    w3 = state.w3
    grid = state.grid
    acc = SpectralField.zeros(grid)
    for k in range(2):
        left = wh[k] if literal else v[k]
        for l in range(3):
            term = derivative(derivative(product(left, v[l]), k + 1), l + 1)
            acc = acc + eps * term
        acc = acc + eps * derivative(derivative(product(w3, v[k]), k + 1), 3)
    q1 = -_inverse_laplacian_eps(acc, eps)
    divh = derivative(wh[0], 1) + derivative(wh[1], 2)
    q2 = -2.0 * eps * _inverse_laplacian_eps(derivative(product(w3, divh), 3), eps)
    return q1, q2


def paradifferential_identity(w: list[SpectralField], a: SpectralField) -> list[SpectralField]:
    """Four spectral evaluations of d_3(w^3 a) that must coincide.

    With the low-frequency factor written first (w^3 a = T_{w^3} a + R_{w^3} a):

      0: d_3(w^3 a)
      1: d_3 T_{w^3} a + d_3 R_{w^3} a
      2: d_3 T_{w^3} a + R_{w^3} d_3 a - R_{div_h w^h} a
      3: d_3 T_{w^3} a + R_{w^3} d_3 a - sum_l d_l R_{w^l} a + sum_l R_{w^l} d_l a

    Lines 2 and 3 use d_3 w^3 = -div_h w^h, so ``w`` must be divergence free.
    """
    w1, w2, w3 = w
    lhs = derivative(product(w3, a), 3)
    split = bony_split(w3, a)
    t_part = derivative(split.Tab, 3)
    line1 = t_part + derivative(split.Rab, 3)
    divh = derivative(w1, 1) + derivative(w2, 2)
    common = t_part + remainder(w3, derivative(a, 3))
    line2 = common - remainder(divh, a)
    line3 = common
    for l, wl in ((1, w1), (2, w2)):
        line3 = line3 - derivative(remainder(wl, a), l) + remainder(wl, derivative(a, l))
    return [lhs, line1, line2, line3]


def max_relative_gap(reference: SpectralField, other: SpectralField) -> float:
    scale = float(np.max(np.abs(reference.coeffs), initial=0.0))
    gap = float(np.max(np.abs(reference.coeffs - other.coeffs), initial=0.0))
    return gap / scale if scale > 0 else gap

