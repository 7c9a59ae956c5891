"""Bony decomposition: dense oracle, reconstruction, phase domination, product constants."""

import itertools

import numpy as np
import pytest

from rnslab.besov import PhaseState, besov_norm, phase_weight, shell_index
from rnslab.corpus import random_field, random_phase_field
from rnslab.errors import GridMismatchError
from rnslab.paraproduct import (
    bony_split,
    direct_bony_split,
    low_ball,
    low_radius,
    paraproduct,
    phase_domination_check,
    product_estimate_check,
    product_ratios,
    reconstruction_error,
    remainder,
    remainder_direct,
)
from rnslab.spectral import Grid, SpectralField, forward_transform, full_spectrum, from_full_spectrum, plus_modulus, product

TINY = Grid(8, 8, 1.5)
GRID = Grid(16, 32)


def loop_split(a: SpectralField, b: SpectralField):
    """Plain double loop over full-spectrum modes with the shell rule written out."""
    grid = a.grid
    A, B = full_spectrum(a), full_spectrum(b)
    kv = np.rint(np.fft.fftfreq(grid.n_v, 1.0 / grid.n_v)).astype(int)
    kh = grid.kh_index
    ch, cv = (grid.n_h - 1) // 3, (grid.n_v - 1) // 3
    T = np.zeros(grid.shape, dtype=complex)
    R = np.zeros(grid.shape, dtype=complex)
    modes = list(itertools.product(range(grid.n_h), range(grid.n_h), range(grid.n_v)))

    def vec(p):
        return np.array([kh[p[0]], kh[p[1]], kv[p[2]]])

    for p in modes:
        if A[p] == 0:
            continue
        zp = vec(p)
        mod_a = np.sqrt(zp[0] ** 2 + zp[1] ** 2 + (zp[2] * grid.dxi3) ** 2)
        for q in modes:
            if B[q] == 0:
                continue
            zq = vec(q)
            out = zp + zq
            if abs(out[0]) > ch or abs(out[1]) > ch or abs(out[2]) > cv:
                continue
            mod_b = np.sqrt(zq[0] ** 2 + zq[1] ** 2 + (zq[2] * grid.dxi3) ** 2)
            j = -1 if mod_b < 1 else int(np.floor(np.log2(mod_b)))
            target = (out[0] % grid.n_h, out[1] % grid.n_h, out[2] % grid.n_v)
            if mod_a <= 2.0**j:
                T[target] += A[p] * B[q]
            else:
                R[target] += A[p] * B[q]
    return from_full_spectrum(T, grid), from_full_spectrum(R, grid)


class TestDecomposition:
    def test_low_radius(self):
        assert low_radius(-1) == 0.5
        assert low_radius(3) == 8.0

    def test_low_ball(self):
        f = random_field(GRID, np.random.default_rng(0))
        g = low_ball(f, 2.0)
        assert np.all(g.coeffs[np.broadcast_to(GRID.xi_abs > 2.0, GRID.spectral_shape)] == 0)

    def test_matches_plain_loop(self):
        rng = np.random.default_rng(1)
        a, b = random_field(TINY, rng), random_field(TINY, rng)
        t_ref, r_ref = loop_split(a, b)
        split = bony_split(a, b)
        assert np.max(np.abs(split.Tab.coeffs - t_ref.coeffs)) < 1e-14
        assert np.max(np.abs(split.Rab.coeffs - r_ref.coeffs)) < 1e-14

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(2)
        g = Grid(16, 16, 3.0)
        a, b = random_field(g, rng), random_field(g, rng)
        split, dense = bony_split(a, b), direct_bony_split(a, b)
        assert np.max(np.abs(split.Tab.coeffs - dense.Tab.coeffs)) < 1e-13
        assert np.max(np.abs(split.Rab.coeffs - dense.Rab.coeffs)) < 1e-13

    def test_dense_oracle_size_guard(self):
        with pytest.raises(ValueError):
            direct_bony_split(SpectralField.zeros(Grid(32, 32)), SpectralField.zeros(Grid(32, 32)))

    def test_sum_is_dealiased_product(self):
        rng = np.random.default_rng(3)
        a, b = random_field(GRID, rng), random_field(GRID, rng)
        assert np.allclose(bony_split(a, b).total.coeffs, product(a, b).coeffs, atol=1e-15)

    def test_direct_remainder_matches_complement(self):
        rng = np.random.default_rng(4)
        a, b = random_field(GRID, rng), random_field(GRID, rng)
        assert np.allclose(remainder_direct(a, b).coeffs, remainder(a, b).coeffs, atol=1e-15)

    def test_constant_low_factor(self):
        # a constant sits in every low ball, so T_1 b = b and R_1 b = 0
        one = forward_transform(np.ones(GRID.shape), GRID)
        b = random_field(GRID, np.random.default_rng(5))
        split = bony_split(one, b)
        assert np.allclose(split.Tab.coeffs, b.coeffs, atol=1e-15)
        assert np.max(np.abs(split.Rab.coeffs)) < 1e-15

    def test_high_low_pair_lands_in_remainder(self):
        x1, _, _ = GRID.coordinates()
        high = forward_transform(np.broadcast_to(np.cos(4 * x1), GRID.shape), GRID)
        low = forward_transform(np.broadcast_to(np.cos(x1), GRID.shape), GRID)
        assert np.max(np.abs(paraproduct(high, low).coeffs)) < 1e-15
        assert np.allclose(paraproduct(low, high).coeffs, product(low, high).coeffs, atol=1e-15)

    def test_low_high_pair_lands_in_paraproduct(self):
        # |xi_a| = 1 against |xi_b| = 16 on an 8^3 grid whose vertical spacing is 8
        g = Grid(8, 8, np.pi / 8)
        ca = np.zeros(g.spectral_shape, dtype=complex)
        ca[1, 0, 0] = ca[-1, 0, 0] = 0.5
        cb = np.zeros(g.spectral_shape, dtype=complex)
        cb[0, 0, 2] = 0.5
        a, b = SpectralField(g, ca), SpectralField(g, cb)
        t_ref, r_ref = loop_split(a, b)
        split = bony_split(a, b)
        assert np.max(np.abs(r_ref.coeffs)) == 0.0
        assert np.max(np.abs(split.Rab.coeffs)) < 1e-15
        assert np.allclose(split.Tab.coeffs, t_ref.coeffs, atol=1e-15) and np.any(t_ref.coeffs)

    def test_self_interaction_lands_in_remainder(self):
        g = Grid(16, 16)
        x1, _, _ = g.coordinates()
        a = forward_transform(np.broadcast_to(np.cos(3 * x1), g.shape), g)
        split = bony_split(a, a)
        assert np.max(np.abs(split.Tab.coeffs)) < 1e-15
        assert split.Rab.coeffs[0, 0, 0] == pytest.approx(0.5)

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatchError):
            bony_split(SpectralField.zeros(GRID), SpectralField.zeros(TINY))


class TestReconstruction:
    def test_seeded_corpus(self):
        rng = np.random.default_rng(6)
        worst = max(reconstruction_error(random_field(GRID, rng), random_field(GRID, rng)) for _ in range(10))
        assert worst <= 1e-12

    def test_wrong_region_is_detected(self):
        rng = np.random.default_rng(7)
        a, b = random_field(GRID, rng), random_field(GRID, rng)
        assert reconstruction_error(a, b, lambda j: low_radius(j + 1)) > 1e-3

    def test_zero_product(self):
        z = SpectralField.zeros(GRID)
        assert reconstruction_error(z, z) == 0.0


class TestPhaseDomination:
    @pytest.mark.parametrize("ps", [PhaseState(1.0, 2.0, 0.2, 0.5), PhaseState(1.0, 32.0, 1 / 64, 1.0)])
    def test_excess_is_nonpositive(self, ps):
        rng = np.random.default_rng(8)
        psi = phase_weight(ps, GRID)
        for _ in range(5):
            st, sr = phase_domination_check(random_field(GRID, rng), random_field(GRID, rng), psi)
            assert st <= 1e-10 and sr <= 1e-10

    def test_zero_weight_is_triangle_inequality(self):
        rng = np.random.default_rng(14)
        st, sr = phase_domination_check(random_field(GRID, rng), random_field(GRID, rng), 0.0)
        assert st <= 1e-15 and sr <= 1e-15

    def test_single_modes_are_tight(self):
        x1, x2, _ = GRID.coordinates()
        a = forward_transform(np.broadcast_to(np.cos(x1), GRID.shape), GRID)
        b = forward_transform(np.broadcast_to(np.cos(4 * x2), GRID.shape), GRID)
        psi = phase_weight(PhaseState(1.0, 2.0, 0.1, 0.5), GRID)
        st, sr = phase_domination_check(a, b, psi)
        assert st == pytest.approx(0.0, abs=1e-12) and sr == pytest.approx(0.0, abs=1e-12)

    def test_non_subadditive_weight_can_fail(self):
        # |xi|^2 grows faster than additively along aligned pairs; nonnegative
        # coefficients rule out cancellation, so the excess shows up
        rng = np.random.default_rng(9)
        psi = 0.05 * np.broadcast_to(GRID.xi2, GRID.spectral_shape)
        a, b = plus_modulus(random_field(GRID, rng)), plus_modulus(random_field(GRID, rng))
        assert max(phase_domination_check(a, b, psi)) > 1e-6


class TestProductConstants:
    def test_ratios_single_pair(self):
        rng = np.random.default_rng(10)
        a, b = random_field(GRID, rng), random_field(GRID, rng)
        t, r = product_ratios(a, b, 2.0)
        split = bony_split(a, b)
        denom = besov_norm(a, 1.5) * besov_norm(b, 2.0)
        assert t == pytest.approx(besov_norm(split.Tab, 2.0) / denom)
        assert r == pytest.approx(besov_norm(split.Rab, 2.0) / denom)

    def test_single_mode_closed_form(self):
        # cos x1 cos 4x2 sits in shell 2 with norm 1/2; a and b have shell norms 1/sqrt 2
        x1, x2, _ = GRID.coordinates()
        a = forward_transform(np.broadcast_to(np.cos(x1), GRID.shape), GRID)
        b = forward_transform(np.broadcast_to(np.cos(4 * x2), GRID.shape), GRID)
        for s in (1.0, 3.5):
            t, r = product_ratios(a, b, s)
            assert t == pytest.approx(1.0, rel=1e-13)
            assert r == pytest.approx(0.0, abs=1e-15)

    def test_zero_pair(self):
        z = SpectralField.zeros(GRID)
        assert product_ratios(z, z, 1.0) == (0.0, 0.0)

    def test_rejects_nonpositive_s(self):
        with pytest.raises(ValueError):
            product_estimate_check([], 0.0)

    def test_reproducible_across_seeds(self):
        g = Grid(32, 64)
        fits = []
        for seed in (0, 1):
            rng = np.random.default_rng(seed)
            corpus = ((random_phase_field(g, rng, 4.0), random_phase_field(g, rng, 4.0)) for _ in range(100))
            fits.append(product_estimate_check(corpus, 3.5))
        assert all(f.samples == 100 and np.isfinite(f.c_T) and np.isfinite(f.c_R) for f in fits)
        assert abs(fits[0].c_T - fits[1].c_T) <= 0.1 * max(fits[0].c_T, fits[1].c_T)
        assert abs(fits[0].c_R - fits[1].c_R) <= 0.1 * max(fits[0].c_R, fits[1].c_R)

    def test_stable_under_refinement(self):
        fits = []
        for g in (Grid(16, 32), Grid(32, 64)):
            rng = np.random.default_rng(11)
            corpus = ((random_phase_field(g, rng, 4.0), random_phase_field(g, rng, 4.0)) for _ in range(10))
            fits.append(product_estimate_check(corpus, 3.5))
        for name in ("c_T", "c_R"):
            x, y = getattr(fits[0], name), getattr(fits[1], name)
            assert max(x, y) / min(x, y) < 2.0

    def test_random_phase_norms_are_deterministic(self):
        f = random_phase_field(GRID, np.random.default_rng(12), 4.0)
        g = random_phase_field(GRID, np.random.default_rng(13), 4.0)
        assert besov_norm(f, 3.5) == pytest.approx(besov_norm(g, 3.5), rel=1e-12)
        assert shell_index(GRID).shape == f.coeffs.shape
