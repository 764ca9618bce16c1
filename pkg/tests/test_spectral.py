"""Grid, transforms, multipliers, Leray projection, dealiased products."""

import numpy as np
import pytest

from fracns.spectral import (
    SpectralField,
    dealiased_product,
    divergence_residual,
    fractional_derivative,
    from_function,
    from_values,
    inner,
    l2_norm,
    leray_project,
    make_grid,
    random_field,
    read_field,
    write_field,
    zero_field,
)

from conftest import taylor_green
from oracles import leray_matrix_apply


class TestGrid:
    def test_mode_count_2d(self):
        grid = make_grid(2, 8)
        assert grid.npoints == 64
        assert set(grid.k_axis.tolist()) == set(range(-3, 5))

    def test_mode_count_3d(self):
        grid = make_grid(3, 16)
        assert grid.npoints == 4096

    def test_zero_mode_present_once(self):
        grid = make_grid(2, 8)
        assert int(np.sum(grid.k_sq == 0)) == 1

    def test_odd_n_rejected(self):
        with pytest.raises(ValueError, match="N must be even"):
            make_grid(2, 7)

    def test_small_n_rejected(self):
        with pytest.raises(ValueError, match=">= 8"):
            make_grid(2, 4)

    def test_bad_dimension_rejected(self):
        with pytest.raises(ValueError, match="d must be 2 or 3"):
            make_grid(4, 8)


class TestTransforms:
    def test_round_trip(self, grid2, rng):
        vals = rng.standard_normal((2,) + grid2.shape)
        f = from_values(grid2, vals)
        back = f.values()
        assert np.max(np.abs(back - vals)) <= 1e-13 * np.max(np.abs(vals))

    def test_parseval(self, grid2, rng):
        f = random_field(grid2, 1, rng)
        g = random_field(grid2, 1, rng)
        quad = np.sum(f.values() * g.values()) * grid2.cell_volume
        assert abs(quad - inner(f, g)) <= 1e-12 * max(abs(quad), 1.0)

    def test_hermitian_symmetry_of_real_fields(self, grid2, rng):
        f = random_field(grid2, 2, rng)
        c = f.coeffs
        flipped = np.conj(c[:, ::-1, ::-1])
        flipped = np.roll(flipped, 1, axis=1)
        flipped = np.roll(flipped, 1, axis=2)
        assert np.max(np.abs(c - flipped)) <= 1e-12 * np.max(np.abs(c))


class TestFractionalDerivative:
    def test_cos_is_eigenfunction(self):
        grid = make_grid(2, 16)
        f = from_function(grid, lambda x, y: np.cos(x))
        g = fractional_derivative(f, 2.0)
        assert np.max(np.abs(g.coeffs - f.coeffs)) < 1e-14

    def test_diagonal_mode(self):
        grid = make_grid(2, 16)
        f = from_function(grid, lambda x, y: np.cos(x + y))
        g = fractional_derivative(f, 1.0)
        assert np.max(np.abs(g.coeffs - np.sqrt(2.0) * f.coeffs)) < 1e-13

    def test_inverse_pair(self, grid2, rng):
        f = random_field(grid2, 1, rng)
        g = fractional_derivative(fractional_derivative(f, 1.0), -1.0)
        assert np.max(np.abs(g.coeffs - f.coeffs)) <= 1e-13 * np.max(np.abs(f.coeffs))

    def test_composition_law(self, grid2, rng):
        f = random_field(grid2, 1, rng)
        ab = fractional_derivative(fractional_derivative(f, 0.7), -0.3)
        direct = fractional_derivative(f, 0.4)
        assert np.max(np.abs(ab.coeffs - direct.coeffs)) <= 1e-12 * np.max(np.abs(direct.coeffs))

    def test_negative_order_requires_mean_zero(self, grid2):
        f = from_function(grid2, lambda x, y: 1.0 + np.cos(x))
        with pytest.raises(ValueError, match="mean-zero"):
            fractional_derivative(f, -0.5)


class TestLeray:
    def test_gradient_annihilated(self):
        grid = make_grid(2, 16)
        f = from_function(grid, lambda x, y: -np.sin(x), lambda x, y: 0.0 * x)
        g = leray_project(f)
        assert np.max(np.abs(g.coeffs)) < 1e-14

    def test_divergence_free_fixed_point(self):
        grid = make_grid(2, 16)
        f = from_function(grid, lambda x, y: np.sin(y), lambda x, y: 0.0 * x)
        g = leray_project(f)
        assert np.max(np.abs(g.coeffs - f.coeffs)) < 1e-14

    def test_modal_divergence_residual(self, grid2, rng):
        f = random_field(grid2, 2, rng)
        g = leray_project(f)
        assert divergence_residual(g) <= 1e-13 * np.max(np.abs(f.coeffs))

    def test_projection_idempotent(self, grid2, rng):
        f = random_field(grid2, 2, rng)
        once = leray_project(f)
        twice = leray_project(once)
        assert np.array_equal(once.coeffs, twice.coeffs)

    def test_matches_direct_matrix_apply(self, grid3, rng):
        f = random_field(grid3, 3, rng)
        expected = leray_matrix_apply(grid3, np.asarray(f.coeffs))
        got = leray_project(f).coeffs
        assert np.max(np.abs(got - expected)) <= 1e-13 * np.max(np.abs(f.coeffs))

    def test_scalar_rejected(self, grid2, rng):
        with pytest.raises(ValueError, match="vector"):
            leray_project(random_field(grid2, 1, rng))


class TestDealiasedProduct:
    def test_product_to_sum(self):
        grid = make_grid(2, 16)
        f = from_function(grid, lambda x, y: np.cos(x))
        p = dealiased_product(f, f)
        expected = from_function(grid, lambda x, y: 0.5 + 0.5 * np.cos(2 * x))
        assert np.max(np.abs(p.coeffs - expected.coeffs)) < 1e-14

    def test_zero_factor(self, grid2, rng):
        f = random_field(grid2, 1, rng)
        p = dealiased_product(f, zero_field(grid2, 1))
        assert np.max(np.abs(p.coeffs)) == 0.0

    def test_mismatched_grids_rejected(self, rng):
        f = random_field(make_grid(2, 8), 1, rng)
        g = random_field(make_grid(2, 16), 1, rng)
        with pytest.raises(ValueError, match="different grids"):
            dealiased_product(f, g)

    def test_matches_direct_convolution(self, rng):
        # band-limited inputs: the product stays inside the padded band
        grid = make_grid(2, 8)
        a = random_field(grid, 1, rng, max_wave=2)
        b = random_field(grid, 1, rng, max_wave=2)
        got = dealiased_product(a, b).coeffs[0]
        # direct convolution with cos-type Nyquist splitting
        N = grid.N
        axis = grid.k_axis
        expected = np.zeros(grid.shape, dtype=np.complex128)

        def split(kvec, amp):
            parts = [(kvec, amp)]
            for ax in range(2):
                nxt = []
                for kv, am in parts:
                    if kv[ax] == N // 2:
                        lo = list(kv)
                        lo[ax] = -N // 2
                        nxt += [(kv, am * 0.5), (tuple(lo), am * 0.5)]
                    else:
                        nxt.append((kv, am))
                parts = nxt
            return parts

        terms_a, terms_b = [], []
        for idx in np.ndindex(*grid.shape):
            kvec = (int(axis[idx[0]]), int(axis[idx[1]]))
            terms_a += split(kvec, a.coeffs[0][idx])
            terms_b += split(kvec, b.coeffs[0][idx])
        for ka, za in terms_a:
            for kb, zb in terms_b:
                ks = [ka[0] + kb[0], ka[1] + kb[1]]
                ok = True
                for ax in range(2):
                    if ks[ax] == -N // 2:
                        ks[ax] = N // 2
                    elif not (-N // 2 < ks[ax] <= N // 2):
                        ok = False
                if ok:
                    expected[ks[0] % N, ks[1] % N] += za * zb
        scale = np.max(np.abs(expected))
        assert np.max(np.abs(got - expected)) <= 1e-13 * scale


class TestTaylorGreenIdentity:
    def test_advective_term_is_gradient(self):
        grid = make_grid(2, 32)
        u = taylor_green(grid)
        proj = leray_project(u)
        assert np.max(np.abs(proj.coeffs - u.coeffs)) < 1e-13  # TG is divergence-free


class TestFieldFiles:
    def test_round_trip(self, tmp_path, grid2, rng):
        f = random_field(grid2, 2, rng)
        path = tmp_path / "field.txt"
        write_field(path, f, time=0.25, alpha=0.8)
        g, meta = read_field(path)
        assert meta["time"] == 0.25 and meta["alpha"] == 0.8
        assert meta["comps"] == 2
        assert np.max(np.abs(g.coeffs - f.coeffs)) == 0.0

    def test_header_format(self, tmp_path, grid2):
        path = tmp_path / "f.txt"
        write_field(path, zero_field(grid2, 1), time=1.0, alpha=1.0)
        head = path.read_text().splitlines()[0]
        assert head.startswith("FRACNS d=2 N=16 comps=1")


class TestNormHelpers:
    def test_l2_of_cos(self):
        grid = make_grid(2, 16)
        f = from_function(grid, lambda x, y: np.cos(x))
        assert abs(l2_norm(f) - 2 * np.pi / np.sqrt(2)) < 1e-12
