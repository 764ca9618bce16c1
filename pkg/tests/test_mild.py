"""Smallness-driven tau selection and the Picard fixed point."""

import math

import numpy as np
import pytest

from fracns.bilinear import bilinear_B
from fracns.mild import (
    PicardDivergenceError,
    apply_K,
    picard_solve,
    regularity_report,
    select_tau,
    y_norm,
)
from fracns.params import derive_params
from fracns.randomize import hs_profile_coeffs, make_plan, synthesize
from fracns.semigroup import Trajectory, duhamel_M, graded_times, heat_flow_trajectory
from fracns.spectral import divergence_residual, l2_norm, make_grid, zero_field

from conftest import taylor_green
from oracles import quadrature_1d

PARAMS = derive_params(2, 0.8, -0.4)


def small_data(grid, seed, target_y1=0.06):
    cutoff = min(8, grid.N // 3)
    plan = make_plan(grid, cutoff, hs_profile_coeffs(-0.4, 0.25, 2), "gaussian", seed=seed)
    u0 = synthesize(plan)
    times = graded_times(1.0, 160, rho=2.0)
    h = heat_flow_trajectory(u0, times, PARAMS.alpha)
    u0 = u0 * (target_y1 / y_norm(h, PARAMS, 1.0))
    return u0, heat_flow_trajectory(u0, times, PARAMS.alpha)


class TestSelectTau:
    def test_zero_data_full_horizon(self):
        grid = make_grid(2, 16)
        times = graded_times(1.0, 50)
        h = Trajectory(times, [zero_field(grid, 2)] * len(times))
        assert select_tau(h, 0.05, PARAMS) == 1.0

    def test_infinite_threshold(self):
        grid = make_grid(2, 16)
        u0, h = small_data(grid, seed=0)
        assert select_tau(h, math.inf, PARAMS) == 1.0

    def test_single_mode_matches_scalar_oracle(self):
        # Y_tau of one decaying mode is a pair of scalar integrals; root-find
        # the threshold crossing densely and compare within one grid step
        from fracns.norms import lebesgue, space_norm
        from fracns.randomize import single_mode_coeffs

        grid = make_grid(2, 32)
        plan = make_plan(grid, 3, single_mode_coeffs((1, 0)), "gaussian", seed=0)
        u0 = synthesize(plan, override_g=np.ones_like(plan.coeffs))
        times = graded_times(1.0, 400, rho=2.0)
        h = heat_flow_trajectory(u0, times, PARAMS.alpha)
        c_p = space_norm(u0, lebesgue(PARAMS.p))
        lam = 1.0
        a, w = PARAMS.a, (1 + 2 * PARAMS.gamma) / 4.0
        order = 2 * PARAMS.alpha / 3.0

        def y_of(tau):
            p1 = quadrature_1d(lambda t: (c_p * np.exp(-lam * t)) ** a, 0, tau, 2001) ** (1 / a)
            p2 = quadrature_1d(
                lambda t: (t**w * c_p * np.exp(-lam * t)) ** 3, 0, tau, 2001
            ) ** (1 / 3.0)
            return p1 + p2

        threshold = 0.6 * y_of(1.0)
        tau_grid = select_tau(h, threshold, PARAMS)
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if y_of(mid) <= threshold:
                lo = mid
            else:
                hi = mid
        i = np.searchsorted(times, tau_grid)
        step = times[min(i + 1, len(times) - 1)] - times[max(i - 1, 0)]
        assert abs(tau_grid - lo) <= step

    def test_too_coarse_grading_rejected(self):
        grid = make_grid(2, 16)
        u0, h = small_data(grid, seed=1, target_y1=10.0)
        with pytest.raises(ValueError, match="refine the time grading"):
            select_tau(h, 1e-6, PARAMS)


class TestApplyK:
    def test_zero_w_gives_minus_m_hh(self):
        grid = make_grid(2, 16)
        u0, h_full = small_data(grid, seed=2)
        times = graded_times(0.25, 40)
        h = heat_flow_trajectory(u0, times, PARAMS.alpha)
        w0 = Trajectory(times, [zero_field(grid, 2) for _ in times])
        k0 = apply_K(w0, h, PARAMS.alpha)
        m_hh = duhamel_M(h, h, PARAMS.alpha, bilinear_B)
        for a, b in zip(k0.fields, m_hh.fields):
            assert np.max(np.abs(a.coeffs + b.coeffs)) < 1e-15

    def test_all_zero(self):
        grid = make_grid(2, 16)
        times = graded_times(0.25, 20)
        z = Trajectory(times, [zero_field(grid, 2) for _ in times])
        out = apply_K(z, z, PARAMS.alpha)
        assert all(np.max(np.abs(f.coeffs)) == 0.0 for f in out.fields)

    def test_taylor_green_flow_annihilated(self):
        grid = make_grid(2, 32)
        u0 = taylor_green(grid)
        times = graded_times(0.25, 40)
        h = heat_flow_trajectory(u0, times, 1.0)
        w0 = Trajectory(times, [zero_field(grid, 2) for _ in times])
        k0 = apply_K(w0, h, 1.0)
        assert max(l2_norm(f) for f in k0.fields) < 1e-13 * l2_norm(u0) ** 2


class TestPicard:
    def test_zero_forcing_one_iteration(self):
        grid = make_grid(2, 16)
        times = graded_times(1.0, 40)
        h = Trajectory(times, [zero_field(grid, 2) for _ in times])
        w, st = picard_solve(h, 1.0, PARAMS.alpha, PARAMS)
        assert st.iterations == 1 and st.converged
        assert max(l2_norm(f) for f in w.fields) == 0.0

    def test_taylor_green_fixed_point_is_zero(self):
        grid = make_grid(2, 32)
        u0 = taylor_green(grid)
        times = graded_times(0.5, 60)
        h = heat_flow_trajectory(u0, times, 1.0)
        params_tg = derive_params(2, 1.0, -0.5)
        w, st = picard_solve(h, 0.5, 1.0, params_tg, tol=1e-8)
        assert st.converged
        assert max(l2_norm(f) for f in w.fields) < 1e-12

    def test_contraction_on_small_data(self):
        grid = make_grid(2, 32)
        for seed in range(3):
            u0, h = small_data(grid, seed=seed)
            tau = select_tau(h, 0.05, PARAMS)
            w, st = picard_solve(h, tau, PARAMS.alpha, PARAMS, tol=1e-8)
            assert st.converged and st.iterations <= 15
            assert all(r < 0.5 for r in st.ratios)
            assert st.lambda_tau <= 0.05
            assert st.ball_certificate

    def test_iterate_structure(self):
        grid = make_grid(2, 32)
        u0, h = small_data(grid, seed=4)
        tau = select_tau(h, 0.05, PARAMS)
        w, st = picard_solve(h, tau, PARAMS.alpha, PARAMS)
        assert np.max(np.abs(w.fields[0].coeffs)) == 0.0  # vanishes at t = 0
        for f in w.fields:
            assert divergence_residual(f) <= 1e-12 * max(np.max(np.abs(f.coeffs)), 1e-300)

    def test_monotone_amplitude_dependence(self):
        # w ~ -M(h,h) at leading order: doubling h quadruples ||w||_Y
        grid = make_grid(2, 32)
        u0, _ = small_data(grid, seed=5, target_y1=0.01)
        times = graded_times(0.25, 80, rho=2.0)
        norms = []
        for fac in (1.0, 2.0):
            h = heat_flow_trajectory(fac * u0, times, PARAMS.alpha)
            w, st = picard_solve(h, 0.25, PARAMS.alpha, PARAMS, tol=1e-12)
            norms.append(y_norm(w, PARAMS, 0.25))
        ratio = norms[1] / norms[0]
        assert 3.5 <= ratio <= 4.5

    def test_large_data_fails_loudly(self):
        grid = make_grid(2, 16)
        u0, _ = small_data(grid, seed=6, target_y1=40.0)
        times = graded_times(1.0, 60, rho=2.0)
        h = heat_flow_trajectory(u0, times, PARAMS.alpha)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises((PicardDivergenceError, RuntimeError)):
                picard_solve(h, 1.0, PARAMS.alpha, PARAMS, max_iter=12)


class TestRegularityReport:
    def test_zero_solution(self):
        grid = make_grid(2, 16)
        times = graded_times(0.5, 30)
        z = Trajectory(times, [zero_field(grid, 2) for _ in times])
        rep = regularity_report(z, z, PARAMS)
        assert rep.entries["continuity_modulus"] == 0.0
        for name in ("Y", "X1", "X2", "X3", "XT"):
            assert rep.entries[name] == 0.0

    def test_first_point_refinement_decay(self):
        grid = make_grid(2, 32)
        u0, _ = small_data(grid, seed=7)
        vals = []
        for M in (60, 120):
            times = graded_times(0.25, M, rho=2.0)
            h = heat_flow_trajectory(u0, times, PARAMS.alpha)
            w, _ = picard_solve(h, 0.25, PARAMS.alpha, PARAMS)
            rep = regularity_report(w, h, PARAMS)
            key = [k for k in rep.entries if k.startswith("weighted_hs_at_")][0]
            vals.append(rep.entries[key])
        # first grid time shrinks 4x under M doubling (quadratic grading)
        assert vals[1] <= vals[0] / 2.0

    def test_composites_finite_and_stable(self):
        grid = make_grid(2, 32)
        u0, _ = small_data(grid, seed=8)
        totals = []
        for M in (120, 240):
            times = graded_times(0.25, M, rho=2.0)
            h = heat_flow_trajectory(u0, times, PARAMS.alpha)
            w, _ = picard_solve(h, 0.25, PARAMS.alpha, PARAMS)
            rep = regularity_report(w, h, PARAMS)
            assert all(math.isfinite(v) for v in rep.entries.values())
            totals.append([rep.entries[n] for n in ("Y", "X1", "X3")])
        for c, f in zip(*totals):
            assert abs(f - c) <= 0.01 * max(c, 1e-30)
