"""Derived exponents: tabulated cases in exact rational arithmetic,
invariants over the admissible region, rejection of out-of-range inputs."""

from fractions import Fraction

import numpy as np
import pytest

from fracns.params import (
    ProblemParams,
    derive_params,
    derive_uniqueness_spec,
    energy_theta,
    params_record,
)


def rational_exponents(d, alpha: Fraction, s: Fraction):
    """Independent exact-arithmetic recomputation of every derived exponent."""
    gamma = max(Fraction(-1, 2) - s / alpha, Fraction(0))
    mu_s = max((s + 1 - alpha) / (2 * alpha), Fraction(0))
    r_s = 2 * d / ((3 - 2 * gamma) * alpha - 2)
    a = Fraction(4) / (1 + 2 * gamma)
    theta_e = -gamma - 1 / alpha + Fraction(3, 2)
    q_u = 4 * alpha / ((2 * gamma - 1) * alpha + 2)
    return dict(gamma=gamma, mu_s=mu_s, r_s=r_s, p=r_s, a=a, theta_e=theta_e,
                beta_u=1 - alpha, r_u=r_s, q_u=q_u)


TABULATED = [
    # (d, alpha, s) -> exact expectations
    (2, Fraction(1), Fraction(-1, 2)),
    (3, Fraction(4, 5), Fraction(-1, 2)),
    (2, Fraction(1), Fraction(-3, 4)),
    (2, Fraction(4, 5), Fraction(-2, 5)),
]


class TestTabulatedExamples:
    def test_case_d2_alpha1_s_half(self):
        p = derive_params(2, 1.0, -0.5)
        assert p.gamma == 0.0
        assert p.mu_s == 0.0
        assert p.r_s == 4.0
        assert p.p == 4.0

    def test_case_d3_alpha08_s_half(self):
        p = derive_params(3, 0.8, -0.5)
        exact = rational_exponents(3, Fraction(4, 5), Fraction(-1, 2))
        assert exact["gamma"] == Fraction(1, 8)
        assert exact["r_s"] == 30
        assert abs(p.gamma - 0.125) < 1e-14
        assert abs(p.r_s - 30.0) < 1e-11
        assert abs(p.p - 30.0) < 1e-11

    def test_case_d2_alpha1_s_three_quarters(self):
        p = derive_params(2, 1.0, -0.75)
        assert p.gamma == 0.25
        assert p.mu_s == 0.0  # (s + 1 - alpha)/(2 alpha) = -0.375 < 0

    @pytest.mark.parametrize("d,alpha,s", TABULATED)
    def test_rational_cross_check(self, d, alpha, s):
        exact = rational_exponents(d, alpha, s)
        p = derive_params(d, float(alpha), float(s))
        for name, attr in [("gamma", p.gamma), ("mu_s", p.mu_s), ("r_s", p.r_s),
                           ("p", p.p), ("a", p.a)]:
            assert abs(attr - float(exact[name])) < 1e-11 * max(1.0, float(exact[name])), name
        assert abs(energy_theta(p) - float(exact["theta_e"])) < 1e-12


class TestEnergyTheta:
    def test_alpha1_s_half(self):
        assert abs(energy_theta(derive_params(2, 1.0, -0.5)) - 0.5) < 1e-14

    def test_alpha1_s_three_quarters(self):
        assert abs(energy_theta(derive_params(2, 1.0, -0.75)) - 0.25) < 1e-14

    def test_alpha08_s_half(self):
        # gamma = 1/8, theta = 3/2 - 5/4 - 1/8
        assert abs(energy_theta(derive_params(2, 0.8, -0.5)) - 0.125) < 1e-14


class TestUniquenessSpec:
    def test_case_d2_alpha1_s_half(self):
        u = derive_uniqueness_spec(derive_params(2, 1.0, -0.5))
        assert u.beta == 0.0
        assert u.r == 4.0
        assert abs(u.q - 4.0) < 1e-12
        assert abs(u.theta - 0.5) < 1e-14

    def test_case_d3_alpha08_s_half(self):
        # q = 4 alpha / ((2 gamma - 1) alpha + 2) = (16/5)/(7/5·...) = 16/7,
        # pinned by the exact scaling relation below
        u = derive_uniqueness_spec(derive_params(3, 0.8, -0.5))
        assert abs(u.beta - 0.2) < 1e-14
        assert abs(u.r - 30.0) < 1e-11
        assert abs(u.q - float(Fraction(16, 7))) < 1e-12

    @pytest.mark.parametrize("d,alpha,s", TABULATED)
    def test_scaling_relation_exact(self, d, alpha, s):
        p = derive_params(d, float(alpha), float(s))
        u = derive_uniqueness_spec(p)
        assert abs(2 * p.alpha / u.q + p.d / u.r - (2 * p.alpha - 1 + u.beta)) < 1e-12

    @pytest.mark.parametrize("d,alpha,s", TABULATED)
    def test_rational_scaling_relation(self, d, alpha, s):
        e = rational_exponents(d, alpha, s)
        assert 2 * alpha / e["q_u"] + d / e["r_u"] == 2 * alpha - 1 + e["beta_u"]


class TestValidation:
    def test_alpha_too_small(self):
        with pytest.raises(ValueError, match="alpha"):
            derive_params(2, 0.5, -0.2)

    def test_alpha_too_large(self):
        with pytest.raises(ValueError, match="alpha"):
            derive_params(2, 1.2, -0.5)

    def test_s_out_of_range(self):
        with pytest.raises(ValueError, match="admissible data range"):
            derive_params(2, 1.0, -1.5)
        with pytest.raises(ValueError, match="admissible data range"):
            derive_params(2, 1.0, 0.0)

    def test_bad_dimension(self):
        with pytest.raises(ValueError, match="d must be"):
            derive_params(4, 1.0, -0.5)


class TestInvariantsOverRegion:
    def test_random_admissible_samples(self):
        rng = np.random.default_rng(7)
        n = 10_000
        alphas = rng.uniform(2.0 / 3.0 + 1e-6, 1.0, n)
        for alpha in alphas:
            lo = 1.0 - 2.0 * alpha
            s = rng.uniform(lo + 1e-9 * max(1, abs(lo)), -1e-9)
            p = derive_params(int(rng.integers(2, 4)), float(alpha), float(s))
            assert 0.0 <= p.gamma < 1.5 - 1.0 / p.alpha + 1e-12
            assert (3.0 - 2.0 * p.gamma) * p.alpha - 2.0 > 0.0
            assert p.r_s > 0 and np.isfinite(p.r_s)
            assert p.p >= 2.0 - 1e-9 and np.isfinite(p.p)
            assert 0.0 <= p.mu_s < 1.0 / (2.0 * p.alpha)

    def test_gamma_piecewise_linear_in_s(self):
        alpha = 0.9
        ss = np.linspace(1.0 - 2 * alpha + 1e-6, -1e-6, 2001)
        gammas = np.array([derive_params(2, alpha, float(s)).gamma for s in ss])
        # gamma = 0 exactly iff s >= -alpha/2
        assert np.all(gammas[ss >= -alpha / 2] == 0.0)
        assert np.all(gammas[ss < -alpha / 2 - 1e-12] > 0.0)
        # continuity: increments bounded by mesh * slope (1/alpha)
        assert np.max(np.abs(np.diff(gammas))) <= 1.01 * (ss[1] - ss[0]) / alpha


class TestParamsRecord:
    def test_record_keys(self):
        rec = params_record(derive_params(2, 0.8, -0.4), N=32)
        assert set(rec) == {"d", "N", "alpha", "s", "gamma", "mu_s", "r_s", "p",
                            "theta_E", "beta_u", "r_u", "q_u"}
        assert rec["N"] == 32 and rec["p"] == rec["r_s"]
