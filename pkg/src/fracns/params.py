"""Hypothesis validation and derived scalar exponents.

All downstream weights and Lebesgue exponents are algebraic functions of
(d, alpha, s); they are computed here once and carried around as a value
object.  Out-of-range inputs are rejected, never clamped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass(frozen=True)
class ProblemParams:
    """Validated (d, alpha, s) with every derived exponent.

    gamma: small-time weight, max(-1/2 - s/alpha, 0)
    mu_s: data-space weight, max((s + 1 - alpha) / (2 alpha), 0)
    r_s: required moment order 2d / ((3 - 2 gamma) alpha - 2)
    p:   Lebesgue exponent, equal to r_s
    a:   time exponent 4 / (1 + 2 gamma)
    """

    d: int
    alpha: float
    s: float
    gamma: float
    mu_s: float
    r_s: float
    p: float
    a: float


def derive_params(d: int, alpha: float, s: float) -> ProblemParams:
    if d not in (2, 3):
        raise ValueError(f"d must be 2 or 3, got {d}")
    if not (2.0 / 3.0 < alpha <= 1.0):
        raise ValueError(
            f"alpha={alpha} outside the admissible range (2/3, 1] for the dissipation order"
        )
    if not (1.0 - 2.0 * alpha < s < 0.0):
        raise ValueError(
            f"s={s} outside the admissible data range (1 - 2 alpha, 0) = "
            f"({1.0 - 2.0 * alpha}, 0) for alpha={alpha}"
        )
    gamma = max(-0.5 - s / alpha, 0.0)
    mu_s = max((s + 1.0 - alpha) / (2.0 * alpha), 0.0)
    denom = (3.0 - 2.0 * gamma) * alpha - 2.0
    if denom <= 0.0:
        raise ValueError(f"(3 - 2 gamma) alpha - 2 = {denom} must be positive")
    r_s = 2.0 * d / denom
    params = ProblemParams(
        d=d, alpha=alpha, s=s, gamma=gamma, mu_s=mu_s, r_s=r_s, p=r_s, a=4.0 / (1.0 + 2.0 * gamma)
    )
    _check_invariants(params)
    return params


def _check_invariants(p: ProblemParams):
    if not (0.0 <= p.gamma < 1.5 - 1.0 / p.alpha + 1e-15):
        raise ValueError(f"gamma={p.gamma} violates gamma in [0, 3/2 - 1/alpha)")
    if p.r_s <= 0 or p.p < 2.0 - 1e-12:
        raise ValueError(f"derived exponents out of range: r_s={p.r_s}, p={p.p}")
    if not (0.0 <= p.mu_s < 1.0 / (2.0 * p.alpha)):
        raise ValueError(f"mu_s={p.mu_s} violates mu_s in [0, 1/(2 alpha))")


def energy_theta(params: ProblemParams) -> float:
    """Interpolation exponent of the energy-method absorption step."""
    theta = -params.gamma - 1.0 / params.alpha + 1.5
    if not (0.0 < theta < 1.0):
        raise ValueError(f"energy interpolation exponent theta={theta} not in (0,1)")
    return theta


@dataclass(frozen=True)
class UniquenessSpec:
    """Exponent set for the weak-strong uniqueness Gronwall argument.

    The scaling relation 2 alpha / q + d / r = 2 alpha - 1 + beta holds
    exactly, and theta = (d/alpha)(1/r - (alpha + beta - 1)/d) is in (0,1).
    """

    beta: float
    r: float
    q: float
    theta: float


def derive_uniqueness_spec(params: ProblemParams) -> UniquenessSpec:
    """The (beta, r, q) triple the gluing step uses."""
    alpha, d, gamma = params.alpha, params.d, params.gamma
    beta = 1.0 - alpha
    r = params.p
    if r <= d / alpha:
        raise ValueError(f"uniqueness exponent r={r} must exceed d/alpha={d / alpha}")
    q = 4.0 * alpha / ((2.0 * gamma - 1.0) * alpha + 2.0)
    theta = (d / alpha) * (1.0 / r - (alpha + beta - 1.0) / d)
    if not (0.0 < theta < 1.0):
        raise ValueError(f"uniqueness interpolation exponent theta={theta} not in (0,1)")
    relation = 2.0 * alpha / q + d / r - (2.0 * alpha - 1.0 + beta)
    if abs(relation) > 1e-12:
        raise AssertionError(f"scaling relation violated by {relation}")
    if not (1.0 - alpha <= beta < d / r + 1.0 - alpha):
        raise ValueError(f"beta={beta} outside [1 - alpha, d/r + 1 - alpha)")
    return UniquenessSpec(beta=beta, r=r, q=q, theta=theta)


def params_record(params: ProblemParams, N: int) -> dict:
    """Flat key-value record written to params.json in run directories."""
    uspec = derive_uniqueness_spec(params)
    return {
        "d": params.d,
        "N": N,
        "alpha": params.alpha,
        "s": params.s,
        "gamma": params.gamma,
        "mu_s": params.mu_s,
        "r_s": params.r_s,
        "p": params.p,
        "theta_E": energy_theta(params),
        "beta_u": uspec.beta,
        "r_u": uspec.r,
        "q_u": uspec.q,
    }


def write_params_json(path, params: ProblemParams, N: int):
    with open(path, "w") as fh:
        json.dump(params_record(params, N), fh, indent=2)
        fh.write("\n")
