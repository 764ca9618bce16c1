"""Assembly of the global solution: mild piece on [0, tau], energy piece on
[tau/2, T], uniqueness audit on the overlap, and u = h + w with its
regularity certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bilinear import advect
from .norms import SpaceTimeNormSpec, hs, lebesgue, sobolev, space_norm, spacetime_norm
from .params import ProblemParams, UniquenessSpec
from .semigroup import Trajectory, heat_flow
from .spectral import SpectralField, inner, l2_norm
from .verifiers import VerifierReport


@dataclass
class OverlapReport:
    times: np.ndarray
    mismatches: np.ndarray  # ||w1 - w2||_{L^2} per shared time
    max_mismatch: float
    tolerance: float  # combined integrator error model
    ratio: float  # max_mismatch / tolerance


def shared_times(a: Trajectory, b: Trajectory, atol: float = 1e-9) -> np.ndarray:
    out = []
    for t in a.times:
        j = np.argmin(np.abs(b.times - t))
        if abs(b.times[j] - t) <= atol * max(1.0, abs(t)):
            out.append(t)
    return np.asarray(out)


def glue_solutions(
    w1: Trajectory, w2: Trajectory, tolerance: float
) -> tuple[Trajectory, OverlapReport]:
    """Concatenate w1 on [0, tau] with w2 on (tau, T].

    The overlap [tau/2, tau] is the uniqueness test window: the maximal L^2
    mismatch there is reported against the combined integrator tolerance,
    and a mismatch above 10x that tolerance is treated as a uniqueness
    violation.
    """
    tau = w1.horizon
    if w2.times[0] > tau / 2.0 + 1e-12:
        raise ValueError("energy solution must start at tau/2 for the overlap audit")
    ts = shared_times(w1, w2)
    ts = ts[(ts >= tau / 2.0 - 1e-12) & (ts <= tau + 1e-12)]
    if len(ts) < 2:
        raise ValueError("no shared overlap times between the two solutions")
    mism = np.array([l2_norm(w1.at(t) - w2.at(t)) for t in ts])
    report = OverlapReport(ts, mism, float(np.max(mism)), tolerance,
                           float(np.max(mism) / max(tolerance, 1e-300)))
    if report.max_mismatch > 10.0 * tolerance:
        raise RuntimeError(
            f"overlap mismatch {report.max_mismatch:.3e} exceeds 10 x combined "
            f"tolerance {tolerance:.3e}: numeric uniqueness violation"
        )
    times, fields = list(w1.times), list(w1.fields)
    for t, f in zip(w2.times, w2.fields):
        if t > tau + 1e-12:
            times.append(t)
            fields.append(f)
    return Trajectory(np.asarray(times), fields), report


def weak_strong_residual(
    v1: Trajectory,
    v2: Trajectory,
    psi: Trajectory,
    uspec: UniquenessSpec,
    noise_floor: float = 1e-10,
    noise_level: float = 0.0,
) -> VerifierReport:
    """Discrete Gronwall audit of the uniqueness mechanism.

    g(t) = ||v1||^q_{Wdot^{beta,r}} + ||psi||^q_{Wdot^{beta,r}} is the
    Gronwall integrand; the audit fits the smallest constant C with
    ||v(t)||^2 <= ||v(t0)||^2 exp(C int g) and reports it.  With v(t0) = 0
    the difference must stay at integrator-noise level: noise_floor is
    relative to the solution scale, noise_level an absolute L^2 floor
    (e.g. the caller's combined integrator error model).
    """
    ts = shared_times(v1, v2)
    if len(ts) < 2:
        raise ValueError("trajectories share no common window")
    spec = sobolev(uspec.beta, uspec.r) if uspec.r != 2.0 else hs(uspec.beta)
    g = np.array(
        [space_norm(v1.at(t), spec) ** uspec.q + space_norm(psi.at(t), spec) ** uspec.q
         for t in ts]
    )
    if not np.all(np.isfinite(g)):
        return VerifierReport("WSU", math.inf, 0.0, math.inf, 0.0, False,
                              details={"reason": "non-integrable Gronwall weight"})
    vsq = np.array([l2_norm(v1.at(t) - v2.at(t)) ** 2 for t in ts])
    int_g = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(ts) * (g[1:] + g[:-1]))])
    v0 = vsq[0]
    scale = max(
        float(np.max([l2_norm(v1.at(t)) + l2_norm(psi.at(t)) for t in ts])), 1e-300
    )
    floor = max(noise_floor * scale, noise_level)
    if v0 <= floor**2:
        peak = float(np.sqrt(np.max(vsq)))
        verdict = peak <= 10.0 * max(floor, math.sqrt(v0))
        c_fit = 0.0
        ratio = peak
    else:
        with np.errstate(divide="ignore"):
            logs = np.log(np.maximum(vsq, 1e-300) / v0)
        pos = int_g > 0
        c_fit = float(np.max(logs[pos] / int_g[pos])) if np.any(pos) else 0.0
        envelope = v0 * np.exp(c_fit * int_g)
        verdict = bool(np.all(vsq <= envelope * (1.0 + 1e-9)))
        ratio = c_fit
    return VerifierReport(
        "WSU", c_fit, 0.0, ratio, 0.0, verdict,
        details={"initial_sq": v0, "final_sq": float(vsq[-1]),
                 "int_g": float(int_g[-1]), "n_times": len(ts)},
    )


def assemble_u(h: Trajectory, w: Trajectory) -> Trajectory:
    """u = h + w on the shared grid."""
    if len(h) != len(w) or not np.allclose(h.times, w.times, rtol=0, atol=1e-9):
        raise ValueError("h and w must share one time grid")
    return Trajectory(w.times, [a + b for a, b in zip(h.fields, w.fields)])


def solution_certificates(
    w: Trajectory, params: ProblemParams, t_positive: float = None
) -> dict:
    """Finiteness certificates of the weighted regularity of w.

    kappa = gamma + 1/(2 alpha) - 1/2 weights the energy pair; the
    continuity modulus tracks t^{mu_s} w in Hdot^{2a(mu_s - gamma) + a - 1}.
    """
    kappa = params.gamma + 0.5 / params.alpha - 0.5
    wt = np.minimum(w.times, 1.0) ** kappa
    l2 = np.array([l2_norm(f) for f in w.fields])
    weighted_sup = float(np.max(wt * l2))
    diss = np.array([space_norm(f, hs(params.alpha)) for f in w.fields])
    weighted_l2ha = float(
        np.sqrt(np.trapezoid((wt * diss) ** 2, w.times))
    )
    sigma = 2.0 * params.alpha * (params.mu_s - params.gamma) + params.alpha - 1.0
    mods = []
    for i in range(len(w) - 1):
        t0, t1 = w.times[i], w.times[i + 1]
        mods.append(space_norm(
            t1**params.mu_s * w.fields[i + 1] - t0**params.mu_s * w.fields[i], hs(sigma)
        ))
    return {
        "weighted_sup_l2": weighted_sup,
        "weighted_l2_halpha": weighted_l2ha,
        "continuity_modulus": float(np.max(mods)) if mods else 0.0,
        "weight_exponent": kappa,
        "continuity_order": sigma,
    }


def weak_form_residual(
    u: Trajectory,
    params: ProblemParams,
    test_fields: list,
    window: tuple,
) -> dict:
    """Residual of the weak formulation over [t1, t2] for each test field.

    For static divergence-free phi:
    <u(t2) - u(t1), phi> + int (<Lam^a u, Lam^a phi> + b(u, u, phi)) dt,
    normalized by ||phi||-scale x window length x solution size.
    """
    t1, t2 = window
    idx = [i for i, t in enumerate(u.times) if t1 - 1e-12 <= t <= t2 + 1e-12]
    if len(idx) < 3:
        raise ValueError("window contains fewer than 3 trajectory samples")
    ts = u.times[idx]
    al = params.alpha
    # hoist the per-time spectral work out of the test-function loop
    lam_w_list, adv_list, usize = [], [], 0.0
    for i in idx:
        w = u.fields[i]
        lam_w_list.append(SpectralField(w.grid, w.coeffs * w.grid.k_sq ** (al / 2.0)))
        adv_list.append(advect(w, w))
        usize = max(usize, l2_norm(w) + l2_norm(w) ** 2)
    worst = 0.0
    values = []
    for phi in test_fields:
        lam_phi = SpectralField(phi.grid, phi.coeffs * phi.grid.k_sq ** (al / 2.0))
        phi_scale = l2_norm(phi) + space_norm(phi, hs(al)) + space_norm(phi, sobolev(1.0, 2.0))
        integrand = [inner(lw, lam_phi) + inner(adv, phi)
                     for lw, adv in zip(lam_w_list, adv_list)]
        integral = float(np.trapezoid(np.asarray(integrand), ts))
        boundary = inner(u.fields[idx[-1]] - u.fields[idx[0]], phi)
        scale = phi_scale * max(usize, 1e-300) * (t2 - t1)
        resid = abs(boundary + integral) / scale
        values.append(resid)
        worst = max(worst, resid)
    return {"max_relative_residual": worst, "residuals": values, "window": window}


def h_on(times, u0: SpectralField, alpha: float) -> Trajectory:
    """Free evolution sampled exactly on arbitrary times."""
    return Trajectory(np.asarray(times, dtype=float),
                      [heat_flow(u0, float(t), alpha) for t in times])
