"""Spatial Lebesgue/Sobolev norms and the weighted space-time norms.

Space norms: Lambda^beta applied spectrally, then grid quadrature with
(2 pi / N)^d weights (exact for r = 2 by Parseval; for other r the aliasing
error is controlled by refinement-stability checks).  Time norms: trapezoid
on the value^m profile with the weight t^(mu m) integrated analytically on
each subinterval, so graded grids handle the singular weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import ProblemParams
from .semigroup import Trajectory
from .spectral import TWO_PI, SpectralField, fractional_derivative


@dataclass(frozen=True)
class SpaceNormSpec:
    """kind in {"lebesgue", "sobolev", "hs"}; sobolev/hs carry order beta.

    "hs" is the homogeneous L2-based Sobolev norm computed purely from
    coefficients; "sobolev" with r = 2 takes the same exact path.
    """

    kind: str
    r: float = 2.0
    beta: float = 0.0

    def key(self) -> str:
        return f"{self.kind}:r={self.r!r}:beta={self.beta!r}"

    def label(self) -> str:
        if self.kind == "lebesgue":
            return f"L^{_fmt(self.r)}"
        if self.kind == "hs":
            return f"Hdot^{_fmt(self.beta)}"
        return f"Wdot^{_fmt(self.beta)};{_fmt(self.r)}"


def _fmt(x: float) -> str:
    if x == math.inf:
        return "inf"
    return f"{x:g}"


def lebesgue(r: float) -> SpaceNormSpec:
    return SpaceNormSpec("lebesgue", r=r)


def sobolev(beta: float, r: float) -> SpaceNormSpec:
    return SpaceNormSpec("sobolev", r=r, beta=beta)


def hs(beta: float) -> SpaceNormSpec:
    return SpaceNormSpec("hs", beta=beta)


def _lebesgue_of_values(vals: np.ndarray, r: float, cell_volume: float) -> float:
    mag_sq = np.sum(vals * vals, axis=0)
    if r == math.inf:
        return float(np.sqrt(np.max(mag_sq)))
    if r == 2.0:
        return float(np.sqrt(np.sum(mag_sq) * cell_volume))
    return float((np.sum(mag_sq ** (r / 2.0)) * cell_volume) ** (1.0 / r))


def space_norm(f: SpectralField, spec: SpaceNormSpec) -> float:
    if spec.kind not in ("lebesgue", "sobolev", "hs"):
        raise ValueError(f"unknown norm kind {spec.kind}")
    if spec.kind == "lebesgue":
        g = f
    else:
        g = fractional_derivative(f, spec.beta)
    r = 2.0 if spec.kind == "hs" else spec.r
    if r == 2.0:
        # Parseval: exact coefficient-space evaluation.
        return float(np.sqrt(np.sum(np.abs(g.coeffs) ** 2)) * TWO_PI ** (f.grid.d / 2.0))
    if not (1.0 <= r):
        raise ValueError(f"Lebesgue exponent r={r} must be >= 1")
    return _lebesgue_of_values(g.values(), r, f.grid.cell_volume)


@dataclass(frozen=True)
class SpaceTimeNormSpec:
    """|| t^mu ||f(t)||_X ||_{L^m(0,T)}; m = inf uses the grid supremum."""

    mu: float
    m: float
    T: float
    inner: SpaceNormSpec

    def key(self) -> str:
        return f"L^{_fmt(self.m)}_mu={self.mu!r};T={self.T!r}[{self.inner.key()}]"

    def label(self) -> str:
        return f"L^{_fmt(self.m)}_{{{_fmt(self.mu)};{_fmt(self.T)}}} {self.inner.label()}"


def _cached_space_values(traj: Trajectory, inner: SpaceNormSpec) -> np.ndarray:
    key = inner.key()
    if key not in traj.norm_cache:
        traj.norm_cache[key] = np.array([space_norm(f, inner) for f in traj.fields])
    return traj.norm_cache[key]


def weighted_power_integral(times: np.ndarray, vals_pow: np.ndarray, c: float, T: float) -> float:
    """int_0^T t^c p(t) dt with p piecewise linear through (times, vals_pow).

    Requires c > -1; intervals beyond T are clipped with linear
    re-interpolation at the cut.
    """
    if c <= -1.0:
        raise ValueError(f"weight power {c} <= -1 is not integrable at 0")
    total = 0.0
    for i in range(len(times) - 1):
        t0, t1 = float(times[i]), float(times[i + 1])
        if t0 >= T:
            break
        v0, v1 = float(vals_pow[i]), float(vals_pow[i + 1])
        if t1 > T:
            v1 = v0 + (v1 - v0) * (T - t0) / (t1 - t0)
            t1 = T
        # int t^c (v0 + (v1-v0)(t-t0)/(t1-t0)) dt, closed form
        cp1 = c + 1.0
        j0 = (t1**cp1 - t0**cp1) / cp1
        j1 = (t1 ** (cp1 + 1.0) - t0 ** (cp1 + 1.0)) / (cp1 + 1.0) - t0 * j0
        slope = (v1 - v0) / (t1 - t0)
        total += v0 * j0 + slope * j1
    return total


def spacetime_norm(traj: Trajectory, spec: SpaceTimeNormSpec) -> float:
    if traj.horizon < spec.T * (1.0 - 1e-12):
        raise ValueError(f"trajectory horizon {traj.horizon} shorter than T={spec.T}")
    vals = _cached_space_values(traj, spec.inner)
    if spec.m == math.inf:
        mask = traj.times <= spec.T * (1.0 + 1e-12)
        return float(np.max(traj.times[mask] ** spec.mu * vals[mask])) if spec.mu != 0 else float(
            np.max(vals[mask])
        )
    c = spec.mu * spec.m
    integral = weighted_power_integral(traj.times, vals**spec.m, c, spec.T)
    return float(max(integral, 0.0) ** (1.0 / spec.m))


# ---------------------------------------------------------------------------
# Composite norms
# ---------------------------------------------------------------------------

COMPOSITE_NAMES = ("Y", "X1", "X2", "X3", "X4", "XT")


def composite_constituents(name: str, params: ProblemParams, T: float) -> list[SpaceTimeNormSpec]:
    """The weighted space-time constituents of each composite norm."""
    al, s, gamma = params.alpha, params.s, params.gamma
    p = params.p
    a = params.a
    if name == "Y":
        return [
            SpaceTimeNormSpec(0.0, a, T, lebesgue(p)),
            SpaceTimeNormSpec((1.0 + 2.0 * gamma) / 4.0, 3.0, T, sobolev(2.0 * al / 3.0, p)),
        ]
    if name == "X1":
        m1 = 4.0 / (1.0 - 2.0 * gamma)
        return [
            SpaceTimeNormSpec(gamma, m1, T, lebesgue(p)),
            SpaceTimeNormSpec(gamma + 0.5 / al - 0.5, m1, T, sobolev(1.0 - al, p)),
        ]
    if name == "X2":
        if s <= al - 1.0:
            # degenerate branch: zero weight, zero derivative order
            return [SpaceTimeNormSpec(0.0, a, T, lebesgue(p))]
        return [SpaceTimeNormSpec(params.mu_s, a, T, sobolev(s + 1.0 - al, p))]
    if name == "X3":
        q3 = 4.0 * al / ((2.0 * gamma - 1.0) * al + 2.0)
        return [SpaceTimeNormSpec(0.0, q3, T, sobolev(1.0 - al, p))]
    if name == "X4":
        mu = -s / (2.0 * al)
        return [
            SpaceTimeNormSpec(mu, math.inf, T, lebesgue(2.0)),
            SpaceTimeNormSpec(mu, 2.0, T, hs(al)),
        ]
    if name == "XT":
        return [
            SpaceTimeNormSpec(gamma, 2.0, T, sobolev(2.0 * al - 1.0, p / 2.0)),
            SpaceTimeNormSpec(gamma + 0.5 / al - 0.5, 2.0, T, sobolev(al, p / 2.0)),
        ]
    raise ValueError(f"unknown composite norm {name}; choose from {COMPOSITE_NAMES}")


def composite_norm(traj: Trajectory, name: str, params: ProblemParams, T: float) -> tuple[float, dict]:
    """Sum of the constituent norms plus the per-constituent breakdown."""
    parts = {}
    for spec in composite_constituents(name, params, T):
        parts[spec.label()] = spacetime_norm(traj, spec)
    return sum(parts.values()), parts


@dataclass
class NormReport:
    """Named norm values with pass/fail notes (report-only object)."""

    entries: dict
    notes: dict

    def rows(self):
        for k, v in self.entries.items():
            yield (k, v)
