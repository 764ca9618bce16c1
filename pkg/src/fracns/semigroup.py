"""Fractional heat flow and Duhamel convolution on discrete trajectories.

The linear factor exp(-(t-s)|k|^(2 alpha)) is always integrated exactly per
mode; only the nonlinear amplitude is interpolated (piecewise linear), so
the quadrature is immune to the stiffness of the high modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import Grid, SpectralField, heat_multiplier


def graded_times(T: float, M: int, rho: float = 2.0) -> np.ndarray:
    """t_i = T (i/M)^rho, i = 0..M; rho > 1 clusters nodes at the origin."""
    if T <= 0 or M < 1:
        raise ValueError("need T > 0 and M >= 1")
    return T * (np.arange(M + 1) / M) ** rho


@dataclass
class Trajectory:
    """Time-stamped sequence of fields on a shared grid.

    norm_cache maps a norm-spec key to the per-time value array; entries are
    pure recomputations of the stored fields and may be rebuilt at any time.
    """

    times: np.ndarray
    fields: list
    norm_cache: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        if len(self.fields) != len(self.times):
            raise ValueError("times and fields length mismatch")
        if len(self.times) >= 2 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def grid(self) -> Grid:
        return self.fields[0].grid

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def __len__(self) -> int:
        return len(self.times)

    def index_of(self, t: float, tol: float = 1e-10) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol * max(1.0, abs(t)):
            raise KeyError(f"time {t} not on the trajectory grid")
        return i

    def at(self, t: float) -> SpectralField:
        return self.fields[self.index_of(t)]

    def restrict(self, t_max: float) -> "Trajectory":
        i = self.index_of(t_max)
        return Trajectory(self.times[: i + 1], self.fields[: i + 1])

    def window(self, t_lo: float, t_hi: float) -> "Trajectory":
        lo, hi = self.index_of(t_lo), self.index_of(t_hi)
        return Trajectory(self.times[lo : hi + 1], self.fields[lo : hi + 1])

    def coeff_stack(self) -> np.ndarray:
        return np.stack([f.coeffs for f in self.fields])


def _check_compatible(f: Trajectory, g: Trajectory):
    if len(f) != len(g) or not np.allclose(f.times, g.times, rtol=0, atol=1e-12):
        raise ValueError("trajectories are on different time grids")
    if f.grid.shape != g.grid.shape or f.grid.d != g.grid.d:
        raise ValueError("trajectories are on different grids")


def heat_flow(f: SpectralField, t: float, alpha: float) -> SpectralField:
    """e^{-t (-Delta)^alpha} f, exact per mode."""
    if t < 0:
        raise ValueError(f"heat flow requires t >= 0, got {t}")
    return SpectralField(f.grid, f.coeffs * heat_multiplier(f.grid, t, alpha),
                         divfree=f.divfree)


def heat_flow_trajectory(u0: SpectralField, times: np.ndarray, alpha: float) -> Trajectory:
    return Trajectory(times, [heat_flow(u0, float(t), alpha) for t in times])


# ---------------------------------------------------------------------------
# Exact-kernel segment integrals
# ---------------------------------------------------------------------------

def _phi1(z: np.ndarray) -> np.ndarray:
    """(1 - e^-z)/z, stable for all z >= 0."""
    out = np.ones_like(z)
    nz = z > 0
    out[nz] = -np.expm1(-z[nz]) / z[nz]
    return out


def _phi2(z: np.ndarray) -> np.ndarray:
    """(z - 1 + e^-z)/z^2 -> 1/2 as z -> 0."""
    out = np.empty_like(z)
    small = z < 1e-2
    zs = z[small]
    out[small] = 0.5 - zs / 6.0 + zs**2 / 24.0 - zs**3 / 120.0 + zs**4 / 720.0
    zl = z[~small]
    out[~small] = (zl + np.expm1(-zl)) / zl**2
    return out


def segment_integral(dt, lam, g0, g1):
    """int_0^dt exp(-(dt - s) lam) glin(s) ds with glin linear from g0 to g1.

    lam broadcasts against the coefficient arrays g0, g1; dt is scalar.
    """
    z = lam * dt
    w1 = dt * _phi1(z)
    w2 = dt * _phi2(z)
    return g0 * (w1 - w2) + g1 * w2


def duhamel_integrate(forcing: Trajectory, alpha: float) -> Trajectory:
    """w(t) = int_0^t e^{-(t-s)(-Delta)^alpha} G(s) ds along the forcing grid.

    Exponential-integrating-factor recurrence with piecewise-linear G:
    exact linear part, second order in the nodal spacing for smooth G.
    """
    grid = forcing.grid
    lam = grid.k_sq**alpha
    times = forcing.times
    G = forcing.coeff_stack()
    divfree = all(f.divfree for f in forcing.fields)
    out = [np.zeros_like(G[0])]
    for i in range(len(times) - 1):
        dt = float(times[i + 1] - times[i])
        decay = np.exp(-dt * lam)
        out.append(out[-1] * decay + segment_integral(dt, lam, G[i], G[i + 1]))
    fields = [SpectralField(grid, c, divfree=divfree) for c in out]
    return Trajectory(times, fields)


def duhamel_M(f: Trajectory, g: Trajectory, alpha: float, bilinear_form) -> Trajectory:
    """M(f,g)(t) = int_0^t e^{-(t-s)(-Delta)^alpha} B(f(s), g(s)) ds.

    bilinear_form(f_s, g_s) -> SpectralField supplies the nonlinearity
    (injected to keep this module independent of the product machinery).
    """
    _check_compatible(f, g)
    forcing = Trajectory(f.times, [bilinear_form(fs, gs) for fs, gs in zip(f.fields, g.fields)])
    return duhamel_integrate(forcing, alpha)
