"""Trilinear form b(f,g,h), projected bilinear form B(f,g), dual bound.

b(f,g,h) = int sum_jk f_j (d g_k / d x_j) h_k dx.  All products go through
the 3/2-padded grid, so the retained modes of (f.grad)g are the exact
convolution values and the skew-symmetry identities hold to roundoff for
divergence-free f.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .norms import hs, lebesgue, space_norm
from .spectral import (
    SpectralField,
    _check_same_grid,
    divergence_residual,
    gradient_component,
    inner,
    leray_project,
    padded_values,
    values_to_truncated_coeffs,
)

DIVFREE_TOL = 1e-10


def _require_divergence_free(f: SpectralField, who: str):
    scale = max(float(np.max(np.abs(f.coeffs))), 1e-300)
    if divergence_residual(f) > DIVFREE_TOL * scale:
        raise ValueError(
            f"{who}: first argument must be divergence-free "
            f"(modal residual {divergence_residual(f):.3e} > {DIVFREE_TOL:.0e} x scale)"
        )


def advect(f: SpectralField, g: SpectralField) -> SpectralField:
    """(f . grad) g via dealiased products; no projection, no div check.

    The Nyquist planes are excluded from the output: fields confined to
    |k_i| <= N/2 - 1 then stay alias-free under repeated products, which
    is what makes the skew-symmetry identities hold to roundoff.
    """
    _check_same_grid(f, g)
    grid = f.grid
    d = grid.d
    fvals = padded_values(grid, f.coeffs)
    out_vals = np.zeros((g.ncomp,) + fvals.shape[1:])
    for c in range(g.ncomp):
        grad_c = np.stack([gradient_component(g, c, j) for j in range(d)])
        gvals = padded_values(grid, grad_c)
        out_vals[c] = np.sum(fvals * gvals, axis=0)
    coeffs = values_to_truncated_coeffs(grid, out_vals) * (~grid.nyquist_mask)
    return SpectralField(grid, coeffs)


def trilinear_b(f: SpectralField, g: SpectralField, h: SpectralField) -> float:
    """b(f,g,h) by exact grid quadrature of the dealiased advection."""
    _require_divergence_free(f, "trilinear_b")
    return inner(advect(f, g), h)


def bilinear_B(f: SpectralField, g: SpectralField) -> SpectralField:
    """B(f,g) = P (f.grad) g; output is divergence-free and mean-zero."""
    _require_divergence_free(f, "bilinear_B")
    return leray_project(advect(f, g))


@dataclass(frozen=True)
class VSpaceSpec:
    """Test space V: divergence-free fields with grad in L^rho.

    rho = max(2, d/(2 alpha) + margin); the margin realizes the strict
    inequality the continuous theory leaves free.
    """

    d: int
    alpha: float
    margin: float = 0.05

    @property
    def rho(self) -> float:
        return max(2.0, self.d / (2.0 * self.alpha) + self.margin)


def grad_lebesgue_norm(h: SpectralField, r: float) -> float:
    """|| grad h ||_{L^r} with the pointwise Frobenius magnitude."""
    grid = h.grid
    grads = np.stack(
        [gradient_component(h, c, j) for c in range(h.ncomp) for j in range(grid.d)]
    )
    axes = tuple(range(1, grid.d + 1))
    vals = np.real(np.fft.ifftn(grads, axes=axes) * grid.npoints)
    mag_sq = np.sum(vals * vals, axis=0)
    if r == math.inf:
        return float(np.sqrt(np.max(mag_sq)))
    return float((np.sum(mag_sq ** (r / 2.0)) * grid.cell_volume) ** (1.0 / r))


def v_norm(h: SpectralField, vspec: VSpaceSpec) -> float:
    return grad_lebesgue_norm(h, vspec.rho)


def lebesgue_pair_exponent(d: int, alpha: float) -> float:
    """min(4, 2d/(d - 2 alpha)), with the convention 2d/(d-2a) = inf at d <= 2a."""
    if d - 2.0 * alpha <= 0:
        return 4.0
    return min(4.0, 2.0 * d / (d - 2.0 * alpha))


def vdual_bound(f: SpectralField, g: SpectralField, vspec: VSpaceSpec) -> tuple[float, float]:
    """Certified upper bound for ||B(f,g)||_{V'} plus the Lebesgue diagnostic.

    Returns (||f||_{Hdot^alpha} ||g||_{Hdot^alpha},
             ||f||_{L^m} ||g||_{L^m}) with m = min(4, 2d/(d-2 alpha)); the
    second factor times ||grad h||_{L^rho} dominates |b(f,g,h)| by Holder.
    """
    hs_bound = space_norm(f, hs(vspec.alpha)) * space_norm(g, hs(vspec.alpha))
    m = lebesgue_pair_exponent(vspec.d, vspec.alpha)
    leb_bound = space_norm(f, lebesgue(m)) * space_norm(g, lebesgue(m))
    return hs_bound, leb_bound
