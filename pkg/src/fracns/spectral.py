"""Fourier substrate on the torus [0, 2pi)^d.

Coefficients store u_hat(k) with u(x) = sum_k u_hat(k) exp(i k.x) over the
integer lattice -N/2 < k_i <= N/2 (numpy fft layout, with the entry at index
N/2 labelled +N/2).  The zero mode is pinned to 0 by every operation, and the
Nyquist planes are excluded from differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


def _wavevector_axis(n: int) -> np.ndarray:
    """Integer frequencies in fft layout, Nyquist labelled +n/2."""
    k = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
    k[n // 2] = n // 2
    return k


@dataclass(frozen=True)
class Grid:
    """Collocation grid with N points per axis on the d-torus."""

    d: int
    N: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def npoints(self) -> int:
        return self.N**self.d

    @property
    def cell_volume(self) -> float:
        return (TWO_PI / self.N) ** self.d

    @property
    def k_axis(self) -> np.ndarray:
        return self._cached("k_axis", lambda: _wavevector_axis(self.N))

    def _cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def k_components(self) -> np.ndarray:
        """Array of shape (d, N, ..., N) with the lattice vector per mode."""

        def build():
            mesh = np.meshgrid(*([self.k_axis] * self.d), indexing="ij")
            return np.stack(mesh).astype(np.float64)

        return self._cached("k_components", build)

    @property
    def k_sq(self) -> np.ndarray:
        return self._cached("k_sq", lambda: np.sum(self.k_components**2, axis=0))

    @property
    def nyquist_mask(self) -> np.ndarray:
        """True on modes with any k_i = N/2 (excluded from differentiation)."""

        def build():
            return np.any(self.k_components == self.N // 2, axis=0)

        return self._cached("nyquist_mask", build)

    @property
    def nodes(self) -> np.ndarray:
        """Physical coordinates, shape (d, N, ..., N), x_m = 2 pi m / N."""

        def build():
            ax = TWO_PI * np.arange(self.N) / self.N
            return np.stack(np.meshgrid(*([ax] * self.d), indexing="ij"))

        return self._cached("nodes", build)


def make_grid(d: int, N: int) -> Grid:
    if d not in (2, 3):
        raise ValueError(f"d must be 2 or 3, got {d}")
    if N % 2 != 0:
        raise ValueError("N must be even")
    if N < 8:
        raise ValueError(f"N must be >= 8, got {N}")
    return Grid(d=d, N=N)


@dataclass(frozen=True)
class SpectralField:
    """Truncated Fourier representation of a scalar or vector field.

    coeffs has shape (ncomp,) + grid.shape; ncomp is 1 for scalars and
    grid.d for velocity fields.  Fields are immutable values: operations
    return new instances.  divfree marks fields produced by (or preserved
    under) the Leray projection.
    """

    grid: Grid
    coeffs: np.ndarray
    divfree: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (c.shape[0],) + self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[0]

    @property
    def is_vector(self) -> bool:
        return self.ncomp == self.grid.d

    def values(self) -> np.ndarray:
        """Collocation values, shape (ncomp,) + grid.shape (real part)."""
        axes = tuple(range(1, self.grid.d + 1))
        return np.real(np.fft.ifftn(self.coeffs, axes=axes) * self.grid.npoints)

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, coeffs)

    def mean_coefficient(self) -> np.ndarray:
        return self.coeffs[(slice(None),) + (0,) * self.grid.d]

    def is_mean_zero(self, rtol: float = 1e-12) -> bool:
        scale = np.max(np.abs(self.coeffs)) if self.coeffs.size else 0.0
        return bool(np.all(np.abs(self.mean_coefficient()) <= rtol * max(scale, 1e-300)))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs,
                             divfree=self.divfree and other.divfree)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs,
                             divfree=self.divfree and other.divfree)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar, divfree=self.divfree)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs, divfree=self.divfree)


def _check_same_grid(f: SpectralField, g: SpectralField):
    if f.grid.d != g.grid.d or f.grid.N != g.grid.N:
        raise ValueError("fields live on different grids")


def zero_field(grid: Grid, ncomp: int = 1) -> SpectralField:
    return SpectralField(grid, np.zeros((ncomp,) + grid.shape, dtype=np.complex128))


def from_values(grid: Grid, values: np.ndarray) -> SpectralField:
    """Build a field from collocation values, shape (ncomp,) + grid.shape."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == grid.d:
        v = v[None]
    axes = tuple(range(1, grid.d + 1))
    coeffs = np.fft.fftn(v, axes=axes) / grid.npoints
    return SpectralField(grid, coeffs)


def from_function(grid: Grid, *funcs) -> SpectralField:
    """Sample callables f(x1, .., xd) on the grid, one per component."""
    xs = grid.nodes
    vals = np.stack([np.asarray(f(*xs), dtype=np.float64) for f in funcs])
    return from_values(grid, vals)


def random_field(
    grid: Grid,
    ncomp: int,
    rng: np.random.Generator,
    max_wave: int | None = None,
    divergence_free: bool = False,
    amplitude: float = 1.0,
) -> SpectralField:
    """Random real band-limited mean-zero field (test/forcing factory).

    max_wave caps |k_i| (default N/3, inside the dealiased band).
    """
    if max_wave is None:
        max_wave = grid.N // 3
    vals = rng.standard_normal((ncomp,) + grid.shape)
    f = from_values(grid, vals)
    keep = np.all(np.abs(grid.k_components) <= max_wave, axis=0)
    coeffs = f.coeffs * keep
    coeffs[(slice(None),) + (0,) * grid.d] = 0.0
    out = SpectralField(grid, coeffs)
    if divergence_free:
        out = leray_project(out)
    scale = np.max(np.abs(out.values()))
    if scale > 0:
        out = out * (amplitude / scale)
    return out


def fractional_derivative(f: SpectralField, beta: float) -> SpectralField:
    """Apply |k|^beta per mode (state-space Lambda^beta).

    The zero mode maps to 0 for every beta; Nyquist planes map to 0.  For
    beta < 0 the field must be mean-zero.
    """
    if beta == 0:
        return f
    g = f.grid
    if beta < 0 and not f.is_mean_zero():
        raise ValueError("negative-order derivative requires a mean-zero field")
    ksq = g.k_sq
    mult = np.zeros_like(ksq)
    nz = ksq > 0
    mult[nz] = ksq[nz] ** (beta / 2.0)
    mult[g.nyquist_mask] = 0.0
    return SpectralField(g, f.coeffs * mult, divfree=f.divfree)


def heat_multiplier(grid: Grid, t: float, alpha: float) -> np.ndarray:
    """exp(-t |k|^(2 alpha)) over the lattice."""
    return np.exp(-t * grid.k_sq**alpha)


def leray_project(f: SpectralField) -> SpectralField:
    """Per-mode projection u_hat -> (I - k k^T / |k|^2) u_hat.

    Idempotent: fields already carrying the divergence-free flag pass
    through unchanged.
    """
    g = f.grid
    if not f.is_vector:
        raise ValueError("Leray projection requires a vector field")
    if f.divfree:
        return f
    k = g.k_components
    ksq = np.where(g.k_sq > 0, g.k_sq, 1.0)
    kdotu = np.sum(k * f.coeffs, axis=0)
    coeffs = f.coeffs - k * (kdotu / ksq)
    coeffs[(slice(None),) + (0,) * g.d] = 0.0
    return SpectralField(g, coeffs, divfree=True)


def divergence_residual(f: SpectralField) -> float:
    """max_k |k . u_hat(k)|, the modal divergence residual."""
    if not f.is_vector:
        raise ValueError("divergence requires a vector field")
    kdotu = np.sum(f.grid.k_components * f.coeffs, axis=0)
    return float(np.max(np.abs(kdotu)))


def gradient_component(f: SpectralField, comp: int, axis: int) -> np.ndarray:
    """Coefficients of d/dx_axis of component comp, Nyquist zeroed."""
    g = f.grid
    ik = 1j * g.k_components[axis] * (~g.nyquist_mask)
    return f.coeffs[comp] * ik


def inner(f: SpectralField, g: SpectralField) -> float:
    """L2 inner product int f.g dx = (2 pi)^d sum fhat conj(ghat)."""
    _check_same_grid(f, g)
    if f.ncomp != g.ncomp:
        raise ValueError("component mismatch in inner product")
    return float(np.real(np.sum(f.coeffs * np.conj(g.coeffs))) * TWO_PI ** f.grid.d)


def l2_norm(f: SpectralField) -> float:
    return float(np.sqrt(max(inner(f, f), 0.0)))


# ---------------------------------------------------------------------------
# Dealiased products (3/2 zero padding)
# ---------------------------------------------------------------------------

def padded_size(N: int) -> int:
    M = (3 * N) // 2
    return M + (M % 2)


def _pad_axis(c: np.ndarray, axis: int, N: int, M: int) -> np.ndarray:
    """Zero-pad one axis from N to M modes, splitting the Nyquist plane.

    The stored coefficient at +N/2 represents cos-type content; on the
    larger grid it is split half-and-half between +-N/2 so real fields stay
    real and products of band-limited fields are exact.
    """
    shape = list(c.shape)
    shape[axis] = M
    out = np.zeros(shape, dtype=np.complex128)
    pos = np.mod(_wavevector_axis(N), M)
    idx = [slice(None)] * c.ndim
    idx[axis] = pos
    out[tuple(idx)] = c
    ny = [slice(None)] * c.ndim
    ny[axis] = N // 2
    mirror = [slice(None)] * c.ndim
    mirror[axis] = M - N // 2
    out[tuple(ny)] *= 0.5
    out[tuple(mirror)] = out[tuple(ny)]
    return out


def _truncate_axis(c: np.ndarray, axis: int, N: int, M: int) -> np.ndarray:
    """Inverse of _pad_axis: fold -N/2 into +N/2 then gather retained modes."""
    ny = [slice(None)] * c.ndim
    ny[axis] = N // 2
    mirror = [slice(None)] * c.ndim
    mirror[axis] = M - N // 2
    folded = np.array(c)
    folded[tuple(ny)] += folded[tuple(mirror)]
    pos = np.mod(_wavevector_axis(N), M)
    idx = [slice(None)] * c.ndim
    idx[axis] = pos
    return folded[tuple(idx)]


def pad_coeffs(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Pad (ncomp,)+grid.shape coefficients onto the 3/2 grid."""
    M = padded_size(grid.N)
    out = coeffs
    for axis in range(1, grid.d + 1):
        out = _pad_axis(out, axis, grid.N, M)
    return out


def truncate_coeffs(grid: Grid, padded: np.ndarray) -> np.ndarray:
    M = padded.shape[-1]
    out = padded
    for axis in range(1, grid.d + 1):
        out = _truncate_axis(out, axis, grid.N, M)
    return out


def padded_values(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Collocation values of (ncomp,...) coefficients on the 3/2 grid."""
    padded = pad_coeffs(grid, coeffs)
    axes = tuple(range(1, grid.d + 1))
    M = padded.shape[-1]
    return np.real(np.fft.ifftn(padded, axes=axes) * M**grid.d)


def values_to_truncated_coeffs(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Forward transform on the 3/2 grid, truncated back to the base band."""
    axes = tuple(range(1, grid.d + 1))
    M = values.shape[-1]
    padded = np.fft.fftn(values, axes=axes) / M**grid.d
    return truncate_coeffs(grid, padded)


def dealiased_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pointwise product of two scalar fields, alias-free on the base band."""
    _check_same_grid(f, g)
    if f.ncomp != 1 or g.ncomp != 1:
        raise ValueError("dealiased_product takes scalar fields; see bilinear.advect for vectors")
    vf = padded_values(f.grid, f.coeffs)
    vg = padded_values(g.grid, g.coeffs)
    return SpectralField(f.grid, values_to_truncated_coeffs(f.grid, vf * vg))


# ---------------------------------------------------------------------------
# Field snapshot files
# ---------------------------------------------------------------------------

def write_field(path, f: SpectralField, time: float = 0.0, alpha: float = 1.0):
    """Plain-text snapshot: header then `c kx ky [kz] re im` per record,
    sorted by component then lexicographic wavevector."""
    g = f.grid
    header = f"FRACNS d={g.d} N={g.N} comps={f.ncomp} time={time!r} alpha={alpha!r}"
    axis = np.sort(g.k_axis)
    lines = [header]
    for c in range(f.ncomp):
        for kvec in _lex_wavevectors(axis, g.d):
            idx = tuple(int(k) % g.N for k in kvec)
            z = f.coeffs[(c,) + idx]
            kstr = " ".join(str(int(k)) for k in kvec)
            lines.append(f"{c} {kstr} {float(z.real)!r} {float(z.imag)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _lex_wavevectors(axis: np.ndarray, d: int):
    if d == 2:
        for kx in axis:
            for ky in axis:
                yield (kx, ky)
    else:
        for kx in axis:
            for ky in axis:
                for kz in axis:
                    yield (kx, ky, kz)


def read_field(path) -> tuple[SpectralField, dict]:
    """Read a snapshot file; returns (field, header metadata)."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("FRACNS"):
            raise ValueError(f"{path}: not a FRACNS field file")
        meta = {}
        for tok in header.split()[1:]:
            key, val = tok.split("=")
            meta[key] = float(val) if key in ("time", "alpha") else int(val)
        grid = make_grid(meta["d"], meta["N"])
        coeffs = np.zeros((meta["comps"],) + grid.shape, dtype=np.complex128)
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            c = int(parts[0])
            kvec = tuple(int(p) for p in parts[1 : 1 + grid.d])
            re, im = float(parts[1 + grid.d]), float(parts[2 + grid.d])
            idx = tuple(k % grid.N for k in kvec)
            coeffs[(c,) + idx] = re + 1j * im
    return SpectralField(grid, coeffs), meta
