"""Divergence-free real Fourier basis and randomized initial data.

Each retained lattice vector k != 0 carries d-1 orthonormal polarization
vectors orthogonal to k; "plus" representatives multiply cos(k.x), "minus"
ones sin(k.x).  Randomization multiplies every real amplitude by an
independent mean-zero unit-variance draw.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .spectral import TWO_PI, Grid, SpectralField

EK_L2_SQ_FACTOR = 0.5  # ||cos(k.x)||_{L^2}^2 = (2 pi)^d / 2


def classify_wavevector(k) -> str:
    """Lexicographic sign classification: first nonzero entry decides."""
    for ki in k:
        if ki > 0:
            return "plus"
        if ki < 0:
            return "minus"
    return "zero"


def perp_basis(k) -> np.ndarray:
    """Orthonormal basis of k-perp, shape (d-1, d), deterministic in k.

    Householder reflection sending the canonical axis most aligned with k
    onto k/|k|; the images of the other axes span k-perp.  The basis for -k
    equals the basis for k, and each vector's first nonzero entry is
    positive.
    """
    k = np.asarray(k, dtype=np.float64)
    if np.all(k == 0):
        raise ValueError("perp_basis requires k != 0")
    if classify_wavevector(k) == "minus":
        k = -k
    d = k.size
    khat = k / np.linalg.norm(k)
    axis = int(np.argmax(np.abs(khat)))
    if khat[axis] < 0:
        khat = -khat  # reflection target in the +axis half-space
    v = khat - np.eye(d)[axis]
    vnorm_sq = float(v @ v)
    basis = []
    for i in range(d):
        if i == axis:
            continue
        e = np.eye(d)[i]
        if vnorm_sq > 1e-28:
            e = e - 2.0 * v * (v @ e) / vnorm_sq
        nz = np.nonzero(np.abs(e) > 1e-12)[0]
        if e[nz[0]] < 0:
            e = -e
        basis.append(e)
    return np.array(basis)


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistributionSpec:
    """Mean-zero unit-variance family for the randomization draws.

    moment_order records the 2n used in the finite-moment hypothesis;
    moment_bounded(order) says whether E|g|^order is actually finite, which
    is deliberately false for the heavy-tailed negative control.
    """

    family: str
    dof: float = 0.0
    moment_order: int = 8

    def moment_bounded(self, order: float) -> bool:
        if self.family == "student_t":
            return order < self.dof
        return True

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.family == "gaussian":
            return rng.standard_normal(shape)
        if self.family == "rademacher":
            return np.where(rng.random(shape) < 0.5, -1.0, 1.0)
        if self.family == "uniform":
            return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), shape)
        if self.family == "student_t":
            scale = np.sqrt(self.dof / (self.dof - 2.0)) if self.dof > 2.0 else 1.0
            return rng.standard_t(self.dof, shape) / scale
        raise ValueError(f"unknown distribution family {self.family}")


def distribution(name: str) -> DistributionSpec:
    """Parse 'gaussian' | 'rademacher' | 'uniform' | 'student_t:<dof>'."""
    if name.startswith("student_t"):
        dof = float(name.split(":")[1]) if ":" in name else 2.5
        return DistributionSpec("student_t", dof=dof)
    if name in ("gaussian", "rademacher", "uniform"):
        return DistributionSpec(name)
    raise ValueError(f"unknown distribution {name}")


def sample_rng(seed: int, sample_index: int) -> np.random.Generator:
    """Independent counter-based stream for one ensemble member."""
    return np.random.Generator(np.random.Philox(key=seed).jumped(sample_index))


# ---------------------------------------------------------------------------
# Plans
# ---------------------------------------------------------------------------

@dataclass
class RandomizationPlan:
    """Mode list, polarization vectors, amplitudes and distribution."""

    grid: Grid
    cutoff: int
    modes: np.ndarray  # (n_modes, d) int
    perp: np.ndarray  # (n_modes, d-1, d)
    coeffs: np.ndarray  # (n_modes, d-1) real amplitudes
    dist: DistributionSpec
    seed: int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_modes(self) -> int:
        return self.modes.shape[0]

    @property
    def n_terms(self) -> int:
        return self.coeffs.size

    def mode_norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.modes.astype(float) ** 2, axis=1))

    def hs_norm(self, s: float) -> float:
        """|| u_0 ||_{Hdot^s} of the deterministic amplitudes (closed form)."""
        w = self.mode_norms() ** s
        total = np.sum((w[:, None] * self.coeffs) ** 2)
        return float(np.sqrt(total * EK_L2_SQ_FACTOR * TWO_PI ** self.grid.d))

    def draw(self, n_samples: int, first_sample: int = 0) -> np.ndarray:
        """(n_samples, n_modes, d-1) independent draws, reproducible per index."""
        shape = self.coeffs.shape
        out = np.empty((n_samples,) + shape)
        for i in range(n_samples):
            out[i] = self.dist.sample(sample_rng(self.seed, first_sample + i), shape)
        return out


def lattice_modes(d: int, cutoff: int) -> np.ndarray:
    """All k in Z^d_* with |k_i| <= cutoff, lexicographic order."""
    ax = np.arange(-cutoff, cutoff + 1)
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    keep = np.any(pts != 0, axis=1)
    return pts[keep]


def make_plan(
    grid: Grid,
    cutoff: int,
    coeff_fn,
    dist: DistributionSpec | str = "gaussian",
    seed: int = 0,
) -> RandomizationPlan:
    """Assemble a plan; coeff_fn(modes) -> (n_modes, d-1) real amplitudes."""
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    if cutoff > grid.N // 2 - 1:
        raise ValueError(f"cutoff {cutoff} does not fit on an N={grid.N} grid")
    if isinstance(dist, str):
        dist = distribution(dist)
    modes = lattice_modes(grid.d, cutoff)
    perp = np.stack([perp_basis(k) for k in modes])
    coeffs = np.asarray(coeff_fn(modes), dtype=np.float64)
    if coeffs.shape != (modes.shape[0], grid.d - 1):
        raise ValueError(f"coefficient array must have shape {(modes.shape[0], grid.d - 1)}")
    return RandomizationPlan(grid, cutoff, modes, perp, coeffs, dist, seed)


def hs_profile_coeffs(s: float, delta: float, d: int):
    """Amplitudes |k|^(-s - d/2 - delta), equal across polarizations.

    delta > 0 puts the data in Hdot^s with geometrically convergent tail;
    delta <= 0 makes the Hdot^s sum divergent as the cutoff grows, which is
    reported as a warning (finite mode sets stay finite regardless).
    """
    if delta <= 0:
        warnings.warn(
            f"spectral margin delta={delta} <= 0: Hdot^{s} mass diverges as the cutoff grows",
            stacklevel=2,
        )

    def fn(modes: np.ndarray) -> np.ndarray:
        mags = np.sqrt(np.sum(modes.astype(float) ** 2, axis=1))
        amp = mags ** (-s - d / 2.0 - delta)
        return np.repeat(amp[:, None], d - 1, axis=1)

    return fn


def single_mode_coeffs(k, amplitude: float = 1.0, j: int = 0):
    """Amplitude on one (k, j) pair, zero elsewhere."""

    def fn(modes: np.ndarray) -> np.ndarray:
        out = np.zeros((modes.shape[0], modes.shape[1] - 1))
        match = np.all(modes == np.asarray(k), axis=1)
        if not np.any(match):
            raise ValueError(f"mode {k} not in the plan lattice")
        out[np.argmax(match), j] = amplitude
        return out

    return fn


def taylor_green_coeffs(modes: np.ndarray) -> np.ndarray:
    """Amplitudes reproducing (sin x1 cos x2, -cos x1 sin x2) in d=2."""
    out = np.zeros((modes.shape[0], 1))
    for target in ((-1, -1), (-1, 1)):
        match = np.all(modes == np.asarray(target), axis=1)
        out[np.argmax(match), 0] = -np.sqrt(2.0) / 2.0
    return out


def synthesize(plan: RandomizationPlan, override_g: np.ndarray | None = None,
               sample_index: int = 0) -> SpectralField:
    """Real, mean-zero, divergence-free field sum_j sum_k u0 e_k^j g_k^j.

    override_g (n_modes, d-1) replaces the random draws; override_g == 1
    gives the deterministic data.
    """
    grid = plan.grid
    if override_g is not None:
        g = np.asarray(override_g, dtype=np.float64)
        if g.shape != plan.coeffs.shape:
            raise ValueError(f"override_g must have shape {plan.coeffs.shape}, got {g.shape}")
    else:
        g = plan.draw(1, first_sample=sample_index)[0]
    amp = plan.coeffs * g  # (n_modes, d-1)

    if "indices" not in plan._cache:
        N = grid.N
        pos = np.ravel_multi_index(tuple((plan.modes % N).T), grid.shape)
        neg = np.ravel_multi_index(tuple(((-plan.modes) % N).T), grid.shape)
        sign = np.array([1.0 if classify_wavevector(k) == "plus" else -1.0 for k in plan.modes])
        plan._cache["indices"] = (pos, neg, sign)
    pos, neg, sign = plan._cache["indices"]

    # plus modes (cos): +a/2 at +-k; minus modes (sin): -i a/2 at k, +i a/2 at -k
    half = np.einsum("mj,mjc->mc", amp, plan.perp) * 0.5
    w_pos = np.where(sign[:, None] > 0, half, -1j * half)
    w_neg = np.where(sign[:, None] > 0, half, 1j * half)
    flat = np.zeros((grid.d, grid.npoints), dtype=np.complex128)
    for c in range(grid.d):
        np.add.at(flat[c], pos, w_pos[:, c])
        np.add.at(flat[c], neg, w_neg[:, c])
    # every e_k^j is orthogonal to k, so the synthesized field is solenoidal
    return SpectralField(grid, flat.reshape((grid.d,) + grid.shape), divfree=True)


def extract_real_amplitudes(f: SpectralField, plan: RandomizationPlan) -> np.ndarray:
    """Recover the cos/sin amplitudes u0 g per (mode, j) from coefficients."""
    grid = plan.grid
    N = grid.N
    out = np.empty_like(plan.coeffs)
    flat = f.coeffs.reshape((grid.d, grid.npoints))
    for m, k in enumerate(plan.modes):
        cls = classify_wavevector(k)
        rep = k if cls == "plus" else -k
        idx = np.ravel_multi_index(tuple(rep % N), grid.shape)
        uhat = flat[:, idx]  # (d,)
        for j in range(plan.perp.shape[1]):
            z = complex(uhat @ plan.perp[m, j])
            out[m, j] = 2.0 * (z.real if cls == "plus" else z.imag)
    return out


# ---------------------------------------------------------------------------
# Plan serialization: `k j u0 e-basis-components`
# ---------------------------------------------------------------------------

def write_plan(path, plan: RandomizationPlan):
    lines = [
        f"# FRACNS plan d={plan.grid.d} N={plan.grid.N} cutoff={plan.cutoff} "
        f"dist={plan.dist.family}{':' + repr(plan.dist.dof) if plan.dist.family == 'student_t' else ''} "
        f"seed={plan.seed}"
    ]
    for m, k in enumerate(plan.modes):
        kstr = " ".join(str(int(x)) for x in k)
        for j in range(plan.coeffs.shape[1]):
            estr = " ".join(repr(float(x)) for x in plan.perp[m, j])
            lines.append(f"{kstr} {j} {float(plan.coeffs[m, j])!r} {estr}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_plan(path, grid: Grid) -> RandomizationPlan:
    with open(path) as fh:
        header = fh.readline().strip()
        tokens = dict(t.split("=") for t in header.replace("# FRACNS plan ", "").split())
        cutoff, seed = int(tokens["cutoff"]), int(tokens["seed"])
        dist = distribution(tokens["dist"])
        rows = []
        for line in fh:
            parts = line.split()
            if parts:
                rows.append(parts)
    d = grid.d
    keys = {}
    for parts in rows:
        k = tuple(int(x) for x in parts[:d])
        keys.setdefault(k, {})[int(parts[d])] = (
            float(parts[d + 1]),
            np.array([float(x) for x in parts[d + 2 : 2 * d + 2]]),
        )
    modes = np.array(sorted(keys), dtype=np.int64)
    coeffs = np.zeros((len(modes), d - 1))
    perp = np.zeros((len(modes), d - 1, d))
    for m, k in enumerate(map(tuple, modes)):
        for j, (u0, e) in keys[k].items():
            coeffs[m, j] = u0
            perp[m, j] = e
    return RandomizationPlan(grid, cutoff, modes, perp, coeffs, dist, seed)
