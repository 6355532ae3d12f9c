"""Qudit state space over OAM indices and the conjugate angular (ANG) basis.

OAM states are abstract basis vectors indexed by ``ell in -N..N``; the ANG
basis is the discrete Fourier transform of it.  Radial profiles only appear
in the annulus-detection helpers, which compare how often an outside
observer would register a photon in either basis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

ALGEBRAIC_TOL = 1e-12


class Basis(IntEnum):
    OAM = 0
    ANG = 1

    @classmethod
    def parse(cls, value) -> "Basis":
        if isinstance(value, Basis):
            return value
        if isinstance(value, str):
            return cls[value.strip().upper()]
        return cls(int(value))


@dataclass(frozen=True)
class Dimension:
    d: int

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or self.d < 1 or self.d % 2 == 0:
            raise ValueError(f"dimension must be an odd positive integer, got {self.d!r}")

    @property
    def N(self) -> int:
        return (self.d - 1) // 2

    @property
    def indices(self) -> np.ndarray:
        """Mode indices -N..N in storage order."""
        return np.arange(-self.N, self.N + 1)

    def position(self, index: int) -> int:
        """Storage position of mode ``index`` (which equals its key symbol)."""
        if abs(int(index)) > self.N:
            raise IndexError(f"mode index {index} outside -{self.N}..{self.N}")
        return int(index) + self.N


def as_dimension(dim) -> Dimension:
    return dim if isinstance(dim, Dimension) else Dimension(int(dim))


@dataclass(frozen=True)
class StateVector:
    dim: Dimension
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.dim.d,):
            raise ValueError(f"expected {self.dim.d} amplitudes, got shape {amps.shape}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > ALGEBRAIC_TOL:
            raise ValueError(f"state is not normalised (|a|^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def amplitude(self, index: int) -> complex:
        return complex(self.amplitudes[self.dim.position(index)])


def oam_state(ell: int, dim) -> StateVector:
    dim = as_dimension(dim)
    amps = np.zeros(dim.d, dtype=complex)
    amps[dim.position(ell)] = 1.0
    return StateVector(dim, amps)


def ang_state(n: int, dim) -> StateVector:
    dim = as_dimension(dim)
    dim.position(n)
    ell = dim.indices
    amps = np.exp(2j * np.pi * n * ell / dim.d) / np.sqrt(dim.d)
    return StateVector(dim, amps)


def basis_state(basis, index: int, dim) -> StateVector:
    basis = Basis.parse(basis)
    return oam_state(index, dim) if basis is Basis.OAM else ang_state(index, dim)


def basis_matrix(basis, dim) -> np.ndarray:
    """Rows are the basis states of ``basis`` ordered by index -N..N."""
    dim = as_dimension(dim)
    return np.array([basis_state(basis, i, dim).amplitudes for i in dim.indices])


def overlap(a: StateVector, b: StateVector) -> complex:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim.d} vs {b.dim.d}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def detection_probabilities(sent: StateVector, measured_basis, dim=None) -> np.ndarray:
    """Born-rule outcome distribution of measuring ``sent`` in ``measured_basis``.

    Entry ``j`` belongs to the basis state with index ``j - N``.
    """
    dim = sent.dim if dim is None else as_dimension(dim)
    if dim != sent.dim:
        raise ValueError(f"dimension mismatch: {dim.d} vs {sent.dim.d}")
    amps = basis_matrix(measured_basis, dim).conj() @ sent.amplitudes
    return np.abs(amps) ** 2


def verify_mub(dim) -> float:
    """Largest deviation of |<ANG_n|OAM_l>|^2 from 1/d over all pairs."""
    dim = as_dimension(dim)
    gram = basis_matrix(Basis.ANG, dim).conj() @ basis_matrix(Basis.OAM, dim).T
    return float(np.max(np.abs(np.abs(gram) ** 2 - 1.0 / dim.d)))


# -- annulus detection ---------------------------------------------------------


@dataclass(frozen=True)
class RadialProfileSet:
    """Complex radial profiles ``psi_ell(r)`` sampled on a common grid.

    ``profiles`` has shape ``(d, len(grid))`` with row order -N..N.  The
    outermost grid point stands in for infinity, so profiles should have
    decayed to zero there.
    """

    dim: Dimension
    grid: np.ndarray = field(repr=False)
    profiles: np.ndarray = field(repr=False)
    plane_label: float = 0.0

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        prof = np.asarray(self.profiles, dtype=complex)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("radial grid needs at least two points")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("radial grid must be strictly increasing")
        if prof.shape != (self.dim.d, grid.size):
            raise ValueError(f"profiles must have shape ({self.dim.d}, {grid.size}), got {prof.shape}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "profiles", prof)


@dataclass(frozen=True)
class AnnulusSpec:
    r_inner: float
    r_outer: float

    def __post_init__(self):
        if not 0 <= self.r_inner < self.r_outer:
            raise ValueError(f"need 0 <= r_inner < r_outer, got {self.r_inner}, {self.r_outer}")


def radial_weights(grid: np.ndarray, annulus: AnnulusSpec) -> np.ndarray:
    """Quadrature weights w with sum(w * f) = integral of f over the annulus.

    The integrand is taken piecewise linear between grid points (trapezoidal
    rule); annulus edges falling between grid points are interpolated.
    """
    a, b = annulus.r_inner, annulus.r_outer
    if a < grid[0] or b > grid[-1]:
        raise ValueError(f"annulus [{a}, {b}] outside grid [{grid[0]}, {grid[-1]}]")
    lo, hi = grid[:-1], grid[1:]
    u = np.clip(np.maximum(lo, a), lo, hi)
    v = np.clip(np.minimum(hi, b), lo, hi)
    length = np.where(v > u, v - u, 0.0)
    width = hi - lo
    tu = (u - lo) / width
    tv = (v - lo) / width
    w = np.zeros_like(grid)
    np.add.at(w, np.arange(grid.size - 1), 0.5 * length * ((1 - tu) + (1 - tv)))
    np.add.at(w, np.arange(1, grid.size), 0.5 * length * (tu + tv))
    return w


def annulus_probability_oam(profiles: RadialProfileSet, annulus: AnnulusSpec) -> float:
    w = radial_weights(profiles.grid, annulus) * profiles.grid
    power = np.abs(profiles.profiles) ** 2
    return float(2 * np.pi * np.sum(power @ w) / profiles.dim.d)


def annulus_probability_ang(profiles: RadialProfileSet, annulus: AnnulusSpec,
                            azimuthal_points: int | None = None) -> float:
    dim = profiles.dim
    if azimuthal_points is None:
        azimuthal_points = 4 * dim.d
    if azimuthal_points < 4 * dim.d:
        raise ValueError(f"need at least {4 * dim.d} azimuthal samples, got {azimuthal_points}")
    w = radial_weights(profiles.grid, annulus) * profiles.grid
    phi = 2 * np.pi * np.arange(azimuthal_points) / azimuthal_points
    ell = dim.indices
    helical = np.exp(1j * np.outer(ell, phi))  # (d, M)
    total = 0.0
    for n in dim.indices:
        coeff = np.exp(2j * np.pi * n * ell / dim.d) / np.sqrt(dim.d)
        # field[r, phi] = sum_l psi_l(r) e^{i l phi} e^{i 2 pi n l / d} / sqrt(d)
        field_ = (profiles.profiles * coeff[:, None]).T @ helical
        ring = np.sum(np.abs(field_) ** 2, axis=1) * (2 * np.pi / azimuthal_points)
        total += float(ring @ w)
    return total / dim.d


def random_profile_set(dim, rng: np.random.Generator, points: int = 400, r_max: float = 6.0) -> RadialProfileSet:
    """Smooth random profiles ``poly(r) * r^|l| * exp(-r^2 / w^2)`` decaying to ~0 at ``r_max``."""
    dim = as_dimension(dim)
    grid = np.linspace(0.0, r_max, points)
    rows = []
    for ell in dim.indices:
        coeffs = rng.normal(size=3) + 1j * rng.normal(size=3)
        width = rng.uniform(0.8, 1.6)
        rows.append(np.polyval(coeffs, grid) * grid ** abs(ell) * np.exp(-(grid / width) ** 2))
    return RadialProfileSet(dim, grid, np.array(rows))


def random_annulus(grid: np.ndarray, rng: np.random.Generator) -> AnnulusSpec:
    a, b = np.sort(rng.uniform(grid[0], grid[-1], size=2))
    if rng.random() < 0.25:
        b = grid[-1]
    return AnnulusSpec(float(a), float(b))


def annulus_identity_deviation(dim, instances: int = 100, seed: int = 0) -> float:
    """Largest |P_ANG - P_OAM| over random profile/annulus instances."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        prof = random_profile_set(dim, rng)
        ann = random_annulus(prof.grid, rng)
        worst = max(worst, abs(annulus_probability_ang(prof, ann) - annulus_probability_oam(prof, ann)))
    return worst
