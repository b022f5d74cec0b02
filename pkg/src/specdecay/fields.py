"""Field representations, Leray projection, norms, and low-frequency mass.

Two backends carry divergence-free initial data:

* ``RadialSpectralProfile`` -- an exact 1-D representation via the
  spherically averaged squared spectral amplitude A(r) = |u0_hat(xi)|^2
  on |xi| = r.  It reaches arbitrarily small frequencies, which no
  periodic box can, so every asymptotic statement is checked here.
* ``GridField`` -- a periodic-box lattice of Fourier coefficients for
  n in {2, 3}, Hermitian-symmetric, mean-zero, divergence-free.

Conventions (fixed throughout the package): the Fourier transform is
unitary, so ||u||^2 = int |u_hat|^2 dxi; for radial data this is
omega_{n-1} int A(r) r^{n-1} dr with omega_{n-1} the unit-sphere area.
The vector structure behind a radial profile is the swirl direction
e(xi) = (-i xi_2, i xi_1, 0, ...)/|xi| (orthogonal to xi, hence
divergence-free); A is the squared amplitude already averaged over the
sphere, which is exact for n = 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from .errors import MassUnresolvable, QuadratureDivergence
from .quadrature import QuadratureSpec, integrate_from_zero, integrate_interval

__all__ = [
    "sphere_area",
    "RadialSpectralProfile",
    "Grid",
    "GridField",
    "FieldNorms",
    "leray_project",
    "norms",
    "low_freq_mass",
    "total_energy",
    "sample_profile_to_grid",
]

Field = Union["RadialSpectralProfile", "GridField"]


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


# ---------------------------------------------------------------------------
# radial backend
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialSpectralProfile:
    """Radially structured divergence-free datum, represented spectrally.

    amplitude(r) gives A(r) >= 0 for r > 0 (vectorized over arrays);
    support is (r_min, r_max) outside which A vanishes; heat_time tracks
    accumulated heat evolution, applied as exp(-2 t r^2) at evaluation so
    that semigroup composition is exact.
    """

    dim: int
    amplitude: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float]
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    heat_time: float = 0.0
    descriptor: Optional[dict] = None
    label: str = "profile"

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        r_min, r_max = self.support
        if not (0.0 <= r_min < r_max < math.inf):
            raise ValueError("support must satisfy 0 <= r_min < r_max < inf")
        if self.heat_time < 0.0:
            raise ValueError("heat_time must be >= 0")
        probe = np.geomspace(max(r_min, 1e-12 * r_max), r_max, 16)
        a = np.asarray(self.amplitude(probe), dtype=float)
        if a.shape != probe.shape or not np.all(np.isfinite(a)) or np.any(a < 0):
            raise ValueError("amplitude must be finite and >= 0 on the support")

    # -- evaluation ---------------------------------------------------------

    def amplitude_at(self, r: np.ndarray) -> np.ndarray:
        """Evolved squared amplitude A(r) exp(-2 heat_time r^2), zero off support."""
        r = np.asarray(r, dtype=float)
        r_min, r_max = self.support
        inside = (r >= r_min) & (r <= r_max) & (r > 0)
        out = np.zeros_like(r)
        if np.any(inside):
            a = np.asarray(self.amplitude(r[inside]), dtype=float)
            if self.heat_time > 0.0:
                a = a * np.exp(-2.0 * self.heat_time * np.square(r[inside]))
            out[inside] = a
        return out

    def moment(self, power: float, upper: Optional[float] = None) -> tuple[float, float]:
        """(value, tail) of omega int_0^upper A(r) r^power r^{n-1} dr."""
        n = self.dim
        omega = sphere_area(n)
        r_min, r_max = self.support
        hi = r_max if upper is None else min(upper, r_max)
        if hi <= r_min:
            return 0.0, 0.0

        def integrand(r):
            return self.amplitude_at(r) * np.power(r, power + n - 1)

        if r_min > 0.0:
            return omega * integrate_interval(integrand, r_min, hi, self.quadrature), 0.0
        value, tail = integrate_from_zero(integrand, hi, self.quadrature)
        return omega * value, omega * tail

    def heat(self, t: float) -> "RadialSpectralProfile":
        """Evolve under the heat semigroup for time t (exact)."""
        if t < 0.0:
            raise ValueError("t must be >= 0")
        return replace(self, heat_time=self.heat_time + t)

    def scaled(self, lam: float) -> "RadialSpectralProfile":
        """Multiply the field by lam > 0 (amplitude scales by lam^2)."""
        base = self.amplitude
        return replace(self, amplitude=lambda r, _b=base, _l=lam: _l * _l * np.asarray(_b(r)), descriptor=None)


# ---------------------------------------------------------------------------
# grid backend
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Periodic box lattice: n in {2,3}, side L, N modes per axis."""

    dim: int
    box_length: float
    resolution: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("grid backend supports dim 2 and 3 only")
        if self.box_length <= 0.0:
            raise ValueError("box_length must be positive")
        if self.resolution < 16 or self.resolution % 2 != 0:
            raise ValueError("resolution must be even and >= 16")

    @property
    def k0(self) -> float:
        return 2.0 * math.pi / self.box_length

    @property
    def cell_measure(self) -> float:
        return self.k0 ** self.dim

    def mode_numbers(self) -> np.ndarray:
        """Integer mode numbers along one axis in FFT layout."""
        N = self.resolution
        return np.rint(np.fft.fftfreq(N) * N).astype(int)

    def wavevectors(self) -> list[np.ndarray]:
        """Broadcastable k_i arrays (FFT layout) for each axis."""
        m = self.mode_numbers().astype(float) * self.k0
        n, N = self.dim, self.resolution
        out = []
        for ax in range(n):
            shape = [1] * n
            shape[ax] = N
            out.append(m.reshape(shape))
        return out

    def k_norm(self) -> np.ndarray:
        ks = self.wavevectors()
        return np.sqrt(sum(np.square(k) for k in ks))


def _conjugate_reverse(c: np.ndarray, dim: int) -> np.ndarray:
    """coeff(-k), i.e. the array reversed on every spatial axis (FFT layout)."""
    out = c
    for ax in range(c.ndim - dim, c.ndim):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


@dataclass(frozen=True)
class GridField:
    """Fourier coefficients of a real, mean-zero, divergence-free field.

    coeffs has shape (dim, N, ..., N) in FFT layout and stores the
    continuum amplitude u_hat sampled on the lattice; spectral sums are
    weighted by the cell measure k0^n.  Nyquist planes are zeroed (they
    have no Hermitian partner on an even grid).
    """

    grid: Grid
    coeffs: np.ndarray

    DIV_TOL = 1e-12
    HERM_TOL = 1e-12

    def __post_init__(self):
        g = self.grid
        expected = (g.dim,) + (g.resolution,) * g.dim
        c = np.ascontiguousarray(np.asarray(self.coeffs, dtype=np.complex128))
        if c.shape != expected:
            raise ValueError(f"coeffs shape {c.shape} != {expected}")
        object.__setattr__(self, "coeffs", c)
        c.setflags(write=False)

    # -- construction helpers ----------------------------------------------

    @staticmethod
    def sanitize(grid: Grid, coeffs: np.ndarray, hermitianize: bool = False,
                 project: bool = False) -> "GridField":
        """Zero the mean mode and Nyquist planes; optionally symmetrize/project."""
        c = np.array(coeffs, dtype=np.complex128)
        if hermitianize:
            c = 0.5 * (c + np.conj(_conjugate_reverse(c, grid.dim)))
        nyq = grid.resolution // 2
        m = grid.mode_numbers()
        for ax in range(grid.dim):
            idx = [slice(None)] * (grid.dim + 1)
            idx[ax + 1] = np.where(m == -nyq)[0]
            c[tuple(idx)] = 0.0
        c[(slice(None),) + (0,) * grid.dim] = 0.0
        out = GridField(grid, c)
        if project:
            out = leray_project(out)
        return out

    # -- invariants ----------------------------------------------------------

    def hermitian_defect(self) -> float:
        c = self.coeffs
        mirror = np.conj(_conjugate_reverse(c, self.grid.dim))
        scale = np.max(np.abs(c)) or 1.0
        return float(np.max(np.abs(c - mirror)) / scale)

    def divergence_defect(self) -> float:
        """max_k |k . c(k)| / (|c(k)| |k|), zero modes excluded."""
        ks = self.grid.wavevectors()
        dot = sum(k * c for k, c in zip(ks, self.coeffs))
        knorm = self.grid.k_norm()
        cnorm = np.sqrt(sum(np.abs(c) ** 2 for c in self.coeffs))
        denom = knorm * cnorm
        mask = denom > 0
        if not np.any(mask):
            return 0.0
        return float(np.max(np.abs(dot[mask]) / denom[mask]))

    def validate(self) -> None:
        if self.hermitian_defect() > self.HERM_TOL:
            raise ValueError("coefficients are not Hermitian symmetric")
        if self.divergence_defect() > self.DIV_TOL:
            raise ValueError("field is not divergence-free")
        if np.any(self.coeffs[(slice(None),) + (0,) * self.grid.dim] != 0):
            raise ValueError("mean mode must be zero")

    # -- spectral functionals -------------------------------------------------

    def weighted_energy(self, weights: Optional[np.ndarray] = None) -> float:
        dens = np.sum(np.abs(self.coeffs) ** 2, axis=0)
        if weights is not None:
            dens = dens * weights
        return float(np.sum(dens) * self.grid.cell_measure)

    def heat(self, t: float) -> "GridField":
        if t < 0.0:
            raise ValueError("t must be >= 0")
        damp = np.exp(-t * np.square(self.grid.k_norm()))
        return GridField(self.grid, self.coeffs * damp)

    def scaled(self, lam: float) -> "GridField":
        return GridField(self.grid, lam * self.coeffs)

    def to_physical(self) -> np.ndarray:
        """Physical-space samples on the N^n grid, shape (dim, N, ..., N)."""
        g = self.grid
        scale = g.cell_measure * g.resolution ** g.dim / (2.0 * math.pi) ** (g.dim / 2.0)
        axes = tuple(range(1, g.dim + 1))
        phys = np.fft.ifftn(self.coeffs, axes=axes) * scale
        return np.real(phys)

    @staticmethod
    def from_physical(grid: Grid, samples: np.ndarray) -> "GridField":
        scale = grid.cell_measure * grid.resolution ** grid.dim / (2.0 * math.pi) ** (grid.dim / 2.0)
        axes = tuple(range(1, grid.dim + 1))
        c = np.fft.fftn(np.asarray(samples, dtype=float), axes=axes) / scale
        return GridField.sanitize(grid, c)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def leray_project(f: GridField) -> GridField:
    """Remove the gradient part: c(k) -> c(k) - k (k . c(k)) / |k|^2."""
    ks = f.grid.wavevectors()
    ksq = sum(np.square(k) for k in ks)
    inv = np.zeros_like(ksq)
    np.divide(1.0, ksq, out=inv, where=ksq > 0)
    dot = sum(k * c for k, c in zip(ks, f.coeffs)) * inv
    out = np.stack([c - k * dot for k, c in zip(ks, f.coeffs)])
    return GridField(f.grid, out)


@dataclass(frozen=True)
class FieldNorms:
    """L2 norm and homogeneous Sobolev norms ||D^l u|| for l in {1, 2}."""

    l2: float
    hdot: tuple[float, float]

    def as_dict(self) -> dict:
        return {"l2": self.l2, "hdot1": self.hdot[0], "hdot2": self.hdot[1]}


def norms(f: Field, rel_tol: Optional[float] = 1e-6) -> FieldNorms:
    """Compute (||u||, ||D u||, ||D^2 u||) spectrally.

    For radial profiles the quadrature tail below the floor is checked
    against rel_tol (relative to the value); a tail above tolerance
    raises QuadratureDivergence.  Pass rel_tol=None to skip the check for
    slowly converging spectra and accept the floor-truncated value.
    """
    if isinstance(f, GridField):
        knorm = f.grid.k_norm()
        l2 = math.sqrt(f.weighted_energy())
        h1 = math.sqrt(f.weighted_energy(np.square(knorm)))
        h2 = math.sqrt(f.weighted_energy(np.power(knorm, 4)))
        return FieldNorms(l2, (h1, h2))
    vals = []
    for ell in (0, 1, 2):
        value, tail = f.moment(2 * ell)
        if not math.isfinite(tail):
            raise QuadratureDivergence(
                f"||D^{ell} u||^2 integral diverges at r -> 0 for {f.label}")
        if rel_tol is not None and tail > rel_tol * max(value, 1e-300):
            raise QuadratureDivergence(
                f"quadrature tail {tail:.3e} above tolerance for ||D^{ell} u||^2 "
                f"of {f.label} (value {value:.3e})")
        vals.append(math.sqrt(value))
    return FieldNorms(vals[0], (vals[1], vals[2]))


def total_energy(f: Field, rel_tol: Optional[float] = None) -> float:
    """||u||^2; radial tail accepted silently unless rel_tol given."""
    if isinstance(f, GridField):
        return f.weighted_energy()
    value, tail = f.moment(0)
    if not math.isfinite(tail):
        raise QuadratureDivergence(f"energy integral diverges for {f.label}")
    if rel_tol is not None and tail > rel_tol * max(value, 1e-300):
        raise QuadratureDivergence(f"energy tail above tolerance for {f.label}")
    return value


def low_freq_mass(u0: Field, rho: float) -> float:
    """Spectral mass int_{|xi| <= rho} |u0_hat|^2 dxi.

    Grid fields use sharp lattice-ball membership |k| <= rho with cell
    measure k0^n; rho below 2 k0 is unresolvable.
    """
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    if isinstance(u0, GridField):
        g = u0.grid
        if rho < 2.0 * g.k0:
            raise MassUnresolvable(f"rho={rho} below grid resolution 2*k0={2*g.k0}")
        knorm = g.k_norm()
        mask = (knorm <= rho) & (knorm > 0)
        dens = np.sum(np.abs(u0.coeffs) ** 2, axis=0)
        return float(np.sum(dens[mask]) * g.cell_measure)
    value, tail = u0.moment(0, upper=rho)
    if not math.isfinite(tail):
        raise QuadratureDivergence(f"low-frequency mass diverges for {u0.label}")
    return value


# ---------------------------------------------------------------------------
# radial -> grid sampling
# ---------------------------------------------------------------------------


def swirl_directions(grid: Grid) -> np.ndarray:
    """Unit-normalized swirl vectors e(k) = (-i k_2, i k_1, 0)/|k| on the lattice.

    For n = 3 the swirl magnitude sqrt(k_1^2+k_2^2)/|k| averages 2/n over
    shells; a global sqrt(n/2) factor restores the radial energy
    convention in the mean.
    """
    ks = grid.wavevectors()
    knorm = grid.k_norm()
    inv = np.zeros_like(knorm)
    np.divide(1.0, knorm, out=inv, where=knorm > 0)
    n = grid.dim
    shape = (n,) + (grid.resolution,) * n
    e = np.zeros(shape, dtype=np.complex128)
    e[0] = -1j * np.broadcast_to(ks[1], knorm.shape) * inv
    e[1] = 1j * np.broadcast_to(ks[0], knorm.shape) * inv
    if n == 3:
        e *= math.sqrt(n / 2.0)
    return e


def sample_profile_to_grid(profile: RadialSpectralProfile, grid: Grid) -> GridField:
    """Realize a radial profile on the lattice with swirl angular structure."""
    if profile.dim != grid.dim:
        raise ValueError("profile and grid dimensions differ")
    knorm = grid.k_norm()
    amp = np.sqrt(profile.amplitude_at(knorm))
    coeffs = swirl_directions(grid) * amp
    return GridField.sanitize(grid, coeffs)
