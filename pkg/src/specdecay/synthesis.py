"""Constructions of the explicit data the decay theorems are tested on.

* power-law profiles A(r) = r^{2 kappa} 1_{r <= cutoff}: canonical
  members of the two-sided class, squared-norm decay exponent
  sigma = kappa + n/2;
* the logarithmic counterexample A(r) = r^{-n} (log r)^{-2} 1_{r <= 1/2}
  whose low-frequency mass decays like 1/|log rho|, defeating every
  algebraic rate;
* the deep-block perturbation that pushes any datum into the
  lower-bound class V_alpha by replacing under-threshold blocks with
  swirl-carrying dyadic shells;
* seeded random divergence-free grid fields with a radial envelope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .dyadic import DEFAULT_WINDOW, dyadic_blocks
from .errors import InfiniteEnergy
from .fields import (Field, Grid, GridField, RadialSpectralProfile,
                     sphere_area, swirl_directions)
from .quadrature import QuadratureSpec

__all__ = [
    "SynthesisRecipe",
    "make_power_law",
    "make_gaussian_swirl",
    "make_band_limited",
    "make_zero_profile",
    "make_log_counterexample",
    "make_v_alpha_perturbation",
    "make_random_div_free",
    "shell_constant",
    "PerturbationReport",
    "build_recipe",
    "build_recipe_with_report",
]


def make_power_law(n: int, kappa: float, cutoff: float = 1.0,
                   quadrature: Optional[QuadratureSpec] = None) -> RadialSpectralProfile:
    """A(r) = r^{2 kappa} for r <= cutoff; finite energy requires kappa > -n/2."""
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    if kappa <= -n / 2.0:
        raise InfiniteEnergy(f"kappa={kappa} <= -n/2 gives divergent energy near 0")

    def amplitude(r, _k=kappa):
        return np.power(np.asarray(r, dtype=float), 2.0 * _k)

    return RadialSpectralProfile(
        dim=n, amplitude=amplitude, support=(0.0, cutoff),
        quadrature=quadrature or QuadratureSpec(),
        descriptor={"kind": "power_law", "dim": n, "params": {"kappa": kappa, "cutoff": cutoff}},
        label=f"power_law(kappa={kappa}, n={n})")


def make_gaussian_swirl(n: int = 2, amplitude_scale: float = 1.0) -> RadialSpectralProfile:
    """A(r) = a r^2 e^{-r^2}; for n = 2, a = 1 the heat flow is pi (1+2t)^{-2}."""

    def amplitude(r, _a=amplitude_scale):
        r = np.asarray(r, dtype=float)
        return _a * np.square(r) * np.exp(-np.square(r))

    return RadialSpectralProfile(
        dim=n, amplitude=amplitude, support=(0.0, 26.0),
        descriptor={"kind": "gaussian_swirl", "dim": n,
                    "params": {"amplitude_scale": amplitude_scale}},
        label=f"gaussian_swirl(n={n})")


def make_band_limited(n: int, r_lo: float, r_hi: float,
                      level: float = 1.0) -> RadialSpectralProfile:
    """Flat spectrum on [r_lo, r_hi], vanishing near 0 (no algebraic decay class)."""
    if not 0 < r_lo < r_hi:
        raise ValueError("need 0 < r_lo < r_hi")

    def amplitude(r, _lvl=level):
        return np.full_like(np.asarray(r, dtype=float), _lvl)

    return RadialSpectralProfile(
        dim=n, amplitude=amplitude, support=(r_lo, r_hi),
        descriptor={"kind": "band_limited", "dim": n,
                    "params": {"r_lo": r_lo, "r_hi": r_hi, "level": level}},
        label=f"band_limited(n={n})")


def make_zero_profile(n: int) -> RadialSpectralProfile:
    return RadialSpectralProfile(
        dim=n, amplitude=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        support=(0.0, 1.0),
        descriptor={"kind": "zero", "dim": n, "params": {}}, label=f"zero(n={n})")


def make_log_counterexample(n: int,
                            quadrature: Optional[QuadratureSpec] = None) -> RadialSpectralProfile:
    """The meagerness witness: A(r) = r^{-n} (log r)^{-2} for r <= 1/2.

    Finite energy (omega_{n-1}/log 2), but its low-frequency mass decays
    only like |log rho|^{-1}, so rho^{-2 alpha} mass(rho) -> infinity for
    every alpha > 0.  log is natural.
    """
    if n < 2:
        raise ValueError("n must be >= 2")

    def amplitude(r):
        r = np.asarray(r, dtype=float)
        return r ** (-float(n)) * np.log(r) ** -2.0

    return RadialSpectralProfile(
        dim=n, amplitude=amplitude, support=(0.0, 0.5),
        quadrature=quadrature or QuadratureSpec(),
        descriptor={"kind": "log_counterexample", "dim": n, "params": {}},
        label=f"log_counterexample(n={n})")


# ---------------------------------------------------------------------------
# V_alpha perturbation
# ---------------------------------------------------------------------------


def shell_constant(n: int) -> float:
    """c_n = sqrt(omega_{n-1} (2^n - 1)/n): per-block norm of the unit
    replacement shell under this package's spectral normalization."""
    return math.sqrt(sphere_area(n) * (2.0 ** n - 1.0) / n)


@dataclass(frozen=True)
class PerturbationReport:
    """Per-block verification of the two perturbation proof claims."""

    alpha: float
    epsilon: float
    j0: int
    c_n: float
    j: np.ndarray
    kept: np.ndarray
    ratio_w: np.ndarray          # 2^{-2 alpha j} ||Delta_j w|| for j <= j0
    ratio_diff: np.ndarray       # 2^{-2 alpha j} ||Delta_j (u0 - w)|| for j <= j0
    lower_bound_ok: bool         # ratio_w >= min(1, c_n) * eps on every deep block
    distance_paper_ok: bool      # ratio_diff <= 2 eps (paper's normalization claim)
    distance_derived_ok: bool    # ratio_diff <= (1 + c_n) eps (triangle bound)
    upper_blocks_unchanged: bool


def make_v_alpha_perturbation(u0: Field, alpha: float, epsilon: float, j0: int,
                              window: tuple[int, int] = DEFAULT_WINDOW,
                              ) -> tuple[Field, PerturbationReport]:
    """Replace under-threshold deep blocks of u0 with swirl shells.

    Blocks j > j0 (and deep blocks whose ratio 2^{-2 alpha j}
    ||Delta_j u0|| already meets epsilon, ties kept) are left untouched;
    the others become eps 2^{2 alpha j - n j / 2} shells on
    {2^j <= |xi| < 2^{j+1}}.  Window-limited: only blocks inside the
    analysis window are eligible for replacement.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    j_min, j_max = window
    if not j_min <= j0 <= j_max:
        raise ValueError("j0 must lie inside the window")
    n = u0.dim if isinstance(u0, RadialSpectralProfile) else u0.grid.dim
    spectrum = dyadic_blocks(u0, j_min, j_max)
    deep = np.arange(j_min, j0 + 1)
    ratios_u = spectrum.ratios(2.0 * alpha)[:deep.size]
    kept = ratios_u >= epsilon

    # replacement squared amplitude on shell j: (eps 2^{2 alpha j - n j/2})^2
    rep_amp = {int(j): (epsilon * 2.0 ** (2.0 * alpha * j - n * j / 2.0)) ** 2
               for j, k in zip(deep, kept) if not k}

    if isinstance(u0, RadialSpectralProfile):
        w = _perturb_radial(u0, rep_amp, j_min, j0)
    else:
        w = _perturb_grid(u0, rep_amp)

    spectrum_w = dyadic_blocks(w, j_min, j_max)
    ratio_w = spectrum_w.ratios(2.0 * alpha)[:deep.size]
    diff_energy = _difference_blocks(u0, w, deep)
    ratio_diff = np.exp2(-2.0 * alpha * deep) * np.sqrt(diff_energy)

    c_n = shell_constant(n)
    lower_req = min(1.0, c_n) * epsilon * (1.0 - 1e-10)
    upper_same = bool(np.allclose(
        spectrum.block_energy[deep.size:], spectrum_w.block_energy[deep.size:],
        rtol=1e-12, atol=0.0))
    report = PerturbationReport(
        alpha=alpha, epsilon=epsilon, j0=j0, c_n=c_n, j=deep, kept=kept,
        ratio_w=ratio_w, ratio_diff=ratio_diff,
        lower_bound_ok=bool(np.all(ratio_w >= lower_req)),
        distance_paper_ok=bool(np.all(ratio_diff <= 2.0 * epsilon * (1.0 + 1e-10))),
        distance_derived_ok=bool(np.all(ratio_diff <= (1.0 + c_n) * epsilon * (1.0 + 1e-10))),
        upper_blocks_unchanged=upper_same)
    return w, report


def _perturb_radial(u0: RadialSpectralProfile, rep_amp: dict, j_min: int, j0: int):
    base_at = u0.amplitude_at
    items = sorted(rep_amp.items())
    edges = np.array([2.0 ** j for j, _ in items])
    tops = np.array([2.0 ** (j + 1) for j, _ in items])
    vals = np.array([a for _, a in items])

    def amplitude(r):
        r = np.asarray(r, dtype=float)
        out = np.array(base_at(r), dtype=float)
        for lo, hi, a in zip(edges, tops, vals):
            mask = (r >= lo) & (r < hi)
            out[mask] = a
        return out

    lo_support, hi_support = u0.support
    if rep_amp:
        lo_support = min(lo_support, float(edges[0]))
        hi_support = max(hi_support, float(tops[-1]))
    src = u0.descriptor or {"kind": "opaque"}
    return RadialSpectralProfile(
        dim=u0.dim, amplitude=amplitude, support=(lo_support, hi_support),
        quadrature=u0.quadrature, heat_time=0.0,
        descriptor={"kind": "v_alpha_perturbation", "dim": u0.dim,
                    "params": {"source": src, "replaced_j": sorted(rep_amp)}},
        label=f"v_alpha_perturbation({u0.label})")


def _perturb_grid(u0: GridField, rep_amp: dict) -> GridField:
    g = u0.grid
    knorm = g.k_norm()
    coeffs = np.array(u0.coeffs)
    e = swirl_directions(g)
    for j, amp in rep_amp.items():
        mask = (knorm >= 2.0 ** j) & (knorm < 2.0 ** (j + 1))
        coeffs[:, mask] = (e * math.sqrt(amp))[:, mask]
    return GridField.sanitize(g, coeffs)


def _difference_blocks(u0: Field, w: Field, deep: np.ndarray) -> np.ndarray:
    """||Delta_j (u0 - w)||^2 for the deep blocks, exact per backend."""
    if isinstance(u0, RadialSpectralProfile):
        omega = sphere_area(u0.dim)
        n = u0.dim
        from .quadrature import integrate_interval

        out = np.empty(deep.size)
        for i, j in enumerate(deep):
            lo, hi = 2.0 ** j, 2.0 ** (j + 1)

            def integrand(r):
                da = np.sqrt(u0.amplitude_at(r)) - np.sqrt(w.amplitude_at(r))
                return np.square(da) * r ** (n - 1)

            out[i] = omega * integrate_interval(integrand, lo, hi, u0.quadrature)
        return out
    knorm = u0.grid.k_norm()
    dens = np.sum(np.abs(u0.coeffs - w.coeffs) ** 2, axis=0) * u0.grid.cell_measure
    out = np.empty(deep.size)
    for i, j in enumerate(deep):
        mask = (knorm >= 2.0 ** j) & (knorm < 2.0 ** (j + 1))
        out[i] = float(np.sum(dens[mask]))
    return out


# ---------------------------------------------------------------------------
# random divergence-free grid fields
# ---------------------------------------------------------------------------


def make_random_div_free(grid: Grid, seed: int,
                         envelope: Callable[[np.ndarray], np.ndarray]) -> GridField:
    """Seeded random Hermitian field, Leray-projected and envelope-shaped.

    envelope(r) >= 0 multiplies the coefficient magnitude at |k| = r, so
    dyadic block energies follow envelope^2.  Identical seed gives a
    bit-identical field.
    """
    rng = np.random.default_rng(seed)
    shape = (grid.dim,) + (grid.resolution,) * grid.dim
    raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    knorm = grid.k_norm()
    env = np.asarray(envelope(knorm), dtype=float)
    if np.any(env < 0) or not np.all(np.isfinite(env)):
        raise ValueError("envelope must be finite and >= 0")
    f = GridField.sanitize(grid, raw * env, hermitianize=True, project=True)
    return f


# ---------------------------------------------------------------------------
# recipes
# ---------------------------------------------------------------------------


_RECIPE_KINDS = ("power_law", "gaussian_swirl", "band_limited", "zero",
                 "log_counterexample", "random_envelope", "v_alpha_perturbation")


@dataclass(frozen=True)
class SynthesisRecipe:
    """Declarative description of a synthesized datum (JSON-serializable)."""

    kind: str
    dim: int
    params: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _RECIPE_KINDS:
            raise ValueError(f"unknown recipe kind {self.kind!r}")

    def descriptor(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "params": dict(self.params)}

    def build(self, grid: Optional[Grid] = None) -> Field:
        return build_recipe(self.descriptor(), grid)


def build_recipe(descriptor: dict, grid: Optional[Grid] = None) -> Field:
    """Instantiate a field from its JSON descriptor."""
    field_, _ = build_recipe_with_report(descriptor, grid)
    return field_


def build_recipe_with_report(descriptor: dict, grid: Optional[Grid] = None,
                             ) -> tuple[Field, Optional[PerturbationReport]]:
    """Like build_recipe, returning the perturbation report when one applies."""
    kind = descriptor["kind"]
    if kind == "v_alpha_perturbation":
        p = descriptor.get("params", {})
        source, _ = build_recipe_with_report(p["source"], grid)
        window = tuple(p.get("window", DEFAULT_WINDOW))
        w, report = make_v_alpha_perturbation(
            source, float(p["alpha"]), float(p["epsilon"]), int(p["j0"]), window)
        return w, report
    return _build_simple(descriptor, grid), None


def _build_simple(descriptor: dict, grid: Optional[Grid] = None) -> Field:
    kind = descriptor["kind"]
    n = int(descriptor.get("dim", 2))
    p = descriptor.get("params", {})
    if kind == "power_law":
        return make_power_law(n, float(p["kappa"]), float(p.get("cutoff", 1.0)))
    if kind == "gaussian_swirl":
        return make_gaussian_swirl(n, float(p.get("amplitude_scale", 1.0)))
    if kind == "band_limited":
        return make_band_limited(n, float(p["r_lo"]), float(p["r_hi"]),
                                 float(p.get("level", 1.0)))
    if kind == "zero":
        return make_zero_profile(n)
    if kind == "log_counterexample":
        return make_log_counterexample(n)
    if kind == "random_envelope":
        if grid is None:
            grid = Grid(n, float(p.get("box_length", 2 * math.pi)),
                        int(p.get("resolution", 64)))
        exponent = float(p.get("envelope_exponent", 0.0))
        cutoff = float(p.get("cutoff", math.inf))

        def envelope(r, _e=exponent, _c=cutoff):
            r = np.asarray(r, dtype=float)
            out = np.zeros_like(r)
            mask = (r > 0) & (r <= _c)
            out[mask] = r[mask] ** _e
            return out

        return make_random_div_free(grid, int(p.get("seed", 0)), envelope)
    raise ValueError(f"unknown recipe kind {kind!r}")
