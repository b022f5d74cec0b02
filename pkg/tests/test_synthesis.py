import math

import numpy as np
import pytest

import specdecay as sd


def test_power_law_requires_finite_energy():
    with pytest.raises(sd.InfiniteEnergy):
        sd.make_power_law(2, -1.0)
    with pytest.raises(sd.InfiniteEnergy):
        sd.make_power_law(3, -1.5)
    with pytest.raises(ValueError):
        sd.make_power_law(2, 1.0, cutoff=-1.0)


def test_power_law_canonical_exponents():
    # kappa = 0, n = 2: flat spectrum, squared-norm exponent sigma = 1,
    # squared-mass exponent 2 sigma = 2 kappa + n = 2
    p = sd.make_power_law(2, 0.0, 1.0)
    times = np.geomspace(10, 1e5, 41)
    cert = sd.fit_rate(sd.decay_profile(p, None, times), (10, 1e5))
    assert cert.sigma_hat == pytest.approx(1.0, abs=0.02)
    assert cert.convention.mass_exponent == pytest.approx(2.0, abs=0.04)
    assert cert.verdict == "two_sided"


def test_power_law_membership_at_sigma():
    p = sd.make_power_law(2, 1.5, 1.0)  # steep profile, sigma = 2.5
    s = sd.dyadic_blocks(p, -30, 5)
    assert sd.script_A_membership(s, 2.5, M=3).in_script_A


def test_log_counterexample_energy(v0):
    # omega_{n-1}/log 2 up to the documented floor truncation
    assert sd.total_energy(v0) == pytest.approx(2 * math.pi / math.log(2), rel=0.02)
    v3 = sd.make_log_counterexample(3)
    assert sd.total_energy(v3) == pytest.approx(4 * math.pi / math.log(2), rel=0.02)


def test_log_counterexample_mass_asymptotics(v0):
    # omega/|log rho| shape (floor truncation biases low by |log rho|/|log floor|,
    # 13% at rho = 1e-4) and compensated divergence for every alpha
    for rho in (1e-2, 1e-4):
        deficit = abs(math.log(rho)) / abs(math.log(v0.quadrature.r_floor))
        assert sd.low_freq_mass(v0, rho) == pytest.approx(
            2 * math.pi / abs(math.log(rho)), rel=deficit + 0.01)
    # rho^{-2 alpha} mass increases monotonically toward small rho
    ladder = [10.0 ** -k for k in range(2, 9)]
    comp = [r ** -0.2 * sd.low_freq_mass(v0, r) for r in ladder]
    assert all(b > a for a, b in zip(comp, comp[1:]))


# ---------------------------------------------------------------------------
# V_alpha perturbation
# ---------------------------------------------------------------------------


def test_shell_constant_values():
    assert sd.shell_constant(2) == pytest.approx(math.sqrt(3 * math.pi), rel=1e-14)
    assert sd.shell_constant(3) == pytest.approx(
        math.sqrt(4 * math.pi * 7 / 3), rel=1e-14)


def test_perturbation_zero_source_exact_shells():
    # every block replaced: ||Delta_j w|| = eps c_n 2^{2 alpha j} exactly
    alpha, eps, j0 = 0.25, 0.1, -3
    w, rep = sd.make_v_alpha_perturbation(sd.make_zero_profile(2), alpha, eps, j0)
    c2 = sd.shell_constant(2)
    assert not rep.kept.any()
    assert np.allclose(rep.ratio_w, c2 * eps, rtol=1e-10)
    assert np.allclose(rep.ratio_diff, c2 * eps, rtol=1e-10)
    assert rep.lower_bound_ok and rep.distance_derived_ok
    assert rep.upper_blocks_unchanged
    s = sd.dyadic_blocks(w, -40, 10)
    v = sd.V_alpha_membership(s, alpha)
    assert v.in_V_alpha
    assert v.v_alpha_delta == pytest.approx(c2 * eps, rel=1e-9)


def test_perturbation_identity_when_all_blocks_large(v0):
    # v0's deep ratios grow without bound: every block is kept, w = u0
    w, rep = sd.make_v_alpha_perturbation(v0, 0.25, 0.1, -3)
    assert rep.kept.all()
    assert np.all(rep.ratio_diff == 0.0)
    assert rep.distance_paper_ok
    for r in (0.01, 0.2, 0.4):
        assert w.amplitude_at(np.array([r]))[0] == pytest.approx(
            v0.amplitude_at(np.array([r]))[0], rel=1e-14)


def test_perturbation_locality_above_j0():
    p = sd.make_power_law(2, 1.0, 1.0)
    w, rep = sd.make_v_alpha_perturbation(p, 0.25, 0.5, -4)
    s_u = sd.dyadic_blocks(p, -40, 10)
    s_w = sd.dyadic_blocks(w, -40, 10)
    above = s_u.indices > -4
    assert np.array_equal(s_u.block_energy[above], s_w.block_energy[above])
    assert rep.upper_blocks_unchanged


def test_perturbation_threshold_ties_keep_original():
    # build a spectrum whose block at j = -2 sits exactly on the threshold
    alpha, eps = 0.25, 0.1
    j = -2
    level = (eps * 2.0 ** (2 * alpha * j)) ** 2 / (
        2 * math.pi * (2.0 ** (2 * 0 + 2) - 1) / 2.0 * 2.0 ** (2 * j))
    # flat profile A = const on the single shell [2^j, 2^{j+1})
    prof = sd.make_band_limited(2, 2.0 ** j, 2.0 ** (j + 1), level)
    s = sd.dyadic_blocks(prof, -10, 0)
    ratio = s.ratios(2 * alpha)[s.indices == j][0]
    # adjust eps to the exact computed ratio and check the tie branch
    w, rep = sd.make_v_alpha_perturbation(prof, alpha, float(ratio), j)
    assert rep.kept[rep.j == j][0]


def test_perturbation_grid_backend(small_grid):
    env = lambda r: np.where((r > 0) & (r <= 8.0), 1.0, 0.0)
    u0 = sd.make_random_div_free(small_grid, 5, env)
    w, rep = sd.make_v_alpha_perturbation(u0, 0.25, 1e-6, 1, window=(1, 4))
    w.validate()
    s_u = sd.dyadic_blocks(u0, 1, 4)
    s_w = sd.dyadic_blocks(w, 1, 4)
    assert np.array_equal(s_u.block_energy[s_u.indices > 1], s_w.block_energy[s_w.indices > 1])


def test_perturbation_validation(v0):
    with pytest.raises(ValueError):
        sd.make_v_alpha_perturbation(v0, 0.25, -0.1, -3)
    with pytest.raises(ValueError):
        sd.make_v_alpha_perturbation(v0, 0.25, 0.1, 99)


# ---------------------------------------------------------------------------
# random fields
# ---------------------------------------------------------------------------


def test_random_div_free_determinism(small_grid):
    env = lambda r: np.where((r > 0) & (r <= 10.0), (1.0 + r) ** -1.0, 0.0)
    a = sd.make_random_div_free(small_grid, 99, env)
    b = sd.make_random_div_free(small_grid, 99, env)
    assert np.array_equal(a.coeffs, b.coeffs)
    c = sd.make_random_div_free(small_grid, 100, env)
    assert not np.array_equal(a.coeffs, c.coeffs)


def test_random_div_free_invariants(small_grid):
    env = lambda r: np.where((r > 0) & (r <= 10.0), 1.0, 0.0)
    f = sd.make_random_div_free(small_grid, 11, env)
    f.validate()  # hermitian, divergence-free, mean-zero
    assert sd.norms(f).l2 > 0


def test_random_envelope_block_slope():
    # dyadic block slopes track the envelope exponent within the random band
    grid = sd.Grid(2, 64 * math.pi, 128)
    kappa = -0.5
    env = lambda r: np.where((r > 0) & (r <= 2.0), np.power(r, kappa, where=r > 0), 0.0)
    f = sd.make_random_div_free(grid, 21, env)
    s = sd.dyadic_blocks(f, -4, 0)
    slope = np.polyfit(s.indices.astype(float), np.log2(s.block_energy), 1)[0]
    assert slope == pytest.approx(2 * kappa + 2, abs=0.1 * abs(2 * kappa + 2) + 0.05)


def test_random_envelope_rejects_bad_envelope(small_grid):
    with pytest.raises(ValueError):
        sd.make_random_div_free(small_grid, 0, lambda r: -np.ones_like(r))


# ---------------------------------------------------------------------------
# recipes
# ---------------------------------------------------------------------------


def test_recipe_round_trip():
    rec = sd.SynthesisRecipe("power_law", 2, {"kappa": 0.5, "cutoff": 1.0})
    prof = rec.build()
    assert sd.total_energy(prof) == pytest.approx(2 * math.pi / 3.0, rel=1e-10)
    again = sd.build_recipe(rec.descriptor())
    assert sd.total_energy(again) == pytest.approx(sd.total_energy(prof), rel=1e-14)


def test_recipe_perturbation_kind():
    desc = {
        "kind": "v_alpha_perturbation", "dim": 2,
        "params": {"alpha": 0.25, "epsilon": 0.1, "j0": -3,
                   "source": {"kind": "zero", "dim": 2}},
    }
    from specdecay.synthesis import build_recipe_with_report

    w, rep = build_recipe_with_report(desc)
    assert rep is not None and rep.lower_bound_ok
    assert sd.total_energy(w) > 0


def test_recipe_unknown_kind():
    with pytest.raises(ValueError):
        sd.SynthesisRecipe("mystery", 2)
    with pytest.raises(ValueError):
        sd.build_recipe({"kind": "mystery", "dim": 2})
