import math

import numpy as np
import pytest

import specdecay as sd
from specdecay.dyadic import DyadicSpectrum, smooth_bump


def omega(n):
    return sd.sphere_area(n)


# ---------------------------------------------------------------------------
# block energies: closed forms
# ---------------------------------------------------------------------------


def test_power_law_blocks_closed_form():
    # kappa=1, n=2: E_j = 2 pi (2^4 - 1)/4 * 2^{4j} for 2^{j+1} <= cutoff
    p = sd.make_power_law(2, 1.0, 1.0)
    s = sd.dyadic_blocks(p, -10, 3)
    const = 2 * math.pi * (2 ** 4 - 1) / 4.0
    for j in range(-10, -1):
        assert s.energy(j) == pytest.approx(const * 2.0 ** (4 * j), rel=1e-12)
    # consecutive ratio 2^{2 kappa + n} = 16
    assert s.energy(-3) / s.energy(-4) == pytest.approx(16.0, rel=1e-12)
    # blocks above the cutoff vanish
    assert s.energy(1) == 0.0


def test_v0_blocks_closed_form(v0):
    # E_j = (omega/ln 2) / (|j| (|j|-1)) for shells [2^j, 2^{j+1}) with j <= -2
    s = sd.dyadic_blocks(v0, -32, 0)
    for j in (-2, -7, -15, -30):
        m = abs(j)
        want = (2 * math.pi / math.log(2)) / (m * (m - 1))
        assert s.energy(j) == pytest.approx(want, rel=1e-10)


def test_zero_field_blocks():
    s = sd.dyadic_blocks(sd.make_zero_profile(2), -10, 5)
    assert np.all(s.block_energy == 0.0)


def test_sharp_mass_accounting(gaussian2, power_half):
    for prof in (gaussian2, power_half):
        s = sd.dyadic_blocks(prof, -40, 10)
        total = sd.total_energy(prof)
        assert float(np.sum(s.block_energy)) + s.truncated_mass == pytest.approx(
            total, rel=1e-12)


def test_grid_blocks_window_guard(random_field):
    with pytest.raises(sd.WindowUnresolvable):
        sd.dyadic_blocks(random_field, -5, 3)


def test_grid_blocks_match_lattice_sum(random_field):
    s = sd.dyadic_blocks(random_field, 1, 4)
    g = random_field.grid
    knorm = g.k_norm()
    dens = np.sum(np.abs(random_field.coeffs) ** 2, axis=0) * g.cell_measure
    for j in range(1, 5):
        mask = (knorm >= 2.0 ** j) & (knorm < 2.0 ** (j + 1))
        assert s.energy(j) == pytest.approx(float(np.sum(dens[mask])), rel=1e-14)


# ---------------------------------------------------------------------------
# Besov seminorm
# ---------------------------------------------------------------------------


def test_besov_flat_ratio_power_law():
    p = sd.make_power_law(2, 0.5, 1.0)
    s = sd.dyadic_blocks(p, -30, 5)
    rep = sd.besov_seminorm(s, alpha=1.5)  # alpha = kappa + n/2
    flat = math.sqrt(2 * math.pi * (2 ** 3 - 1) / 3.0)
    deep = rep.ratios[(rep.indices >= -25) & (rep.indices <= -2)]
    assert np.allclose(deep, flat, rtol=1e-10)
    assert not rep.window_divergent


def test_besov_divergence_flag_v0(v0):
    s = sd.dyadic_blocks(v0, -40, 5)
    for alpha in (0.1, 0.5, 1.0):
        assert sd.besov_seminorm(s, alpha).window_divergent


def test_besov_single_block():
    s = DyadicSpectrum(-5, 5, np.array([0.0] * 5 + [1.0] + [0.0] * 5), 1.0, 0.0)
    rep = sd.besov_seminorm(s, 1.0)
    assert rep.seminorm == pytest.approx(1.0)
    assert rep.arg_sup == 0


def test_besov_monotone_in_alpha():
    # restricted to j <= 0 blocks, the sup is nondecreasing in alpha
    p = sd.make_power_law(2, 0.5, 1.0)
    s = sd.dyadic_blocks(p, -20, 0)
    vals = [sd.besov_seminorm(s, a).seminorm for a in (0.5, 1.0, 1.5, 2.0, 3.0)]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# membership verdicts
# ---------------------------------------------------------------------------


def test_script_A_power_law_true_at_matching_index():
    p = sd.make_power_law(2, 0.5, 1.0)
    s = sd.dyadic_blocks(p, -30, 5)
    v = sd.script_A_membership(s, 1.5, M=1)
    assert v.in_besov and v.in_script_A
    flat = math.sqrt(2 * math.pi * (2 ** 3 - 1) / 3.0)
    assert v.script_A_c == pytest.approx(flat, rel=1e-10)


def test_script_A_wrong_index_false():
    p = sd.make_power_law(2, 0.5, 1.0)
    s = sd.dyadic_blocks(p, -30, 5)
    low = sd.script_A_membership(s, 0.75, M=3)   # below the true index: vanishing
    assert low.in_besov and not low.in_script_A
    high = sd.script_A_membership(s, 2.5, M=3)   # above: upper bound fails
    assert not high.in_besov and not high.in_script_A


def test_script_A_v0_false(v0):
    s = sd.dyadic_blocks(v0, -40, 5)
    v = sd.script_A_membership(s, 0.1, M=1)
    assert not v.in_besov
    assert not v.in_script_A


def test_script_A_lacunary_stride_semantics():
    # blocks only at even j, sitting exactly on c 2^{alpha j}: the half-open
    # stride scan passes at M = 2 and fails at M = 1 (odd singleton strides)
    alpha = 1.0
    j_min, j_max = -20, 0
    js = np.arange(j_min, j_max + 1)
    energies = np.where(js % 2 == 0, np.exp2(2.0 * alpha * js), 0.0)
    s = DyadicSpectrum(j_min, j_max, energies, float(energies.sum()), 0.0)
    assert sd.script_A_membership(s, alpha, M=2).in_script_A
    assert not sd.script_A_membership(s, alpha, M=1).in_script_A


def test_script_A_window_pre():
    s = DyadicSpectrum(-4, 0, np.ones(5), 5.0, 0.0)
    with pytest.raises(ValueError, match="strides"):
        sd.script_A_membership(s, 1.0, M=3)


def test_v_alpha_power_law():
    p = sd.make_power_law(2, 0.5, 1.0)
    s = sd.dyadic_blocks(p, -30, 5)
    # ratio exponent 2 alpha = kappa + n/2 -> alpha = (2 kappa + n)/4
    v = sd.V_alpha_membership(s, alpha=0.75)
    flat = math.sqrt(2 * math.pi * (2 ** 3 - 1) / 3.0)
    assert v.in_V_alpha
    assert v.v_alpha_delta == pytest.approx(flat, rel=1e-10)
    assert v.v_alpha_j0 == -1


def test_v_alpha_band_limited_false():
    # nothing below the band: every j0 sees a zero deep block
    b = sd.make_band_limited(2, 2.0 ** -4, 0.5)
    s = sd.dyadic_blocks(b, -12, 0)
    v = sd.V_alpha_membership(s, 0.5)
    assert not v.in_V_alpha
    assert v.v_alpha_j0 is None


def test_v_alpha_implies_script_A_for_besov_members():
    # the inclusion chain on an ambient-space member
    p = sd.make_power_law(2, 0.5, 1.0)
    s = sd.dyadic_blocks(p, -30, 5)
    v = sd.V_alpha_membership(s, 0.75)
    assert v.in_V_alpha and v.in_besov
    assert v.in_script_A


# ---------------------------------------------------------------------------
# equivalent norm
# ---------------------------------------------------------------------------


def test_equivalent_norm_single_blocks():
    e = np.zeros(11)
    e[5] = 1.0  # block at j = 0
    s = DyadicSpectrum(-5, 5, e, 1.0, 0.0)
    # block exactly at j0: only the sup term, 2^{-2 alpha j0}
    assert sd.equivalent_norm(s, 1.0, 0) == pytest.approx(1.0)
    assert sd.equivalent_norm(s, 1.0, -1) == pytest.approx(1.0)  # energy term
    e2 = np.zeros(11)
    e2[6] = 1.0  # block at j0 + 1 with j0 = 0
    s2 = DyadicSpectrum(-5, 5, e2, 1.0, 0.0)
    assert sd.equivalent_norm(s2, 1.0, 0) == pytest.approx(1.0)


def test_equivalent_norm_brute_force_oracle():
    p = sd.make_power_law(2, 0.5, 1.0)
    s = sd.dyadic_blocks(p, -20, 3)
    alpha = (2 * 0.5 + 2) / 4.0
    j0 = -1
    norms_ = np.sqrt(s.block_energy)
    ratios = np.exp2(-2 * alpha * s.indices) * norms_
    want = float(np.max(ratios[s.indices <= j0])) + math.sqrt(
        float(np.sum(s.block_energy[s.indices > j0])))
    assert sd.equivalent_norm(s, alpha, j0) == pytest.approx(want, rel=1e-14)
    with pytest.raises(ValueError):
        sd.equivalent_norm(s, alpha, 99)


# ---------------------------------------------------------------------------
# scaling covariance and smooth mode
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("lam", [0.01, 3.7, 250.0])
def test_scaling_covariance(lam):
    p = sd.make_power_law(2, 0.5, 1.0)
    s = sd.dyadic_blocks(p, -30, 5)
    s_scaled = s.scaled(lam)
    v = sd.script_A_membership(s, 1.5, M=2)
    vs = sd.script_A_membership(s_scaled, 1.5, M=2)
    assert v.in_script_A == vs.in_script_A
    assert v.in_V_alpha == vs.in_V_alpha
    assert vs.script_A_c == pytest.approx(lam * v.script_A_c, rel=1e-12)
    assert vs.besov_constant == pytest.approx(lam * v.besov_constant, rel=1e-12)
    assert vs.v_alpha_delta == pytest.approx(lam * v.v_alpha_delta, rel=1e-12)


def test_smooth_bump_partition_of_unity():
    rho = np.geomspace(0.01, 100.0, 400)
    total = sum(smooth_bump(rho / 2.0 ** j) for j in range(-12, 12))
    assert np.allclose(total, 1.0, atol=1e-12)
    # support inside [3/4, 8/3]
    assert np.all(smooth_bump(np.array([0.74, 2.67])) == 0.0)
    assert smooth_bump(np.array([1.0]))[0] > 0


def test_membership_verdicts_sharp_vs_smooth():
    corpus = [
        (sd.make_power_law(2, 0.5, 1.0), 1.5),
        (sd.make_power_law(3, 1.0, 1.0), 2.5),
        (sd.make_gaussian_swirl(2), 2.0),
        (sd.make_log_counterexample(2), 0.5),
    ]
    for prof, sigma in corpus:
        sharp = sd.dyadic_blocks(prof, -25, 5, mode="sharp")
        smooth = sd.dyadic_blocks(prof, -25, 5, mode="smooth")
        a = sd.script_A_membership(sharp, sigma, M=3)
        b = sd.script_A_membership(smooth, sigma, M=3)
        assert a.in_script_A == b.in_script_A
        assert a.in_besov == b.in_besov


def test_csv_rows(power_half):
    s = sd.dyadic_blocks(power_half, -5, 2)
    rows = sd.spectrum_to_csv_rows(s, alpha=1.5)
    assert [r["j"] for r in rows] == list(range(-5, 3))
    assert all("ratio_for_alpha" in r for r in rows)
    rows_plain = sd.spectrum_to_csv_rows(s)
    assert all("ratio_for_alpha" not in r for r in rows_plain)
