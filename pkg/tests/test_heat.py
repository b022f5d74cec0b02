import math

import numpy as np
import pytest

import specdecay as sd


# ---------------------------------------------------------------------------
# heat evolution
# ---------------------------------------------------------------------------


def test_identity_at_t_zero(gaussian2):
    same = sd.heat_evolve(gaussian2, 0.0)
    assert sd.norms(same).l2 == sd.norms(gaussian2).l2


def test_gaussian_heat_closed_form(gaussian2):
    # ||e^{t Lap} u0||^2 = pi (1 + 2t)^{-2}
    for t in (0.0, 1.0, 10.0, 100.0):
        got = sd.norms(sd.heat_evolve(gaussian2, t)).l2 ** 2
        assert got == pytest.approx(math.pi * (1 + 2 * t) ** -2, rel=1e-10)


def test_semigroup_composition(gaussian2, random_field):
    a = sd.heat_evolve(sd.heat_evolve(gaussian2, 0.7), 2.3)
    b = sd.heat_evolve(gaussian2, 3.0)
    assert sd.norms(a).l2 == pytest.approx(sd.norms(b).l2, rel=1e-12)
    ga = sd.heat_evolve(sd.heat_evolve(random_field, 0.01), 0.02)
    gb = sd.heat_evolve(random_field, 0.03)
    assert sd.norms(ga).l2 == pytest.approx(sd.norms(gb).l2, rel=1e-12)


def test_heat_monotone(power_half):
    ts = np.geomspace(1e-3, 1e5, 25)
    l2s = [sd.norms(sd.heat_evolve(power_half, t)).l2 for t in ts]
    assert all(b <= a * (1 + 1e-13) for a, b in zip(l2s, l2s[1:]))


def test_v0_log_compensated_bounded(v0):
    # ||e^{t Lap} v0||^2 * log t bounded above and below on [1e2, 1e8]
    vals = [sd.norms(sd.heat_evolve(v0, t), rel_tol=None).l2 ** 2 * math.log(t)
            for t in np.geomspace(1e2, 1e8, 13)]
    assert min(vals) > 0
    assert max(vals) / min(vals) < 2.0


def test_heat_energy_identity(gaussian2, power_half):
    for prof, t in ((gaussian2, 5.0), (power_half, 40.0)):
        rep = sd.heat_energy_identity(prof, t)
        assert rep["residual_rel"] < 1e-6


def test_dissipation_block_bound(power_half, v0):
    # semigroup decay controlled by dyadic blocks: for sharp shells
    # ||e^{tL}u0||^2 <= sum_j e^{-(2/3)^2 4^j t} E_j + truncated mass
    for prof in (power_half, v0):
        s = sd.dyadic_blocks(prof, -40, 10)
        for t in (1.0, 10.0, 100.0):
            lhs = sd.norms(sd.heat_evolve(prof, t), rel_tol=None).l2 ** 2
            bound = float(np.sum(np.exp(-(2.0 / 3.0) ** 2 * 4.0 ** s.indices.astype(float) * t)
                                 * s.block_energy)) + s.truncated_mass
            assert lhs <= bound * (1 + 1e-10)


# ---------------------------------------------------------------------------
# Duhamel / Stokes flow
# ---------------------------------------------------------------------------


def _mode_forcing(grid, amplitude=0.7):
    gmode = sd.single_mode_field(grid, (1, 2), amplitude)
    return gmode


def test_duhamel_zero_forcing_equals_heat(small_grid):
    gmode = _mode_forcing(small_grid)
    f0 = sd.ForcingSpec(phi=lambda s: np.zeros_like(np.asarray(s)), g=gmode,
                        alpha=1.0, C_f=1.0)
    out, rep = sd.stokes_duhamel(gmode, f0, 1.3)
    assert np.array_equal(out.coeffs, gmode.heat(1.3).coeffs)
    assert rep.quad_error_estimate < 1e-12


def test_duhamel_single_mode_closed_form(small_grid):
    # u0 = 0, phi = e^{-s}, single mode k*: factor (e^{-t} - e^{-t lam})/(lam - 1)
    zero = sd.GridField.sanitize(small_grid, np.zeros((2, 32, 32), dtype=complex))
    gmode = _mode_forcing(small_grid)
    f = sd.ForcingSpec(phi=lambda s: np.exp(-np.asarray(s)), g=gmode, alpha=1.0, C_f=1.0)
    t, lam = 0.8, 5.0
    out, rep = sd.stokes_duhamel(zero, f, t, quad_nodes=32)
    fac = (math.exp(-t) - math.exp(-t * lam)) / (lam - 1.0)
    assert np.allclose(out.coeffs, gmode.coeffs * fac, rtol=1e-10, atol=1e-18)
    assert rep.quad_error_estimate < 1e-10


def test_duhamel_radial_matches_grid_factor():
    prof = sd.make_band_limited(2, 1.0, 2.0)
    zero = sd.make_zero_profile(2)
    f = sd.ForcingSpec(phi=lambda s: np.exp(-np.asarray(s)), g=prof, alpha=1.0, C_f=1.0)
    t = 0.5
    out, _ = sd.stokes_duhamel(zero, f, t)
    r = 1.5
    lam = r * r
    fac = (math.exp(-t) - math.exp(-t * lam)) / (lam - 1.0)
    got = out.amplitude_at(np.array([r]))[0]
    assert got == pytest.approx(prof.amplitude_at(np.array([r]))[0] * fac ** 2, rel=1e-9)


def test_duhamel_divergent_phi(small_grid):
    gmode = _mode_forcing(small_grid)
    f = sd.ForcingSpec(phi=lambda s: 1.0 / np.asarray(s), g=gmode, alpha=1.0, C_f=1.0)
    with pytest.raises(sd.QuadratureDivergence):
        sd.stokes_duhamel(gmode, f, 1.0)


def test_duhamel_forced_decay_rate():
    # phi = (1+s)^{-alpha-1}, alpha = 1: ||v(t)|| = O(t^{-1})
    prof = sd.make_power_law(2, 1.0, 1.0)
    f = sd.ForcingSpec(phi=lambda s: (1.0 + np.asarray(s)) ** -2.0, g=prof,
                       alpha=1.0, C_f=1.0)
    times = np.geomspace(1e2, 1e6, 13)
    dp = sd.decay_profile(sd.make_zero_profile(2), f, times)
    slope = np.polyfit(np.log(times), np.log(dp.l2), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.05)


# ---------------------------------------------------------------------------
# forcing bounds
# ---------------------------------------------------------------------------


def test_forcing_bound_zero_forcing(power_half):
    f = sd.ForcingSpec(phi=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
                       g=power_half, alpha=1.0, C_f=1.0)
    rep = sd.forcing_bound_check(f, np.geomspace(1, 100, 5))
    assert math.isinf(rep.worst_margin)
    assert rep.passed


def test_forcing_bound_exact_margin(power_half):
    g_l2 = sd.norms(power_half).l2
    f = sd.ForcingSpec(phi=lambda s: (1.0 + np.asarray(s)) ** -2.0, g=power_half,
                       alpha=1.0, C_f=g_l2)
    rep = sd.forcing_bound_check(f, np.geomspace(1, 1e4, 9))
    assert rep.worst_margin == pytest.approx(1.0, rel=1e-12)
    assert any("n = 2" in n for n in rep.notes)  # L^n skipped in 2D


def test_forcing_bound_wrong_claim_fails(power_half):
    g_l2 = sd.norms(power_half).l2
    f = sd.ForcingSpec(phi=lambda s: (1.0 + np.asarray(s)) ** -1.5, g=power_half,
                       alpha=1.0, C_f=g_l2)
    rep = sd.forcing_bound_check(f, np.geomspace(1, 1e4, 9))
    assert not rep.passed
    assert rep.worst_margin < 0.1


def test_forcing_bound_ln_checked_in_3d():
    grid = sd.Grid(3, 2 * math.pi, 16)
    prof = sd.make_band_limited(3, 2.0, 5.0)
    g3 = sd.sample_profile_to_grid(prof, grid)
    f = sd.ForcingSpec(phi=lambda s: np.asarray(s, dtype=float) ** -3.0, g=g3,
                       alpha=1.0, C_f=1e9, K_f=1e9)
    rep = sd.forcing_bound_check(f, [1.0, 2.0, 4.0])
    assert rep.ln_checked
    assert rep.ln_margins is not None and np.all(np.isfinite(rep.ln_margins))


# ---------------------------------------------------------------------------
# Fourier splitting
# ---------------------------------------------------------------------------


def test_splitting_holds_on_corpus(gaussian2, power_half, v0):
    for prof, sigma in ((gaussian2, 2.0), (power_half, 1.5), (v0, 0.5)):
        rep = sd.fourier_splitting_check(prof, sigma, [1.0, 10.0, 100.0])
        assert rep.inequality_holds
        for row in rep.rows:
            if row.fd_check_rel is not None:
                assert row.fd_check_rel < 1e-5


def test_splitting_zero_field():
    rep = sd.fourier_splitting_check(sd.make_zero_profile(2), 1.0, [1.0, 10.0])
    assert all(r.margin_rel == 0.0 for r in rep.rows)


def test_splitting_compensated_bounded_for_members(power_half):
    # sigma = kappa + n/2 = 1.5: rhs (1+t)^{1+sigma} within bounded ratio
    rep = sd.fourier_splitting_check(power_half, 1.5, np.geomspace(10, 1e6, 25))
    assert rep.compensated_ratio <= 10.0


def test_splitting_on_grid(random_field):
    rep = sd.fourier_splitting_check(random_field, 2.0, [0.01, 0.05], fd_points=0)
    assert rep.inequality_holds


# ---------------------------------------------------------------------------
# decay profiles
# ---------------------------------------------------------------------------


def test_decay_profile_gaussian_closed_form(gaussian2):
    times = np.geomspace(1e-2, 1e4, 40)
    prof = sd.decay_profile(gaussian2, None, times)
    want = np.sqrt(math.pi) / (1.0 + 2.0 * times)
    assert np.max(np.abs(prof.l2 - want) / want) < 1e-8


def test_decay_profile_slopes(power_half):
    # l2^2 slope -(kappa + n/2); hdot1 slope of l2-slope - 1/2
    times = np.geomspace(1e2, 1e6, 17)
    prof = sd.decay_profile(power_half, None, times)
    s_l2 = np.polyfit(np.log(times), np.log(prof.l2 ** 2), 1)[0]
    assert s_l2 == pytest.approx(-1.5, abs=0.015)
    s_h1 = np.polyfit(np.log(times), np.log(prof.hdot1), 1)[0]
    s_l2_unsq = np.polyfit(np.log(times), np.log(prof.l2), 1)[0]
    assert s_h1 - s_l2_unsq == pytest.approx(-0.5, abs=0.01)


def test_grid_horizon_enforced(random_field):
    horizon = sd.grid_horizon(random_field.grid)
    with pytest.raises(sd.HorizonExceeded):
        sd.decay_profile(random_field, None, [horizon / 10, horizon * 2])
    prof = sd.decay_profile(random_field, None, [horizon / 100, horizon / 2])
    assert prof.backend == "grid"
    assert prof.horizon == pytest.approx(horizon)


def test_decay_profile_validation():
    with pytest.raises(ValueError):
        sd.DecayProfile(np.array([1.0, 1.0]), np.ones(2), np.ones(2), np.ones(2), "radial")
    with pytest.raises(ValueError):
        sd.DecayProfile(np.array([1.0, 2.0]), -np.ones(2), np.ones(2), np.ones(2), "radial")


def test_decay_profile_csv(gaussian2):
    prof = sd.decay_profile(gaussian2, None, np.geomspace(1, 100, 6))
    rows = prof.csv_rows()
    assert list(rows[0].keys()) == ["t", "l2", "hdot1", "hdot2", "backend", "horizon_flag"]
    assert all(not r["horizon_flag"] for r in rows)
