import math

import numpy as np
import pytest

from dspstab.profile import (ConvergenceError, FamilyRangeError, ProfileFamily,
                             family_lipschitz_check, identify_delta, localization_rates,
                             mass_function, solve_family, solve_sdsp, step_datum,
                             write_family_manifest)
from dspstab.scheme import evolve, shock_pair
from dspstab.seqcore import TailedSeq, diff_seq, mass

# exponential rates of the profile tails: logs of the non-unit roots of the limit symbols,
# 0.65 k^2 - 0.8 k + 0.15 = 0 (right state) and 0.15 k^2 - 0.8 k + 0.65 = 0 (left state)
TAIL_RATE = math.log(0.65 / 0.15)


@pytest.mark.parametrize("delta,k,value", [
    (0.0, 0, 0.0), (0.5, 0, 0.5), (-0.5, 0, -0.5), (1.5, 1, -0.5), (-1.5, -1, 0.5)])
def test_step_datum_places_mass(shock, delta, k, value):
    u = step_datum(shock, delta, 10)
    assert u[k] == pytest.approx(value)
    assert mass(diff_seq(u, step_datum(shock, 0.0, 10))) == pytest.approx(delta)


def test_reference_profile_is_a_fixed_point(scheme, profile):
    assert profile.residual <= 1e-13
    r = evolve(scheme, profile.seq) - profile.seq
    assert r.max_abs() <= 1e-13


def test_reference_profile_is_odd_and_monotone(profile):
    u = profile.seq
    j = np.arange(-30, 31)
    vals = np.array([u[k] for k in j])
    np.testing.assert_allclose(vals, -vals[::-1], atol=1e-13)
    assert np.all(np.diff(vals) <= 1e-15)
    assert (u.left_tail, u.right_tail) == (1.0, -1.0)


def test_converged_initial_datum_needs_no_iteration(scheme, shock, profile):
    again = solve_sdsp(scheme, shock, 0.0, initial=profile.seq)
    assert again.iterations == 0


def test_convergence_error(scheme, shock):
    with pytest.raises(ConvergenceError):
        solve_sdsp(scheme, shock, 0.0, max_steps=5)


def test_rejects_non_entropic_shock(scheme):
    with pytest.raises(ValueError):
        solve_sdsp(scheme, shock_pair(scheme, -1.0, 1.0))


def test_mass_function_is_identity(family):
    for d in family.deltas:
        assert abs(mass_function(family, d) - d) <= 1e-8


def test_localization_rate_matches_symbol_roots(profile):
    loc = localization_rates(profile)
    assert loc.rate_left == pytest.approx(TAIL_RATE, rel=1e-3)
    assert loc.rate_right == pytest.approx(TAIL_RATE, rel=1e-3)
    assert loc.fit_quality["ok"]


def test_localization_flags_power_law_tails():
    j = np.arange(-200, 201)
    seq = TailedSeq(-200, -np.sign(j) * (1 - 1.0 / (1 + np.abs(j)) ** 2), 1.0, -1.0)
    assert not localization_rates(seq).fit_quality["ok"]


def test_family_lipschitz(family):
    rep = family_lipschitz_check(family)
    assert rep.passed
    assert rep.detail["c"] > 0 and rep.value < 10


@pytest.mark.parametrize("delta", [0.0, 0.25, -0.5])
def test_identify_delta_on_grid(family, delta):
    h = diff_seq(family.profile(delta).seq, family.reference.seq)
    assert identify_delta(family, h) == delta


def test_identify_delta_off_grid(family):
    # the mass function is the identity, so the mass of h is its delta
    h = TailedSeq(0, [0.1, 0.0, 0.0137])
    d = identify_delta(family, h)
    assert d == pytest.approx(0.1137, abs=1e-11)


def test_identify_delta_out_of_range(family):
    with pytest.raises(FamilyRangeError):
        identify_delta(family, TailedSeq(0, [3.0]))


def test_family_must_contain_reference(scheme, shock, profile):
    with pytest.raises(ValueError):
        ProfileFamily(shock, scheme, [(0.5, profile)])


def test_family_solve_is_thread_count_independent(scheme, shock, monkeypatch):
    a = solve_family(scheme, shock, (-0.25, 0.25), workers=1)
    b = solve_family(scheme, shock, (-0.25, 0.25), workers=3)
    for (da, pa), (db, pb) in zip(a.members, b.members):
        assert da == db and np.array_equal(pa.seq.values, pb.seq.values)


def test_manifest(tmp_path, family):
    p = tmp_path / "family.csv"
    write_family_manifest(p, family)
    lines = p.read_text().splitlines()
    assert lines[0] == "delta,mass,residual,iterations"
    assert len(lines) == 1 + len(family.members)
