from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, strategies as st

from uplink_ini.numerology import (
    ALLOWED_MU, Scenario, ScenarioError, UeNumerology, assign_bands, frame_aligned, make_scenario,
    partition_users, scaling_factor, validate_scenario,
)


def ue(ue_id, mu, N, offset=0, fs=256 * 60e3):
    return UeNumerology(ue_id, mu, N, offset, fs / 2 ** mu)


def test_scaling_factor_examples():
    assert scaling_factor(ue(1, 8, 1), ue(2, 7, 1)) == 2
    assert scaling_factor(ue(1, 8, 1), ue(2, 8, 1)) == 1
    assert scaling_factor(ue(1, 6, 1), ue(2, 9, 1)) == Fraction(1, 8)


@given(st.sampled_from(ALLOWED_MU), st.sampled_from(ALLOWED_MU), st.sampled_from(ALLOWED_MU))
def test_scaling_factor_transitive(a, b, c):
    x, y, z = ue(1, a, 1), ue(2, b, 1), ue(3, c, 1)
    assert scaling_factor(x, y) * scaling_factor(y, z) == scaling_factor(x, z)
    assert scaling_factor(x, y) * scaling_factor(y, x) == 1


def test_partition_examples():
    sc = Scenario(ues=assign_bands([8, 7, 8], [64, 64, 64]))
    p = partition_users(1, sc)
    assert p.higher == {2} and p.lower == set() and p.same == {3}
    sc = Scenario(ues=assign_bands([8, 9], [128, 256]))
    p = partition_users(1, sc)
    assert p.higher == set() and p.lower == {2} and p.same == set()
    sc = Scenario(ues=assign_bands([8], [256]))
    p = partition_users(1, sc)
    assert not (p.higher or p.lower or p.same)
    with pytest.raises(KeyError):
        partition_users(9, sc)


def test_partition_disjoint_cover(three_ue):
    for v in three_ue.ids:
        p = partition_users(v, three_ue)
        assert not (p.higher & p.lower or p.higher & p.same or p.lower & p.same)
        assert p.higher | p.lower | p.same == set(three_ue.ids) - {v}


def test_validate_ok_examples():
    assert validate_scenario(Scenario(ues=assign_bands([8, 7], [128, 64]))) == []
    assert validate_scenario(Scenario(ues=assign_bands([8, 7, 8], [64, 64, 64]))) == []


def test_validate_fraction_deficit():
    errors = validate_scenario(Scenario(ues=assign_bands([8, 7], [128, 32])))
    assert any("sum to 3/4" in e and "deficit 1/4" in e for e in errors)


def test_validate_reports_each_violation():
    ues = [UeNumerology(1, 5, 40, 0, 1e3), UeNumerology(2, 8, 300, 0, 60e3)]
    errors = validate_scenario(Scenario(ues=ues, channel_taps=50, p_out=1.5))
    text = "\n".join(errors)
    assert "UE 1: mu=5" in text
    assert "UE 2: active subcarriers N=300" in text
    assert "M * delta_f differs" in text
    assert "cyclic prefix" in text
    assert "outage" in text


def test_validate_overlap_and_gap():
    fs = 256 * 60e3
    ues = [ue(1, 8, 128, 0), ue(2, 7, 64, 32, fs)]
    errors = validate_scenario(Scenario(ues=ues))
    assert any("overlaps" in e for e in errors)


def test_assign_bands_contiguous():
    ues = assign_bands([8, 6, 7], [128, 16, 32])
    assert [u.band_offset for u in ues] == [0, 32, 96]
    assert len({u.sample_rate for u in ues}) == 1


def test_assign_bands_off_grid():
    # 1/128 of the band is not on UE 2's 64-point grid
    with pytest.raises(ScenarioError):
        assign_bands([7, 6], [1, 63])


def test_make_scenario_raises():
    with pytest.raises(ScenarioError):
        make_scenario([8, 7], [128, 32])


def test_frame_aligned_all_pairs():
    for a, b in product(ALLOWED_MU, repeat=2):
        assert frame_aligned(ue(1, a, 1), ue(2, b, 1))


def test_frame_length(three_ue):
    assert three_ue.frame_length == 272
    for u in three_ue.ues:
        assert three_ue.frame_length % u.symbol_length == 0
