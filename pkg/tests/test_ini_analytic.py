from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import raw_ini_high, raw_ini_low
from uplink_ini.channel import draw_channels, flat_channel
from uplink_ini.ini_analytic import (
    dirichlet_ratio, expected_ini_power, geometric_sum, helper_quantities, ini_coefficients, ini_high,
    ini_low, interference_gains, kernel_ranges, q_high, q_low, total_ini,
)
from uplink_ini.numerology import ALLOWED_MU, UeNumerology, make_scenario
from uplink_ini.receiver import measure_ini
from uplink_ini.waveform import random_symbols, transmit_grids


def ue(ue_id, mu, N, offset=0):
    return UeNumerology(ue_id, mu, N, offset, 1024 * 15e3 / 2 ** mu)


def test_dirichlet_examples():
    assert dirichlet_ratio(0.0, 5) == pytest.approx(5)
    assert abs(dirichlet_ratio(0.5, 2)) < 1e-15
    assert abs(dirichlet_ratio(0.123, 7) - geometric_sum(0.123, 0, 7)) < 1e-12
    assert dirichlet_ratio(3.0, 11) == pytest.approx(11)


@given(st.integers(-2048, 2048), st.integers(0, 11), st.integers(0, 1100))
@settings(max_examples=300)
def test_dirichlet_matches_sum_dyadic(num, bits, L):
    theta = num / 2 ** 11 / 2 ** bits
    assert abs(dirichlet_ratio(theta, L) - geometric_sum(theta, 0, L)) < 1e-12


@given(st.floats(-1, 1, allow_nan=False), st.integers(0, 1100))
@settings(max_examples=300)
def test_dirichlet_matches_sum_float(theta, L):
    # the explicit sum itself rounds theta * m to ~L ulp, so the bound scales with L
    assert abs(dirichlet_ratio(theta, L) - geometric_sum(theta, 0, L)) < 1e-12 + 1e-15 * L ** 2


def test_helper_examples():
    i, j = ue(1, 8, 128), ue(2, 7, 64, 64)
    h = helper_quantities(0, 0, 1, i, j)
    assert h.nu_l == 64
    # the first segment loses the victim's CP: 136 - 16 samples fall in the FFT window
    assert h.V_q == 120
    assert helper_quantities(0, 0, 2, i, j).V_q == 136
    assert h.alpha == 2
    low = helper_quantities(0, 0, 1, ue(1, 8, 128), ue(2, 9, 256, 256))
    assert low.tau_alpha == 16
    with pytest.raises(ValueError):
        helper_quantities(0, 0, 1, i, ue(3, 8, 1))
    with pytest.raises(ValueError):
        helper_quantities(0, 0, 3, i, j)


def test_q_high_examples():
    i, j = ue(1, 8, 128), ue(2, 7, 64, 64)
    # l=0 -> nu=64 at 1/2; k=128 -> 1/2: kappa = 0
    assert abs(q_high(0, 128, 2, i, j)) == pytest.approx(136)
    V = 136
    # kappa = nu/128 - k/256 = 1/(2V) is off-grid, check the closed form at a synthetic offset
    assert abs(dirichlet_ratio(1 / (2 * V), V)) == pytest.approx(1 / np.sin(np.pi / (2 * V)), rel=1e-12)


def test_q_low_zero_offset():
    i, j = ue(1, 8, 128), ue(2, 9, 256, 256)
    # l=0 -> nu=256 on 512 grid (1/2); k=128 on 256 grid (1/2)
    assert q_low(0, 128, 2, i, j) == pytest.approx(256)


@st.composite
def kernel_case(draw):
    mu_i = draw(st.sampled_from(ALLOWED_MU))
    mu_j = draw(st.sampled_from([m for m in ALLOWED_MU if m != mu_i]))
    M_i, M_j = 2 ** mu_i, 2 ** mu_j
    cfg_i = ue(1, mu_i, M_i)
    cfg_j = ue(2, mu_j, M_j)
    alpha = Fraction(M_i, M_j)
    q = draw(st.integers(1, int(max(alpha, 1 / alpha))))
    return draw(st.integers(0, M_j - 1)), draw(st.integers(0, M_i - 1)), q, cfg_i, cfg_j


def kernel_oracle(l, k, q, cfg_i, cfg_j):
    """Explicit geometric sums over the kernel's m-ranges, rotated to the kernel's phase origin.

    The offset is a dyadic rational, so theta * m is exact in floating point.
    """
    h = helper_quantities(l, k, q, cfg_i, cfg_j)
    theta = float(h.kappa)
    ranges = kernel_ranges(q, cfg_i, cfg_j)
    total = sum(geometric_sum(theta, a, b) for a, b in ranges)
    if h.alpha > 1:
        # q_high is referenced to the start of its segment
        total *= np.exp(-2j * np.pi * np.mod(theta * ranges[0][0], 1))
    return total


@given(kernel_case())
@settings(max_examples=400)
def test_kernels_match_appendix_sums(case):
    l, k, q, cfg_i, cfg_j = case
    fn = q_high if cfg_i.M > cfg_j.M else q_low
    assert abs(fn(l, k, q, cfg_i, cfg_j) - kernel_oracle(l, k, q, cfg_i, cfg_j)) < 1e-12


def _random_grids(cfg, count, rng, p=1.0):
    return transmit_grids(random_symbols(rng, (count, cfg.N), 16), cfg, p)


@pytest.mark.parametrize("domain", ["symbol", "subcarrier"])
@pytest.mark.parametrize("mus,ns", [([8, 7], [128, 64]), ([7, 8], [64, 128]), ([8, 6], [192, 16])])
def test_ini_high_matches_raw_sum(mus, ns, domain):
    sc = make_scenario(mus, ns, channel_taps=1)
    cfg_i, cfg_j = sc.ues
    alpha = cfg_i.M // cfg_j.M
    rng = np.random.default_rng(11)
    grids = _random_grids(cfg_j, alpha, rng)
    h = 0.8 - 0.3j
    channels = {1: flat_channel(), 2: flat_channel(h)}
    got = ini_high(None, 1, sc, channels, {2: grids}, domain)
    want = raw_ini_high(cfg_i, cfg_j, grids, h, domain)
    assert np.max(np.abs(got - want)) < 1e-9 * max(1.0, np.max(np.abs(want)))
    assert ini_high(3, 1, sc, channels, {2: grids}, domain) == got[3]


@pytest.mark.parametrize("domain", ["symbol", "subcarrier"])
@pytest.mark.parametrize("mus,ns", [([7, 8], [64, 128]), ([6, 8], [16, 192]), ([8, 9], [128, 256])])
def test_ini_low_matches_raw_sum(mus, ns, domain):
    sc = make_scenario(mus, ns, channel_taps=1)
    cfg_i, cfg_j = sc.ues
    beta = cfg_j.M // cfg_i.M
    rng = np.random.default_rng(12)
    X = _random_grids(cfg_j, 1, rng)[0]
    h = -0.2 + 1.1j
    channels = {1: flat_channel(), 2: flat_channel(h)}
    for position in range(1, beta + 1):
        got = ini_low(None, 1, sc, channels, {2: X}, position, domain)
        want = raw_ini_low(cfg_i, cfg_j, X, h, position, domain)
        assert np.max(np.abs(got - want)) < 1e-9 * max(1.0, np.max(np.abs(want)))


def test_empty_sets_and_zero_data(two_ue, flat):
    ch = flat(two_ue)
    zero = {1: np.zeros((1, 256)), 2: np.zeros((2, 128))}
    assert np.all(ini_high(None, 1, two_ue, ch, zero) == 0)
    assert np.all(ini_low(None, 1, two_ue, ch, {1: np.ones(256), 2: np.ones((2, 128))}) == 0)
    assert np.all(ini_high(None, 2, two_ue, ch, {1: np.ones(256)}) == 0)


def test_total_is_sum(three_ue, flat):
    ch = flat(three_ue, {2: 0.5j})
    rng = np.random.default_rng(5)
    data = {1: _random_grids(three_ue.ue(1), 1, rng), 2: _random_grids(three_ue.ue(2), 4, rng),
            3: _random_grids(three_ue.ue(3), 2, rng)}
    for v in three_ue.ids:
        tot = total_ini(None, v, three_ue, ch, data)
        assert np.allclose(tot, ini_high(None, v, three_ue, ch, data) + ini_low(None, v, three_ue, ch, data))


def test_ini_low_linear(flat):
    sc = make_scenario([7, 8], [64, 128], channel_taps=1)
    ch = flat(sc)
    X = _random_grids(sc.ue(2), 1, np.random.default_rng(6))
    a = ini_low(None, 1, sc, ch, {2: X}, 2)
    b = ini_low(None, 1, sc, ch, {2: 2 * X}, 2)
    assert np.array_equal(b, 2 * a)


def test_same_numerology_has_no_terms():
    sc = make_scenario([7, 7], [64, 64])
    assert ini_coefficients(sc, 1).count == 0
    ch = draw_channels(1, sc.ids, 4)
    assert np.all(expected_ini_power(1, sc, ch) == 0)


def test_expected_power_properties(three_ue):
    ch = draw_channels(9, three_ue.ids, 1)
    assert np.all(expected_ini_power(1, three_ue, ch, [0.1, 0, 0]) == 0)
    base = expected_ini_power(1, three_ue, ch, [0.1, 0.02, 0.03])
    assert np.allclose(expected_ini_power(1, three_ue, ch, [0.3, 0.06, 0.09]), 3 * base, rtol=1e-12)
    assert expected_ini_power(1, three_ue, ch, [0.1, 0.02, 0.03], n=5) == base[5]


@pytest.mark.parametrize("domain", ["symbol", "subcarrier"])
def test_expected_power_matches_data_average(three_ue, domain):
    ch = draw_channels(4, three_ue.ids, 1)
    powers = [0.1, 0.05, 0.02]
    want = expected_ini_power(1, three_ue, ch, powers, domain)
    rng = np.random.default_rng(21)
    batches, batch = 20, 5000
    acc = np.zeros_like(want)
    for _ in range(batches):
        data = {}
        for u, p in zip(three_ue.ues, powers):
            count = max(1, three_ue.ue(1).M // u.M)
            data[u.id] = transmit_grids(random_symbols(rng, (count, batch, u.N), 16), u, p)
        acc += np.sum(np.abs(total_ini(None, 1, three_ue, ch, data, domain=domain)) ** 2, axis=0)
    assert np.max(np.abs(acc / (batches * batch) / want - 1)) < 0.02


def test_conjugate_channels_same_power(three_ue):
    # |coefficients|^2 enter only through |H|^2, so conjugate channels give identical INI power
    ch = draw_channels(13, three_ue.ids, 3)
    conj = {u: type(c)(np.conj(c.taps)) for u, c in ch.items()}
    for v in three_ue.ids:
        a = interference_gains(v, three_ue, ch)
        b = interference_gains(v, three_ue, {u: type(c)(c.taps) for u, c in ch.items()})
        assert np.array_equal(a, b)
        assert expected_ini_power(v, three_ue, conj).shape == (three_ue.ue(v).N,)


@pytest.mark.parametrize("domain", ["symbol", "subcarrier"])
def test_mixed_scenario_matches_measurement(domain, flat):
    sc = make_scenario([8, 6, 7], [128, 16, 32], channel_taps=1, trials=600)
    ch = flat(sc, {1: 0.9, 2: 1.2j, 3: -0.7})
    for v in sc.ids:
        want = expected_ini_power(v, sc, ch, domain=domain)
        got = measure_ini(sc, v, channels=ch, domain=domain).power
        assert np.max(np.abs(10 * np.log10(got / want))) < 0.5
