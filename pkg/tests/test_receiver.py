import numpy as np
import pytest

from uplink_ini.channel import flat_channel
from uplink_ini.numerology import make_scenario
from uplink_ini.receiver import demodulate_symbol, measure_ini, recover_symbols
from uplink_ini.waveform import map_subcarriers, random_symbols, synthesize_symbol, transmit_grids


def test_identity_chain(two_ue):
    c = two_ue.ue(1)
    rng = np.random.default_rng(0)
    X = rng.standard_normal(c.M) + 1j * rng.standard_normal(c.M)
    R = demodulate_symbol(synthesize_symbol(X, c), c)
    assert np.max(np.abs(R - X)) < 1e-10
    assert np.all(demodulate_symbol(np.zeros(c.symbol_length), c) == 0)
    with pytest.raises(ValueError):
        demodulate_symbol(np.zeros(c.M), c)


def test_end_to_end_symbols(two_ue):
    c = two_ue.ue(2)
    x = random_symbols(np.random.default_rng(1), c.N, 64)
    r = synthesize_symbol(transmit_grids(x, c), c)
    assert np.max(np.abs(recover_symbols(demodulate_symbol(r, c), c) - x)) < 1e-9


def test_recover_constant(two_ue):
    c = two_ue.ue(2)
    R = map_subcarriers(np.full(c.N, 0.7j), c)
    out = recover_symbols(R, c)
    assert out[0] == pytest.approx(0.7j)
    assert np.allclose(out[1:], 0)


def test_same_numerology_zero():
    sc = make_scenario([7, 7, 7], [32, 64, 32], trials=20)
    for v in sc.ids:
        for domain in ("symbol", "subcarrier"):
            prof = measure_ini(sc, v, domain=domain)
            assert np.all(prof.power < 1e-20)


def test_single_ue_zero():
    sc = make_scenario([8], [256], trials=5)
    assert np.all(measure_ini(sc, 1).power == 0)


def test_threads_do_not_change_result(two_ue):
    a = measure_ini(two_ue, 1, trials=40, threads=1)
    b = measure_ini(two_ue, 1, trials=40, threads=8)
    assert np.array_equal(a.power, b.power)


def test_power_linearity(two_ue):
    a = measure_ini(two_ue, 1, trials=200, powers=[0.1, 0.1])
    b = measure_ini(two_ue, 1, trials=200, powers=[0.1, 0.2])
    # same data and channels, so doubling the interferer's power doubles the INI exactly
    assert np.allclose(b.power, 2 * a.power, rtol=1e-9)


def test_reference_level(two_ue):
    prof = measure_ini(two_ue, 1, trials=2, channels={1: flat_channel(0.5), 2: flat_channel()})
    assert prof.reference == pytest.approx(two_ue.p_max * 0.25)
