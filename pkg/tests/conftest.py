import warnings

import pytest

from uplink_ini.channel import flat_channel
from uplink_ini.numerology import make_scenario


@pytest.fixture(autouse=True)
def _quiet_cvxpy():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", module="cvxpy")
        yield


@pytest.fixture
def two_ue():
    """UE 1: M=256, N=128; UE 2: M=128, N=64 (alpha_12 = 2), flat channel."""
    return make_scenario([8, 7], [128, 64], channel_taps=1, seed=7)


@pytest.fixture
def three_ue():
    return make_scenario([8, 6, 7], [128, 16, 32], channel_taps=1, seed=3)


@pytest.fixture
def flat():
    def build(scenario, gains=None):
        gains = gains or {}
        return {u: flat_channel(gains.get(u, 1.0)) for u in scenario.ids}
    return build
