import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from uep_fountain.channel import (LLR_CAP, ChannelParams, capacity, channel_tanh_mean, demodulate,
                                  modulate, sigma2_to_snr_db, snr_db_to_sigma2, transmit)
from uep_fountain.errors import ConfigError

# Independent Monte-Carlo oracle: 10^7 draws of the LLR of a +1 symbol
# (numpy default_rng(20260101), ten batches of 10^6), frozen at build time.
GOLDEN = {
    0.25: (0.9130340293514593, 0.9314415249177126),
    1.0: (0.4859045693426964, 0.5503837408068611),
    4.0: (0.1611140576446286, 0.2043178868791869),
}


def test_modulate_convention():
    assert modulate([0]).tolist() == [1.0]
    assert modulate([1]).tolist() == [-1.0]
    assert modulate([0, 1, 1]).tolist() == [1.0, -1.0, -1.0]


def test_params_validation():
    for bad in (0.0, -1.0, float("inf"), float("nan")):
        with pytest.raises(ConfigError):
            ChannelParams(bad)


def test_transmit_small_noise_and_determinism():
    x = modulate(np.arange(1000) % 2)
    p = ChannelParams(1e-12, seed=4)
    y = transmit(x, p)
    assert np.all(np.abs(y - x) < 10 * math.sqrt(1e-12))
    assert np.array_equal(y, transmit(x, p))


def test_transmit_noise_statistics():
    x = np.ones(10**6)
    y = transmit(x, ChannelParams(1.0, seed=2))
    e = y - x
    assert abs(e.mean()) < 3.3e-3
    assert abs(e.var() - 1.0) < 0.01


def test_demodulate_examples():
    s2 = 0.7
    assert demodulate([s2 / 2], s2)[0] == pytest.approx(1.0, abs=1e-15)
    assert demodulate([0.0], 3.0)[0] == 0.0
    assert demodulate([1e9], 1.0)[0] == LLR_CAP


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=20), st.floats(0.05, 10))
def test_demodulate_odd(y, s2):
    y = np.array(y)
    assert np.array_equal(demodulate(-y, s2), -demodulate(y, s2))


def test_snr_conversions():
    assert snr_db_to_sigma2(0.0) == 1.0
    assert sigma2_to_snr_db(snr_db_to_sigma2(7.5)) == pytest.approx(7.5)


def test_capacity_limits():
    assert abs(capacity(0.01) - 1.0) < 1e-3
    assert abs(capacity(100.0)) < 1e-2
    assert channel_tanh_mean(1e-3) == pytest.approx(1.0, abs=1e-9)
    assert channel_tanh_mean(1e4) < 1e-3


@pytest.mark.parametrize("s2", sorted(GOLDEN))
def test_golden_monte_carlo(s2):
    cap, v = GOLDEN[s2]
    assert abs(capacity(s2) - cap) < 2e-3
    assert abs(channel_tanh_mean(s2) - v) < 2e-3


def test_strictly_decreasing():
    grid = np.geomspace(0.05, 20, 20)
    c = [capacity(s) for s in grid]
    v = [channel_tanh_mean(s) for s in grid]
    assert np.all(np.diff(c) < 0) and np.all(np.diff(v) < 0)


@pytest.mark.parametrize("s2", [0.3, 1.5])
def test_tanh_mean_consistent_with_simulation(s2):
    n = 10**6
    y = transmit(np.ones(n), ChannelParams(s2, seed=17))
    t = np.tanh(demodulate(y, s2) / 2.0)
    assert abs(t.mean() - channel_tanh_mean(s2)) < 3 * t.std() / math.sqrt(n)
