import numpy as np
import pytest

from seizsim.errors import ConfigurationError
from seizsim.netsim.channel import ChannelModel, Link, distance, transmit
from seizsim.netsim.phy import ppm_modulate, walsh_codes

FRAME = ppm_modulate(np.zeros(16, dtype=np.uint8), walsh_codes(8)[1], np.zeros(128, dtype=int))
LINK = Link("a", "b", (0.0, 0.0, 0.0), (0.0, 0.0, 0.462))


def deliveries(loss, n, seed=0):
    rng = np.random.default_rng(seed)
    ch = ChannelModel(loss=loss)
    return sum(transmit(FRAME, LINK, ch, rng).delivered for _ in range(n))


def test_lossless_always_delivers():
    assert deliveries(0.0, 2000) == 2000


def test_total_loss_never_delivers():
    assert deliveries(1.0, 2000) == 0


def test_drop_rate_monte_carlo():
    n = 100_000
    rate = 1 - deliveries(0.005, n, seed=42) / n
    # 0.001 is about 4.5 binomial standard deviations at this n.
    assert abs(rate - 0.005) <= 0.001


def test_propagation_delay():
    out = transmit(FRAME, LINK, ChannelModel(loss=0.0), np.random.default_rng(0))
    assert out.arrival_start == pytest.approx(0.462 / 1540)
    assert out.rx_time == pytest.approx(0.462 / 1540 + FRAME.duration)
    assert distance((0, 0, 0), (3, 4, 0)) == 5.0


def test_per_link_override():
    ch = ChannelModel(loss=0.0, link_loss={("a", "b"): 1.0})
    assert ch.loss_for("a", "b") == 1.0 and ch.loss_for("b", "a") == 0.0


def test_rng_use_is_fixed_per_frame():
    # Two draws per frame whatever the outcome, so streams stay aligned.
    r1, r2 = np.random.default_rng(1), np.random.default_rng(1)
    transmit(FRAME, LINK, ChannelModel(loss=0.0), r1)
    transmit(FRAME, LINK, ChannelModel(loss=1.0), r2)
    assert r1.random() == r2.random()


def test_validation():
    with pytest.raises(ConfigurationError):
        ChannelModel(loss=1.5)
    with pytest.raises(ConfigurationError):
        ChannelModel(sound_speed=0)
