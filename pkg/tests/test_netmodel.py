import math
import random
from fractions import Fraction

import pytest

from mcsim.engine import NS_PER_MS, NS_PER_S, NS_PER_US, Simulator
from mcsim.netmodel import (
    SPEED_OF_LIGHT,
    ChannelState,
    DropReason,
    FlowGen,
    GeChannel,
    Leg,
    channel_step,
    next_arrival,
    propagation_delay,
    serialization_delay,
)
from mcsim.stack.pdcp import PdcpPdu


def _leg(sim=None, **kw):
    sim = sim or Simulator()
    return Leg(sim, kw.pop("leg_id", "A"), **kw)


def _pdu(sn, size=1500, leg="A"):
    return PdcpPdu("f", sn, size, 0, leg)


def test_geo_propagation_matches_distance_over_c():
    oracle = Fraction(35_786_000, SPEED_OF_LIGHT) * NS_PER_S
    leg = _leg(distance_m=35_786_000)
    assert propagation_delay(leg) == 119_369_247
    assert abs(propagation_delay(leg) - oracle) <= Fraction(1, 2)
    assert propagation_delay(leg) >= 119.367 * NS_PER_MS


def test_terrestrial_propagation():
    leg = _leg(distance_m=3000)
    assert propagation_delay(leg) == 10_007
    assert round(propagation_delay(leg) / NS_PER_US, 3) == 10.007


def test_zero_distance_and_override():
    assert propagation_delay(_leg(distance_m=0)) == 0
    assert propagation_delay(_leg(distance_m=3000, prop_override=5 * NS_PER_MS)) == 5 * NS_PER_MS


@pytest.mark.parametrize("bits,cap,expected", [
    (12_000, 12e6, NS_PER_MS),
    (0, 12e6, 0),
    (12_000, 100e6, 120 * NS_PER_US),
])
def test_serialization_delay(bits, cap, expected):
    assert serialization_delay(_leg(capacity_bps=cap), bits) == expected


def test_channel_absorbing_good():
    ch = GeChannel(p_gb=0.0, loss_good=0.0)
    rng = random.Random(1)
    for _ in range(1000):
        state, lost = channel_step(ch, rng)
        assert state is ChannelState.GOOD and not lost


def test_channel_bad_total_loss():
    ch = GeChannel(p_gb=0.0, p_bg=0.0, loss_bad=1.0, state="bad")
    assert channel_step(ch, random.Random(0))[1] is True


def test_channel_consumes_two_draws():
    rng = random.Random(5)
    channel_step(GeChannel(p_gb=0.3, p_bg=0.3), rng)
    ref = random.Random(5)
    ref.random()
    ref.random()
    assert rng.random() == ref.random()


def test_ge_stationary_bad_fraction():
    ch = GeChannel(p_gb=0.5, p_bg=0.5)
    rng = random.Random(11)
    n = 100_000
    bad = sum(channel_step(ch, rng)[0] is ChannelState.BAD for _ in range(n))
    pi_b = ch.stationary_bad()
    assert pi_b == 0.5
    # successive states of a chain with p_gb + p_bg = 1 are independent
    assert abs(bad / n - pi_b) <= 3 * math.sqrt(pi_b * (1 - pi_b) / n)


def test_ge_long_run_loss_matches_stationary_mix():
    # p_gb + p_bg = 1 makes successive states independent, so per-step losses
    # are i.i.d. Bernoulli with the stationary mean and the binomial sigma is exact
    ch = GeChannel(p_gb=0.3, p_bg=0.7, loss_good=0.02, loss_bad=0.5)
    rng = random.Random(3)
    n = 200_000
    lost = sum(channel_step(ch, rng)[1] for _ in range(n))
    pi_b = Fraction(3, 10)
    mean = float((1 - pi_b) * Fraction(2, 100) + pi_b * Fraction(1, 2))
    assert ch.mean_loss() == pytest.approx(mean)
    assert abs(lost / n - mean) <= 3 * math.sqrt(mean * (1 - mean) / n)


def test_ge_bursty_channel_mean_loss():
    ch = GeChannel(p_gb=0.05, p_bg=0.2, loss_good=0.01, loss_bad=0.5)
    rng = random.Random(4)
    n, batches = 400_000, 40
    size = n // batches
    rates = []
    for _ in range(batches):
        rates.append(sum(channel_step(ch, rng)[1] for _ in range(size)) / size)
    mean = sum(rates) / batches
    # batch means absorb the chain's autocorrelation
    sd = math.sqrt(sum((r - mean) ** 2 for r in rates) / (batches - 1) / batches)
    assert abs(mean - ch.mean_loss()) <= 3 * sd


def test_ge_validation():
    with pytest.raises(ValueError):
        GeChannel(p_gb=1.5)
    with pytest.raises(ValueError):
        GeChannel(loss_good=0.5, loss_bad=0.1)


def test_cbr_exact_and_size():
    gen = FlowGen("f", "cbr", 100, 1500)
    rng = random.Random(0)
    for _ in range(10):
        assert next_arrival(gen, rng) == (10 * NS_PER_MS, 1500)


def test_poisson_mean():
    gen = FlowGen("f", "poisson", 100, 1500)
    rng = random.Random(9)
    n = 100_000
    total = sum(next_arrival(gen, rng)[0] for _ in range(n))
    mean = 10 * NS_PER_MS
    assert abs(total / n - mean) <= 3 * mean / math.sqrt(n)


def test_flowgen_validation():
    with pytest.raises(ValueError):
        FlowGen("f", "cbr", 0)
    with pytest.raises(ValueError):
        FlowGen("f", "cbr", 10, 0)
    with pytest.raises(ValueError):
        FlowGen("f", "cbr", 10, 100, start=5, stop=1)
    with pytest.raises(ValueError):
        FlowGen("f", "pareto", 10)


def test_idle_leg_delivery_time():
    sim = Simulator()
    got = []
    leg = _leg(sim, capacity_bps=12e6, distance_m=3000, on_arrival=lambda l, p: got.append(sim.now))
    sim.schedule(500, leg.transmit, _pdu(0))
    sim.run_until(NS_PER_S)
    assert got == [500 + NS_PER_MS + 10_007]


def test_fifo_and_work_conservation():
    sim = Simulator()
    got = []
    leg = _leg(sim, capacity_bps=12e6, on_arrival=lambda l, p: got.append((sim.now, p.sn)))
    for sn in range(5):
        leg.transmit(_pdu(sn))
    sim.run_until(NS_PER_S)
    assert got == [((sn + 1) * NS_PER_MS, sn) for sn in range(5)]
    assert leg.busy_within(5 * NS_PER_MS) == 5 * NS_PER_MS


def test_down_leg_drops():
    sim = Simulator()
    drops = []
    leg = _leg(sim)
    leg.on_drop = lambda l, p, why: drops.append(why)
    leg.set_down()
    leg.transmit(_pdu(0))
    assert drops == [DropReason.LINK_DOWN]
    assert leg.counters.dropped_linkdown == 1


def test_overflow_drops_tail():
    sim = Simulator()
    leg = _leg(sim, capacity_bps=1e6, queue_cap=3)
    for sn in range(5):
        leg.transmit(_pdu(sn))
    assert leg.counters.dropped_overflow == 2
    assert [p.sn for p in leg.in_flight()] == [0, 1, 2]


def test_going_down_drops_unserialized_only():
    sim = Simulator()
    got = []
    leg = _leg(sim, capacity_bps=12e6, distance_m=300_000, on_arrival=lambda l, p: got.append(p.sn))
    for sn in range(4):
        leg.transmit(_pdu(sn))
    # at 2.5 ms PDUs 0 and 1 are on the air, 2 is half serialized, 3 queued
    sim.schedule(2_500_000, leg.set_down)
    sim.run_until(NS_PER_S)
    assert got == [0, 1]
    assert leg.counters.dropped_linkdown == 2


def test_drop_accounting_identity():
    sim = Simulator(7)
    leg = _leg(sim, capacity_bps=5e6, queue_cap=20, distance_m=1000,
               channel=GeChannel(p_gb=0.1, p_bg=0.3, loss_good=0.05, loss_bad=0.6))
    rng = random.Random(2)
    c = leg.counters

    def check():
        assert c.packets_in == (c.delivered + c.lost_channel + c.dropped_linkdown + c.dropped_overflow
                                + len(leg.in_flight()))

    for i in range(2000):
        sim.schedule_at(i * 100_000, leg.transmit, _pdu(i % 1000))
        if rng.random() < 0.01:
            sim.schedule_at(i * 100_000 + 1, leg.set_down if leg.up else leg.set_up)
        sim.schedule_at(i * 100_000 + 2, check)
    sim.schedule_at(50 * NS_PER_MS, leg.set_down)
    sim.schedule_at(60 * NS_PER_MS, leg.set_up)
    sim.run_until(NS_PER_S)
    check()
    assert c.packets_in == 2000
