import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etvo.channel import (
    BAD,
    GOOD,
    ChannelProfile,
    GilbertElliott,
    GilbertElliottLoss,
    PacketTrace,
    ReconstructionMode,
    UniformLoss,
    deadband_filter,
    ge_loss_mask,
    ge_step,
    parse_packets,
    read_packets,
    reconstruct,
    simulate_channel,
    write_packets,
)
from etvo.signal import TraceFormatError, UniformSeries

ZOH = ReconstructionMode.ZERO_ORDER_HOLD
LIN = ReconstructionMode.LINEAR_EXTRAPOLATION


def _one_packet(vel=0.0):
    return PacketTrace(np.array([0.0]), np.array([0.0]), np.array([1.0]), np.array([vel]), 1)


def _ramp(n, dt=1e-3, t0=0.0):
    return UniformSeries(t0, dt, t0 + np.arange(n) * dt)


def test_ge_relations():
    ge = GilbertElliott(0.2, 0.25)
    assert ge.p == pytest.approx(0.05) and ge.r == pytest.approx(0.2)
    assert ge.p / (ge.p + ge.r) == pytest.approx(0.2)
    back = GilbertElliott.from_rates(0.05, 0.5)
    assert back.p == pytest.approx(0.05) and back.r == pytest.approx(0.5)
    for bad in [(1.0, 0.5), (0.2, 0.0), (0.2, 1.5)]:
        with pytest.raises(ValueError):
            GilbertElliott(*bad)


def test_ge_never_loses_without_bad_state():
    ge, rng = GilbertElliott(0.0), np.random.default_rng(0)
    for _ in range(1000):
        lost, ge = ge_step(ge, rng)
        assert not lost and ge.state == GOOD


def test_ge_step_transitions():
    class Fixed:
        def __init__(self, u):
            self.u = u

        def random(self):
            return self.u

    ge = GilbertElliott(0.5, 1.0)
    lost, nxt = ge_step(ge, Fixed(0.1))
    assert lost and nxt.state == BAD
    lost, nxt = ge_step(nxt, Fixed(0.9))
    assert lost and nxt.state == BAD
    lost, nxt = ge_step(nxt, Fixed(0.1))
    assert not lost and nxt.state == GOOD


def test_mask_matches_step_stream():
    ge = GilbertElliott(0.4, 0.3)
    mask, end = ge_loss_mask(ge, 500, np.random.default_rng(3))
    rng = np.random.default_rng(3)
    steps = []
    for _ in range(500):
        lost, ge = ge_step(ge, rng)
        steps.append(lost)
    assert mask.tolist() == steps
    assert end.state == ge.state


@pytest.mark.parametrize("q", [0.2, 0.5, 0.8])
def test_x_one_is_iid(q):
    mask, _ = ge_loss_mask(GilbertElliott(q, 1.0), 1_000_000, np.random.default_rng(11))
    assert abs(mask.mean() - q) < 0.003
    # Memoryless: loss after a loss is as likely as loss overall.
    after = mask[1:][mask[:-1]]
    assert abs(after.mean() - q) < 0.005


@pytest.mark.parametrize("pi_b", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("x", [0.25, 0.5, 1.0])
def test_ge_long_run_loss(pi_b, x):
    mask, _ = ge_loss_mask(GilbertElliott(pi_b, x), 1_000_000, np.random.default_rng(5))
    assert abs(mask.mean() - pi_b) < 0.005


def test_deadband_examples():
    s = UniformSeries(0.0, 1.0, [1.0, 1.04, 1.06, 1.2])
    assert [i for i, _ in deadband_filter(s, 0.05)] == [0, 2, 3]
    assert [i for i, _ in deadband_filter(UniformSeries(0.0, 1.0, [2.0] * 10), 0.05)] == [0]
    with pytest.raises(ValueError):
        deadband_filter(s, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30, unique=True))
def test_deadband_zero_threshold_keeps_changes(values):
    s = UniformSeries(0.0, 1.0, values)
    assert [i for i, _ in deadband_filter(s, 0.0)] == list(range(len(values)))


def test_clean_channel():
    s = _ramp(100)
    tr = simulate_channel(s, ChannelProfile())
    np.testing.assert_array_equal(tr.arrival, tr.send)
    assert len(tr) == tr.n_sent == 100
    np.testing.assert_array_equal(tr.position, s.values)


def test_constant_delay():
    s = _ramp(100)
    tr = simulate_channel(s, ChannelProfile(base_delay=0.015))
    np.testing.assert_allclose(tr.arrival - tr.send, 0.015, rtol=0, atol=1e-15)


def test_jitter_never_makes_packets_early():
    tr = simulate_channel(_ramp(5000), ChannelProfile(base_delay=0.015, jitter_std=0.01, seed=2))
    floor = tr.send + 0.015
    assert np.all(tr.arrival >= floor)
    # Half the draws are clipped to zero.
    assert abs(np.mean(tr.arrival == floor) - 0.5) < 0.03


def test_uniform_loss_fraction():
    s = UniformSeries(0.0, 1e-3, np.zeros(1_000_000))
    tr = simulate_channel(s, ChannelProfile(loss=UniformLoss(0.5), seed=9))
    assert abs(len(tr) / tr.n_sent - 0.5) < 0.003


def test_channel_is_deterministic_per_seed():
    s = UniformSeries(0.0, 1e-3, np.sin(np.arange(2000) / 50))
    prof = ChannelProfile(0.01, 0.004, GilbertElliottLoss(0.3, 0.25), 0.05, seed=4)
    a, b = simulate_channel(s, prof), simulate_channel(s, prof)
    for name in ("send", "arrival", "position", "velocity"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    c = simulate_channel(s, ChannelProfile(0.01, 0.004, GilbertElliottLoss(0.3, 0.25), 0.05, seed=5))
    assert not np.array_equal(a.arrival, c.arrival) or len(a) != len(c)


def test_velocity_uses_sent_samples():
    s = UniformSeries(0.0, 1.0, [1.0, 1.04, 1.06, 1.2])
    tr = simulate_channel(s, ChannelProfile(deadband=0.05))
    assert tr.send.tolist() == [0.0, 2.0, 3.0]
    np.testing.assert_allclose(tr.velocity, [0.0, 0.03, 0.14])


def test_profile_validation():
    with pytest.raises(ValueError):
        ChannelProfile(base_delay=-1)
    with pytest.raises(ValueError):
        ChannelProfile(deadband=1.2)
    with pytest.raises(ValueError):
        UniformLoss(1.0)


def test_zoh_single_packet():
    out = reconstruct(_one_packet(), 1000.0, 0.005, ZOH)
    assert out.values.tolist() == [1.0] * 6


def test_linear_single_packet():
    out = reconstruct(_one_packet(vel=2.0), 1000.0, 0.005, LIN)
    assert out.values[3] == pytest.approx(1.006, abs=1e-15)


def test_empty_trace_is_flagged():
    out = reconstruct(PacketTrace.empty(), 1000.0, 0.01)
    assert np.all(out.values == 0) and len(out) == 11
    assert out.meta["empty_trace"]


def test_warmup_is_zero_and_counted():
    s = _ramp(50)
    tr = simulate_channel(s, ChannelProfile(base_delay=0.004))
    out = reconstruct(tr, 1000.0, 0.049, ZOH)
    assert out.meta["warmup_samples"] == 4
    assert np.all(out.values[:4] == 0)
    np.testing.assert_allclose(out.values[4:], s.values[:-4], atol=1e-15)


def test_zoh_identity_lossless():
    s = UniformSeries(0.0, 1e-3, np.cos(np.arange(300) / 9))
    out = reconstruct(simulate_channel(s, ChannelProfile()), 1000.0, s.t_end, ZOH)
    assert out == s


def test_stale_arrival_never_displaces_newer():
    tr = PacketTrace(
        np.array([0.0, 0.001]), np.array([0.005, 0.002]), np.array([1.0, 2.0]), np.zeros(2), 2
    )
    out = reconstruct(tr, 1000.0, 0.007, ZOH)
    assert out.values.tolist() == [0, 0, 2, 2, 2, 2, 2, 2]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.05), st.integers(0, 199))
def test_reconstruction_is_causal(seed, jitter, victim):
    s = UniformSeries(0.0, 1e-3, np.sin(np.arange(200) / 7))
    tr = simulate_channel(s, ChannelProfile(0.003, jitter, UniformLoss(0.3), seed=seed))
    if victim >= len(tr):
        return
    tau = tr.arrival[victim] - 1e-6
    pos = tr.position.copy()
    pos[victim] += 100.0
    changed = PacketTrace(tr.send, tr.arrival, pos, tr.velocity, tr.n_sent)
    for mode in (ZOH, LIN):
        a = reconstruct(tr, 1000.0, 0.25, mode)
        b = reconstruct(changed, 1000.0, 0.25, mode)
        early = a.times <= tau
        np.testing.assert_array_equal(a.values[early], b.values[early])


def test_packet_round_trip(tmp_path):
    s = UniformSeries(0.0, 1e-3, np.sin(np.arange(100) / 3))
    tr = simulate_channel(s, ChannelProfile(0.01, 0.002, UniformLoss(0.2), seed=1))
    write_packets(tmp_path / "t.csv", tr)
    back = read_packets(tmp_path / "t.csv")
    for name in ("send", "arrival", "position", "velocity"):
        np.testing.assert_array_equal(getattr(back, name), getattr(tr, name))


def test_packet_parse_errors():
    with pytest.raises(TraceFormatError):
        parse_packets("a,b,c,d\n")
    with pytest.raises(TraceFormatError):
        parse_packets("send_s,arrival_s,position,velocity\n1,1,x,0\n")
    with pytest.raises(TraceFormatError):
        parse_packets("send_s,arrival_s,position,velocity\n1,1,0,0\n0,1,0,0\n")
