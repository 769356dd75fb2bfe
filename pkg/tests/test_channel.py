import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import fspl_reference
from sliceforge.channel import (channel_at, doppler_shift_hz, fading_power_gain_db, fspl_db, max_per_prb_rate,
                                noise_power_dbm, per_prb_rate_bps, reflect, snr_db, update_channel,
                                write_channel_trace)
from sliceforge.domain import rng_substream


def test_fspl_reference_point():
    assert fspl_db(1000, 3.5e9) == pytest.approx(103.33, abs=0.01)
    assert fspl_db(1000, 3.5e9) == pytest.approx(fspl_reference(1000, 3.5e9), abs=1e-9)


@given(st.floats(1, 1e5), st.floats(1e6, 1e11))
def test_fspl_doubling(d, f):
    assert fspl_db(2 * d, f) - fspl_db(d, f) == pytest.approx(20 * math.log10(2), abs=1e-9)
    assert fspl_db(d, 2 * f) - fspl_db(d, f) == pytest.approx(6.021, abs=1e-3)


@pytest.mark.parametrize("d,f", [(0, 1e9), (-1, 1e9), (10, 0)])
def test_fspl_domain(d, f):
    with pytest.raises(ValueError):
        fspl_db(d, f)


def test_fading_gain():
    assert fading_power_gain_db(0.85 + 0.25j) == pytest.approx(-1.051, abs=0.001)
    assert fading_power_gain_db(1 + 0j) == 0
    assert fading_power_gain_db(1j) == pytest.approx(0, abs=1e-15)
    with pytest.raises(ValueError):
        fading_power_gain_db(0j)


def test_doppler():
    assert doppler_shift_hz(40, 3.5e9) == pytest.approx(129.7, abs=0.1)
    assert doppler_shift_hz(0, 3.5e9) == 0
    assert doppler_shift_hz(80, 3.5e9) == pytest.approx(2 * doppler_shift_hz(40, 3.5e9))


def test_noise_power():
    assert noise_power_dbm(1, 290) == pytest.approx(-173.98, abs=0.05)
    assert noise_power_dbm(9.36e6, 290) == pytest.approx(-104.3, abs=0.1)
    assert noise_power_dbm(2e6, 290) - noise_power_dbm(1e6, 290) == pytest.approx(3.0103, abs=1e-4)


def test_snr_hand_sum(cfg):
    base = snr_db(cfg, 103.33, -1.051, 0)
    assert base == pytest.approx(29.92, abs=0.2)
    assert snr_db(cfg, 103.33, -1.051, 129.7) == pytest.approx(base - 1.297, abs=1e-9)
    assert snr_db(cfg, 103.33, -1.051, 1e6) == pytest.approx(base - 3.0, abs=1e-9)


def test_per_prb_rate(cfg):
    assert per_prb_rate_bps(20, cfg) == pytest.approx(898.9e3, abs=500)
    assert per_prb_rate_bps(-math.inf, cfg) == 0
    assert per_prb_rate_bps(-400, cfg) == pytest.approx(0, abs=1e-30)
    assert per_prb_rate_bps(60, cfg) == pytest.approx(999e3)
    assert per_prb_rate_bps(1e6, cfg) == pytest.approx(999e3)


@given(st.floats(-200, 200), st.floats(-200, 200))
def test_rate_monotone(a, b):
    from sliceforge import default_scenario
    cfg = default_scenario(0)
    lo, hi = sorted((a, b))
    assert 0 <= per_prb_rate_bps(lo, cfg) <= per_prb_rate_bps(hi, cfg) <= max_per_prb_rate(cfg)


def test_stationary_ue_never_moves(cfg):
    ue = next(u for u in cfg.ues if u.speed == 0)
    ch = channel_at(ue, ue.initial_distance, cfg)
    rng = rng_substream(0, "channel", ue.ue_id)
    for k in range(1000):
        ch = update_channel(ue, ch, k, rng, cfg)
    assert ch.distance == ue.initial_distance


def test_step_size_and_reflection(cfg):
    ue = next(u for u in cfg.ues if u.speed == 40)
    ch = channel_at(ue, 1000.0, cfg)
    nxt = update_channel(ue, ch, 0, rng_substream(0, "channel", 0), cfg)
    assert abs(nxt.distance - 1000.0) == pytest.approx(22.22, abs=0.01)
    assert reflect(505 - 22.22, 500, 2000) == pytest.approx(517.22, abs=1e-9)
    assert reflect(2010, 500, 2000) == pytest.approx(1990)


def test_walk_stays_in_bounds(cfg):
    ue = next(u for u in cfg.ues if u.speed == 40)
    ch = channel_at(ue, 510.0, cfg)
    rng = rng_substream(3, "channel", 0)
    for k in range(5000):
        ch = update_channel(ue, ch, k, rng, cfg)
        assert 500 <= ch.distance <= 2000
        assert 0 <= ch.per_prb_rate <= max_per_prb_rate(cfg)
        assert math.isfinite(ch.snr) and ch.pathloss > 0


def test_channel_state_invariants(cfg):
    ch = channel_at(cfg.ues[0], 700, cfg)
    assert ch.fading_gain_db == pytest.approx(10 * math.log10(abs(ch.fading_gain) ** 2))
    assert ch.link_loss == pytest.approx(ch.pathloss - ch.fading_gain_db)


def test_trajectory_is_reproducible(cfg):
    def run():
        ue = cfg.ues[0]
        ch, rng, out = channel_at(ue, ue.initial_distance, cfg), rng_substream(5, "channel", 0), []
        for k in range(200):
            ch = update_channel(ue, ch, k, rng, cfg)
            out.append(ch.distance)
        return np.array(out)
    assert np.array_equal(run(), run())


def test_channel_trace_csv(cfg):
    buf = io.StringIO()
    write_channel_trace([(0, channel_at(cfg.ues[0], 700, cfg))], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("epoch,ue_id") and len(lines) == 2
