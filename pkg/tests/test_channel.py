import math

import numpy as np
import pytest

from ulrrm.channel import (PRESETS, ScenarioConfig, block_index, channel_matrix, exp_corr_matrix,
                           generate_realization, los_probability, noise_power, preset,
                           slot_channels)


def small(**kw):
    base = dict(num_bs_antennas=8, num_user_antennas=2, num_subchannels=26)
    base.update(kw)
    return preset("uma", **base)


def test_exp_corr_examples():
    assert np.array_equal(exp_corr_matrix(1, 0.7), [[1.0]])
    np.testing.assert_allclose(exp_corr_matrix(3, 0.4),
                               [[1, 0.4, 0.16], [0.4, 1, 0.4], [0.16, 0.4, 1]], rtol=1e-15)
    assert np.array_equal(exp_corr_matrix(2, 0.0), np.eye(2))
    assert np.all(np.linalg.eigvalsh(exp_corr_matrix(16, 0.9)) > 0)


def test_bad_correlation_rejected():
    with pytest.raises(ValueError):
        exp_corr_matrix(3, 1.0)
    with pytest.raises(ValueError):
        preset("uma", corr_coeff=-0.1)


def test_noise_power():
    cfg = preset("uma")
    # frozen: 10 ** (-10.9436974992327...) mW
    assert noise_power(cfg) == pytest.approx(1.138419957660616e-11, rel=1e-12)
    assert noise_power(cfg.with_overrides(noise_figure_db=0.0, subchannel_bw=1.0)) == \
        pytest.approx(10 ** -17.4, rel=1e-12)
    ratio_db = 10 * math.log10(noise_power(cfg.with_overrides(subchannel_bw=720e3)) / noise_power(cfg))
    assert ratio_db == pytest.approx(10 * math.log10(2), abs=1e-12)


def test_tap_powers_normalized():
    for cfg in PRESETS.values():
        assert len(cfg.tap_delays) == 8
        assert cfg.tap_powers.sum() == pytest.approx(1.0, abs=1e-12)


def test_determinism():
    cfg = small()
    a = generate_realization(cfg, 5, 6, seed=11)
    b = generate_realization(cfg, 5, 6, seed=11)
    assert np.array_equal(a.taps, b.taps)
    assert np.array_equal(a.user_positions, b.user_positions)
    assert np.array_equal(slot_channels(a, 3), slot_channels(b, 3))
    c = generate_realization(cfg, 5, 6, seed=12)
    assert not np.array_equal(a.taps, c.taps)


def test_positions_in_sector():
    cfg = preset("uma")
    r = generate_realization(cfg, 500, 1, seed=1)
    d = np.hypot(*r.user_positions.T)
    assert np.all((d > 0) & (d <= cfg.cell_radius + 1e-9))
    ang = np.arctan2(r.user_positions[:, 1], r.user_positions[:, 0])
    assert np.all(np.abs(ang) <= np.pi / 3 + 1e-12)
    assert np.all(r.large_scale_gain > 0)


def test_time_blocks():
    cfg = small(report_block_slots=2)
    r = generate_realization(cfg, 1, 4, seed=0)
    assert r.num_time_blocks == 2


def test_block_constancy_and_independence():
    cfg = small()
    r = generate_realization(cfg, 3, 4, seed=5)
    # subchannels 0..12 and slots 0..1 share one reporting block
    ref = channel_matrix(r, 1, 0, 0)
    for c in range(13):
        for t in range(2):
            assert np.array_equal(channel_matrix(r, 1, c, t), ref)
    assert block_index(cfg, 13, 0) == (1, 0)
    assert not np.allclose(channel_matrix(r, 1, 13, 0), ref)
    assert not np.allclose(channel_matrix(r, 1, 0, 2), ref)
    h = slot_channels(r, 1)
    assert h.shape == (3, 26, 2, 8)
    assert np.array_equal(h[1, 5], ref)


def test_out_of_range():
    r = generate_realization(small(), 2, 2, seed=0)
    with pytest.raises(IndexError):
        channel_matrix(r, 2, 0, 0)
    with pytest.raises(IndexError):
        slot_channels(r, 2)


def test_correlation_shaping():
    cfg = small(los_model="never", shadowing_std=0.0, corr_coeff=0.4)
    r = generate_realization(cfg, 400, 20, seed=3)
    hs = []
    for t in range(0, 20, 2):
        h = slot_channels(r, t)[:, ::13]  # one matrix per reporting block
        hs.append(h / np.sqrt(r.large_scale_gain)[:, None, None, None])
    h = np.concatenate(hs, axis=1)
    bs = np.mean(h[..., :-1] * np.conj(h[..., 1:])) / np.mean(np.abs(h) ** 2)
    ue = np.mean(h[..., 0, :] * np.conj(h[..., 1, :])) / np.mean(np.abs(h) ** 2)
    assert abs(bs.real - 0.4) < 0.05 and abs(ue.real - 0.4) < 0.05


def test_uncorrelated_single_tap_is_iid():
    cfg = small(los_model="never", shadowing_std=0.0, corr_coeff=0.0,
                tap_delays=(0.0,), tap_powers_db=(0.0,))
    r = generate_realization(cfg, 300, 2, seed=4)
    h = slot_channels(r, 0)[:, 0] / np.sqrt(r.large_scale_gain)[:, None, None]
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.05)
    assert abs(np.mean(h[..., 0] * np.conj(h[..., 1]))) < 0.05


def test_los_probability_models():
    d = np.array([5.0, 18.0, 100.0, 1000.0])
    p = los_probability(d, "uma")
    assert p[0] == 1.0 and p[1] == 1.0
    assert np.all(np.diff(p) <= 0)
    assert los_probability(100.0, "rma") == pytest.approx(math.exp(-0.09))
    assert np.all(los_probability(d, "always") == 1) and np.all(los_probability(d, "never") == 0)


def test_overrides_validated():
    with pytest.raises(ValueError):
        preset("uma", bogus=1)
    with pytest.raises(ValueError):
        preset("nowhere")
    assert preset("rma").cell_radius > preset("uma").cell_radius
