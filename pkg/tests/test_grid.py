"""Slot structure, QPSK mapping, pilot mask, coordinate tests."""

import numpy as np
import pytest

from sirius.grid import (
    SlotConfig,
    build_pilot_mask,
    normalize_coordinates,
    qpsk_demodulate_array,
    qpsk_hard_decision,
    qpsk_modulate,
    qpsk_modulate_array,
    random_data_grid,
)

S2 = 1.0 / np.sqrt(2.0)


def test_default_config_rates():
    cfg = SlotConfig()
    assert cfg.sample_rate == pytest.approx(15.36e6)
    assert cfg.slot_length == 14 * (512 + 36)
    assert cfg.num_pilot_subcarriers == 36


def test_config_rejects_bad_layout():
    with pytest.raises(ValueError):
        SlotConfig(active_subcarriers=1024)
    with pytest.raises(ValueError):
        SlotConfig(pilot_interval=512)  # fewer than 2 pilot subcarriers
    with pytest.raises(ValueError):
        SlotConfig(modulation="16QAM")


def test_qpsk_gray_mapping():
    assert qpsk_modulate((0, 0)) == pytest.approx(S2 * (1 + 1j))
    assert qpsk_modulate((1, 1)) == pytest.approx(S2 * (-1 - 1j))
    assert qpsk_modulate((0, 1)) == pytest.approx(S2 * (1 - 1j))
    assert qpsk_modulate((1, 0)) == pytest.approx(S2 * (-1 + 1j))
    for bits in [(0, 0), (0, 1), (1, 0), (1, 1)]:
        assert abs(qpsk_modulate(bits)) == pytest.approx(1.0)


def test_qpsk_hard_decision_examples():
    point, dist = qpsk_hard_decision(0.9 + 0.8j)
    assert point == pytest.approx(S2 * (1 + 1j))
    point, dist = qpsk_hard_decision(S2 * (1 + 1j))
    assert point == pytest.approx(S2 * (1 + 1j))
    assert dist == pytest.approx(0.0, abs=1e-15)
    # tie at the origin resolves to the positive quadrant
    point, dist = qpsk_hard_decision(0.0 + 0.0j)
    assert point == pytest.approx(S2 * (1 + 1j))
    assert dist == pytest.approx(1.0)


def test_qpsk_round_trip_all_pairs():
    for b0 in (0, 1):
        for b1 in (0, 1):
            sym = qpsk_modulate((b0, b1))
            point, dist = qpsk_hard_decision(sym)
            assert point == pytest.approx(sym)
            assert dist == pytest.approx(0.0, abs=1e-15)
            bits = qpsk_demodulate_array(np.array(sym))
            assert tuple(bits) == (b0, b1)


def test_modulate_demodulate_array_round_trip():
    rng = np.random.default_rng(11)
    bits = rng.integers(0, 2, size=(64, 7, 2))
    syms = qpsk_modulate_array(bits)
    assert np.allclose(np.abs(syms), 1.0)
    assert np.array_equal(qpsk_demodulate_array(syms), bits)


def test_pilot_mask_counts():
    cfg = SlotConfig()
    mask = build_pilot_mask(cfg)
    assert mask.sum() == 36 * 14 == 504
    assert mask[0].all() and not mask[1].any()
    # per-symbol count matches ceil(K / interval)
    assert np.all(mask.sum(axis=0) == int(np.ceil(288 / 8)))


def test_pilot_mask_single_pilot_row():
    cfg = SlotConfig(fft_size=16, active_subcarriers=9, pilot_interval=4, cp_length=2)
    mask = build_pilot_mask(cfg)
    assert np.array_equal(np.flatnonzero(mask[:, 0]), [0, 4, 8])


def test_pilot_interval_wider_than_band_rejected():
    # interval >= K leaves a single pilot subcarrier, rejected at config time
    with pytest.raises(ValueError):
        SlotConfig(fft_size=64, active_subcarriers=16, pilot_interval=16, cp_length=4)
    # and build_pilot_mask guards against a hand-built inconsistent config
    cfg = SlotConfig(fft_size=64, active_subcarriers=16, pilot_interval=4, cp_length=4)
    object.__setattr__(cfg, "pilot_interval", 16)
    with pytest.raises(ValueError):
        build_pilot_mask(cfg)


def test_coordinates_endpoints_and_monotonicity():
    cfg = SlotConfig()
    coords = normalize_coordinates(cfg)
    assert coords.shape == (288, 14, 2)
    assert coords[0, 0, 0] == -1.0 and coords[0, 0, 1] == -1.0
    assert coords[-1, -1, 0] == 1.0 and coords[-1, -1, 1] == 1.0
    f = coords[:, 0, 0]
    t = coords[0, :, 1]
    assert np.all(np.diff(f) > 0) and np.all(np.diff(t) > 0)
    # symmetric about zero
    assert np.allclose(f + f[::-1], 0.0, atol=1e-12)
    assert np.allclose(t + t[::-1], 0.0, atol=1e-12)


def test_coordinates_odd_midpoint():
    cfg = SlotConfig(fft_size=16, active_subcarriers=9, pilot_interval=4, cp_length=2)
    coords = normalize_coordinates(cfg)
    assert coords[4, 0, 0] == pytest.approx(0.0)


def test_random_data_grid_unit_energy_and_mask():
    cfg = SlotConfig()
    grid, bits = random_data_grid(cfg, np.random.default_rng(5))
    assert grid.kind == "transmitted"
    assert np.allclose(np.abs(grid.symbols), 1.0)
    assert bits.shape == (288, 14, 2)
    assert grid.pilot_mask.sum() == 504
