"""SIRIUS estimator tests: warm start, loss, harvesting, the outer loop."""

import numpy as np
import pytest

from sirius import channel as ch
from sirius import estimator as est
from sirius.grid import ResourceGrid, SlotConfig, build_pilot_mask, random_data_grid

CFG = SlotConfig()
PROFILE = ch.TdlProfile.tdl_c()
FD100 = ch.max_doppler(100 / 3.6, CFG.carrier_frequency)


def noisy_slot(snr_db, seed, f_d=FD100):
    tx, bits = random_data_grid(CFG, np.random.default_rng(seed))
    real = ch.generate_realization(PROFILE, f_d, CFG, seed=seed + 1)
    rx = ch.apply_channel(tx, real, snr_db, CFG, noise_seed=seed + 2)
    truth = ch.genie_taps(real, CFG)
    return tx, rx, truth


def test_config_validation():
    with pytest.raises(ValueError):
        est.SiriusConfig(i_max=3)  # steps_per_iter length mismatch
    with pytest.raises(ValueError):
        est.SiriusConfig(tau_th=0.0)
    with pytest.raises(ValueError):
        est.SiriusConfig(tau_th=0.9)  # beyond half the QPSK minimum distance
    cfg = est.SiriusConfig.with_outer_iterations(3)
    assert cfg.steps_per_iter == (150, 50, 50)


def test_warm_start_pilot_only_active_set():
    tx, rx, _ = noisy_slot(20.0, seed=3)
    cfg = est.SiriusConfig()
    init, decisions, active = est.warm_start(rx, tx.symbols, cfg)
    assert len(active) == 504
    assert np.all(active.weight == cfg.w_p)
    assert np.all(rx.pilot_mask[active.k, active.n])
    # pilot entries carry the true transmitted pilot symbols
    assert np.allclose(active.x_at, tx.symbols[active.k, active.n])


def test_warm_start_noise_free_flat_decisions_correct():
    tx, bits = random_data_grid(CFG, np.random.default_rng(4))
    rx = ResourceGrid(symbols=tx.symbols.copy(), pilot_mask=tx.pilot_mask,
                      kind="received")
    _, decisions, _ = est.warm_start(rx, tx.symbols, est.SiriusConfig())
    assert np.max(np.abs(decisions - tx.symbols)) < 1e-12


def test_active_set_band_edges_zeroed():
    tx, rx, _ = noisy_slot(20.0, seed=5)
    equalized = tx.symbols.copy()
    active, _ = est.harvest_pseudo_pilots(equalized, rx, tx.symbols, tau_th=0.5)
    edge_low = active.k == 0
    edge_high = active.k == CFG.active_subcarriers - 1
    assert np.all(active.x_left[edge_low] == 0)
    assert np.all(active.x_right[edge_high] == 0)


def test_harvest_tau_zero_admits_nothing():
    tx, rx, _ = noisy_slot(20.0, seed=6)
    active, _ = est.harvest_pseudo_pilots(tx.symbols.copy(), rx, tx.symbols, tau_th=0.0)
    assert len(active) == 504  # pilots only


def test_harvest_perfect_equalization_admits_all():
    tx, rx, _ = noisy_slot(20.0, seed=7)
    active, _ = est.harvest_pseudo_pilots(tx.symbols.copy(), rx, tx.symbols, tau_th=0.5)
    assert len(active) == CFG.active_subcarriers * CFG.symbols_per_slot
    pseudo = ~rx.pilot_mask[active.k, active.n]
    assert np.all(active.weight[pseudo] == 0.5)
    assert np.all(active.weight[~pseudo] == 2.0)


def test_harvest_admission_monotone_in_tau():
    tx, rx, _ = noisy_slot(5.0, seed=8)
    equalized = tx.symbols + 0.3 * np.random.default_rng(9).standard_normal(
        tx.symbols.shape
    )
    sizes = []
    for tau in [0.1, 0.3, 0.5, 0.7]:
        active, _ = est.harvest_pseudo_pilots(equalized, rx, tx.symbols, tau_th=tau)
        sizes.append(len(active))
    assert sizes == sorted(sizes)
    # re-harvest replaces entries, never duplicates
    active, _ = est.harvest_pseudo_pilots(equalized, rx, tx.symbols, tau_th=0.5)
    flat = active.flat
    assert len(np.unique(flat)) == len(flat)


def test_reconstruction_loss_zero_on_truth():
    """Noise-free reception restricted to the tri-diagonal model: zero loss."""
    tx, bits = random_data_grid(CFG, np.random.default_rng(10))
    real = ch.generate_realization(PROFILE, FD100, CFG, seed=11)
    truth = ch.genie_taps(real, CFG)
    K, N = CFG.active_subcarriers, CFG.symbols_per_slot
    # build Y exactly from the tri-diagonal model
    y = truth.h0 * tx.symbols
    y[1:, :] += truth.hm1[1:, :] * tx.symbols[:-1, :]
    y[:-1, :] += truth.hp1[:-1, :] * tx.symbols[1:, :]
    rx = ResourceGrid(symbols=y, pilot_mask=tx.pilot_mask, kind="received")
    active, _ = est.harvest_pseudo_pilots(tx.symbols.copy(), rx, tx.symbols, tau_th=0.5)
    pred = np.empty((K * N, 6))
    for grid, col in [(truth.h0, 0), (truth.hm1, 2), (truth.hp1, 4)]:
        pred[:, col] = grid.real.reshape(-1)
        pred[:, col + 1] = grid.imag.reshape(-1)
    loss, grad = est.reconstruction_loss(pred, active, rx.symbols, 0.0)
    assert loss < 1e-20


def test_reconstruction_loss_all_zero_prediction():
    tx, rx, _ = noisy_slot(20.0, seed=12)
    active, _ = est.harvest_pseudo_pilots(tx.symbols.copy(), rx, tx.symbols, tau_th=0.5)
    pred = np.zeros((CFG.active_subcarriers * CFG.symbols_per_slot, 6))
    loss, _ = est.reconstruction_loss(pred, active, rx.symbols, 1.0)
    expected = float(np.mean(
        active.weight * np.abs(rx.symbols[active.k, active.n]) ** 2
    ))
    assert loss == pytest.approx(expected, rel=1e-12)


def test_reconstruction_loss_gradient_matches_fd():
    """Finite-difference oracle on a small 4 x 3 grid."""
    cfg = SlotConfig(fft_size=8, active_subcarriers=4, symbols_per_slot=3,
                     pilot_interval=2, cp_length=2)
    rng = np.random.default_rng(13)
    K, N = 4, 3
    mask = build_pilot_mask(cfg)
    symbols = (rng.standard_normal((K, N)) + 1j * rng.standard_normal((K, N)))
    rx = ResourceGrid(symbols=symbols, pilot_mask=mask, kind="received")
    tx_pilots = np.exp(1j * rng.uniform(0, 2 * np.pi, (K, N)))
    equalized = rng.standard_normal((K, N)) * 0.2 + tx_pilots
    active, _ = est.harvest_pseudo_pilots(equalized, rx, tx_pilots, tau_th=0.5)
    pred = rng.standard_normal((K * N, 6))
    lam = 0.7
    loss, grad = est.reconstruction_loss(pred, active, rx.symbols, lam)
    h = 1e-6
    for idx in np.ndindex(pred.shape):
        orig = pred[idx]
        pred[idx] = orig + h
        lp, _ = est.reconstruction_loss(pred, active, rx.symbols, lam)
        pred[idx] = orig - h
        lm, _ = est.reconstruction_loss(pred, active, rx.symbols, lam)
        pred[idx] = orig
        fd = (lp - lm) / (2 * h)
        denom = max(abs(fd), abs(grad[idx]), 1e-9)
        assert abs(fd - grad[idx]) / denom < 1e-4


def test_estimate_slot_deterministic():
    tx, rx, _ = noisy_slot(20.0, seed=14)
    cfg = est.SiriusConfig(seed=99, steps_per_iter=(12, 6))
    a = est.estimate_slot(rx, tx.symbols, CFG, cfg)
    b = est.estimate_slot(rx, tx.symbols, CFG, cfg)
    assert np.array_equal(a.h0, b.h0)
    assert np.array_equal(a.hm1, b.hm1)


def test_estimate_slot_step_schedule_and_loss_decrease():
    tx, rx, _ = noisy_slot(20.0, seed=15)
    cfg = est.SiriusConfig(seed=1)
    taps, history = est.estimate_slot(rx, tx.symbols, CFG, cfg, return_history=True)
    assert [len(h) for h in history] == [150, 50]
    # training loss after the first phase is below its starting value
    assert history[0][-1] < history[0][0]
    assert taps.h0.shape == (288, 14)


def test_estimate_slot_single_iteration_runs_without_harvest(monkeypatch):
    tx, rx, _ = noisy_slot(20.0, seed=16)
    calls = {"n": 0}
    original = est.harvest_pseudo_pilots

    def counting(*args, **kwargs):
        calls["n"] += 1
        return original(*args, **kwargs)

    monkeypatch.setattr(est, "harvest_pseudo_pilots", counting)
    cfg = est.SiriusConfig(i_max=1, steps_per_iter=(10,), seed=2,
                           warm_start_harvest=False)
    taps, history = est.estimate_slot(rx, tx.symbols, CFG, cfg, return_history=True)
    assert calls["n"] == 0  # pilots-only training, no harvesting
    assert [len(h) for h in history] == [10]


def test_estimate_slot_harvest_once_between_iterations(monkeypatch):
    tx, rx, _ = noisy_slot(20.0, seed=17)
    calls = {"n": 0}
    original = est.harvest_pseudo_pilots

    def counting(*args, **kwargs):
        calls["n"] += 1
        return original(*args, **kwargs)

    monkeypatch.setattr(est, "harvest_pseudo_pilots", counting)
    cfg = est.SiriusConfig(steps_per_iter=(10, 5), seed=3, warm_start_harvest=False)
    est.estimate_slot(rx, tx.symbols, CFG, cfg)
    assert calls["n"] == 1  # exactly one harvesting pass inside the loop
    calls["n"] = 0
    cfg_ws = est.SiriusConfig(steps_per_iter=(10, 5), seed=3, warm_start_harvest=True)
    est.estimate_slot(rx, tx.symbols, CFG, cfg_ws)
    assert calls["n"] == 2  # plus the warm-start admission pass


def test_pilot_positions_always_in_active_set():
    tx, rx, _ = noisy_slot(0.0, seed=18)
    # even with a hopeless equalization, pilots stay anchored at w_p
    equalized = 100.0 * np.ones(rx.shape, complex)
    active, _ = est.harvest_pseudo_pilots(equalized, rx, tx.symbols, tau_th=0.5)
    kk, nn = np.nonzero(rx.pilot_mask)
    flat_pilots = set(kk * CFG.symbols_per_slot + nn)
    assert flat_pilots.issubset(set(active.flat.tolist()))
    pilot_entries = rx.pilot_mask[active.k, active.n]
    assert np.all(active.weight[pilot_entries] == 2.0)
