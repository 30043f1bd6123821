"""Link-level metrics: NMSE, BER, and the genie detection bound."""

import numpy as np

from .baseline import stabilized_divide, zf_equalize
from .channel import ChannelTapGrid
from .grid import ResourceGrid, qpsk_demodulate_array, qpsk_hard_decision

NMSE_FLOOR_DB = -100.0


def nmse_ratio(est: ChannelTapGrid, truth: ChannelTapGrid) -> float:
    """Grid-wide main-tap error energy over true main-tap energy (linear)."""
    if est.h0.shape != truth.h0.shape:
        raise ValueError("estimate/truth dimensions differ")
    sig = float(np.sum(np.abs(truth.h0) ** 2))
    if sig == 0.0:
        raise ValueError("zero-energy truth channel")
    return float(np.sum(np.abs(est.h0 - truth.h0) ** 2)) / sig


def nmse_db(ratios) -> float:
    """Slot NMSE ratios averaged in the linear domain, reported in dB."""
    mean = float(np.mean(ratios))
    if mean <= 10.0 ** (NMSE_FLOOR_DB / 10.0):
        return NMSE_FLOOR_DB
    return 10.0 * np.log10(mean)


def nmse(est: ChannelTapGrid, truth: ChannelTapGrid) -> float:
    """Single-slot NMSE in dB, floored at NMSE_FLOOR_DB."""
    return nmse_db([nmse_ratio(est, truth)])


def ber(decided_bits: np.ndarray, true_bits: np.ndarray) -> float:
    """Bit error fraction; inputs must already exclude pilot positions."""
    decided_bits = np.asarray(decided_bits)
    true_bits = np.asarray(true_bits)
    if decided_bits.shape != true_bits.shape:
        raise ValueError("bit stream lengths differ")
    if decided_bits.size == 0:
        raise ValueError("empty bit streams")
    return float(np.mean(decided_bits != true_bits))


def detect_bits(rx: ResourceGrid, taps: ChannelTapGrid) -> np.ndarray:
    """ZF equalization + hard decisions; bits at data positions, (D, 2)."""
    equalized = zf_equalize(rx, taps)
    decided, _ = qpsk_hard_decision(equalized)
    return qpsk_demodulate_array(decided[~rx.pilot_mask])


def ici_cancelled_detect(
    rx: ResourceGrid, taps: ChannelTapGrid, neighbor_symbols: np.ndarray
) -> np.ndarray:
    """Bits after subtracting the adjacent-tap interference, then ZF.

    neighbor_symbols is the K x N transmitted grid used to reconstruct
    the interference; with the true grid and true taps this is the ideal
    ICI-cancelled receiver.
    """
    K, _ = rx.shape
    x = neighbor_symbols
    ici = np.zeros_like(rx.symbols)
    ici[1:, :] += taps.hm1[1:, :] * x[:-1, :]
    ici[:-1, :] += taps.hp1[:-1, :] * x[1:, :]
    cleaned = rx.symbols - ici
    equalized = stabilized_divide(cleaned, taps.h0)
    decided, _ = qpsk_hard_decision(equalized)
    return qpsk_demodulate_array(decided[~rx.pilot_mask])


def perfect_csi_bound(rx: ResourceGrid, truth: ChannelTapGrid, tx_symbols: np.ndarray) -> np.ndarray:
    """Genie detection: true taps, true neighbor symbols, ICI cancelled."""
    return ici_cancelled_detect(rx, truth, tx_symbols)
