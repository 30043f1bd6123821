"""Classical pilot-aided channel estimators and ZF equalization.

Three references: LS with bilinear interpolation, ideal LMMSE (separable
2D Wiener smoothing with genie second-order statistics), and robust
LMMSE (DFT-basis noise suppression designed for fixed worst-case delay
spread and Doppler). All of them are ICI-blind: they estimate only the
main tap and report zero adjacent taps.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import j0

from .channel import (
    ChannelTapGrid,
    SPEED_OF_LIGHT,
    TdlProfile,
    quantized_delays,
)
from .grid import ResourceGrid, SlotConfig

EQUALIZER_EPS = 1e-8
# fixed worst-case design corner for the robust estimator
ROBUST_MAX_DELAY_SPREAD = 3e-6  # seconds
ROBUST_MAX_VELOCITY_KMH = 500.0
# diagonal loading of the worst-case prior: fraction of channel power the
# design refuses to attribute to its own statistics. Sets where the robust
# filter stops helping and rejoins the LS floor (around 23 dB SNR here).
ROBUST_MISMATCH_FLOOR = 0.03


@dataclass(frozen=True)
class CorrelationModel:
    """Separable channel correlation: r_f over subcarrier lags, r_t over symbols."""

    freq_corr: np.ndarray  # complex, lag 0..K-1
    time_corr: np.ndarray  # real, lag 0..N-1
    source: str = "genie_analytic"

    def __post_init__(self):
        if abs(self.freq_corr[0] - 1.0) > 1e-9 or abs(self.time_corr[0] - 1.0) > 1e-9:
            raise ValueError("zero-lag correlations must equal 1")
        if np.any(np.abs(self.freq_corr) > 1.0 + 1e-9) or np.any(
            np.abs(self.time_corr) > 1.0 + 1e-9
        ):
            raise ValueError("correlation magnitudes must stay <= 1")


def symbol_duration(cfg: SlotConfig) -> float:
    """OFDM symbol spacing (CP included) in seconds."""
    return cfg.symbol_length / cfg.sample_rate


def genie_correlation(profile: TdlProfile, f_d: float, cfg: SlotConfig) -> CorrelationModel:
    """Correlation model matched to the simulated channel.

    Frequency correlation comes from the quantized power-delay profile,
    time correlation from the Jakes spectrum at the true max Doppler.
    """
    d = quantized_delays(profile, cfg)
    lags_k = np.arange(cfg.active_subcarriers)
    r_f = (profile.tap_powers[None, :] * np.exp(
        -2j * np.pi * np.outer(lags_k, d) / cfg.fft_size
    )).sum(axis=1)
    lags_n = np.arange(cfg.symbols_per_slot)
    r_t = j0(2.0 * np.pi * f_d * lags_n * symbol_duration(cfg))
    return CorrelationModel(freq_corr=r_f, time_corr=r_t, source="genie_analytic")


def _toeplitz_from_lags(r: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """R[i, j] = r(rows[i] - cols[j]) with r(-d) = conj(r(d))."""
    lag = rows[:, None] - cols[None, :]
    out = r[np.abs(lag)]
    if np.iscomplexobj(r):
        out = np.where(lag < 0, np.conj(out), out)
    return out


def stabilized_divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """num / den computed as num * conj(den) / max(|den|^2, eps).

    Exact for healthy denominators (unlike adding eps to the magnitude)
    while keeping the output finite when den vanishes.
    """
    den = np.asarray(den)
    return num * np.conj(den) / np.maximum(np.abs(den) ** 2, EQUALIZER_EPS)


def pilot_ls(rx: ResourceGrid, tx_pilots: np.ndarray):
    """Raw LS estimates at pilot positions.

    Returns (pilot subcarrier indices, P x N estimate matrix).
    """
    mask = rx.pilot_mask
    pilot_rows = np.flatnonzero(mask.any(axis=1))
    Y = rx.symbols[pilot_rows, :]
    X = tx_pilots[pilot_rows, :]
    return pilot_rows, stabilized_divide(Y, X)


def _interp_columns(values: np.ndarray, known_rows: np.ndarray, total_rows: int) -> np.ndarray:
    """Linear interpolation along axis 0 with constant edge extrapolation."""
    all_rows = np.arange(total_rows)
    out = np.empty((total_rows, values.shape[1]), dtype=values.dtype)
    for c in range(values.shape[1]):
        out[:, c] = np.interp(all_rows, known_rows, values[:, c].real) + 1j * np.interp(
            all_rows, known_rows, values[:, c].imag
        )
    return out


def ls_estimate(rx: ResourceGrid, tx_pilots: np.ndarray) -> ChannelTapGrid:
    """Pilot division plus bilinear interpolation (frequency, then time).

    With the comb layout every symbol carries pilots, so the time pass is
    the identity; it is kept for sparser masks.
    """
    K, N = rx.shape
    pilot_rows, h_p = pilot_ls(rx, tx_pilots)
    h0 = _interp_columns(h_p, pilot_rows, K)
    pilot_cols = np.flatnonzero(rx.pilot_mask.any(axis=0))
    if len(pilot_cols) < N:
        h0 = _interp_columns(h0[:, pilot_cols].T, pilot_cols, N).T
    zeros = np.zeros_like(h0)
    return ChannelTapGrid(h0=h0, hm1=zeros.copy(), hp1=zeros.copy())


def _wiener_2d(
    h_pilot: np.ndarray,
    pilot_rows: np.ndarray,
    corr: CorrelationModel,
    noise_var: float,
    K: int,
) -> np.ndarray:
    """Exact 2D Wiener interpolation under the separable prior.

    The pilot-grid covariance is R_f (x) R_t; its inverse applies through
    the eigendecompositions of the two small factors, so cost stays at
    pilot-count scale.
    """
    N = h_pilot.shape[1]
    rows_all = np.arange(K)
    R_f_pp = _toeplitz_from_lags(corr.freq_corr, pilot_rows, pilot_rows)
    R_f_kp = _toeplitz_from_lags(corr.freq_corr, rows_all, pilot_rows)
    cols = np.arange(N)
    R_t = _toeplitz_from_lags(corr.time_corr, cols, cols)
    wf, Uf = np.linalg.eigh(R_f_pp)
    wt, Ut = np.linalg.eigh(R_t)
    wf = np.maximum(wf, 0.0)
    wt = np.maximum(wt, 0.0)
    denom = np.outer(wf, wt) + noise_var + 1e-10
    core = (Uf.conj().T @ h_pilot @ Ut) / denom
    g = Uf @ core @ Ut.conj().T
    return R_f_kp @ g @ R_t


def ideal_lmmse_estimate(
    rx: ResourceGrid,
    tx_pilots: np.ndarray,
    corr: CorrelationModel,
    noise_var: float,
) -> ChannelTapGrid:
    """Wiener smoothing of pilot LS estimates with genie statistics.

    At zero noise the Wiener filter degenerates to the identity on the
    observations, i.e. plain LS: the genie correlation factors are
    numerically rank-deficient, so inverting them without a noise term
    would only project onto their dominant subspace.
    """
    if noise_var <= 0.0:
        return ls_estimate(rx, tx_pilots)
    K, _ = rx.shape
    pilot_rows, h_p = pilot_ls(rx, tx_pilots)
    h0 = _wiener_2d(h_p, pilot_rows, corr, noise_var, K)
    zeros = np.zeros_like(h0)
    return ChannelTapGrid(h0=h0, hm1=zeros.copy(), hp1=zeros.copy())


def worst_case_time_corr(cfg: SlotConfig) -> np.ndarray:
    """Jakes correlation at the robust design velocity (500 km/h)."""
    f_d = (ROBUST_MAX_VELOCITY_KMH / 3.6) * cfg.carrier_frequency / SPEED_OF_LIGHT
    lags = np.arange(cfg.symbols_per_slot)
    return j0(2.0 * np.pi * f_d * lags * symbol_duration(cfg))


def robust_delay_bins(cfg: SlotConfig) -> int:
    """Bulk transform-domain support for a uniform delay profile on [0, 3 us]."""
    return int(np.ceil(
        ROBUST_MAX_DELAY_SPREAD * cfg.sample_rate * cfg.active_subcarriers / cfg.fft_size
    ))


def worst_case_delay_powers(n_bins: int, spacing_hz: float) -> np.ndarray:
    """Transform-domain powers of the worst-case uniform delay prior.

    For delay uniform on [0, 3 us] the frequency correlation across a
    comb with the given tone spacing is phi(dk) = E[e^{-j2 pi dk df tau}];
    the per-bin powers of the unitary n_bins-point delay transform follow
    from the windowed Fourier sum of phi. Finite observation leaves a
    small leakage floor in every bin, so the resulting Wiener weights
    tend to the identity as noise vanishes instead of hard-projecting
    onto the bulk support (see robust_delay_bins).
    """
    lags = np.arange(-(n_bins - 1), n_bins)
    x = 2j * np.pi * spacing_hz * lags * ROBUST_MAX_DELAY_SPREAD
    phi = np.where(lags == 0, 1.0, (1.0 - np.exp(-x)) / np.where(lags == 0, 1.0, x))
    weighted = (n_bins - np.abs(lags)) * phi
    seq = np.zeros(n_bins, dtype=complex)
    np.add.at(seq, lags % n_bins, weighted)
    g = np.real(np.fft.ifft(seq))
    return np.maximum(g, 0.0)


def robust_lmmse_estimate(
    rx: ResourceGrid,
    tx_pilots: np.ndarray,
    noise_var: float,
    cfg: SlotConfig,
) -> ChannelTapGrid:
    """DFT-basis Wiener filtering with fixed worst-case statistics.

    Pilot LS estimates are shrunk jointly in the (pilot-comb delay DFT) x
    (worst-case time eigenbasis) domain, assuming a uniform delay profile
    up to 3 us and Jakes fading at 500 km/h, then interpolated to the
    full grid exactly like LS. The prior carries a small diagonal
    mismatch floor, so the filter degenerates to plain LS once the noise
    drops below the floor (the high-SNR merge with the LS error curve).
    noise_var = 0 short-circuits to interpolated LS.
    """
    K, N = rx.shape
    if noise_var <= 0.0:
        return ls_estimate(rx, tx_pilots)
    pilot_rows, h_p = pilot_ls(rx, tx_pilots)
    P = len(pilot_rows)
    g = worst_case_delay_powers(P, cfg.pilot_interval * cfg.subcarrier_spacing)
    r_t = worst_case_time_corr(cfg)
    cols = np.arange(N)
    R_t = _toeplitz_from_lags(r_t, cols, cols)
    mu, Ut = np.linalg.eigh(R_t)
    mu = np.maximum(mu, 0.0)
    prior = np.outer(g, mu) + ROBUST_MISMATCH_FLOOR
    lam = prior / (prior + noise_var)
    # delays >= 0 occupy the low bins of the inverse DFT of the response
    a = np.fft.ifft(h_p, axis=0) @ Ut
    h_f = np.fft.fft(lam * a, axis=0) @ Ut.T
    h0 = _interp_columns(h_f, pilot_rows, K)
    zeros = np.zeros_like(h0)
    return ChannelTapGrid(h0=h0, hm1=zeros.copy(), hp1=zeros.copy())


def zf_equalize(rx: ResourceGrid, taps: ChannelTapGrid) -> np.ndarray:
    """Single-tap zero-forcing, eps-stabilized against vanishing taps."""
    return stabilized_divide(rx.symbols, taps.h0)
