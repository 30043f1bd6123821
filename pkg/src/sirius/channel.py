"""Doubly-selective TDL channel simulation.

Generates tapped-delay-line Rayleigh fading with a Jakes Doppler spectrum
(sum-of-sinusoids synthesis), pushes a transmitted slot through the
time-domain OFDM chain (IFFT + CP, time-varying convolution, AWGN,
FFT), and produces genie frequency-domain channel matrices and their
tri-diagonal tap grids for estimator benchmarking.

Conventions:
  * active subcarrier k occupies FFT bin k (one contiguous block);
  * tap delays are quantized to the nearest sample;
  * the per-symbol channel matrix is built over the FFT window only
    (CP samples excluded), with numpy IFFT/FFT sign conventions.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _fastmath
from .grid import ResourceGrid, SlotConfig

SPEED_OF_LIGHT = 2.998e8  # m/s

# 3GPP TR 38.901 Table 7.7.2-3, TDL-C ("Urban Canyon"): normalized delays
# and tap powers in dB, to be scaled by an RMS delay spread.
TDLC_NORMALIZED_DELAYS = np.array([
    0.0000, 0.2099, 0.2219, 0.2329, 0.2176, 0.6366, 0.6448, 0.6560,
    0.6584, 0.7935, 0.8213, 0.9336, 1.2285, 1.3083, 2.1704, 2.7105,
    4.2589, 4.6003, 5.4902, 5.6077, 6.3065, 6.6374, 7.0427, 8.6523,
])
TDLC_POWERS_DB = np.array([
    -4.4, -1.2, -3.5, -5.2, -2.5, 0.0, -2.2, -3.9,
    -7.4, -7.1, -10.7, -11.1, -5.1, -6.8, -8.7, -13.2,
    -13.9, -13.9, -15.8, -17.1, -16.0, -15.7, -21.6, -22.7,
])

SINUSOIDS_PER_TAP = 64


@dataclass(frozen=True)
class TdlProfile:
    """Power-delay profile: delays in seconds, linear powers summing to 1."""

    tap_delays: np.ndarray
    tap_powers: np.ndarray
    rms_delay_spread: float = 93e-9

    def __post_init__(self):
        delays = np.asarray(self.tap_delays, dtype=float)
        powers = np.asarray(self.tap_powers, dtype=float)
        object.__setattr__(self, "tap_delays", delays)
        object.__setattr__(self, "tap_powers", powers)
        if delays.shape != powers.shape:
            raise ValueError("tap_delays and tap_powers shapes differ")
        if np.any(delays < 0) or np.any(np.diff(delays) < 0):
            raise ValueError("tap delays must be non-negative and ascending")
        if abs(powers.sum() - 1.0) > 1e-12:
            raise ValueError("tap powers must sum to 1")

    @classmethod
    def tdl_c(cls, rms_delay_spread: float = 93e-9) -> "TdlProfile":
        powers = 10.0 ** (TDLC_POWERS_DB / 10.0)
        powers = powers / powers.sum()
        delays = TDLC_NORMALIZED_DELAYS * rms_delay_spread
        order = np.argsort(delays, kind="stable")
        return cls(delays[order], powers[order], rms_delay_spread)

    @classmethod
    def single_tap(cls) -> "TdlProfile":
        """Flat-fading profile: one tap at zero delay."""
        return cls(np.zeros(1), np.ones(1), 0.0)


@dataclass
class ChannelRealization:
    """Per-tap complex gain trajectories over one slot (including CPs)."""

    tap_gains: np.ndarray  # (L, S) complex
    tap_delays_samples: np.ndarray  # (L,) int
    max_doppler: float
    seed: int

    @property
    def num_taps(self) -> int:
        return self.tap_gains.shape[0]


@dataclass
class ChannelTapGrid:
    """Main-diagonal tap plus the two adjacent interference taps, K x N.

    hm1[k, n] multiplies the symbol at subcarrier k-1, hp1[k, n] the one
    at k+1. hm1 is zero at k=0 and hp1 at k=K-1: no coupling across the
    active band edge.
    """

    h0: np.ndarray
    hm1: np.ndarray
    hp1: np.ndarray

    def __post_init__(self):
        if not (self.h0.shape == self.hm1.shape == self.hp1.shape):
            raise ValueError("tap grids must share one shape")


def max_doppler(velocity: float, carrier: float) -> float:
    """Maximum Doppler shift in Hz for a given speed (m/s) and carrier (Hz)."""
    if velocity < 0:
        raise ValueError("velocity must be >= 0")
    return velocity * carrier / SPEED_OF_LIGHT


def quantized_delays(profile: TdlProfile, cfg: SlotConfig) -> np.ndarray:
    """Tap delays rounded to the nearest whole sample."""
    return np.rint(profile.tap_delays * cfg.sample_rate).astype(int)


def generate_realization(
    profile: TdlProfile, f_d: float, cfg: SlotConfig, seed: int
) -> ChannelRealization:
    """Sum-of-sinusoids Rayleigh tap trajectories with a Jakes spectrum.

    Each tap is an independent complex Gaussian process built from
    SINUSOIDS_PER_TAP plane waves with uniform arrival angles and phases,
    scaled to the profile power. Deterministic for a given seed.
    """
    if f_d < 0:
        raise ValueError("max Doppler must be >= 0")
    if f_d >= cfg.subcarrier_spacing / 2:
        raise ValueError(
            f"max Doppler {f_d:.1f} Hz violates the model validity bound "
            f"{cfg.subcarrier_spacing / 2:.1f} Hz"
        )
    rng = np.random.default_rng(seed)
    L = len(profile.tap_delays)
    S = cfg.slot_length
    t = np.arange(S) / cfg.sample_rate
    gains = np.empty((L, S), dtype=complex)
    amp = 1.0 / np.sqrt(SINUSOIDS_PER_TAP)
    for l in range(L):
        angles = rng.uniform(0.0, 2.0 * np.pi, SINUSOIDS_PER_TAP)
        phases = rng.uniform(0.0, 2.0 * np.pi, SINUSOIDS_PER_TAP)
        # phase[m, s] = 2*pi*f_d*cos(angle_m)*t_s + phi_m
        phase = (2.0 * np.pi * f_d) * np.cos(angles)[:, None] * t[None, :] + phases[:, None]
        gains[l] = amp * (
            _fastmath.cos(phase).sum(axis=0) + 1j * _fastmath.sin(phase).sum(axis=0)
        )
        gains[l] *= np.sqrt(profile.tap_powers[l])
    return ChannelRealization(
        tap_gains=gains,
        tap_delays_samples=quantized_delays(profile, cfg),
        max_doppler=f_d,
        seed=seed,
    )


def _check_delays(real: ChannelRealization, cfg: SlotConfig):
    if np.any(real.tap_delays_samples > cfg.cp_length):
        raise ValueError("quantized tap delay exceeds the cyclic prefix")


def ofdm_modulate(tx: ResourceGrid, cfg: SlotConfig) -> np.ndarray:
    """Per-symbol IFFT + CP; active subcarriers occupy bins 0..K-1."""
    K, N = tx.shape
    spectrum = np.zeros((cfg.fft_size, N), dtype=complex)
    spectrum[:K, :] = tx.symbols
    time_syms = np.fft.ifft(spectrum, axis=0) * cfg.fft_size
    stream = np.empty(cfg.slot_length, dtype=complex)
    sym_len = cfg.symbol_length
    for n in range(N):
        body = time_syms[:, n]
        stream[n * sym_len: n * sym_len + cfg.cp_length] = body[-cfg.cp_length:]
        stream[n * sym_len + cfg.cp_length: (n + 1) * sym_len] = body
    return stream


def ofdm_demodulate(stream: np.ndarray, cfg: SlotConfig, pilot_mask: np.ndarray) -> ResourceGrid:
    """CP removal + per-symbol FFT back to a received K x N grid."""
    K = cfg.active_subcarriers
    N = cfg.symbols_per_slot
    sym_len = cfg.symbol_length
    grid = np.empty((K, N), dtype=complex)
    for n in range(N):
        window = stream[n * sym_len + cfg.cp_length: (n + 1) * sym_len]
        grid[:, n] = np.fft.fft(window)[:K] / cfg.fft_size
    return ResourceGrid(symbols=grid, pilot_mask=pilot_mask, kind="received")


def noise_variance(snr_db) -> float:
    """Per-subcarrier complex noise variance for unit-energy symbols."""
    if snr_db is None or np.isinf(snr_db):
        return 0.0
    return 10.0 ** (-float(snr_db) / 10.0)


def apply_channel(
    tx: ResourceGrid,
    real: ChannelRealization,
    snr_db,
    cfg: SlotConfig,
    noise_seed: int,
) -> ResourceGrid:
    """Transmit a slot through the fading channel at the given SNR.

    Time-domain synthesis, sample-wise time-varying convolution with the
    quantized-delay taps, AWGN calibrated per active subcarrier after the
    FFT, then demodulation. snr_db may be None or +inf for the noise-free
    branch.
    """
    if tx.kind != "transmitted":
        raise ValueError("apply_channel expects a transmitted grid")
    _check_delays(real, cfg)
    stream = ofdm_modulate(tx, cfg)
    S = stream.shape[0]
    rx = np.zeros(S, dtype=complex)
    for l in range(real.num_taps):
        d = int(real.tap_delays_samples[l])
        if d == 0:
            rx += real.tap_gains[l] * stream
        else:
            rx[d:] += real.tap_gains[l, d:] * stream[:-d]
    var = noise_variance(snr_db)
    if var > 0.0:
        nrng = np.random.default_rng(noise_seed)
        # demodulation divides the FFT by fft_size, so a per-sample variance
        # of var * fft_size lands at exactly var per subcarrier
        sigma = np.sqrt(var * cfg.fft_size / 2.0)
        rx = rx + sigma * (nrng.standard_normal(S) + 1j * nrng.standard_normal(S))
    return ofdm_demodulate(rx, cfg, tx.pilot_mask)


def symbol_window_gains(real: ChannelRealization, cfg: SlotConfig, n: int) -> np.ndarray:
    """Tap gains over symbol n's FFT window, shape (L, fft_size)."""
    start = n * cfg.symbol_length + cfg.cp_length
    return real.tap_gains[:, start: start + cfg.fft_size]


def build_full_matrix(real: ChannelRealization, cfg: SlotConfig, n: int) -> np.ndarray:
    """Exact K x K frequency-domain channel matrix for symbol n.

    Entry [k, k'] couples transmitted subcarrier k' into received
    subcarrier k; time variation inside the FFT window produces the
    off-diagonal (inter-carrier) terms.
    """
    if not 0 <= n < cfg.symbols_per_slot:
        raise ValueError("symbol index out of range")
    _check_delays(real, cfg)
    K = cfg.active_subcarriers
    Nf = cfg.fft_size
    win = symbol_window_gains(real, cfg, n)  # (L, Nf)
    # G[l, m] = (1/Nf) sum_s win[l, s] e^{+j 2 pi m s / Nf} = ifft(win)[m]
    G = np.fft.ifft(win, axis=1)
    d = real.tap_delays_samples
    cols = np.arange(K)
    # delay phase ramp over the transmitted bin index k'
    A = np.exp(-2j * np.pi * np.outer(d, cols) / Nf)  # (L, K)
    diff = (cols[None, :] - cols[:, None]) % Nf  # (K, K): k' - k
    H = np.zeros((K, K), dtype=complex)
    for l in range(real.num_taps):
        H += A[l][None, :] * G[l][diff]
    return H


def build_full_matrices(real: ChannelRealization, cfg: SlotConfig) -> np.ndarray:
    """Stack of per-symbol channel matrices, shape (N, K, K)."""
    return np.stack(
        [build_full_matrix(real, cfg, n) for n in range(cfg.symbols_per_slot)]
    )


def extract_taps(full_matrices: np.ndarray) -> ChannelTapGrid:
    """Tri-diagonal tap grid from per-symbol channel matrices (N, K, K)."""
    N, K, _ = full_matrices.shape
    h0 = np.empty((K, N), dtype=complex)
    hm1 = np.zeros((K, N), dtype=complex)
    hp1 = np.zeros((K, N), dtype=complex)
    rows = np.arange(K)
    for n in range(N):
        H = full_matrices[n]
        h0[:, n] = H[rows, rows]
        hm1[1:, n] = H[rows[1:], rows[1:] - 1]
        hp1[:-1, n] = H[rows[:-1], rows[:-1] + 1]
    return ChannelTapGrid(h0=h0, hm1=hm1, hp1=hp1)


def genie_taps(real: ChannelRealization, cfg: SlotConfig) -> ChannelTapGrid:
    """Ground-truth tap grid without materializing full K x K matrices.

    Only the m = 0, +/-1 Fourier coefficients of the windowed tap gains
    enter the tri-diagonal, so the grid follows directly from them.
    """
    _check_delays(real, cfg)
    K = cfg.active_subcarriers
    N = cfg.symbols_per_slot
    Nf = cfg.fft_size
    d = real.tap_delays_samples
    cols = np.arange(K)
    A = np.exp(-2j * np.pi * np.outer(d, cols) / Nf)  # (L, K)
    s = np.arange(Nf)
    e_p1 = np.exp(+2j * np.pi * s / Nf) / Nf
    h0 = np.empty((K, N), dtype=complex)
    hm1 = np.zeros((K, N), dtype=complex)
    hp1 = np.zeros((K, N), dtype=complex)
    for n in range(N):
        win = symbol_window_gains(real, cfg, n)  # (L, Nf)
        g0 = win.mean(axis=1)
        gp1 = win @ e_p1          # G[l, +1]
        gm1 = win @ e_p1.conj()   # G[l, -1]
        h0[:, n] = g0 @ A
        # H[k, k-1]: diff = -1 -> G[-1]; delay phase at column k-1
        hm1[1:, n] = gm1 @ A[:, :-1]
        # H[k, k+1]: diff = +1 -> G[+1]; delay phase at column k+1
        hp1[:-1, n] = gp1 @ A[:, 1:]
    return ChannelTapGrid(h0=h0, hm1=hm1, hp1=hp1)


def tridiagonal_energy_ratio(full_matrices: np.ndarray) -> float:
    """Energy on the main and two adjacent diagonals over total energy."""
    full_matrices = np.asarray(full_matrices)
    if full_matrices.ndim == 2:
        full_matrices = full_matrices[None]
    total = float(np.sum(np.abs(full_matrices) ** 2))
    if total == 0.0:
        raise ValueError("zero-energy channel matrices")
    tri = 0.0
    K = full_matrices.shape[-1]
    rows = np.arange(K)
    for H in full_matrices:
        tri += float(np.sum(np.abs(H[rows, rows]) ** 2))
        tri += float(np.sum(np.abs(H[rows[1:], rows[1:] - 1]) ** 2))
        tri += float(np.sum(np.abs(H[rows[:-1], rows[:-1] + 1]) ** 2))
    return tri / total
