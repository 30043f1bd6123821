"""OFDM slot structure: configuration, QPSK mapping, pilots, coordinates.

Everything here is a pure function of immutable inputs; the rest of the
package builds on these conventions (comb pilot layout, Gray-mapped QPSK,
[-1, 1] coordinate normalization of the resource grid).
"""

from dataclasses import dataclass, field

import numpy as np

# Unit-energy QPSK constellation indexed by (b0, b1) Gray bits:
# b0 flips the real sign, b1 the imaginary sign.
_QPSK_SCALE = 1.0 / np.sqrt(2.0)
QPSK_POINTS = _QPSK_SCALE * np.array(
    [1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j], dtype=complex
)  # order: (0,0), (0,1), (1,0), (1,1)


@dataclass(frozen=True)
class SlotConfig:
    """Static parameters of one OFDM slot.

    Defaults follow the simulated 5G NR V2X numerology: 512-point FFT,
    288 active subcarriers, 14 symbols per slot, 30 kHz spacing at
    5.9 GHz, comb-type pilots every 8th subcarrier, QPSK payload.
    """

    fft_size: int = 512
    active_subcarriers: int = 288
    symbols_per_slot: int = 14
    subcarrier_spacing: float = 30e3
    carrier_frequency: float = 5.9e9
    cp_length: int = 36
    pilot_interval: int = 8
    modulation: str = "QPSK"

    def __post_init__(self):
        if self.active_subcarriers > self.fft_size:
            raise ValueError("active_subcarriers must not exceed fft_size")
        if self.pilot_interval < 1:
            raise ValueError("pilot_interval must be >= 1")
        if self.num_pilot_subcarriers < 2:
            raise ValueError("pilot layout needs >= 2 pilot subcarriers per symbol")
        if self.modulation != "QPSK":
            raise ValueError(f"unsupported modulation {self.modulation!r}")

    @property
    def sample_rate(self) -> float:
        """Baseband sampling rate in Hz (fft_size x subcarrier spacing)."""
        return self.fft_size * self.subcarrier_spacing

    @property
    def symbol_length(self) -> int:
        """Samples per OFDM symbol including its cyclic prefix."""
        return self.fft_size + self.cp_length

    @property
    def slot_length(self) -> int:
        """Samples per slot including all cyclic prefixes."""
        return self.symbols_per_slot * self.symbol_length

    @property
    def num_pilot_subcarriers(self) -> int:
        return int(np.ceil(self.active_subcarriers / self.pilot_interval))

    @property
    def pilot_subcarriers(self) -> np.ndarray:
        return np.arange(0, self.active_subcarriers, self.pilot_interval)


@dataclass
class ResourceGrid:
    """One K x N slot of symbols plus the pilot layout.

    kind is "transmitted" (unit-energy constellation points) or
    "received" (post-FFT channel observations).
    """

    symbols: np.ndarray
    pilot_mask: np.ndarray
    kind: str = "transmitted"

    def __post_init__(self):
        self.symbols = np.asarray(self.symbols, dtype=complex)
        self.pilot_mask = np.asarray(self.pilot_mask, dtype=bool)
        if self.symbols.shape != self.pilot_mask.shape:
            raise ValueError("symbols and pilot_mask shapes differ")
        if self.kind not in ("transmitted", "received"):
            raise ValueError(f"bad grid kind {self.kind!r}")

    @property
    def shape(self):
        return self.symbols.shape


def qpsk_modulate(bits) -> complex:
    """Map a Gray-coded bit pair to a unit-energy QPSK point."""
    b0, b1 = bits
    if b0 not in (0, 1) or b1 not in (0, 1):
        raise ValueError("bits must be 0 or 1")
    return complex(QPSK_POINTS[2 * b0 + b1])


def qpsk_modulate_array(bits: np.ndarray) -> np.ndarray:
    """Vectorized Gray QPSK mapping; bits has shape (..., 2)."""
    bits = np.asarray(bits)
    return _QPSK_SCALE * ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1]))


def qpsk_demodulate_array(symbols: np.ndarray) -> np.ndarray:
    """Hard-decision bits of shape (..., 2); ties go to the positive half-plane."""
    symbols = np.asarray(symbols)
    b0 = (symbols.real < 0).astype(np.uint8)
    b1 = (symbols.imag < 0).astype(np.uint8)
    return np.stack([b0, b1], axis=-1)


def qpsk_hard_decision(symbol):
    """Nearest QPSK point and its Euclidean distance.

    Works elementwise on arrays. Ties (zero real or imaginary part) are
    broken toward the positive half-plane.
    """
    symbol = np.asarray(symbol, dtype=complex)
    point = _QPSK_SCALE * (
        np.where(symbol.real >= 0, 1.0, -1.0) + 1j * np.where(symbol.imag >= 0, 1.0, -1.0)
    )
    distance = np.abs(symbol - point)
    if symbol.ndim == 0:
        return complex(point), float(distance)
    return point, distance


def build_pilot_mask(cfg: SlotConfig) -> np.ndarray:
    """Comb-type pilot mask: every pilot_interval-th subcarrier, all symbols."""
    if cfg.pilot_interval >= cfg.active_subcarriers:
        raise ValueError("pilot_interval must be smaller than the active band")
    mask = np.zeros((cfg.active_subcarriers, cfg.symbols_per_slot), dtype=bool)
    mask[cfg.pilot_subcarriers, :] = True
    return mask


def normalize_coordinates(cfg: SlotConfig) -> np.ndarray:
    """(K, N, 2) grid of normalized (frequency, time) coordinates in [-1, 1].

    Subcarrier 0 / symbol 0 map to -1, subcarrier K-1 / symbol N-1 to +1.
    """
    K, N = cfg.active_subcarriers, cfg.symbols_per_slot
    if K < 2 or N < 2:
        raise ValueError("coordinate grid needs K, N >= 2")
    f = 2.0 * np.arange(K) / (K - 1) - 1.0
    t = 2.0 * np.arange(N) / (N - 1) - 1.0
    coords = np.empty((K, N, 2))
    coords[:, :, 0] = f[:, None]
    coords[:, :, 1] = t[None, :]
    return coords


def random_data_grid(cfg: SlotConfig, rng: np.random.Generator):
    """Transmitted slot with random payload bits and random QPSK pilots.

    Returns (grid, bits) where bits has shape (K, N, 2); pilot-position
    bits are part of the known pilot sequence, not payload.
    """
    K, N = cfg.active_subcarriers, cfg.symbols_per_slot
    bits = rng.integers(0, 2, size=(K, N, 2))
    symbols = qpsk_modulate_array(bits)
    mask = build_pilot_mask(cfg)
    return ResourceGrid(symbols=symbols, pilot_mask=mask, kind="transmitted"), bits
