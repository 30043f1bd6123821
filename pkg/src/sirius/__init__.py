"""Link-level OFDM simulator and channel estimator suite.

Simulates one 5G-NR-like SISO OFDM slot at a time over a doubly-selective
TDL fading channel, and compares classical pilot-aided estimators (LS,
ideal LMMSE, robust LMMSE) against SIRIUS, a per-slot self-supervised
coordinate-network estimator that also learns the dominant adjacent-
subcarrier interference taps.
"""

__version__ = "0.1.0"

from .channel import ChannelRealization, ChannelTapGrid, TdlProfile
from .estimator import SiriusConfig, estimate_slot
from .grid import ResourceGrid, SlotConfig
from .harness import RunResult, SweepConfig, run_sweep

__all__ = [
    "SlotConfig",
    "ResourceGrid",
    "TdlProfile",
    "ChannelRealization",
    "ChannelTapGrid",
    "SiriusConfig",
    "estimate_slot",
    "SweepConfig",
    "RunResult",
    "run_sweep",
    "__version__",
]
