"""Figure rendering for sirius-ofdm sweep results."""

__version__ = "0.1.0"

from .render import PlotSpec, load_results, render

__all__ = ["PlotSpec", "load_results", "render", "__version__"]
