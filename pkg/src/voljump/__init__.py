"""Detection and location of volatility jumps from noisy high-frequency prices."""

from .config import FormatError, ObservationSeries, ParameterError, TuningConfig, choose_bins

__version__ = "0.1.0"
