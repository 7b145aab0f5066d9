"""Physics-regularized LSTM temperature forecasting and thermal-runaway warnings."""

__version__ = "0.1.0"
