"""Sound-speed-profile estimation from fused CTD and transmission-loss
measurements, with variance-minimizing receding-horizon path planning."""

__version__ = "0.1.0"
