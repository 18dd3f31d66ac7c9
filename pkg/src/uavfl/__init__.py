"""uavfl: deterministic simulator of UAV edge federated learning with
diversity- and battery-aware participant selection."""

__version__ = "0.1.0"
