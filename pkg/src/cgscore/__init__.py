"""Training-free complexity-gap data valuation."""

__version__ = "0.1.0"
