"""Reliability of multiplexed repeater chains and small quantum networks."""

__version__ = "1.0.0"
