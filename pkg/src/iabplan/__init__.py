"""Fiber/FSO backhaul planning and Monte Carlo coverage simulation for two-hop IAB networks."""

__version__ = "0.1.0"
