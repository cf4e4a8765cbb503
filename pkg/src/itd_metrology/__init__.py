"""Simulation and estimation toolkit for indefinite-time-direction quantum metrology."""

__version__ = "0.1.0"
