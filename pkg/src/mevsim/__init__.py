"""Simulation and analysis toolkit for composable GHZ entanglement verification."""

__version__ = "0.1.0"
