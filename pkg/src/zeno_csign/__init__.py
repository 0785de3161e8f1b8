"""Simulation of a two-photon-absorption (Zeno) CSIGN gate and its parity-encoded use."""

__version__ = "0.1.0"
