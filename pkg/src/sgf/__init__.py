"""Simulation and hierarchical learning harness for NOMA-assisted semi-grant-free uplink."""

__version__ = "0.1.0"
