"""Evolving classical, symbolic and supervisor controllers for a simulated Khepera robot."""

__version__ = "0.1.0"
