"""Decoherence of continuous-time quantum walks on hypercubes and hyperlattices."""

__version__ = "0.1.0"
