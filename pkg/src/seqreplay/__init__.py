"""Sequence learning and replay-based consolidation in a discrete-time spiking network."""

__version__ = "0.1.0"
