"""Argumentation-based negotiation pathway simulator and synthetic dialogue pipeline."""

__version__ = "0.1.0"
