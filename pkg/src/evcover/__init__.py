"""Reinforced-coverage planning of EV charging stations on road networks."""

__version__ = "0.1.0"
