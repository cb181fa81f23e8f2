"""Decompose daily electricity consumption into weekly, temperature,
daylight and wind components and isolate the unexplained residual."""

__version__ = "0.1.0"
