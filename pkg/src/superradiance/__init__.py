"""Two-mode superradiance of V-type three-level atoms: simulation and analysis."""

__version__ = "0.1.0"
