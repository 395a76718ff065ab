"""fiocalc: numerics for oscillatory integrals with complex phase."""

__version__ = "0.1.0"
