"""Numerical toolkit for multilinear Fourier multipliers and flag paraproducts on the torus."""

__version__ = "0.1.0"

from .errors import AliasingError, ConsistencyError, FlagparaError, InputError  # noqa: F401
from .spectral import Grid, SampledFunction, Spectrum  # noqa: F401
