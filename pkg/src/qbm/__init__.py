"""Quantum Brownian motion of a particle coupled to a field through an internal oscillator.

Modules
-------
numerics
    Grids, kernels, spectra, Fourier and Hilbert transforms, PSD factorization.
baths
    Spectral densities and first-order dissipation and noise kernels.
idf
    Dressed propagator of the internal oscillator and its noise correlations.
composite
    Second-order kernels of the center of mass and their two-frequency form.
langevin
    Colored-noise sampling and the non-Markovian equation of motion.
cli
    The ``qbm`` command-line runner.
"""

__version__ = "0.1.0"

from .baths import BathSpec  # noqa: E402
from .errors import (  # noqa: E402
    ConfigError,
    NumericalGuard,
    QbmError,
)
from .idf import OscillatorSpec  # noqa: E402
from .numerics import FreqGrid, Kernel1D, Kernel2D, Spectrum, TimeGrid  # noqa: E402

__all__ = [
    "BathSpec",
    "ConfigError",
    "FreqGrid",
    "Kernel1D",
    "Kernel2D",
    "NumericalGuard",
    "OscillatorSpec",
    "QbmError",
    "Spectrum",
    "TimeGrid",
    "__version__",
]
