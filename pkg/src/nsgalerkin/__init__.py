"""Fourier-Galerkin Navier-Stokes toolkit on the periodic 3-torus.

Exact and pseudo-spectral convection terms, norms on Fourier coefficients,
lattice-sum constants, convolution-splitting bound checks, exponential time
integration and the studies that tie them together.
"""
import os

import numba

# TBB shipped with some distributions is too old for numba and triggers a
# warning on first parallel call; OpenMP is always present alongside numba.
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "omp"

from .errors import (  # noqa: E402
    ConfigurationError,
    DomainError,
    IntegrationError,
    PreconditionError,
    ResourceError,
)
from .spectral_core import (  # noqa: E402
    SpectralField,
    leray_project,
    max_divergence,
    nonlinear_term_direct,
    nonlinear_term_fast,
    read_field,
    symmetrize_real,
    write_field,
)

__version__ = "0.1.0"
