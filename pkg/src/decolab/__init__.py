"""decolab: a numerical laboratory for decoherence in mixed spectra.

Generalized states and observables over a bound-plus-continuum spectrum,
their unitary evolution and weak limits, the exact final pointer basis,
phase-space (Wigner/Weyl) correspondence checks, a solvable
oscillator-bath model, and the consistent-histories calculus, all behind
a deterministic CLI.
"""

from . import (  # noqa: F401
    evolution,
    friedrichs_bath,
    histories,
    pointer,
    spectral_core,
    wigner,
)

__version__ = "0.1.0"

__all__ = [
    "evolution",
    "friedrichs_bath",
    "histories",
    "pointer",
    "spectral_core",
    "wigner",
    "__version__",
]
