"""frozenplanet: regularized frozen-planet orbits of helium.

Computes and certifies critical points of the one-loop regularized family
and the two-electron mean/instantaneous interaction functionals, checks
the algebraic identities tying them to complete elliptic integrals, and
demonstrates the determinant-line orientation machinery (spectral count,
weighted section, non-orientable counterexample loop) at finite
truncation.
"""

from . import (  # noqa: F401
    detline,
    elliptic,
    errors,
    frozen,
    helium,
    levi_civita,
    loops,
    serialize,
    solve,
)

__version__ = "0.1.0"
