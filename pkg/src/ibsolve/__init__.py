"""Finite-size spectra of integrable models.

Submodules:

- ``kernels``: kernel G, chi, phi_nu, cosh/sinh convolutions, Bessel helpers
- ``solver``: fixed-point driver and source-position solver
- ``sg_nlie``: sine-Gordon counting-function equation
- ``sg_limits``: breathers, IR amplitudes, UV conformal weights
- ``tba``: A_L strip TBA, closed-form energies, integrals of motion
- ``lattice``: RSOS transfer matrices and R-matrix oracles
- ``hubbard``: coupled Hubbard NLIEs and the Lieb-Wu oracle
- ``io``, ``cli``, ``plots``: configuration, records, command line
"""

__version__ = "0.1.0"

from .solver import ConvergenceReport, DivergenceError, IterationConfig  # noqa: E402

__all__ = ["__version__", "IterationConfig", "ConvergenceReport", "DivergenceError"]
