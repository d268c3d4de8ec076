"""Decoherent histories, Lindblad dynamics and de Sitter fluctuation estimates.

Submodules
----------
qops        dense operator algebra (propagators, polar decomposition, ...)
histories   class operators and decoherence functionals
oscillator  truncated harmonic oscillator: energy and phase histories
openquantum Lindblad propagation, jump unraveling, relaxation experiments
cosmo       log-space de Sitter thermodynamics and fluctuation rates
ensembles   typical coarse-grained histories of random projector families
cli         command line driver (``decohist --help``)
"""

from . import cosmo, ensembles, histories, openquantum, oscillator, qops, tolerances

__version__ = "0.1.0"

__all__ = ["cosmo", "ensembles", "histories", "openquantum", "oscillator", "qops", "tolerances"]
