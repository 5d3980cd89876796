"""Recovering a potential on a rectangle from the nodal domains of its eigenfunctions.

Modules: lattice (indices, Diophantine screen), potentials, spectral (sine
Galerkin), perturbation, nodal, domain_eig (lambda_1 on grid masks),
reconstruct (q_hat samples and sweeps), cli.
"""

from .lattice import (DomainError, GoodIndexCriteria, LatticeIndex, RectangleSpec,
                      check_admissible, select_good_indices)
from .potentials import Potential, make_mean_zero_bump, standard_bump, zero_potential
from .reconstruct import GridPolicy, reconstruct_index, sweep

__version__ = "0.1.0"

__all__ = [
    "DomainError", "GoodIndexCriteria", "LatticeIndex", "RectangleSpec", "check_admissible",
    "select_good_indices", "Potential", "make_mean_zero_bump", "standard_bump", "zero_potential",
    "GridPolicy", "reconstruct_index", "sweep",
]
