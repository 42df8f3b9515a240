"""Effective descriptions of bosonic unitaries.

Certified truncation of physical unitaries to finite Fock cutoffs, exact
block-diagonal polynomial Hamiltonians for finite-dimensional operators,
state preparation and Solovay-Kitaev compilation over polynomial gate sets.
"""

__version__ = "0.1.0"
