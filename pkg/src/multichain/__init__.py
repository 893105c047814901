"""Integrable graded spin chains whose local states come in multiplicity sets.

Submodules
----------
graded_space
    Graded local spaces, graded tensor products and embeddings.
rmatrix
    Boltzmann weights and R-matrices, Yang-Baxter checks.
chain
    Lax, monodromy, transfer and Hamiltonian operators.
bethe
    Nested Bethe ansatz eigenvalues, equations and energies.
spectra
    Exact diagonalization and Bethe-vs-exact matching.
cli
    Command-line front end.
"""

__version__ = "0.1.0"

from .graded_space import LiftConvention, ModelSpec, SpectralOperator, StateIndex
from .rmatrix import PoleError, build_r_base, build_r_lifted, check_ybe, weight
from .chain import ChainSpec, hamiltonian_closed, monodromy, transfer
from .bethe import BetheConfig, eigenvalue_recursion, solve_bethe
from .spectra import dense_spectrum, degeneracy_histogram, match_aba_to_ed

__all__ = [
    "LiftConvention",
    "ModelSpec",
    "SpectralOperator",
    "StateIndex",
    "PoleError",
    "build_r_base",
    "build_r_lifted",
    "check_ybe",
    "weight",
    "ChainSpec",
    "hamiltonian_closed",
    "monodromy",
    "transfer",
    "BetheConfig",
    "eigenvalue_recursion",
    "solve_bethe",
    "dense_spectrum",
    "degeneracy_histogram",
    "match_aba_to_ed",
]
