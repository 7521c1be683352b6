"""Numerical laboratory for a frustrated J1-J3 spin model on the square lattice.

Computes renormalized chirality energies, constructs helical ground states and
recovery sequences, minimizes lattice energies under chirality boundary data,
and checks the interfacial constants and rigidity structure of the continuum
limit.
"""

from .lattice import Domain, ModelParams, ScalarGrid, SpinField, index_set
from .chirality import ChiralityPair, ThetaFields, oriented_angle, transform
from .energy import EnergyReport, energy_E, energy_H, mm_decomposition, rho

__all__ = [
    "Domain",
    "ModelParams",
    "ScalarGrid",
    "SpinField",
    "index_set",
    "ChiralityPair",
    "ThetaFields",
    "oriented_angle",
    "transform",
    "EnergyReport",
    "energy_E",
    "energy_H",
    "mm_decomposition",
    "rho",
]

__version__ = "0.1.0"
