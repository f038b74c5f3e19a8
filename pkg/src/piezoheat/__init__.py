"""Heat rod coupled to a magnetizable piezoelectric beam with tempered fractional damping.

Submodules: ``fracdiff`` (memory kernel and its diffusive realization),
``domain`` (grids, state, energy), ``assembly`` (semi-discrete generator),
``timestep`` (implicit integration), ``spectral`` (eigenvalues, resolvent,
decay fits), ``config`` and ``cli`` (runs and artifacts).
"""

from .assembly import GeneratorMatrix, assemble_generator, dissipation_rate
from .domain import Grid, MaterialParams, StateVector, energy
from .fracdiff import FractionalParams, XiQuadrature, build_xi_quadrature
from .timestep import Scheme, SimConfig, simulate

__version__ = "0.1.0"

__all__ = [
    "FractionalParams",
    "XiQuadrature",
    "build_xi_quadrature",
    "MaterialParams",
    "Grid",
    "StateVector",
    "energy",
    "GeneratorMatrix",
    "assemble_generator",
    "dissipation_rate",
    "Scheme",
    "SimConfig",
    "simulate",
]
