"""Material constants, grids, state layout, and the discrete energy.

Layout of the unknown vector ``U = (z, v, V, p, P, phi)``:

* ``z``: temperature at the ``n_heat`` interior nodes of ``(-l1, 0)``.
  ``z(-l1) = 0`` is eliminated and ``z(0)`` is not stored: the interface
  node is shared with the beam and carries ``z(0) = V(0)``.
* ``v, V, p, P``: beam values at ``x_i = i h_beam``, ``i = 0 .. n_beam``
  (the interface node plus the interior); ``v(l2) = p(l2) = 0`` are
  eliminated.
* ``phi``: one row per beam node, one column per xi node.

Norms use the trapezoid rule on nodal values and the midpoint rule on cell
differences; the generator in :mod:`piezoheat.assembly` uses the same
stencils, which is what makes the discrete energy balance exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .fracdiff import FractionalParams, XiQuadrature

__all__ = [
    "MaterialParams",
    "Grid",
    "StateVector",
    "EnergyBreakdown",
    "TransmissionResiduals",
    "energy",
    "norm_h",
    "norm_standard",
    "norm_equivalence_constants",
    "transmission_residuals",
    "random_state",
]


@dataclass(frozen=True)
class MaterialParams:
    rho: float = 1.0
    chi: float = 2.0
    gamma: float = 1.0
    beta: float = 1.0
    mu_mag: float = 1.0
    kappa: float = 1.0
    ell1: float = 1.0
    ell2: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if not math.isfinite(val):
                raise ValueError(f"{f.name} must be finite, got {val!r}")
            if f.name != "gamma" and not val > 0:
                raise ValueError(f"{f.name} must be > 0, got {val!r}")
        if not self.chi1 > 0:
            raise ValueError(
                f"chi1 = chi - gamma^2 beta must be > 0, got {self.chi1!r} "
                f"(chi={self.chi}, gamma={self.gamma}, beta={self.beta})"
            )

    @property
    def chi1(self) -> float:
        return self.chi - self.gamma**2 * self.beta


@dataclass(frozen=True)
class Grid:
    n_heat: int
    n_beam: int
    ell1: float
    ell2: float
    xi_rule: XiQuadrature

    def __post_init__(self):
        if self.n_heat < 3 or self.n_beam < 3:
            raise ValueError("n_heat and n_beam must be >= 3")

    @classmethod
    def build(cls, mp: MaterialParams, n_heat: int, n_beam: int, xi_rule: XiQuadrature) -> "Grid":
        return cls(n_heat, n_beam, mp.ell1, mp.ell2, xi_rule)

    @property
    def h_heat(self) -> float:
        return self.ell1 / (self.n_heat + 1)

    @property
    def h_beam(self) -> float:
        return self.ell2 / (self.n_beam + 1)

    @property
    def nb(self) -> int:
        """Beam unknowns per field (interface node included)."""
        return self.n_beam + 1

    @property
    def K(self) -> int:
        return self.xi_rule.count

    @property
    def x_heat(self) -> np.ndarray:
        return -self.ell1 + self.h_heat * np.arange(1, self.n_heat + 1)

    @property
    def x_beam(self) -> np.ndarray:
        return self.h_beam * np.arange(self.nb)

    @property
    def blocks(self) -> dict[str, slice]:
        nz, nb = self.n_heat, self.nb
        edges = np.cumsum([0, nz, nb, nb, nb, nb, nb * self.K])
        names = ("z", "v", "V", "p", "P", "phi")
        return {k: slice(int(a), int(b)) for k, a, b in zip(names, edges[:-1], edges[1:])}

    @property
    def size(self) -> int:
        return self.n_heat + self.nb * (4 + self.K)

    def beam_mass(self) -> np.ndarray:
        m = np.full(self.nb, self.h_beam)
        m[0] *= 0.5
        return m


@dataclass
class StateVector:
    z: np.ndarray
    v: np.ndarray
    V: np.ndarray
    p: np.ndarray
    P: np.ndarray
    phi: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid) -> "StateVector":
        nb = grid.nb
        return cls(
            np.zeros(grid.n_heat), np.zeros(nb), np.zeros(nb),
            np.zeros(nb), np.zeros(nb), np.zeros((nb, grid.K)),
        )

    @classmethod
    def from_array(cls, grid: Grid, arr) -> "StateVector":
        arr = np.asarray(arr)
        if arr.shape != (grid.size,):
            raise ValueError(f"state array has shape {arr.shape}, grid needs ({grid.size},)")
        b = grid.blocks
        return cls(
            arr[b["z"]].copy(), arr[b["v"]].copy(), arr[b["V"]].copy(),
            arr[b["p"]].copy(), arr[b["P"]].copy(),
            arr[b["phi"]].reshape(grid.nb, grid.K).copy(),
        )

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.z, self.v, self.V, self.p, self.P, self.phi.ravel()])

    def check(self, grid: Grid) -> None:
        nb = grid.nb
        expected = {"z": (grid.n_heat,), "v": (nb,), "V": (nb,), "p": (nb,), "P": (nb,), "phi": (nb, grid.K)}
        for name, shape in expected.items():
            got = np.shape(getattr(self, name))
            if got != shape:
                raise ValueError(f"state field {name} has shape {got}, grid needs {shape}")

    def __mul__(self, c):
        return StateVector(*(c * np.asarray(getattr(self, f.name)) for f in fields(self)))

    __rmul__ = __mul__


@dataclass(frozen=True)
class EnergyBreakdown:
    te: float
    mech_ke: float
    mag_ke: float
    pe: float
    electromech_e: float
    diff_e: float

    @property
    def total(self) -> float:
        return 0.5 * (self.te + self.mech_ke + self.mag_ke + self.pe + self.electromech_e + self.diff_e)


def heat_profile(state: StateVector) -> np.ndarray:
    """Temperature on every heat node, ends included: (0, z_1 .. z_n, V_0)."""
    return np.concatenate([[0.0], state.z, [state.V[0]]])


def heat_gradient(state: StateVector, grid: Grid) -> np.ndarray:
    return np.diff(heat_profile(state)) / grid.h_heat


def beam_gradient(u: np.ndarray, grid: Grid) -> np.ndarray:
    return np.diff(np.append(u, 0.0)) / grid.h_beam


def energy(state: StateVector, mp: MaterialParams, grid: Grid, fp: FractionalParams) -> EnergyBreakdown:
    """Energy components; ``te`` includes the half cell at the shared interface node."""
    state.check(grid)
    h1, h2 = grid.h_heat, grid.h_beam
    m = grid.beam_mass()
    vx = beam_gradient(state.v, grid)
    px = beam_gradient(state.p, grid)
    te = h1 * np.sum(state.z**2) + 0.5 * h1 * state.V[0] ** 2
    mech = mp.rho * np.sum(m * state.V**2)
    mag = mp.mu_mag * np.sum(m * state.P**2)
    pe = mp.chi1 * h2 * np.sum(vx**2)
    em = mp.beta * h2 * np.sum((mp.gamma * vx - px) ** 2)
    diff = fp.coeff_c * float(m @ (state.phi**2 @ grid.xi_rule.weights)) if grid.K else 0.0
    return EnergyBreakdown(float(te), float(mech), float(mag), float(pe), float(em), float(diff))


def norm_h(state: StateVector, mp: MaterialParams, grid: Grid, fp: FractionalParams) -> float:
    return math.sqrt(2.0 * energy(state, mp, grid, fp).total)


def norm_standard(state: StateVector, grid: Grid) -> float:
    state.check(grid)
    h1, h2 = grid.h_heat, grid.h_beam
    m = grid.beam_mass()
    sq = h1 * np.sum(state.z**2) + 0.5 * h1 * state.V[0] ** 2
    sq += np.sum(m * state.V**2) + np.sum(m * state.P**2)
    sq += h2 * np.sum(beam_gradient(state.v, grid) ** 2) + h2 * np.sum(beam_gradient(state.p, grid) ** 2)
    if grid.K:
        sq += float(m @ (state.phi**2 @ grid.xi_rule.weights))
    return math.sqrt(sq)


def norm_equivalence_constants(mp: MaterialParams, fp: FractionalParams) -> tuple[float, float]:
    """(C1, C2) with C1 |U|_S^2 <= |U|_H^2 <= C2 |U|_S^2."""
    c = fp.coeff_c
    c2 = max(1.0, mp.rho, mp.mu_mag, c, mp.chi1 + 2.0 * mp.beta * max(mp.gamma**2, 1.0))
    c1 = 1.0 / max(1.0, 1.0 / mp.rho, 1.0 / mp.mu_mag, 1.0 / c, 2.0 * max(1.0 / mp.beta, mp.gamma**2 / mp.chi1))
    return c1, c2


@dataclass(frozen=True)
class TransmissionResiduals:
    r_dirichlet: float
    r_stress: float
    r_charge: float


def _one_sided(u0, u1, u2, h):
    # second-order forward difference at the first node
    return (-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * h)


def transmission_residuals(state: StateVector, mp: MaterialParams, grid: Grid) -> TransmissionResiduals:
    """Interface residuals at x = 0 from second-order one-sided differences."""
    state.check(grid)
    h1, h2 = grid.h_heat, grid.h_beam
    zfull = heat_profile(state)
    z0 = zfull[-1]
    zx = -_one_sided(zfull[-1], zfull[-2], zfull[-3], h1)
    vx = _one_sided(state.v[0], state.v[1], state.v[2], h2)
    px = _one_sided(state.p[0], state.p[1], state.p[2], h2)
    gb = mp.gamma * mp.beta
    return TransmissionResiduals(
        r_dirichlet=float(z0 - state.V[0]),
        r_stress=float(mp.chi * vx - gb * px - mp.kappa * zx),
        r_charge=float(mp.beta * px - gb * vx),
    )


def random_state(grid: Grid, rng: np.random.Generator) -> StateVector:
    """Componentwise uniform on [-1, 1]; boundary values are eliminated by layout."""
    return StateVector.from_array(grid, rng.uniform(-1.0, 1.0, grid.size))
