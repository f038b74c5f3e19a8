"""Implicit time stepping of dU/dt = A U with energy bookkeeping."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .assembly import GeneratorMatrix, dissipation_rate
from .domain import EnergyBreakdown, Grid, MaterialParams, StateVector, energy, transmission_residuals
from .fracdiff import FractionalParams

__all__ = [
    "Scheme",
    "SimConfig",
    "EnergyTrace",
    "SimulationError",
    "Stepper",
    "step",
    "simulate",
    "TRACE_HEADER",
]

TRACE_HEADER = ("t", "E_total", "TE", "MechKE", "MagKE", "PE", "ElectroMechE", "DiffE", "dissipation_residual")


class Scheme(str, enum.Enum):
    BACKWARD_EULER = "backward_euler"
    CRANK_NICOLSON = "crank_nicolson"


class SimulationError(RuntimeError):
    """Raised when a run produces non-finite values or a solve fails.

    ``trace`` holds the samples recorded before the failure.
    """

    def __init__(self, message: str, trace: "EnergyTrace | None" = None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_end: float
    scheme: Scheme = Scheme.CRANK_NICOLSON
    trace_stride: int = 1
    initial_condition: str = "standard"

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.t_end >= self.dt:
            raise ValueError(f"t_end must be >= dt, got t_end={self.t_end}, dt={self.dt}")
        if self.trace_stride < 1:
            raise ValueError("trace_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class EnergyTrace:
    times: list = field(default_factory=list)
    breakdowns: list = field(default_factory=list)
    dissipation_residuals: list = field(default_factory=list)
    transmission: list = field(default_factory=list)

    def append(self, t, e: EnergyBreakdown, residual: float, trans=None) -> None:
        self.times.append(float(t))
        self.breakdowns.append(e)
        self.dissipation_residuals.append(float(residual))
        if trans is not None:
            self.transmission.append(trans)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def totals(self) -> np.ndarray:
        return np.array([b.total for b in self.breakdowns])

    def rows(self):
        for t, b, r in zip(self.times, self.breakdowns, self.dissipation_residuals):
            yield (t, b.total, b.te, b.mech_ke, b.mag_ke, b.pe, b.electromech_e, b.diff_e, r)

    def write_csv(self, fh, digits: int = 12) -> None:
        """Header plus one row per sample, ``digits`` significant digits."""
        fh.write(",".join(TRACE_HEADER) + "\n")
        fmt = f"{{:.{digits - 1}e}}"
        for row in self.rows():
            fh.write(",".join(fmt.format(x) for x in row) + "\n")


class Stepper:
    """One factorization of the implicit system, reused for every step."""

    def __init__(self, A: GeneratorMatrix, scheme, dt: float):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.A = A
        self.scheme = Scheme(scheme)
        self.dt = dt
        n = A.dimension
        I = sp.identity(n, format="csc")
        M = A.matrix.tocsc()
        if self.scheme is Scheme.BACKWARD_EULER:
            lhs, self.rhs = I - dt * M, None
        else:
            lhs, self.rhs = I - 0.5 * dt * M, (I + 0.5 * dt * M).tocsr()
        self._lhs = lhs.tocsr()
        try:
            self._lu = splu(lhs.tocsc())
        except RuntimeError as exc:
            raise SimulationError(f"factorization failed: {exc}") from exc

    def __call__(self, x: np.ndarray) -> np.ndarray:
        b = x if self.rhs is None else self.rhs @ x
        y = self._lu.solve(b)
        if not np.all(np.isfinite(y)):
            res = np.linalg.norm(self._lhs @ y - b)
            raise SimulationError(f"non-finite state after linear solve (residual {res:.3e})")
        return y


def step(state: StateVector, A: GeneratorMatrix, scheme, dt: float) -> StateVector:
    """Single implicit step; builds a fresh factorization (use :class:`Stepper` in loops)."""
    return StateVector.from_array(A.grid, Stepper(A, scheme, dt)(state.to_array()))


def simulate(
    cfg: SimConfig,
    mp: MaterialParams,
    fp: FractionalParams,
    grid: Grid,
    U0: StateVector,
    A: GeneratorMatrix | None = None,
    track_transmission: bool = True,
) -> EnergyTrace:
    """Integrate from ``U0`` to ``cfg.t_end`` and record energies.

    The residual stored with a sample is the one of the step ending there:
    ``|(E_{n+1} - E_n)/dt - (D_n + D_{n+1})/2|`` with ``D`` the dissipation
    rate.  It is second order in ``dt`` for Crank-Nicolson.
    """
    from .assembly import assemble_generator

    U0.check(grid)
    if U0.phi.size and np.any(U0.phi != 0):
        raise ValueError("memory variables must start at rest (phi = 0)")
    if A is None:
        A = assemble_generator(mp, fp, grid)
    stepper = Stepper(A, cfg.scheme, cfg.dt)
    trace = EnergyTrace()
    x = U0.to_array()
    state = U0
    e = energy(state, mp, grid, fp)
    d = dissipation_rate(state, mp, fp, grid)
    trace.append(0.0, e, 0.0, transmission_residuals(state, mp, grid) if track_transmission else None)
    n = cfg.n_steps
    for k in range(1, n + 1):
        try:
            x = stepper(x)
        except SimulationError as exc:
            exc.trace = trace
            raise
        state = StateVector.from_array(grid, x)
        e_new = energy(state, mp, grid, fp)
        d_new = dissipation_rate(state, mp, fp, grid)
        if not math.isfinite(e_new.total):
            raise SimulationError(f"non-finite energy at step {k}", trace)
        resid = abs((e_new.total - e.total) / cfg.dt - 0.5 * (d + d_new))
        if k % cfg.trace_stride == 0 or k == n:
            trans = transmission_residuals(state, mp, grid) if track_transmission else None
            trace.append(k * cfg.dt, e_new, resid, trans)
        e, d = e_new, d_new
    return trace
