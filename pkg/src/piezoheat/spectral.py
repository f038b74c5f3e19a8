"""Spectrum, imaginary-axis resolvent growth, and energy-decay fits.

All norms are energy norms: with ``F^T F = G`` (see
:meth:`GeneratorMatrix.energy_factor`), ``|R|_H = |F R F^{-1}|_2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from .assembly import GeneratorMatrix, assemble_generator
from .domain import Grid, MaterialParams
from .fracdiff import FractionalParams, build_xi_quadrature
from .timestep import EnergyTrace

__all__ = [
    "SpectrumReport",
    "ResolventProfile",
    "DecayFit",
    "DimensionError",
    "spectrum",
    "similar_dense",
    "resolvent_norm",
    "resolvent_norm_dense",
    "resolvent_profile",
    "fit_loglog",
    "fit_decay",
    "compensated_slope",
    "default_decay_window",
    "verify_stationary_kernel",
    "MAX_DENSE_DIM",
]

MAX_DENSE_DIM = 4000


class DimensionError(ValueError):
    pass


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    max_real_part: float
    min_abs_real_part: float
    min_abs_eigenvalue: float

    @classmethod
    def from_eigenvalues(cls, ev) -> "SpectrumReport":
        ev = np.asarray(ev, dtype=complex)
        order = np.lexsort((ev.imag, ev.real))
        ev = ev[order]
        return cls(ev, float(ev.real.max()), float(np.abs(ev.real).min()), float(np.abs(ev).min()))


def similar_dense(A: GeneratorMatrix) -> np.ndarray:
    """Dense ``F A F^{-1}``: same spectrum, Euclidean norm equals the H-norm."""
    F = A.energy_factor().toarray()
    return sla.solve(F.T, (F @ A.dense()).T).T


def spectrum(A: GeneratorMatrix, max_dim: int = MAX_DENSE_DIM) -> SpectrumReport:
    if A.dimension > max_dim:
        raise DimensionError(f"dimension {A.dimension} exceeds the dense ceiling {max_dim}")
    try:
        ev = sla.eigvals(similar_dense(A))
    except sla.LinAlgError as exc:
        raise RuntimeError(f"eigensolver did not converge: {exc}") from exc
    return SpectrumReport.from_eigenvalues(ev)


class _Resolvent:
    """Sparse LU of ``i lam - A`` wrapped as the H-weighted operator ``F R F^{-1}``."""

    def __init__(self, A: GeneratorMatrix, lam: float):
        n = A.dimension
        M = (1j * lam * sp.identity(n) - A.matrix).tocsc().astype(complex)
        try:
            self.lu = splu(M)
        except RuntimeError as exc:
            raise ZeroDivisionError(f"i*{lam} is (numerically) an eigenvalue: {exc}") from exc
        F = A.energy_factor().tocsc().astype(complex)
        self.F = F
        self.Flu = splu(F)
        self.n = n

    def _apply(self, x):
        return self.F @ self.lu.solve(self.Flu.solve(x))

    def _apply_h(self, x):
        # (F R F^{-1})^H = F^{-H} R^H F^H
        return self.Flu.solve(self.lu.solve(self.F.T @ x, trans="H"), trans="T")

    def norm(self, tol: float = 1e-10) -> float:
        op = LinearOperator((self.n, self.n), matvec=lambda x: self._apply_h(self._apply(x)), dtype=complex)
        v0 = np.ones(self.n, dtype=complex)
        val = eigsh(op, k=1, which="LM", v0=v0, tol=tol, return_eigenvectors=False)
        return math.sqrt(float(val[0].real))


def resolvent_norm(A: GeneratorMatrix, lam: float) -> float:
    """``|(i lam - A)^{-1}|_H``; raises ZeroDivisionError at a singular shift."""
    return _Resolvent(A, lam).norm()


def resolvent_norm_dense(A: GeneratorMatrix, lam: float, B: np.ndarray | None = None) -> float:
    """Same quantity as :func:`resolvent_norm` as ``1 / sigma_min(i lam - F A F^{-1})``."""
    if B is None:
        B = similar_dense(A)
    smin = sla.svdvals(1j * lam * np.eye(B.shape[0]) - B)[-1]
    if smin == 0.0:
        raise ZeroDivisionError(f"i*{lam} is an eigenvalue")
    return float(1.0 / smin)


def fit_loglog(x, y) -> tuple[float, float, float]:
    """Least-squares line through ``(log x, log y)``: (slope, intercept, r^2)."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    slope, icept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icept)
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return float(slope), float(icept), float(r2)


@dataclass
class ResolventProfile:
    """Sampled resolvent norms and the growth exponent of their resonance peaks.

    ``norms`` are taken on ``lambdas``; ``peak_norms`` at the imaginary parts
    of the underdamped eigenvalues inside ``window``.  ``fitted_slope`` is
    the log-log slope of the peaks, ``grid_slope`` the same fit through the
    grid samples in the window (which mostly land between resonances).
    """

    lambdas: np.ndarray
    norms: np.ndarray
    window: tuple
    fitted_slope: float
    r_squared: float = float("nan")
    peak_frequencies: np.ndarray = field(default_factory=lambda: np.empty(0))
    peak_norms: np.ndarray = field(default_factory=lambda: np.empty(0))
    grid_slope: float = float("nan")


def _resonances(eigenvalues) -> np.ndarray:
    # imaginary parts of underdamped eigenvalues (|Re| < Im), ascending
    ev = np.asarray(eigenvalues, dtype=complex)
    return np.sort(ev.imag[(ev.imag > 0) & (np.abs(ev.real) < ev.imag)])


def default_slope_window(A: GeneratorMatrix, eigenvalues=None) -> tuple[float, float]:
    """Lowest oscillatory eigenfrequency up to the beam grid cutoff ``1 / h``."""
    if eigenvalues is None:
        eigenvalues = spectrum(A).eigenvalues
    freqs = _resonances(eigenvalues)
    lo = float(freqs[0]) if freqs.size else 1.0
    return lo, 1.0 / A.grid.h_beam


def resolvent_profile(
    A: GeneratorMatrix,
    lambdas=None,
    window: tuple | None = None,
    eigenvalues=None,
) -> ResolventProfile:
    """Resolvent norms on a frequency grid and at every resonance in ``window``.

    The norm is largest at the imaginary parts of weakly damped eigenvalues
    (there it is close to ``1 / |Re lambda|``), so a fixed grid mostly samples
    the troughs.  The growth exponent is therefore fitted through the norms
    at those eigenfrequencies.  ``eigenvalues`` may be passed to skip the
    dense eigensolve.
    """
    if lambdas is None:
        lambdas = np.logspace(-1, 3, 60)
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or np.any(np.diff(lambdas) <= 0) or np.any(lambdas < 0):
        raise ValueError("lambdas must be non-negative and increasing")
    if eigenvalues is None:
        eigenvalues = spectrum(A).eigenvalues
    if window is None:
        window = default_slope_window(A, eigenvalues)
    lo, hi = map(float, window)
    norms = np.array([resolvent_norm(A, lam) for lam in lambdas])
    freqs = _resonances(eigenvalues)
    freqs = freqs[(freqs >= lo) & (freqs <= hi)]
    if freqs.size < 3:
        raise ValueError(f"slope window {window} holds fewer than 3 resonances")
    peaks = np.array([resolvent_norm(A, f) for f in freqs])
    slope, _, r2 = fit_loglog(freqs, peaks)
    sel = (lambdas >= lo) & (lambdas <= hi)
    grid_slope = fit_loglog(lambdas[sel], norms[sel])[0] if sel.sum() >= 2 else float("nan")
    return ResolventProfile(lambdas, norms, (lo, hi), slope, r2, freqs, peaks, grid_slope)


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    r_squared: float
    window: tuple


def fit_decay(trace: EnergyTrace, window) -> DecayFit:
    """Slope of log E against log t on ``window = (t0, t1)``."""
    t0, t1 = map(float, window)
    t = np.asarray(trace.times)
    E = trace.totals
    if not (t0 > 0 and t1 > t0):
        raise ValueError(f"invalid window {window}: need 0 < t0 < t1")
    if t0 < t[0] or t1 > t[-1]:
        raise ValueError(f"window {window} lies outside the trace [{t[0]}, {t[-1]}]")
    sel = (t >= t0) & (t <= t1)
    if sel.sum() < 2:
        raise ValueError(f"window {window} holds fewer than two samples")
    if np.any(E[sel] <= 0):
        raise ValueError("energy must be positive on the fit window")
    slope, _, r2 = fit_loglog(t[sel], E[sel])
    return DecayFit(slope, r2, (t0, t1))


def compensated_slope(trace: EnergyTrace, window, rate: float) -> float:
    """Log-log slope of ``E(t) * t^rate`` on ``window``; <= 0 means no growth trend."""
    fit = fit_decay(trace, window)
    return fit.exponent + rate


def default_decay_window(trace: EnergyTrace, solver_tol: float = 1e-12) -> tuple[float, float]:
    """First time E <= E0/10 to the last time E >= 1e6 * solver_tol * E0."""
    t = np.asarray(trace.times)
    E = trace.totals
    E0 = E[0]
    if not E0 > 0:
        raise ValueError("trace starts at zero energy")
    below = np.nonzero(E <= 0.1 * E0)[0]
    if below.size == 0:
        raise ValueError("energy never drops by 10x on this trace")
    above = np.nonzero(E >= 1e6 * solver_tol * E0)[0]
    i0, i1 = int(below[0]), int(above[-1])
    if i1 <= i0:
        raise ValueError("decay window is empty")
    return float(t[i0]), float(t[i1])


@dataclass
class StationaryKernelReport:
    applicable: bool
    eta: float
    counts: list = field(default_factory=list)
    smallest_nodes: list = field(default_factory=list)
    min_abs_eigenvalues: list = field(default_factory=list)
    monotone_decreasing: bool = False
    note: str = ""


def verify_stationary_kernel(
    mp: MaterialParams,
    fp: FractionalParams,
    n_heat: int,
    n_beam: int,
    counts=(4, 8, 16, 32),
    Xi: float = 1e2,
) -> StationaryKernelReport:
    """Smallest |eigenvalue| as the xi-rule grades further toward the origin.

    Each count ``K`` uses a log-uniform rule with top node ``Xi``; larger
    ``K`` places nodes closer to 0.  For ``eta = 0`` the smallest modulus
    should shrink toward 0, the discrete trace of the missing inverse.
    """
    if not counts or min(counts) == 0:
        return StationaryKernelReport(False, fp.eta, note="no xi nodes: memory block absent, check inapplicable")
    report = StationaryKernelReport(True, fp.eta)
    for K in counts:
        rule = build_xi_quadrature(fp, K, Xi=Xi, tol=np.inf)
        grid = Grid.build(mp, n_heat, n_beam, rule)
        spec = spectrum(assemble_generator(mp, fp, grid))
        report.counts.append(int(K))
        report.smallest_nodes.append(float(rule.nodes[0]))
        report.min_abs_eigenvalues.append(spec.min_abs_eigenvalue)
    vals = report.min_abs_eigenvalues
    report.monotone_decreasing = all(b < a for a, b in zip(vals, vals[1:]))
    return report
