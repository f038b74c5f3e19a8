"""Semi-discrete generator of the heat/piezoelectric transmission system.

The discretization is written as ``G dU/dt = (J - R) U`` with ``G`` the Gram
matrix of the discrete energy, ``J`` skew and ``R`` symmetric positive
semidefinite, then returned as ``A = G^{-1} (J - R)``.  Consequently
``<A U, U>_G = -U^T R U`` holds to rounding, the discrete counterpart of
the continuous energy balance.

Interface treatment: the node ``x = 0`` carries ``V_0`` and doubles as the
last heat node (``z(0) = V(0)``).  Its equation collects the half cell of
beam inertia, the half cell of heat capacity, the beam fluxes and the heat
flux, which eliminates the ghost values of both one-sided problems and
realizes ``chi v_x - gamma beta p_x = kappa z_x`` to second order.  The
charge condition ``beta p_x = gamma beta v_x`` is natural and needs no
extra term.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .domain import Grid, MaterialParams, StateVector, heat_gradient
from .fracdiff import FractionalParams, mu_weight

__all__ = [
    "GeneratorMatrix",
    "assemble_generator",
    "apply_generator",
    "dissipation_rate",
    "h_inner",
    "save_triplets",
    "load_triplets",
]


@dataclass(frozen=True)
class GeneratorMatrix:
    matrix: sp.csr_matrix
    gram: sp.csr_matrix
    damping: sp.csr_matrix
    blocks: dict
    mp: MaterialParams
    fp: FractionalParams
    grid: Grid

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def triplets(self):
        coo = self.matrix.tocoo()
        return coo.row, coo.col, coo.data

    def energy_factor(self) -> sp.csr_matrix:
        """Sparse ``F`` with ``F^T F = G``, so that ``|U|_H = |F U|_2``."""
        g = self.grid
        mp = self.mp
        b = self.blocks
        n = self.dimension
        h2 = g.h_beam
        D = _beam_difference(g)
        F = sp.lil_matrix((n, n))
        idx = np.arange(n)
        diag = np.sqrt(self.gram.diagonal())
        for name in ("z", "V", "P", "phi"):
            s = b[name]
            F[idx[s], idx[s]] = diag[s]
        v, p = b["v"], b["p"]
        F[v, v] = np.sqrt(mp.chi1 / h2) * D
        F[p, v] = np.sqrt(mp.beta / h2) * mp.gamma * D
        F[p, p] = -np.sqrt(mp.beta / h2) * D
        return F.tocsr()


def _beam_difference(grid: Grid) -> sp.csr_matrix:
    # cell i: u_{i+1} - u_i, with u_{nb} = 0
    nb = grid.nb
    return sp.diags([-np.ones(nb), np.ones(nb - 1)], [0, 1], format="csr")


def _heat_difference(grid: Grid) -> sp.csr_matrix:
    # cells of the heat rod acting on (z_1 .. z_n, V_0); z(-l1) = 0
    n = grid.n_heat + 1
    return sp.diags([np.ones(n), -np.ones(n - 1)], [0, -1], format="csr")


def assemble_generator(mp: MaterialParams, fp: FractionalParams, grid: Grid) -> GeneratorMatrix:
    if not mp.chi1 > 0:
        raise ValueError(f"degenerate parameters: chi1 = {mp.chi1} <= 0")
    if abs(grid.ell1 - mp.ell1) > 1e-14 * mp.ell1 or abs(grid.ell2 - mp.ell2) > 1e-14 * mp.ell2:
        raise ValueError("grid lengths do not match material lengths")
    b = grid.blocks
    n = grid.size
    nb, K = grid.nb, grid.K
    h1, h2 = grid.h_heat, grid.h_beam
    m = grid.beam_mass()
    c = fp.coeff_c
    idx = np.arange(n)
    iz, iv, iV, ip, iP = (idx[b[k]] for k in ("z", "v", "V", "p", "P"))
    iphi = idx[b["phi"]].reshape(nb, K)

    Db = _beam_difference(grid)
    S = (Db.T @ Db) / h2  # stiffness, Neumann at 0 and Dirichlet at l2
    Dz = _heat_difference(grid)
    T = (Dz.T @ Dz) * (mp.kappa / h1)  # heat dissipation on (z, V_0)
    heat_idx = np.append(iz, iV[0])

    G = sp.lil_matrix((n, n))
    J = sp.lil_matrix((n, n))
    R = sp.lil_matrix((n, n))

    G[iz, iz] = h1
    Kvv, Kvp, Kpp = mp.chi * S, -mp.gamma * mp.beta * S, mp.beta * S
    G[np.ix_(iv, iv)] = Kvv
    G[np.ix_(iv, ip)] = Kvp
    G[np.ix_(ip, iv)] = Kvp
    G[np.ix_(ip, ip)] = Kpp
    massV = mp.rho * m
    massV[0] += 0.5 * h1
    G[iV, iV] = massV
    G[iP, iP] = mp.mu_mag * m

    # elastic exchange between (v, p) and (V, P)
    J[np.ix_(iv, iV)] = Kvv
    J[np.ix_(iv, iP)] = Kvp
    J[np.ix_(ip, iV)] = Kvp
    J[np.ix_(ip, iP)] = Kpp
    J[np.ix_(iV, iv)] = -Kvv
    J[np.ix_(iV, ip)] = -Kvp
    J[np.ix_(iP, iv)] = -Kvp
    J[np.ix_(iP, ip)] = -Kpp

    R[np.ix_(heat_idx, heat_idx)] = T

    if K:
        xi, w = grid.xi_rule.nodes, grid.xi_rule.weights
        mu = mu_weight(xi, fp.alpha)
        gphi = c * np.outer(m, w)
        G[iphi.ravel(), iphi.ravel()] = gphi.ravel()
        R[iphi.ravel(), iphi.ravel()] = (gphi * (xi**2 + fp.eta)).ravel()
        coup = c * np.outer(m, w * mu)  # c m_i w_k mu_k
        rows_V = np.repeat(iV, K)
        J[rows_V, iphi.ravel()] = -coup.ravel()
        J[iphi.ravel(), rows_V] = coup.ravel()

    G = G.tocsr()
    J = J.tocsr()
    R = R.tocsr()
    A = _gram_solve(G, J - R, b)
    return GeneratorMatrix(A, G, R, b, mp, fp, grid)


def _gram_solve(G: sp.csr_matrix, B: sp.csr_matrix, blocks) -> sp.csr_matrix:
    # G is diagonal outside the (v, p) block; inside it the rows of B are
    # G_q times the identity map (V, P) -> (v, p), so dv/dt = V, dp/dt = P.
    n = G.shape[0]
    idx = np.arange(n)
    q = np.concatenate([idx[blocks["v"]], idx[blocks["p"]]])
    qdot = np.concatenate([idx[blocks["V"]], idx[blocks["P"]]])
    E = sp.csr_matrix((np.ones(q.size), (q, qdot)), shape=(n, n))
    check = (B[q, :] - (G[q, :][:, q] @ E[q, :])).tocsr()
    if check.nnz and abs(check).max() > 1e-12 * abs(B).max():
        raise AssertionError("elastic block of J is not G_q times the velocity map")
    other = np.setdiff1d(idx, q)
    Dinv = sp.csr_matrix((1.0 / G.diagonal()[other], (other, other)), shape=(n, n))
    return (Dinv @ B + E).tocsr()


def apply_generator(A: GeneratorMatrix, state: StateVector) -> StateVector:
    state.check(A.grid)
    return StateVector.from_array(A.grid, A.matrix @ state.to_array())


def h_inner(A: GeneratorMatrix, x: np.ndarray, y: np.ndarray) -> float:
    """Energy inner product ``x^T G y`` of two state arrays."""
    return float(x @ (A.gram @ y))


def dissipation_rate(state: StateVector, mp: MaterialParams, fp: FractionalParams, grid: Grid) -> float:
    """-kappa |z_x|^2 - c sum_x sum_k w_k (xi_k^2 + eta) |phi|^2 (always <= 0)."""
    state.check(grid)
    zx = heat_gradient(state, grid)
    out = -mp.kappa * grid.h_heat * np.sum(zx**2)
    if grid.K:
        xi, w = grid.xi_rule.nodes, grid.xi_rule.weights
        out -= fp.coeff_c * float(grid.beam_mass() @ (state.phi**2 @ (w * (xi**2 + fp.eta))))
    return float(out)


def save_triplets(A: GeneratorMatrix, fh) -> None:
    """Write ``A`` as text: header with dimension and block map, then ``row col value``."""
    rows, cols, vals = A.triplets()
    fh.write(f"# dimension {A.dimension}\n")
    for name, s in A.blocks.items():
        fh.write(f"# block {name} {s.start} {s.stop}\n")
    fh.write(f"# nnz {len(vals)}\n")
    for r, c, v in zip(rows, cols, vals):
        fh.write(f"{r} {c} {v:.17g}\n")


def load_triplets(fh) -> tuple[sp.csr_matrix, dict]:
    dim = None
    blocks = {}
    body = []
    for line in fh:
        if line.startswith("#"):
            parts = line[1:].split()
            if parts[0] == "dimension":
                dim = int(parts[1])
            elif parts[0] == "block":
                blocks[parts[1]] = slice(int(parts[2]), int(parts[3]))
        elif line.strip():
            body.append(line)
    if dim is None:
        raise ValueError("missing '# dimension' header")
    data = np.loadtxt(io.StringIO("".join(body)), ndmin=2) if body else np.empty((0, 3))
    M = sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(dim, dim))
    return M.tocsr(), blocks
