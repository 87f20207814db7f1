"""Quasi-static momentum balance and the mixed Darcy flow block.

Displacement lives in continuous quadratic vectors, pressure in cellwise
constants, and the Darcy flux in lowest-order normal-continuous vectors.
The flow block is the mixed saddle system; mass is conserved cell by cell
because the pressure test functions are cell indicators.

Sign conventions: tension-positive effective stress, compression enters
through the boundary tractions; the pore pressure couples as -alpha p I in
the total stress and the flux equation reads mu k^-1 q + grad p = 0 weakly.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import assembly
from .assembly import (BlockSystem, SparseOperator, apply_strong_bcs,
                       scatter_matrix, solve_block)
from .bcs import displacement_bc_data, flux_bc_data, pressure_bc_rhs
from .constitutive import viscosity_of_c
from .fespace import SpaceKind


def _inv2(tensors):
    """Inverse of an (..., 2, 2) stack."""
    t = np.asarray(tensors, dtype=float)
    det = t[..., 0, 0] * t[..., 1, 1] - t[..., 0, 1] * t[..., 1, 0]
    inv = np.empty_like(t)
    inv[..., 0, 0] = t[..., 1, 1] / det
    inv[..., 0, 1] = -t[..., 0, 1] / det
    inv[..., 1, 0] = -t[..., 1, 0] / det
    inv[..., 1, 1] = t[..., 0, 0] / det
    return inv


# ---------------------------------------------------------------------------
# Momentum balance
# ---------------------------------------------------------------------------

def _momentum_tables(mesh):
    """Vector divergence (T, Q, 12) and symmetric gradient (T, Q, 12, 2, 2)
    of the displacement basis; local dof 2 i + d is node i, component d."""
    cache = assembly._mesh_cache(mesh)
    if "momentum_tables" not in cache:
        _, gp = assembly.scalar_cell_basis(mesh, SpaceKind.CG2V)
        T, Q = gp.shape[:2]
        div12 = gp.reshape(T, Q, 12)
        eps = np.zeros((T, Q, 12, 2, 2))
        for i in range(6):
            for d in range(2):
                L = 2 * i + d
                eps[:, :, L, d, :] += 0.5 * gp[:, :, i, :]
                eps[:, :, L, :, d] += 0.5 * gp[:, :, i, :]
        cache["momentum_tables"] = (div12, eps)
    return cache["momentum_tables"]


@dataclass
class MomentumSystem:
    """Elastic stiffness with its pressure coupling, factored once.

    solve(p) returns the displacement in equilibrium with the cellwise
    pressure p under the stored tractions and strong conditions; the
    stiffness, the constraint set, and the factorization never change over
    a simulation.
    """

    matrix: sp.csr_matrix
    bc_cols: sp.csr_matrix
    coupling: sp.csr_matrix
    rhs0: np.ndarray
    bc_dofs: np.ndarray
    bc_vals: np.ndarray

    def __post_init__(self):
        self._lu = None

    def solve(self, p):
        rhs = self.rhs0 + self.coupling @ p
        if self.bc_dofs.size:
            rhs = rhs - self.bc_cols @ self.bc_vals
            rhs[self.bc_dofs] = self.bc_vals
        if self._lu is None:
            self._lu = spla.splu(self.matrix.tocsc())
        return self._lu.solve(rhs)


def build_momentum_system(mesh, spaces, params, bcs, body_force=None):
    """Assemble the displacement problem once for the whole run."""
    ct = assembly.cell_tables(mesh)
    div12, eps = _momentum_tables(mesh)
    lam, mu = params.lam, params.mu
    dm = spaces.u
    nu_dofs = dm.ndofs
    T = mesh.num_cells

    dw = div12 * ct.wdet[:, :, None]
    stiff = lam * np.einsum("tqL,tqM->tLM", dw, div12)
    ew = eps * ct.wdet[:, :, None, None, None]
    stiff += 2.0 * mu * np.einsum("tqLab,tqMab->tLM", ew, eps)
    matrix = scatter_matrix(dm.cell_dofs, dm.cell_dofs, stiff,
                            (nu_dofs, nu_dofs))

    # int(alpha div psi) over each cell: the load felt from a unit cell
    # pressure, reused every solve.
    cdiv = np.einsum("tq,tqL->tL", ct.wdet, div12)
    coupling = scatter_matrix(dm.cell_dofs, np.arange(T)[:, None],
                              params.alpha * cdiv[:, :, None], (nu_dofs, T))

    rhs0 = np.zeros(nu_dofs)
    if body_force is not None:
        f = np.asarray(body_force, dtype=float)
        vals6, _ = assembly.scalar_cell_basis(mesh, SpaceKind.CG2V)
        node_int = np.einsum("tq,qi->ti", ct.wdet, vals6)
        loc = np.zeros((T, 12))
        loc[:, 0::2] = node_int * f[0]
        loc[:, 1::2] = node_int * f[1]
        np.add.at(rhs0, dm.cell_dofs.ravel(), loc.ravel())

    et = assembly.edge_tables(mesh)
    trace6, _ = assembly.edge_scalar_traces(mesh, SpaceKind.CG2V, side=0)
    for wall, traction in bcs.mech.tractions:
        edges = bcs.tags.wall(wall)
        if callable(traction):
            tvals = np.asarray(traction(et.pts[edges].reshape(-1, 2)))
            tvals = tvals.reshape(len(edges), -1, 2)
        else:
            tvals = np.broadcast_to(np.asarray(traction, dtype=float),
                                    et.pts[edges].shape)
        contrib = np.einsum("eq,eqi,eqd->eid", et.wlen[edges],
                            trace6[edges], tvals)
        loc = contrib.reshape(len(edges), 12)
        cells = mesh.edge_cells[edges, 0]
        np.add.at(rhs0, dm.cell_dofs[cells].ravel(), loc.ravel())

    bc_dofs, bc_vals = displacement_bc_data(mesh, bcs.tags, bcs.mech)
    bc_cols = matrix[:, bc_dofs].tocsr() if bc_dofs.size else sp.csr_matrix(
        (nu_dofs, 0))
    matrix_bc, _ = apply_strong_bcs((matrix, None), (bc_dofs, bc_vals))
    return MomentumSystem(matrix=matrix_bc, bc_cols=bc_cols,
                          coupling=coupling, rhs0=rhs0,
                          bc_dofs=bc_dofs, bc_vals=bc_vals)


def assemble_momentum(mesh, spaces, p_fixed, params, bcs):
    """One-shot momentum system for a frozen pressure: (operator, rhs)."""
    sys = build_momentum_system(mesh, spaces, params, bcs)
    rhs = sys.rhs0 + sys.coupling @ np.asarray(p_fixed, dtype=float)
    if sys.bc_dofs.size:
        rhs = rhs - sys.bc_cols @ sys.bc_vals
        rhs[sys.bc_dofs] = sys.bc_vals
    return SparseOperator(sys.matrix), rhs


def strain_divergence(mesh, spaces, u):
    """Cell average of div u for a displacement coefficient vector."""
    ct = assembly.cell_tables(mesh)
    div12, _ = _momentum_tables(mesh)
    local = np.asarray(u)[spaces.u.cell_dofs]
    return np.einsum("tq,tqL,tL->t", ct.wdet, div12, local) / mesh.cell_areas


def volumetric_stress(mesh, spaces, u, p, params):
    """Mean total stress per cell: K div u - alpha p (plane strain)."""
    return params.K * strain_divergence(mesh, spaces, u) - params.alpha * np.asarray(p)


def fixed_stress_source(sigma_v_iter, sigma_v_prev, dt, alpha, K):
    """Stress-rate source (alpha/K) d(sigma_v)/dt frozen at the current
    mechanical iterate; per cell, units 1/s."""
    return (alpha / K) * (np.asarray(sigma_v_iter) - np.asarray(sigma_v_prev)) / dt


# ---------------------------------------------------------------------------
# Mixed Darcy flow block
# ---------------------------------------------------------------------------

def _flow_tables(mesh):
    """Flux mass kernel sum_q w |psi_i(x_q)> <psi_j(x_q)|: (T, 6, 6, 2, 2)."""
    cache = assembly._mesh_cache(mesh)
    if "flow_tables" not in cache:
        ct = assembly.cell_tables(mesh)
        _, vals, _ = assembly.bdm_tables(mesh)
        cache["flow_tables"] = np.einsum("tq,tqia,tqjb->tijab", ct.wdet,
                                         vals, vals)
    return cache["flow_tables"]


def cell_average_concentration(mesh, spaces, c):
    """Exact cell averages of an enriched-linear concentration field."""
    c = np.asarray(c)
    V = mesh.num_vertices
    return c[mesh.cells].mean(axis=1) + c[V:]


def cell_viscosity(mesh, spaces, c_extrap, params):
    """Cellwise viscosity from the extrapolated concentration.

    Passing None falls back to the low-concentration end, which only
    matters when the two calibration viscosities differ.
    """
    if c_extrap is None:
        cbar = np.full(mesh.num_cells, params.c_low)
    else:
        cbar = cell_average_concentration(mesh, spaces, c_extrap)
    mu = viscosity_of_c(cbar, params.c_low, params.c_high,
                        params.mu_low, params.mu_high)
    return np.broadcast_to(np.asarray(mu, dtype=float),
                           (mesh.num_cells,)).copy()


def assemble_flow_block(mesh, spaces, u_fixed, c_extrap, state_prev,
                        sigma_v_rate_source, phi_c_rate_source, params, bcs,
                        dt, volume_source=None):
    """Mixed flux-pressure system for one fixed-stress iteration.

    The displacement enters only through the frozen stress-rate source, so
    u_fixed is accepted for completeness and not read. state_prev supplies
    the last accepted pressure (attribute p) and the current permeability
    tensors (attribute k_cells, shape (T, 2, 2)). dt=None assembles the
    steady problem: no storage, no history, no rate sources.

    Block layout: [[A_qq, A_qp], [A_pq, A_pp]] over (flux, pressure) with
    A_qq the viscosity-weighted inverse-permeability mass matrix,
    A_qp = -int(p div psi), A_pq = +int(div q psi), and A_pp the storage
    mass matrix scaled by 1/dt. Facet pressure data loads the flux rows;
    strong flux conditions are applied by the caller on the monolithic
    matrix.
    """
    ct = assembly.cell_tables(mesh)
    _, _, divs = assembly.bdm_tables(mesh)
    P = _flow_tables(mesh)
    T = mesh.num_cells
    nq = spaces.q.ndofs
    areas = mesh.cell_areas

    mu_cells = cell_viscosity(mesh, spaces, c_extrap, params)
    kinv = _inv2(state_prev.k_cells)
    aqq_loc = np.einsum("tijab,tab->tij", P, mu_cells[:, None, None] * kinv)
    A_qq = scatter_matrix(spaces.q.cell_dofs, spaces.q.cell_dofs, aqq_loc,
                          (nq, nq))

    div_area = divs * areas[:, None]                      # (T, 6)
    cells = np.arange(T)[:, None]
    A_qp = scatter_matrix(spaces.q.cell_dofs, cells,
                          -div_area[:, :, None], (nq, T))
    A_pq = scatter_matrix(cells, spaces.q.cell_dofs,
                          div_area[:, None, :], (T, nq))

    rhs_q = pressure_bc_rhs(mesh, bcs.tags, bcs.flow)
    rhs_p = np.zeros(T)
    if volume_source is not None:
        if callable(volume_source):
            g = volume_source(ct.phys.reshape(-1, 2)).reshape(T, -1)
            rhs_p += np.einsum("tq,tq->t", ct.wdet, g)
        else:
            rhs_p += areas * np.asarray(volume_source)

    if dt is None:
        A_pp = None
    else:
        c_stor = params.inv_M + params.alpha ** 2 / params.K
        A_pp = sp.diags(c_stor / dt * areas).tocsr()
        rhs_p += (c_stor / dt) * areas * np.asarray(state_prev.p)
        if sigma_v_rate_source is not None:
            rhs_p -= areas * np.asarray(sigma_v_rate_source)
        if phi_c_rate_source is not None:
            rhs_p -= areas * np.asarray(phi_c_rate_source)

    return BlockSystem(blocks=[[A_qq, A_qp], [A_pq, A_pp]],
                       sizes=[nq, T], rhs=np.concatenate([rhs_q, rhs_p]))


def solve_flow(mesh, spaces, block_system, bcs, flux_bc=None):
    """Apply strong flux data to the monolithic system and solve.

    flux_bc may carry precomputed (dofs, values) to avoid re-deriving the
    facet moments every fixed-stress iteration. Returns (q, p).
    """
    if flux_bc is None:
        flux_bc = flux_bc_data(mesh, bcs.tags, bcs.flow)
    matrix = block_system.monolithic()
    matrix, rhs = apply_strong_bcs((matrix, block_system.rhs.copy()), flux_bc)
    x = solve_block(matrix, rhs)
    q, p = block_system.split(x)
    return q, p


@dataclass
class FlowState:
    """Minimal state handle for standalone flow solves."""

    p: np.ndarray
    k_cells: np.ndarray


def solve_darcy_steady(mesh, spaces, params, bcs, k_cells, c_extrap=None,
                       volume_source=None):
    """Steady mixed Darcy solve; returns (q, p)."""
    state = FlowState(p=None, k_cells=k_cells)
    block = assemble_flow_block(mesh, spaces, None, c_extrap, state, None,
                                None, params, bcs, None, volume_source)
    return solve_flow(mesh, spaces, block, bcs)
