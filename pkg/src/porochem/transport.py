"""Advection-diffusion-reaction transport in the enriched Galerkin space.

Concentration is approximated by continuous linears plus one constant per
cell. The diffusive part uses an interior penalty formulation with
diffusion-weighted facet averages and a harmonic penalty coefficient, so
jumps across material contrasts are weighted toward the less diffusive
side. Advection is integrated by parts with pointwise upwind facet fluxes;
boundary points are classified inflow/outflow by the sign of q.n at each
quadrature point. Diffusion carries an advective stabilization
gamma h |q| added cellwise before any facet coefficient is formed.

One wrinkle of the enriched basis: the continuous and cellwise-constant
blocks both contain the global constants, so the full coefficient set is
redundant along (1, ..., 1, -1, ..., -1) and every assembled operator is
exactly singular in that direction. The first enrichment dof is therefore
pinned to zero, which removes the redundancy without shrinking the
function space; solutions keep a unique, stable coefficient split.
"""

import numpy as np

from . import assembly
from .assembly import facet_coefficients, scatter_matrix, scatter_vector
from .constitutive import reaction_rate
from .fespace import SpaceKind
from .timestepping import bdf_coefficients


def stabilized_diffusion(D_e, q_cell, h, gamma):
    """Cellwise stabilized diffusion D_e + gamma h |q|."""
    speed = np.sqrt(np.sum(np.asarray(q_cell, float) ** 2, axis=-1))
    return np.asarray(D_e, float) + gamma * np.asarray(h, float) * speed


def upwind_trace(c_plus, c_minus, q_dot_n):
    """Upwind facet value: the plus trace where q.n >= 0, else the minus."""
    return np.where(np.asarray(q_dot_n) >= 0.0, c_plus, c_minus)


def reaction_source(mesh, spaces, c_hat_next, p_now, params):
    """Cellwise surface reaction rate from a predicted concentration.

    c_hat_next is an enriched-linear coefficient vector (its exact cell
    averages feed the rate law), p_now a cellwise pressure in Pa. Returns
    mol/(m^2 s) per cell, scaled by params.reaction_scale; the caller pairs
    it with the specific surface it froze alongside.
    """
    from .poroelastic import cell_average_concentration
    cbar = cell_average_concentration(mesh, spaces, c_hat_next)
    rate = reaction_rate(cbar, np.asarray(p_now) / 1e6, params.temperature,
                         params.c_eq_scale)
    return params.reaction_scale * rate


def _transport_tables(mesh):
    """Cached volume values/gradients of the 4 local enriched functions."""
    cache = assembly._mesh_cache(mesh)
    if "transport_tables" not in cache:
        vals, grads = assembly.scalar_cell_basis(mesh, SpaceKind.EG1)
        cache["transport_tables"] = (vals, grads)
    return cache["transport_tables"]


def assemble_transport(mesh, spaces, q_field, phi_field, D_e_star, A_s,
                       history, dt, params, bcs, reaction_rate_cells,
                       bdf_order=1, volume_source=None):
    """Build the linear system for one implicit concentration solve.

    q_field: flux coefficients (2E,). phi_field: cellwise porosity used in
    the time derivative. D_e_star: cellwise stabilized diffusion. A_s and
    reaction_rate_cells: the frozen specific surface and rate whose product
    sources the equation. history: newest-first accepted concentrations
    (c^{n-1}, c^{n-2}, ...) feeding the backward difference of the given
    order. volume_source(points)->values adds a manufactured right side.
    Returns (matrix, rhs).
    """
    ct = assembly.cell_tables(mesh)
    et = assembly.edge_tables(mesh)
    vals, grads = _transport_tables(mesh)           # (Q,4), (T,Q,4,2)
    dm = spaces.c
    n = dm.ndofs
    T = mesh.num_cells
    theta = params.theta_sym
    beta = params.beta_penalty

    qvals = assembly.bdm_cell_values(mesh, q_field)     # (T, Q, 2)
    qn_edges = assembly.bdm_normal_trace(mesh, q_field)  # (E, Qe)

    # Volume terms: phi-weighted mass, stabilized diffusion, advection.
    wphi = ct.wdet * np.asarray(phi_field)[:, None]
    mass_loc = np.einsum("tq,qi,qj->tij", wphi, vals, vals)
    mass = scatter_matrix(dm.cell_dofs, dm.cell_dofs, mass_loc, (n, n))

    wD = ct.wdet * np.asarray(D_e_star)[:, None]
    diff_loc = np.einsum("tq,tqid,tqjd->tij", wD, grads, grads)

    qdotgrad = np.einsum("tqd,tqid->tqi", qvals, grads)
    adv_loc = -np.einsum("tq,tqi,qj->tij", ct.wdet, qdotgrad, vals)

    w = bdf_coefficients(bdf_order)
    matrix = (w[0] / dt) * mass
    matrix = matrix + scatter_matrix(dm.cell_dofs, dm.cell_dofs,
                                     diff_loc + adv_loc, (n, n))

    rhs = np.zeros(n)
    for wl, c_old in zip(w[1:], history):
        rhs -= (wl / dt) * (mass @ np.asarray(c_old, float))

    # Reaction source and any manufactured volume load.
    source_cells = np.asarray(reaction_rate_cells, float) * np.asarray(A_s, float)
    node_int = np.einsum("tq,qi->ti", ct.wdet, vals)      # int N_i per cell
    rhs += scatter_vector(dm.cell_dofs, source_cells[:, None] * node_int, n)
    if volume_source is not None:
        g = np.asarray(volume_source(ct.phys.reshape(-1, 2))).reshape(T, -1)
        load = np.einsum("tq,qi->ti", ct.wdet * g, vals)
        rhs += scatter_vector(dm.cell_dofs, load, n)

    # Interior facets: weighted consistency/symmetry, harmonic penalty,
    # pointwise upwind advection.
    iE = mesh.interior_edges
    if iE.size:
        vp, gp = assembly.edge_scalar_traces(mesh, SpaceKind.EG1, side=0)
        vm, gm = assembly.edge_scalar_traces(mesh, SpaceKind.EG1, side=1)
        vp, gp, vm, gm = vp[iE], gp[iE], vm[iE], gm[iE]
        nrm = mesh.edge_normals[iE]
        wl = et.wlen[iE]
        cp = mesh.edge_cells[iE, 0]
        cm = mesh.edge_cells[iE, 1]
        Ds = np.asarray(D_e_star, float)
        eye = np.eye(2)
        fc = facet_coefficients(Ds[cp, None, None] * eye,
                                Ds[cm, None, None] * eye, nrm)
        delta = fc.delta[:, None]
        harm = fc.k_harmonic

        ngp = np.einsum("eqid,ed->eqi", gp, nrm)
        ngm = np.einsum("eqid,ed->eqi", gm, nrm)
        # jump of the test/trial function: [plus dofs | minus dofs]
        J = np.concatenate([vp, -vm], axis=2)                   # (Ei, Qe, 8)
        W = np.concatenate([delta[:, :, None] * Ds[cp, None, None] * ngp,
                            (1.0 - delta)[:, :, None] * Ds[cm, None, None] * ngm],
                           axis=2)                              # (Ei, Qe, 8)
        blocks = -np.einsum("eq,eqi,eqj->eij", wl, J, W)
        blocks += theta * np.einsum("eq,eqi,eqj->eij", wl, W, J)
        pen = (beta / mesh.edge_h[iE]) * harm
        blocks += pen[:, None, None] * np.einsum("eq,eqi,eqj->eij", wl, J, J)

        qn = qn_edges[iE]
        take_plus = qn >= 0.0
        U = np.concatenate([vp * take_plus[:, :, None],
                            vm * (~take_plus)[:, :, None]], axis=2)
        blocks += np.einsum("eq,eqi,eqj->eij", wl * qn, J, U)

        dofs8 = np.hstack([dm.cell_dofs[cp], dm.cell_dofs[cm]])
        matrix = matrix + scatter_matrix(dofs8, dofs8, blocks, (n, n))

    # Boundary facets: outflow advection on the matrix, inflow data on the
    # right side, no boundary diffusion terms.
    bE = mesh.boundary_edges
    if bE.size:
        vb, _ = assembly.edge_scalar_traces(mesh, SpaceKind.EG1, side=0)
        vb = vb[bE]
        wl = et.wlen[bE]
        qn = qn_edges[bE]
        cells_b = mesh.edge_cells[bE, 0]
        outflow = qn >= 0.0
        blocks = np.einsum("eq,eqi,eqj->eij", wl * qn * outflow, vb, vb)
        matrix = matrix + scatter_matrix(dm.cell_dofs[cells_b],
                                         dm.cell_dofs[cells_b], blocks, (n, n))
        inload = -bcs.transport.c_in * np.einsum(
            "eq,eqi->ei", wl * qn * (~outflow), vb)
        rhs += scatter_vector(dm.cell_dofs[cells_b], inload, n)

    # Remove the constant-function redundancy between the continuous and
    # cellwise parts of the basis (see module docstring): pin the first
    # enrichment dof. The dropped row is a linear combination of the rest,
    # so no equation content is lost.
    pin = np.array([mesh.num_vertices])
    matrix, rhs = assembly.apply_strong_bcs((matrix, rhs), (pin, np.zeros(1)))
    return matrix.tocsr(), rhs
