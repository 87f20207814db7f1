"""Manufactured-solution convergence studies.

Two fabricated problems on the unit square, each solved on a ladder of
uniformly refined meshes: a steady anisotropic Darcy problem for the mixed
flux-pressure pair, and a reaction-free Helmholtz-type problem for the
enriched concentration space (one backward-Euler step of the transport
form with zero velocity, which isolates the interior-penalty diffusion).
Both report L2 errors, pairwise observed orders, and the least-squares
slope across all levels.
"""

import numpy as np

from . import assembly
from .bcs import BoundarySetup, FlowBCs, TransportBCs
from .constitutive import MaterialParams
from .fespace import SpaceKind, build_simulation_spaces
from .mesh import build_rectangle_mesh, tag_boundaries
from .poroelastic import solve_darcy_steady
from .transport import assemble_transport

_K_TENSOR = np.array([[2.0, 0.5], [0.5, 1.5]])


def _p_exact(pts):
    return np.sin(np.pi * pts[..., 0]) * np.cos(np.pi * pts[..., 1])


def _grad_p_exact(pts):
    x, y = pts[..., 0], pts[..., 1]
    return np.stack([np.pi * np.cos(np.pi * x) * np.cos(np.pi * y),
                     -np.pi * np.sin(np.pi * x) * np.sin(np.pi * y)], axis=-1)


def _q_exact(pts):
    return -np.einsum("ab,...b->...a", _K_TENSOR, _grad_p_exact(pts))


def _darcy_source(pts):
    # div q* for p* = sin(pi x) cos(pi y) under the fixed tensor above:
    # f = -(kxx p_xx + 2 kxy p_xy + kyy p_yy).
    x, y = pts[..., 0], pts[..., 1]
    pi2 = np.pi ** 2
    return pi2 * (3.5 * np.sin(np.pi * x) * np.cos(np.pi * y)
                  + np.cos(np.pi * x) * np.sin(np.pi * y))


def observed_orders(h, errors):
    h = np.asarray(h, float)
    e = np.asarray(errors, float)
    return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))


def ls_slope(h, errors):
    """Least-squares slope of log error against log h."""
    return float(np.polyfit(np.log(np.asarray(h, float)),
                            np.log(np.asarray(errors, float)), 1)[0])


def darcy_convergence(levels=(8, 16, 32, 64)):
    params = MaterialParams(mu_low=1.0, mu_high=1.0)
    hs, eq, ep = [], [], []
    for n in levels:
        mesh = build_rectangle_mesh(1.0, 1.0, n, n)
        spaces = build_simulation_spaces(mesh)
        tags = tag_boundaries(mesh, (1.0, 1.0))
        walls = [(w, _p_exact) for w in ("left", "right", "bottom", "top")]
        bcs = BoundarySetup(tags=tags, mech=None,
                            flow=FlowBCs(pressure=walls, flux=[]),
                            transport=TransportBCs(c_in=0.0))
        k_cells = np.broadcast_to(_K_TENSOR, (mesh.num_cells, 2, 2)).copy()
        q, p = solve_darcy_steady(mesh, spaces, params, bcs, k_cells,
                                  volume_source=_darcy_source)

        ct = assembly.cell_tables(mesh)
        qh = assembly.bdm_cell_values(mesh, q)
        dq = qh - _q_exact(ct.phys)
        dp = p[:, None] - _p_exact(ct.phys)
        eq.append(float(np.sqrt(np.einsum("tq,tqd,tqd->", ct.wdet, dq, dq))))
        ep.append(float(np.sqrt(np.einsum("tq,tq->", ct.wdet, dp ** 2))))
        hs.append(1.0 / n)
    return {
        "levels": list(levels), "h": hs,
        "velocity_errors": eq, "pressure_errors": ep,
        "velocity_orders": observed_orders(hs, eq),
        "pressure_orders": observed_orders(hs, ep),
        "velocity_slope": ls_slope(hs, eq),
        "pressure_slope": ls_slope(hs, ep),
    }


def _c_exact(pts):
    return np.cos(np.pi * pts[..., 0]) * np.cos(np.pi * pts[..., 1])


def transport_convergence(levels=(8, 16, 32, 64)):
    # (phi/dt) c - div(D grad c) = g with phi = D = dt = 1 and the exact
    # field cos(pi x) cos(pi y), whose normal derivative vanishes on the
    # unit square so the form's lack of boundary diffusion terms is exact.
    params = MaterialParams()
    bcs = BoundarySetup(tags=None, mech=None, flow=None,
                        transport=TransportBCs(c_in=0.0))

    def source(pts):
        return (1.0 + 2.0 * np.pi ** 2) * _c_exact(pts)

    hs, ec = [], []
    for n in levels:
        mesh = build_rectangle_mesh(1.0, 1.0, n, n)
        spaces = build_simulation_spaces(mesh)
        T = mesh.num_cells
        ones = np.ones(T)
        zeros = np.zeros(T)
        q0 = np.zeros(spaces.q.ndofs)
        history = [np.zeros(spaces.c.ndofs)]
        matrix, rhs = assemble_transport(
            mesh, spaces, q0, ones, ones, zeros, history, 1.0, params, bcs,
            zeros, bdf_order=1, volume_source=source)
        c = assembly.solve_block(matrix, rhs)

        ct = assembly.cell_tables(mesh)
        vals, _ = assembly.scalar_cell_basis(mesh, SpaceKind.EG1)
        ch = np.einsum("qi,ti->tq", vals, c[spaces.c.cell_dofs])
        dc = ch - _c_exact(ct.phys)
        ec.append(float(np.sqrt(np.einsum("tq,tq->", ct.wdet, dc ** 2))))
        hs.append(1.0 / n)
    return {
        "levels": list(levels), "h": hs,
        "errors": ec,
        "orders": observed_orders(hs, ec),
        "slope": ls_slope(hs, ec),
    }
