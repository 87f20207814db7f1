"""Boundary condition containers and their translation to dof data.

Values may be plain numbers or callables taking an (N, 2) coordinate array;
callables serve manufactured-solution runs, numbers the physical presets.
Flux values follow the inflow-positive convention: q_D > 0 pushes fluid
into the domain, so the prescribed outward normal flux is -q_D.
"""

from dataclasses import dataclass, field

import numpy as np

from . import assembly


def _eval(value, pts):
    if callable(value):
        return np.asarray(value(pts), dtype=float)
    return np.full(pts.shape[0], float(value))


@dataclass
class MechanicsBCs:
    """dirichlet: (wall, component, value) pins one displacement component
    on a wall (rollers use value 0). tractions: (wall, (tx, ty))."""

    dirichlet: list = field(default_factory=list)
    tractions: list = field(default_factory=list)


@dataclass
class FlowBCs:
    """pressure: (wall, value) weak facet pressure; flux: (wall, value)
    strong normal flux, inflow positive."""

    pressure: list = field(default_factory=list)
    flux: list = field(default_factory=list)


@dataclass
class TransportBCs:
    """Inflow concentration; applied on whichever boundary points have
    q.n < 0 when the transport step runs."""

    c_in: float = 0.0


@dataclass
class BoundarySetup:
    """Everything the assemblers need about the boundary in one handle."""

    tags: object
    mech: MechanicsBCs = field(default_factory=MechanicsBCs)
    flow: FlowBCs = field(default_factory=FlowBCs)
    transport: TransportBCs = field(default_factory=TransportBCs)


def wall_entities(mesh, tags, wall):
    """(vertex indices, edge indices) lying on one tagged wall."""
    edges = tags.wall(wall)
    verts = np.unique(mesh.edges[edges].ravel())
    return verts, edges


def displacement_bc_data(mesh, tags, mech_bcs):
    """Strong data for the displacement space: (dofs, values).

    Quadratic nodes on a wall are its vertices plus its facet midpoints.
    Overlapping prescriptions (wall corners) are deduplicated; the value
    written last wins, which is harmless for the homogeneous roller setups
    and documented for anything fancier.
    """
    V = mesh.num_vertices
    table = {}
    for wall, comp, value in mech_bcs.dirichlet:
        verts, edges = wall_entities(mesh, tags, wall)
        vpts = mesh.vertices[verts]
        epts = mesh.edge_midpoints[edges]
        for nodes, pts in ((verts, vpts), (V + edges, epts)):
            vals = _eval(value, pts)
            for node, val in zip(nodes, vals):
                table[2 * int(node) + comp] = float(val)
    if not table:
        return np.empty(0, dtype=np.int64), np.empty(0)
    dofs = np.fromiter(table.keys(), dtype=np.int64)
    order = np.argsort(dofs)
    vals = np.fromiter(table.values(), dtype=float)
    return dofs[order], vals[order]


def flux_bc_data(mesh, tags, flow_bcs):
    """Strong data for the flux space: (dofs, values).

    Each prescribed facet pins both normal moments: the constant moment to
    -int(q_D) dl and the linear moment to -int(q_D s) dl, s in [-1, 1]
    along the facet.
    """
    et = assembly.edge_tables(mesh)
    dofs = []
    vals = []
    for wall, value in flow_bcs.flux:
        _, edges = wall_entities(mesh, tags, wall)
        for e in edges:
            qd = _eval(value, et.pts[e])
            m0 = -np.sum(et.wlen[e] * qd)
            m1 = -np.sum(et.wlen[e] * qd * et.rule.points)
            dofs.extend([2 * int(e), 2 * int(e) + 1])
            vals.extend([m0, m1])
    return np.asarray(dofs, dtype=np.int64), np.asarray(vals)


def pressure_bc_rhs(mesh, tags, flow_bcs):
    """Weak facet-pressure load on the flux equations: (2E,) vector.

    The normal trace of the flux basis on its own facet is 1/|e| for the
    constant moment and 3s/|e| for the linear one, so the boundary term
    -int(p_D psi.n) dl reduces to the two weighted p_D moments.
    """
    et = assembly.edge_tables(mesh)
    rhs = np.zeros(2 * mesh.num_edges)
    for wall, value in flow_bcs.pressure:
        _, edges = wall_entities(mesh, tags, wall)
        for e in edges:
            pd = _eval(value, et.pts[e])
            inv_len = 1.0 / mesh.edge_lengths[e]
            rhs[2 * e] -= np.sum(et.wlen[e] * pd) * inv_len
            rhs[2 * e + 1] -= np.sum(et.wlen[e] * pd * 3.0 * et.rule.points) * inv_len
    return rhs
