"""Finite element spaces on triangle meshes.

Four families cover the coupled system: continuous quadratic vectors for
displacement, piecewise constants for pressure, lowest-order
Brezzi-Douglas-Marini vectors for the Darcy flux, and the enriched linear
space (continuous linears plus one constant per cell) for concentration.

Degrees of freedom:
  DG0    one value per cell                                   -> T dofs
  CG1    one value per vertex                                 -> V dofs
  EG1    CG1 block first, then the DG0 enrichment block       -> V + T dofs
  CG2    vertex values plus edge-midpoint values              -> V + E dofs
  CG2V   CG2 nodes with interleaved (x, y) components         -> 2(V + E) dofs
  BDM1   two normal moments per facet (constant and linear
         Legendre weights along the facet, oriented from the
         lower to the higher global vertex index)             -> 2E dofs

The BDM1 element is built directly on each physical cell by inverting the
6x6 facet-moment system in centroid-local coordinates; both cells sharing a
facet see the same two functionals, so normal continuity holds by
construction.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np


class SpaceKind(Enum):
    CG1 = "cg1"
    CG2V = "cg2v"
    DG0 = "dg0"
    BDM1 = "bdm1"
    EG1 = "eg1"


@dataclass
class QuadratureRule:
    """Points and weights; reference-triangle or [-1, 1] edge coordinates."""

    points: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.weights)


def triangle_rule():
    """Symmetric 6-point rule, exact through degree 4; weights sum to 1/2."""
    a1, w1 = 0.445948490915965, 0.223381589678011
    a2, w2 = 0.091576213509771, 0.109951743655322
    pts = np.array([
        [a1, a1], [1.0 - 2.0 * a1, a1], [a1, 1.0 - 2.0 * a1],
        [a2, a2], [1.0 - 2.0 * a2, a2], [a2, 1.0 - 2.0 * a2],
    ])
    wts = 0.5 * np.array([w1, w1, w1, w2, w2, w2])
    return QuadratureRule(points=pts, weights=wts)


def edge_rule():
    """Two-point Gauss rule on [-1, 1], exact through degree 3."""
    g = 1.0 / np.sqrt(3.0)
    return QuadratureRule(points=np.array([-g, g]), weights=np.array([1.0, 1.0]))


@dataclass
class DofMap:
    kind: SpaceKind
    ndofs: int
    cell_dofs: np.ndarray      # (T, n_local)

    @property
    def n_local(self):
        return self.cell_dofs.shape[1]


def build_dofmap(mesh, kind):
    """Global numbering for one space; see the module docstring for layout."""
    V, T = mesh.num_vertices, mesh.num_cells
    E = mesh.num_edges
    if kind == SpaceKind.DG0:
        return DofMap(kind, T, np.arange(T, dtype=np.int64)[:, None])
    if kind == SpaceKind.CG1:
        return DofMap(kind, V, mesh.cells.copy())
    if kind == SpaceKind.EG1:
        enrich = V + np.arange(T, dtype=np.int64)
        return DofMap(kind, V + T, np.hstack([mesh.cells, enrich[:, None]]))
    if kind == SpaceKind.CG2V:
        nodes = np.hstack([mesh.cells, V + mesh.cell_edges])
        cd = np.empty((T, 12), dtype=np.int64)
        cd[:, 0::2] = 2 * nodes
        cd[:, 1::2] = 2 * nodes + 1
        return DofMap(kind, 2 * (V + E), cd)
    if kind == SpaceKind.BDM1:
        cd = np.empty((T, 6), dtype=np.int64)
        cd[:, 0::2] = 2 * mesh.cell_edges
        cd[:, 1::2] = 2 * mesh.cell_edges + 1
        return DofMap(kind, 2 * E, cd)
    raise ValueError(f"unknown space kind: {kind}")


@dataclass
class Spaces:
    """The four fields of the coupled problem plus the CG1 helper block."""

    u: DofMap      # displacement, CG2V
    p: DofMap      # pressure, DG0
    q: DofMap      # Darcy flux, BDM1
    c: DofMap      # concentration, EG1
    cg1: DofMap


def build_simulation_spaces(mesh):
    return Spaces(
        u=build_dofmap(mesh, SpaceKind.CG2V),
        p=build_dofmap(mesh, SpaceKind.DG0),
        q=build_dofmap(mesh, SpaceKind.BDM1),
        c=build_dofmap(mesh, SpaceKind.EG1),
        cg1=build_dofmap(mesh, SpaceKind.CG1),
    )


# ---------------------------------------------------------------------------
# Reference bases (scalar families)
# ---------------------------------------------------------------------------

def _barycentric(ref_points):
    pts = np.atleast_2d(ref_points)
    xi, eta = pts[:, 0], pts[:, 1]
    return np.stack([1.0 - xi - eta, xi, eta], axis=1)

_GRAD_LAMBDA = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def eval_basis(kind, ref_points):
    """Reference-element basis values and derivatives at the given points.

    Scalar families return (values (Q, n), gradients (Q, n, 2)) with
    gradients in reference coordinates. BDM1 returns the reference-triangle
    basis dual to its local facet moments as (values (Q, 6, 2),
    divergences (Q, 6)); assembly rebuilds BDM bases per physical cell, so
    the reference variant exists for inspection and unit checks.
    """
    lam = _barycentric(ref_points)
    Q = lam.shape[0]
    if kind == SpaceKind.DG0:
        return np.ones((Q, 1)), np.zeros((Q, 1, 2))
    if kind == SpaceKind.CG1:
        grads = np.broadcast_to(_GRAD_LAMBDA, (Q, 3, 2)).copy()
        return lam.copy(), grads
    if kind == SpaceKind.EG1:
        vals = np.concatenate([lam, np.ones((Q, 1))], axis=1)
        grads = np.concatenate(
            [np.broadcast_to(_GRAD_LAMBDA, (Q, 3, 2)), np.zeros((Q, 1, 2))],
            axis=1)
        return vals, grads.copy()
    if kind == SpaceKind.CG2V:
        return _cg2_scalar(lam)
    if kind == SpaceKind.BDM1:
        ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        basis = _BDMCellBasis.build(ref[None, :, :],
                                    np.array([[[1, 2], [2, 0], [0, 1]]]))
        vals = basis.values_at(np.atleast_2d(ref_points))
        divs = np.broadcast_to(basis.div[0], (Q, 6)).copy()
        return vals[0] if vals.shape[0] == 1 else vals, divs
    raise ValueError(f"unknown space kind: {kind}")


def _cg2_scalar(lam):
    """Quadratic Lagrange basis: 3 vertex then 3 opposite-edge-midpoint."""
    Q = lam.shape[0]
    vals = np.empty((Q, 6))
    grads = np.empty((Q, 6, 2))
    for i in range(3):
        vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        grads[:, i, :] = (4.0 * lam[:, i] - 1.0)[:, None] * _GRAD_LAMBDA[i]
    pairs = [(1, 2), (2, 0), (0, 1)]      # midpoint of the edge opposite vertex i
    for loc, (a, b) in enumerate(pairs, start=3):
        vals[:, loc] = 4.0 * lam[:, a] * lam[:, b]
        grads[:, loc, :] = 4.0 * (lam[:, a][:, None] * _GRAD_LAMBDA[b]
                                  + lam[:, b][:, None] * _GRAD_LAMBDA[a])
    return vals, grads


# ---------------------------------------------------------------------------
# BDM1 on physical cells
# ---------------------------------------------------------------------------

_EDGE_VERTS = np.array([[1, 2], [2, 0], [0, 1]])   # local edge l opposite vertex l


class _BDMCellBasis:
    """Per-cell BDM1 basis as monomial coefficients in centroid coordinates.

    coeff has shape (T, 6, 6): coeff[t, :, j] are the monomial coordinates
    (ax, bx, cx, ay, by, cy) of local basis j on cell t, meaning
    v(x) = (ax + bx X + cx Y, ay + by X + cy Y) with X, Y centered on the
    cell centroid. div has shape (T, 6).
    """

    def __init__(self, coeff, centroids):
        self.coeff = coeff
        self.centroids = centroids
        self.div = coeff[:, 1, :] + coeff[:, 5, :]

    @classmethod
    def build(cls, cell_vertices, edge_order=None, normals=None, tangents=None):
        """Construct bases for an array of cells.

        cell_vertices: (T, 3, 2). By default each local edge l (opposite
        local vertex l) is oriented from its lower to its higher endpoint
        slot as given, with the outward normal; pass facet-global normals
        and tangents to make shared facets agree between neighbour cells.
        """
        verts = np.asarray(cell_vertices, dtype=float)
        T = verts.shape[0]
        centroids = verts.mean(axis=1)
        if edge_order is None:
            edge_order = np.broadcast_to(_EDGE_VERTS, (T, 3, 2))

        idx = np.arange(T)[:, None]
        a = verts[idx, edge_order[:, :, 0]]          # (T, 3, 2) edge start
        b = verts[idx, edge_order[:, :, 1]]          # (T, 3, 2) edge end
        evec = b - a
        elen = np.linalg.norm(evec, axis=2)
        if tangents is None:
            tangents = evec / elen[:, :, None]
        if normals is None:
            normals = np.stack([tangents[:, :, 1], -tangents[:, :, 0]], axis=2)
            outward = np.einsum(
                "tlk,tlk->tl", normals,
                0.5 * (a + b) - centroids[:, None, :]) >= 0
            normals = np.where(outward[:, :, None], normals, -normals)

        # Two-point Gauss along each edge, exact for the quadratic integrands.
        g = 1.0 / np.sqrt(3.0)
        mat = np.empty((T, 6, 6))
        for l in range(3):
            mid = 0.5 * (a[:, l] + b[:, l])
            half = 0.5 * (b[:, l] - a[:, l])
            for row, weight_fn in enumerate((lambda s: 1.0, lambda s: s)):
                m = np.zeros((T, 6))
                for s in (-g, g):
                    x = mid + s * half - centroids      # centroid-local coords
                    nx, ny = normals[:, l, 0], normals[:, l, 1]
                    mono_n = np.stack([nx, x[:, 0] * nx, x[:, 1] * nx,
                                       ny, x[:, 0] * ny, x[:, 1] * ny], axis=1)
                    m += weight_fn(s) * mono_n
                mat[:, 2 * l + row, :] = m * (0.5 * elen[:, l])[:, None]
        coeff = np.linalg.inv(mat)
        return cls(coeff, centroids)

    def values_at(self, points, cell_indices=None):
        """Basis values at reference points mapped per cell.

        points: (Q, 2) reference coordinates shared by all cells is not
        meaningful for physical bases; instead pass physical points of shape
        (T, Q, 2) or reference points with cell_indices=None only when T == 1
        (the reference-element case).
        """
        if points.ndim == 2:
            phys = points[None, :, :]
        else:
            phys = points
        X = phys - self.centroids[:, None, :]
        Q = X.shape[1]
        mono = np.stack(
            [np.ones_like(X[:, :, 0]), X[:, :, 0], X[:, :, 1]], axis=2)
        vals = np.empty((X.shape[0], Q, 6, 2))
        vals[:, :, :, 0] = np.einsum("tqm,tmj->tqj", mono, self.coeff[:, 0:3, :])
        vals[:, :, :, 1] = np.einsum("tqm,tmj->tqj", mono, self.coeff[:, 3:6, :])
        return vals


def bdm_cell_basis(mesh):
    """BDM1 bases on every cell, with facet-global orientation.

    Local dof order matches build_dofmap: edges in local order, constant
    moment before the linear moment. Orientation and normals come from the
    mesh facet arrays, so the two cells adjacent to a facet produce normal
    traces that agree dof-by-dof.
    """
    T = mesh.num_cells
    cells = mesh.cells
    verts = mesh.vertices[cells]                      # (T, 3, 2)
    ge = mesh.cell_edges                              # (T, 3) global edges
    # Order each local edge from the lower to the higher global vertex index
    # and impose the facet-global normal.
    order = np.empty((T, 3, 2), dtype=np.int64)
    for l in range(3):
        va = cells[:, _EDGE_VERTS[l, 0]]
        vb = cells[:, _EDGE_VERTS[l, 1]]
        lo_first = va < vb
        order[:, l, 0] = np.where(lo_first, _EDGE_VERTS[l, 0], _EDGE_VERTS[l, 1])
        order[:, l, 1] = np.where(lo_first, _EDGE_VERTS[l, 1], _EDGE_VERTS[l, 0])
    normals = mesh.edge_normals[ge]                   # (T, 3, 2) facet-global
    tangents = mesh.edge_tangents[ge]
    return _BDMCellBasis.build(verts, order, normals, tangents)


def bdm1_interpolate(mesh, field):
    """Project an analytic vector field onto BDM1 via its facet moments.

    field(points) takes an (N, 2) array and returns (N, 2) values. The two
    moments per facet use the same two-point Gauss rule as assembly.
    """
    rule = edge_rule()
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    coeffs = np.zeros(2 * mesh.num_edges)
    for s, w in zip(rule.points, rule.weights):
        pts = mid + s * half
        vn = np.einsum("ej,ej->e", field(pts), mesh.edge_normals)
        scale = w * 0.5 * mesh.edge_lengths
        coeffs[0::2] += scale * vn
        coeffs[1::2] += scale * vn * s
    return coeffs


def eg_split(coeffs, num_vertices):
    """Split an EG1 coefficient vector into its (CG1, DG0) blocks."""
    coeffs = np.asarray(coeffs)
    return coeffs[:num_vertices], coeffs[num_vertices:]
