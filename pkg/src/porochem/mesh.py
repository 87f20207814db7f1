"""Unstructured triangular meshes: construction, import/export, facet topology.

Vertices live in 2D. Cells are vertex triples stored counterclockwise. Facets
(edges) are derived from the cells: each edge is stored as a sorted vertex
pair (low index, high index), and carries a unit normal oriented outward from
its lower-indexed adjacent cell (the "plus" cell). The facet characteristic
length h_e is (|T+| + |T-|)/(2|e|) on interior facets and |T|/|e| on boundary
facets.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


class MeshError(Exception):
    """Invalid mesh topology or geometry."""


@dataclass
class FacetGeometry:
    """Geometry of a single facet."""

    index: int
    length: float
    normal: np.ndarray          # unit, outward from the plus cell
    tangent: np.ndarray         # unit, from low vertex index to high
    midpoint: np.ndarray
    h_e: float
    cell_plus: int
    cell_minus: int             # -1 on boundary facets


@dataclass
class BoundaryTags:
    """Boundary facet indices per wall of a rectangular box.

    Wall numbering follows the usual box convention: 1 = left (x = 0),
    2 = top (y = height), 3 = right (x = length), 4 = bottom (y = 0).
    """

    left: np.ndarray
    top: np.ndarray
    right: np.ndarray
    bottom: np.ndarray

    def wall(self, name):
        return getattr(self, name)

    def as_dict(self):
        return {"left": self.left, "top": self.top,
                "right": self.right, "bottom": self.bottom}


@dataclass
class Mesh:
    """Conforming triangle mesh with derived facet topology.

    The mesh is immutable after construction; all derived arrays are built
    once by :func:`_with_topology`.
    """

    vertices: np.ndarray        # (V, 2) float
    cells: np.ndarray           # (T, 3) int, counterclockwise

    # Derived topology/geometry, filled by _with_topology.
    edges: np.ndarray = field(default=None, repr=False)         # (E, 2), low < high
    cell_edges: np.ndarray = field(default=None, repr=False)    # (T, 3), edge e opposite local vertex e
    edge_cells: np.ndarray = field(default=None, repr=False)    # (E, 2), [plus, minus or -1]
    edge_local: np.ndarray = field(default=None, repr=False)    # (E, 2), local edge slot in plus/minus cell
    cell_areas: np.ndarray = field(default=None, repr=False)
    cell_centroids: np.ndarray = field(default=None, repr=False)
    cell_diameters: np.ndarray = field(default=None, repr=False)
    edge_lengths: np.ndarray = field(default=None, repr=False)
    edge_normals: np.ndarray = field(default=None, repr=False)  # (E, 2), outward from plus
    edge_tangents: np.ndarray = field(default=None, repr=False)  # (E, 2), low -> high
    edge_midpoints: np.ndarray = field(default=None, repr=False)
    edge_h: np.ndarray = field(default=None, repr=False)
    interior_edges: np.ndarray = field(default=None, repr=False)
    boundary_edges: np.ndarray = field(default=None, repr=False)

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_cells(self):
        return self.cells.shape[0]

    @property
    def num_edges(self):
        return self.edges.shape[0]


def _with_topology(vertices, cells):
    """Build a Mesh, enforcing counterclockwise cells and deriving facets."""
    vertices = np.ascontiguousarray(vertices, dtype=float)
    cells = np.ascontiguousarray(cells, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshError("vertex array must have shape (V, 2)")
    if cells.ndim != 2 or cells.shape[1] != 3:
        raise MeshError("cell array must have shape (T, 3)")
    if cells.size and (cells.min() < 0 or cells.max() >= len(vertices)):
        raise MeshError("cell vertex index out of range")

    # Reject duplicate cells (same vertex set).
    key = np.sort(cells, axis=1)
    uniq = np.unique(key, axis=0)
    if uniq.shape[0] != cells.shape[0]:
        raise MeshError("duplicate cell in mesh")

    # Orient counterclockwise.
    v0, v1, v2 = (vertices[cells[:, k]] for k in range(3))
    twice_area = ((v1[:, 0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1])
                  - (v1[:, 1] - v0[:, 1]) * (v2[:, 0] - v0[:, 0]))
    if np.any(np.abs(twice_area) < 1e-300):
        raise MeshError("degenerate (zero-area) cell")
    flip = twice_area < 0
    if np.any(flip):
        cells = cells.copy()
        cells[flip, 1], cells[flip, 2] = cells[flip, 2], cells[flip, 1]
        twice_area = np.abs(twice_area)

    mesh = Mesh(vertices=vertices, cells=cells)
    T = cells.shape[0]

    # Local edge e is opposite local vertex e: (1,2), (2,0), (0,1).
    raw = np.stack([cells[:, [1, 2]], cells[:, [2, 0]], cells[:, [0, 1]]],
                   axis=1).reshape(-1, 2)
    raw_sorted = np.sort(raw, axis=1)
    edges, inverse = np.unique(raw_sorted, axis=0, return_inverse=True)
    cell_edges = inverse.reshape(T, 3)
    E = edges.shape[0]

    # Adjacency: every edge belongs to one or two cells.
    counts = np.bincount(inverse, minlength=E)
    if np.any(counts > 2):
        raise MeshError("non-conforming mesh: facet shared by more than two cells")
    edge_cells = np.full((E, 2), -1, dtype=np.int64)
    edge_local = np.full((E, 2), -1, dtype=np.int64)
    cell_of_slot = np.repeat(np.arange(T), 3)
    local_of_slot = np.tile(np.arange(3), T)
    # First pass fills slot 0, second occurrences go to slot 1.
    order = np.argsort(inverse, kind="stable")
    sorted_edges = inverse[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_edges[1:] != sorted_edges[:-1]
    edge_cells[sorted_edges[first], 0] = cell_of_slot[order[first]]
    edge_local[sorted_edges[first], 0] = local_of_slot[order[first]]
    second = ~first
    edge_cells[sorted_edges[second], 1] = cell_of_slot[order[second]]
    edge_local[sorted_edges[second], 1] = local_of_slot[order[second]]

    # Plus cell is the lower index; keeps assembly deterministic.
    both = edge_cells[:, 1] >= 0
    swap = both & (edge_cells[:, 0] > edge_cells[:, 1])
    edge_cells[swap] = edge_cells[swap][:, ::-1]
    edge_local[swap] = edge_local[swap][:, ::-1]

    mesh.edges = edges
    mesh.cell_edges = cell_edges
    mesh.edge_cells = edge_cells
    mesh.edge_local = edge_local
    mesh.interior_edges = np.flatnonzero(edge_cells[:, 1] >= 0)
    mesh.boundary_edges = np.flatnonzero(edge_cells[:, 1] < 0)

    mesh.cell_areas = 0.5 * twice_area
    mesh.cell_centroids = (vertices[cells[:, 0]] + vertices[cells[:, 1]]
                           + vertices[cells[:, 2]]) / 3.0
    edge_len_per_cell = np.stack(
        [np.linalg.norm(vertices[cells[:, 2]] - vertices[cells[:, 1]], axis=1),
         np.linalg.norm(vertices[cells[:, 0]] - vertices[cells[:, 2]], axis=1),
         np.linalg.norm(vertices[cells[:, 1]] - vertices[cells[:, 0]], axis=1)],
        axis=1)
    mesh.cell_diameters = edge_len_per_cell.max(axis=1)

    tang = vertices[edges[:, 1]] - vertices[edges[:, 0]]
    length = np.linalg.norm(tang, axis=1)
    tang = tang / length[:, None]
    mesh.edge_lengths = length
    mesh.edge_tangents = tang
    mesh.edge_midpoints = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])

    # Rotate the tangent and orient the normal outward from the plus cell.
    normal = np.stack([tang[:, 1], -tang[:, 0]], axis=1)
    to_mid = mesh.edge_midpoints - mesh.cell_centroids[edge_cells[:, 0]]
    inward = np.einsum("ij,ij->i", normal, to_mid) < 0
    normal[inward] *= -1.0
    mesh.edge_normals = normal

    area_plus = mesh.cell_areas[edge_cells[:, 0]]
    area_minus = np.where(both, mesh.cell_areas[edge_cells[:, 1].clip(min=0)], 0.0)
    mesh.edge_h = np.where(both,
                           (area_plus + area_minus) / (2.0 * length),
                           area_plus / length)
    return mesh


def build_rectangle_mesh(length, height, nx, ny, pattern="right",
                         jitter=0.0, seed=0):
    """Structured triangulation of [0, length] x [0, height].

    Each of the nx*ny rectangles is split into two triangles. With
    pattern="right" every diagonal runs lower-left to upper-right; with
    pattern="alternating" the diagonal flips with the checkerboard parity of
    the rectangle, which removes the uniform directional bias of the "right"
    pattern.

    jitter > 0 displaces interior vertices by a uniform random fraction of
    the local grid spacing (deterministic under the given seed). Boundary
    vertices never move, so wall tagging stays exact. Used to seed
    instability-sensitive runs on otherwise symmetric grids.
    """
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be at least 1")
    if length <= 0 or height <= 0:
        raise ValueError("length and height must be positive")
    if pattern not in ("right", "alternating"):
        raise ValueError("pattern must be 'right' or 'alternating'")

    xs = np.linspace(0.0, length, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)

    def vid(i, j):
        return j * (nx + 1) + i

    cells = []
    for j in range(ny):
        for i in range(nx):
            a = vid(i, j)
            b = vid(i + 1, j)
            c = vid(i + 1, j + 1)
            d = vid(i, j + 1)
            if pattern == "alternating" and (i + j) % 2 == 1:
                cells.append((a, b, d))
                cells.append((b, c, d))
            else:
                cells.append((a, b, c))
                cells.append((a, c, d))
    cells = np.asarray(cells, dtype=np.int64)

    if jitter > 0.0:
        if jitter > 0.45:
            raise ValueError("jitter above 0.45 can invert cells")
        rng = np.random.default_rng(seed)
        dx = length / nx
        dy = height / ny
        interior = ((vertices[:, 0] > 0) & (vertices[:, 0] < length)
                    & (vertices[:, 1] > 0) & (vertices[:, 1] < height))
        shift = rng.uniform(-1.0, 1.0, size=(interior.sum(), 2))
        vertices = vertices.copy()
        vertices[interior, 0] += jitter * dx * shift[:, 0]
        vertices[interior, 1] += jitter * dy * shift[:, 1]

    return _with_topology(vertices, cells)


def import_mesh(path, fmt="triangle-list"):
    """Read a mesh from the plain triangle-list ASCII format.

    Line 1 holds "NV NT"; the next NV lines hold "x y"; the next NT lines
    hold 0-based vertex triples "i j k". Lines starting with '#' and blank
    lines are skipped.
    """
    if fmt != "triangle-list":
        raise ValueError(f"unknown mesh format: {fmt!r}")
    tokens = []
    with open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            tokens.append((lineno, body.split()))

    if not tokens:
        raise MeshError(f"{path}: empty mesh file")

    def parse(entry, conv, expect):
        lineno, parts = entry
        if len(parts) != expect:
            raise MeshError(f"{path}:{lineno}: expected {expect} values, "
                            f"got {len(parts)}")
        try:
            return [conv(p) for p in parts]
        except ValueError as exc:
            raise MeshError(f"{path}:{lineno}: {exc}") from None

    nv, nt = parse(tokens[0], int, 2)
    if len(tokens) != 1 + nv + nt:
        raise MeshError(f"{path}: header promises {nv} vertices and {nt} "
                        f"cells, file has {len(tokens) - 1} data lines")
    vertices = np.array([parse(t, float, 2) for t in tokens[1:1 + nv]])
    cells = np.array([parse(t, int, 3) for t in tokens[1 + nv:]], dtype=np.int64)
    return _with_topology(vertices, cells)


def export_mesh(mesh, path):
    """Write the triangle-list ASCII format read by :func:`import_mesh`."""
    with open(path, "w") as handle:
        handle.write(f"{mesh.num_vertices} {mesh.num_cells}\n")
        for x, y in mesh.vertices:
            handle.write(f"{x:.17g} {y:.17g}\n")
        for i, j, k in mesh.cells:
            handle.write(f"{i} {j} {k}\n")


def classify_facets(mesh):
    """Partition facet indices into (interior, boundary)."""
    return mesh.interior_edges, mesh.boundary_edges


def facet_geometry(mesh, facet):
    """Per-facet geometry view; see the module docstring for conventions."""
    facet = int(facet)
    return FacetGeometry(
        index=facet,
        length=float(mesh.edge_lengths[facet]),
        normal=mesh.edge_normals[facet],
        tangent=mesh.edge_tangents[facet],
        midpoint=mesh.edge_midpoints[facet],
        h_e=float(mesh.edge_h[facet]),
        cell_plus=int(mesh.edge_cells[facet, 0]),
        cell_minus=int(mesh.edge_cells[facet, 1]),
    )


def tag_boundaries(mesh, box, tol=1e-10):
    """Assign boundary facets to the four walls of [0, L] x [0, H].

    Raises MeshError for any boundary facet not lying on a wall, so skewed
    or oversized meshes fail loudly instead of silently dropping conditions.
    """
    length, height = box
    scale = max(length, height)
    walls = {"left": [], "top": [], "right": [], "bottom": []}
    verts = mesh.vertices
    for e in mesh.boundary_edges:
        a, b = mesh.edges[e]
        pa, pb = verts[a], verts[b]
        if abs(pa[0]) <= tol * scale and abs(pb[0]) <= tol * scale:
            walls["left"].append(e)
        elif abs(pa[0] - length) <= tol * scale and abs(pb[0] - length) <= tol * scale:
            walls["right"].append(e)
        elif abs(pa[1] - height) <= tol * scale and abs(pb[1] - height) <= tol * scale:
            walls["top"].append(e)
        elif abs(pa[1]) <= tol * scale and abs(pb[1]) <= tol * scale:
            walls["bottom"].append(e)
        else:
            raise MeshError(f"boundary facet {e} lies on no wall of the "
                            f"{length} x {height} box")
    return BoundaryTags(left=np.array(walls["left"], dtype=np.int64),
                        top=np.array(walls["top"], dtype=np.int64),
                        right=np.array(walls["right"], dtype=np.int64),
                        bottom=np.array(walls["bottom"], dtype=np.int64))
