"""Coupled poroelastic flow and reactive transport on triangle meshes."""

__version__ = "0.1.0"

from .mesh import (Mesh, MeshError, build_rectangle_mesh, import_mesh,
                   export_mesh, classify_facets, facet_geometry,
                   tag_boundaries)
from .fespace import (SpaceKind, DofMap, build_dofmap, build_simulation_spaces,
                      eval_basis, bdm1_interpolate, eg_split)

__all__ = [
    "Mesh", "MeshError", "build_rectangle_mesh", "import_mesh", "export_mesh",
    "classify_facets", "facet_geometry", "tag_boundaries",
    "SpaceKind", "DofMap", "build_dofmap", "build_simulation_spaces",
    "eval_basis", "bdm1_interpolate", "eg_split",
]
