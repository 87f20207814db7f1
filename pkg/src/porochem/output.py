"""Result files: legacy-ASCII VTK snapshots and a CSV diagnostics table."""

import numpy as np

from . import assembly
from .poroelastic import cell_average_concentration, cell_viscosity


def _write_cell_scalar(handle, name, values):
    handle.write(f"SCALARS {name} float 1\nLOOKUP_TABLE default\n")
    for v in values:
        handle.write(f"{v:.9g}\n")


def write_vtk(state, mesh, path):
    """One unstructured-grid snapshot readable by common viewers.

    Point data: displacement (padded to 3 components) and the continuous
    part of the concentration. Cell data: pressure, porosity, viscosity,
    flux magnitude, the enrichment component of the concentration, and the
    latest mass residual when present.
    """
    V, T = mesh.num_vertices, mesh.num_cells
    with open(path, "w") as handle:
        handle.write("# vtk DataFile Version 3.0\n")
        handle.write("coupled flow-mechanics-chemistry snapshot\n")
        handle.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        handle.write(f"POINTS {V} float\n")
        for x, y in mesh.vertices:
            handle.write(f"{x:.9g} {y:.9g} 0\n")
        handle.write(f"CELLS {T} {4 * T}\n")
        for a, b, c in mesh.cells:
            handle.write(f"3 {a} {b} {c}\n")
        handle.write(f"CELL_TYPES {T}\n")
        handle.write("5\n" * T)

        handle.write(f"POINT_DATA {V}\n")
        handle.write("VECTORS displacement float\n")
        ux, uy = state.u[0:2 * V:2], state.u[1:2 * V:2]
        for a, b in zip(ux, uy):
            handle.write(f"{a:.9g} {b:.9g} 0\n")
        handle.write("SCALARS concentration float 1\nLOOKUP_TABLE default\n")
        for v in state.c[:V]:
            handle.write(f"{v:.9g}\n")

        handle.write(f"CELL_DATA {T}\n")
        _write_cell_scalar(handle, "pressure", state.p)
        _write_cell_scalar(handle, "porosity", state.phi)
        _write_cell_scalar(handle, "porosity_chem_rate", state.phi_c_rate_src)
        mu = cell_viscosity(mesh, state.spaces, state.c, state.params)
        _write_cell_scalar(handle, "viscosity", mu)
        qv = assembly.bdm_cell_values(mesh, state.q).mean(axis=1)
        _write_cell_scalar(handle, "flux_magnitude",
                           np.sqrt((qv ** 2).sum(axis=1)))
        _write_cell_scalar(handle, "concentration_enrichment", state.c[V:])
        if state.mass_residual is not None:
            _write_cell_scalar(handle, "mass_residual",
                               state.mass_residual.values)


def write_timeseries(diagnostics, path):
    """CSV table, one row per step, full double precision."""
    if not diagnostics:
        with open(path, "w") as handle:
            handle.write("")
        return
    keys = list(diagnostics[0].keys())
    with open(path, "w") as handle:
        handle.write(",".join(keys) + "\n")
        for row in diagnostics:
            handle.write(",".join(f"{row[k]:.17g}" if isinstance(row[k], float)
                                  else str(row[k]) for k in keys) + "\n")
