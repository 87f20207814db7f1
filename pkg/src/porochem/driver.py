"""Coupled time stepping: fixed-stress splitting plus explicit chemistry.

Each step has two parts. Part one iterates flow and mechanics to
consistency under a frozen volumetric stress rate: the mixed flow block is
solved with the stress-rate and chemical-porosity-rate sources frozen, the
momentum balance re-equilibrates at the new pressure, and the loop exits
when the flow-side and mechanics-side porosity updates agree in relative
max norm. Part two advances the concentration implicitly with the frozen
reaction source, then prepares the next step: CFL step size, extrapolated
concentration, predicted chemical porosity (explicit Runge-Kutta on the
dissolution rate with the concentration interpolated along the step), and
the property states the next flow assembly will see.

The porosity comparison in part one is between mechanical contents only,
and the flow-side predictor advances from the previous iterate (not the
previous step), so the converged gap measures the iterate-to-iterate
splitting lag and contracts geometrically instead of stalling at a step
increment floor.
"""

import logging
import os
from dataclasses import dataclass, field as dataclass_field
from types import SimpleNamespace

import numpy as np

from . import assembly
from .assembly import solve_block
from .bcs import (BoundarySetup, FlowBCs, MechanicsBCs, TransportBCs,
                  flux_bc_data)
from .config import decode_layers, decode_wall_values, decode_walls
from .constitutive import (clamp_porosity, effective_diffusion,
                           equilibrium_concentration, perm_multiplier,
                           porosity_chem_rate, porosity_flow, porosity_mech,
                           specific_surface)
from .diagnostics import global_balance, local_mass_residual
from .mesh import build_rectangle_mesh, import_mesh, tag_boundaries
from .fespace import build_simulation_spaces
from .output import write_timeseries, write_vtk
from .poroelastic import (build_momentum_system, cell_average_concentration,
                          assemble_flow_block, fixed_stress_source,
                          solve_flow, strain_divergence, volumetric_stress)
from .randfield import RandFieldSpec, generate_log_perm_field, import_field_csv
from .timestepping import StepController, extrapolate, next_dt, rk_integrate
from .transport import (assemble_transport, reaction_source,
                        stabilized_diffusion)

logger = logging.getLogger(__name__)


class FixedStressDiverged(RuntimeError):
    """The part-one loop hit its iteration cap without meeting tolerance."""


@dataclass
class FixedStressReport:
    converged: bool
    iterations: int
    deltas: list


@dataclass
class SimulationState:
    """Everything one coupled run carries between steps."""

    mesh: object
    spaces: object
    params: object
    bcs: BoundarySetup
    config: object
    controller: StepController
    momentum: object
    flux_bc: tuple

    u: np.ndarray
    p: np.ndarray
    q: np.ndarray
    c: np.ndarray
    c_history: list

    phi_m: np.ndarray
    phi_c: np.ndarray
    phi: np.ndarray
    phi_c_pred: np.ndarray
    eps_v0: np.ndarray
    p0_field: np.ndarray
    sigma_v: np.ndarray

    k0_cells: np.ndarray
    k_cells: np.ndarray
    A_s: np.ndarray

    c_hat: np.ndarray
    rate_R_frozen: np.ndarray
    A_s_frozen: np.ndarray
    phi_c_rate_src: np.ndarray

    time: float = 0.0
    step: int = 0
    dt_next: float = 0.0
    dt_prev: float = 0.0
    dt_spacings: list = dataclass_field(default_factory=list)
    flow_source: object = None
    sigma_rate_used: np.ndarray = None
    phi_c_rate_used: np.ndarray = None
    p_prev_step: np.ndarray = None
    mass_residual: object = None
    injected_volume: float = 0.0
    diagnostics: list = dataclass_field(default_factory=list)


# ---------------------------------------------------------------------------
# Problem construction
# ---------------------------------------------------------------------------

def build_mesh(config):
    mc = config.mesh
    if mc.file:
        return import_mesh(mc.file)
    return build_rectangle_mesh(mc.length, mc.height, mc.nx, mc.ny,
                                pattern=mc.pattern, jitter=mc.jitter,
                                seed=mc.seed)


def build_boundary_setup(config, mesh):
    tags = tag_boundaries(mesh, (config.mesh.length, config.mesh.height))
    mech = MechanicsBCs()
    for wall in decode_walls(config.mechanics.rollers):
        comp = 0 if wall in ("left", "right") else 1
        mech.dirichlet.append((wall, comp, 0.0))
    for wall, value in decode_wall_values(config.mechanics.tractions):
        if not isinstance(value, tuple):
            value = (0.0, value)
        mech.tractions.append((wall, value))
    flow = FlowBCs(pressure=decode_wall_values(config.flow.pressure),
                   flux=decode_wall_values(config.flow.flux))
    transport = TransportBCs(c_in=config.transport.c_in)
    return BoundarySetup(tags=tags, mech=mech, flow=flow, transport=transport)


def build_permeability(config, mesh):
    """Base permeability tensors (T, 2, 2) before any porosity feedback."""
    pc = config.permeability
    T = mesh.num_cells
    k = np.empty((T, 2, 2))
    k[:] = np.array([[pc.k_xx, pc.k_xy], [pc.k_xy, pc.k_yy]])
    if pc.mode == "uniform":
        return k
    if pc.mode == "layers":
        y = mesh.cell_centroids[:, 1]
        for lo, hi, value in decode_layers(pc.layers):
            mask = (y >= lo) & (y < hi)
            k[mask] = np.array([[value, 0.0], [0.0, value]])
        return k
    if pc.mode == "random":
        spec = RandFieldSpec(mean=pc.rand_mean,
                             log_variance=pc.rand_log_variance,
                             corr_x=pc.rand_corr_x, corr_y=pc.rand_corr_y,
                             seed=pc.rand_seed)
        values = generate_log_perm_field(spec, mesh)
        k[:] = values[:, None, None] * np.eye(2)
        return k
    if pc.mode == "file":
        values = import_field_csv(pc.file)
        if len(values) != T:
            raise ValueError(
                f"permeability file has {len(values)} values for {T} cells")
        k[:] = values[:, None, None] * np.eye(2)
        return k
    raise ValueError(f"unknown permeability mode '{pc.mode}'")


def initialize(config):
    """Equilibrium initial state plus the first-step predictions."""
    mesh = build_mesh(config)
    spaces = build_simulation_spaces(mesh)
    params = config.materials
    bcs = build_boundary_setup(config, mesh)
    T = mesh.num_cells

    p = np.full(T, config.initial.p0)
    c0 = config.initial.c0
    if c0 < 0.0:
        c0 = float(equilibrium_concentration(config.initial.p0 / 1e6,
                                             params.temperature)
                   * params.c_eq_scale)
    c = np.zeros(spaces.c.ndofs)
    c[:mesh.num_vertices] = c0

    momentum = build_momentum_system(mesh, spaces, params, bcs)
    u = momentum.solve(p)
    eps_v0 = strain_divergence(mesh, spaces, u)
    sigma_v = volumetric_stress(mesh, spaces, u, p, params)

    phi_m = np.full(T, params.phi0)
    phi_c = np.zeros(T)
    phi = clamp_porosity(phi_m + phi_c, "init")
    A_s = specific_surface(params.A0, phi, params.phi0)
    k0 = build_permeability(config, mesh)
    k_cells = k0 * perm_multiplier(phi, params.phi0, params.b_perm)[:, None, None]

    controller = StepController.from_mesh(mesh, config.time.cfl,
                                          config.time.dt_max)
    c_hat = c.copy()
    rate_R = reaction_source(mesh, spaces, c_hat, p, params)

    return SimulationState(
        mesh=mesh, spaces=spaces, params=params, bcs=bcs, config=config,
        controller=controller, momentum=momentum,
        flux_bc=flux_bc_data(mesh, bcs.tags, bcs.flow),
        u=u, p=p, q=np.zeros(spaces.q.ndofs), c=c, c_history=[c.copy()],
        phi_m=phi_m, phi_c=phi_c, phi=phi, phi_c_pred=phi_c.copy(),
        eps_v0=eps_v0, p0_field=p.copy(), sigma_v=sigma_v,
        k0_cells=k0, k_cells=k_cells, A_s=A_s,
        c_hat=c_hat, rate_R_frozen=rate_R, A_s_frozen=A_s.copy(),
        phi_c_rate_src=np.zeros(T),
        dt_next=config.time.dt0)


# ---------------------------------------------------------------------------
# Part one: fixed-stress loop
# ---------------------------------------------------------------------------

def fixed_stress_loop(state, dt):
    """Iterate flow and mechanics to porosity consistency; returns
    (p, q, u, report) and commits the converged fields to the state."""
    mesh, spaces, params, bcs = state.mesh, state.spaces, state.params, state.bcs
    solver_cfg = state.config.solver
    sigma_prev = state.sigma_v
    p_prev = state.p
    phi_m_prev = state.phi_m
    deltas = []
    converged = False
    q_it = u_it = None
    p_it = p_prev
    sigma_iter = sigma_prev.copy()
    phi_m_last = phi_m_prev
    p_last = p_prev

    for _ in range(solver_cfg.fs_max_iterations):
        sigma_src = fixed_stress_source(sigma_iter, sigma_prev, dt,
                                        params.alpha, params.K)
        block = assemble_flow_block(
            mesh, spaces, state.u, state.c_hat,
            SimpleNamespace(p=p_prev, k_cells=state.k_cells),
            sigma_src, state.phi_c_rate_src, params, bcs, dt,
            volume_source=state.flow_source)
        q_it, p_it = solve_flow(mesh, spaces, block, bcs, state.flux_bc)
        used_sigma_src = sigma_src

        # What the flow side implies for the porosity, advanced from the
        # previous iterate.
        phi_f = porosity_flow(phi_m_last, params.alpha, params.K,
                              p_it, p_last)

        u_it = state.momentum.solve(p_it)
        eps_v = strain_divergence(mesh, spaces, u_it)
        phi_m = porosity_mech(params.phi0, params.alpha, eps_v, state.eps_v0,
                              p_it, state.p0_field, params.K)
        delta = float(np.abs((phi_m - phi_f) / phi_m).max())
        deltas.append(delta)

        sigma_iter = volumetric_stress(mesh, spaces, u_it, p_it, params)
        phi_total = clamp_porosity(phi_m + state.phi_c_pred, "fixed-stress")
        state.k_cells = state.k0_cells * perm_multiplier(
            phi_total, params.phi0, params.b_perm)[:, None, None]
        phi_m_last = phi_m
        p_last = p_it
        if delta < solver_cfg.fs_tol:
            converged = True
            break

    report = FixedStressReport(converged=converged, iterations=len(deltas),
                               deltas=deltas)
    state.p_prev_step = p_prev
    state.p, state.q, state.u = p_it, q_it, u_it
    state.sigma_v = sigma_iter
    state.phi_m = phi_m
    state.sigma_rate_used = used_sigma_src
    state.phi_c_rate_used = state.phi_c_rate_src.copy()
    return p_it, q_it, u_it, report


# ---------------------------------------------------------------------------
# Part two: transport, prediction, and property updates
# ---------------------------------------------------------------------------

def chemistry_step(state, dt):
    """Advance the concentration and prepare the next step's predictions."""
    mesh, spaces, params, bcs = state.mesh, state.spaces, state.params, state.bcs
    solver_cfg = state.config.solver

    # Accept the chemical porosity predicted for this time, then refresh
    # the porosity-derived transport properties.
    state.phi_c = state.phi_c_pred
    state.phi = clamp_porosity(state.phi_m + state.phi_c, "chemistry")
    state.A_s = specific_surface(params.A0, state.phi, params.phi0)
    D_e = effective_diffusion(params.D, state.phi)
    q_quad = assembly.bdm_cell_values(mesh, state.q)
    D_star = stabilized_diffusion(D_e, q_quad.mean(axis=1),
                                  mesh.cell_diameters, params.gamma_stab)

    # The backward-difference weights assume equal spacing, so the order
    # can only climb across history entries whose spacing matches the
    # current step; a controller-driven dt change resets the ramp.
    order = 1
    while (order < min(state.step, solver_cfg.bdf_max_order)
           and order - 1 < len(state.dt_spacings)
           and abs(state.dt_spacings[order - 1] - dt) <= 1e-8 * dt):
        order += 1
    matrix, rhs = assemble_transport(
        mesh, spaces, state.q, state.phi, D_star, state.A_s_frozen,
        state.c_history, dt, params, bcs, state.rate_R_frozen,
        bdf_order=order)
    c_new = solve_block(matrix, rhs)
    state.c = c_new
    state.c_history = [c_new] + state.c_history[:3]
    state.dt_spacings = [dt] + state.dt_spacings[:2]

    # Next step size first, so the extrapolation spans the actual interval.
    dt_next = next_dt(state.controller, q_quad)
    state.dt_prev = dt
    state.dt_next = dt_next

    n_prev = len(state.c_history) - 1
    c_before = state.c_history[1] if n_prev >= 1 else c_new
    state.c_hat = extrapolate(c_new, c_before, dt_next, dt, n_prev)

    # Predict the chemical porosity over the coming step: explicit
    # integration of the dissolution rate with the concentration
    # interpolated toward its extrapolated value and (p, A_s) frozen.
    cbar_now = cell_average_concentration(mesh, spaces, c_new)
    cbar_hat = cell_average_concentration(mesh, spaces, state.c_hat)
    p_mpa = state.p / 1e6
    A_s_rk = state.A_s

    def rate(t, _y):
        w = t / dt_next
        cbar = (1.0 - w) * cbar_now + w * cbar_hat
        return params.reaction_scale * porosity_chem_rate(
            cbar, p_mpa, params.temperature, A_s_rk, params.rho_s,
            params.omega, params.c_eq_scale)

    phi_c_pred = rk_integrate(solver_cfg.rk_order, rate, state.phi_c, 0.0,
                              dt_next)
    state.phi_c_pred = phi_c_pred
    state.phi_c_rate_src = (phi_c_pred - state.phi_c) / dt_next

    # Freeze the reaction source the next transport solve will use, and
    # push the predicted porosity into the permeability for part one.
    state.rate_R_frozen = reaction_source(mesh, spaces, state.c_hat, state.p,
                                          params)
    state.A_s_frozen = state.A_s.copy()
    phi_hat = clamp_porosity(state.phi_m + phi_c_pred, "prediction")
    state.k_cells = state.k0_cells * perm_multiplier(
        phi_hat, params.phi0, params.b_perm)[:, None, None]


# ---------------------------------------------------------------------------
# Run loop
# ---------------------------------------------------------------------------

def boundary_flow_rates(state):
    """(inflow, outflow) volumetric rates through the boundary, from the
    constant facet moments of the solved flux."""
    m0 = state.q[0::2][state.mesh.boundary_edges]
    return float(-m0[m0 < 0].sum()), float(m0[m0 > 0].sum())


def run_simulation(config, max_steps=None, quiet=False):
    """Drive a configured run to its step or time limit.

    Returns the final state; per-step diagnostics accumulate in
    state.diagnostics and are written as CSV alongside any field output.
    """
    state = initialize(config)
    out = config.output
    os.makedirs(out.directory, exist_ok=True)
    limit = max_steps if max_steps is not None else config.time.max_steps
    if out.write_vtk:
        write_vtk(state, state.mesh,
                  os.path.join(out.directory, f"{out.label}_0000.vtk"))

    for n in range(1, limit + 1):
        if config.time.t_end > 0.0 and state.time >= config.time.t_end:
            break
        dt = state.dt_next
        if config.time.t_end > 0.0:
            dt = min(dt, config.time.t_end - state.time)
        state.step = n
        _, _, _, report = fixed_stress_loop(state, dt)
        if not report.converged:
            raise FixedStressDiverged(
                f"step {n}: {report.iterations} iterations, "
                f"last delta {report.deltas[-1]:.3e}")
        state.time += dt
        residual = local_mass_residual(
            state, SimpleNamespace(p=state.p_prev_step), dt, state.params)
        state.mass_residual = residual
        inflow, outflow = boundary_flow_rates(state)
        state.injected_volume += dt * inflow

        chemistry_step(state, dt)

        cbar = cell_average_concentration(state.mesh, state.spaces, state.c)
        state.diagnostics.append({
            "step": n,
            "time": state.time,
            "dt": dt,
            "fs_iterations": report.iterations,
            "fs_delta": report.deltas[-1],
            "mass_residual_max": residual.max_abs,
            "injected_volume": state.injected_volume,
            "mass_residual_global": global_balance(residual),
            "inflow_rate": inflow,
            "outflow_rate": outflow,
            "c_min": float(cbar.min()),
            "c_max": float(cbar.max()),
            "phi_min": float(state.phi.min()),
            "phi_max": float(state.phi.max()),
            "p_min": float(state.p.min()),
            "p_max": float(state.p.max()),
        })
        if not quiet and (n % out.cadence == 0 or n == limit):
            logger.info(
                "step %4d  t=%.6g  dt=%.4g  iters=%d  delta=%.2e  "
                "residual=%.2e", n, state.time, dt, report.iterations,
                report.deltas[-1], residual.max_abs)
        if out.write_vtk and n % out.cadence == 0:
            write_vtk(state, state.mesh,
                      os.path.join(out.directory, f"{out.label}_{n:04d}.vtk"))

    write_timeseries(state.diagnostics,
                     os.path.join(out.directory, f"{out.label}_timeseries.csv"))
    if out.write_vtk:
        write_vtk(state, state.mesh,
                  os.path.join(out.directory, f"{out.label}_final.vtk"))
    return state
