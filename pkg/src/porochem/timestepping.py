"""Time integration pieces: BDF weights, explicit Runge-Kutta, linear
extrapolation, and the CFL step controller."""

from dataclasses import dataclass

import numpy as np

# Backward-difference weights over a uniform step, newest value first.
_BDF = {
    1: np.array([1.0, -1.0]),
    2: np.array([1.5, -2.0, 0.5]),
    3: np.array([11.0 / 6.0, -3.0, 1.5, -1.0 / 3.0]),
    4: np.array([25.0 / 12.0, -4.0, 3.0, -4.0 / 3.0, 0.25]),
}


def bdf_coefficients(order):
    """Weights (newest first) such that dy/dt ~ sum(w_i y_{n-i}) / dt."""
    if order not in _BDF:
        raise ValueError(f"BDF order must be 1..4, got {order}")
    return _BDF[order].copy()


def bdf_derivative(order, history, dt):
    """Backward-difference time derivative from a newest-first history.

    history[0] is the newest value; at least order+1 entries are needed.
    The constant-step weights are used throughout; with the CFL controller
    the step varies slowly enough that this stays the intended scheme.
    """
    w = bdf_coefficients(order)
    if len(history) < len(w):
        raise ValueError(f"BDF{order} needs {len(w)} values, got {len(history)}")
    acc = w[0] * np.asarray(history[0], dtype=float)
    for wi, yi in zip(w[1:], history[1:]):
        acc = acc + wi * np.asarray(yi, dtype=float)
    return acc / dt


def rk_integrate(order, rate_fn, y_now, t_now, dt):
    """One explicit Runge-Kutta step; order 1 (Euler) or 4 (classical)."""
    y = np.asarray(y_now, dtype=float)
    if order == 1:
        return y + dt * np.asarray(rate_fn(t_now, y))
    if order == 4:
        k1 = np.asarray(rate_fn(t_now, y))
        k2 = np.asarray(rate_fn(t_now + 0.5 * dt, y + 0.5 * dt * k1))
        k3 = np.asarray(rate_fn(t_now + 0.5 * dt, y + 0.5 * dt * k2))
        k4 = np.asarray(rate_fn(t_now + dt, y + dt * k3))
        return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    raise ValueError(f"Runge-Kutta order must be 1 or 4, got {order}")


def extrapolate(y_now, y_prev, dt_next, dt_prev, n):
    """Linear prediction one step ahead.

    Returns (1 + r) y_now - r y_prev with r = dt_next/dt_prev once a
    previous value exists (n >= 1); the first step falls back to y_now.
    """
    if n < 1:
        return np.array(y_now, dtype=float, copy=True)
    r = dt_next / dt_prev
    return (1.0 + r) * np.asarray(y_now, float) - r * np.asarray(y_prev, float)


@dataclass
class StepController:
    """CFL-limited step size: dt = min(cfl h_min / max|q|, dt_max)."""

    cfl: float
    dt_max: float
    h_min: float

    @classmethod
    def from_mesh(cls, mesh, cfl, dt_max):
        return cls(cfl=cfl, dt_max=dt_max, h_min=float(mesh.cell_diameters.min()))


def next_dt(controller, q_field):
    """Step size from the largest flux magnitude.

    q_field holds vector values with components on the last axis (any
    leading shape, typically cells x quadrature points). A zero field
    yields dt_max.
    """
    q = np.asarray(q_field, dtype=float)
    speed = float(np.sqrt((q * q).sum(axis=-1)).max()) if q.size else 0.0
    if speed == 0.0:
        return controller.dt_max
    return min(controller.cfl * controller.h_min / speed, controller.dt_max)
