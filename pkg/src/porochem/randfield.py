"""Correlated lognormal permeability fields on cell centroids.

The log field has an exponential, axis-separable covariance
sigma^2 exp(-|dx|/lx - |dy|/ly) sampled by dense Cholesky factorization.
That is O(T^3) and fine for the mesh sizes this code targets; a warning
fires for very large meshes rather than silently grinding.
"""

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

_CHOLESKY_JITTERS = (0.0, 1e-12, 1e-10, 1e-8)
_DENSE_WARN_CELLS = 20000


@dataclass
class RandFieldSpec:
    mean: float                 # target arithmetic mean of the field itself
    log_variance: float         # variance of the log field
    corr_x: float               # correlation length, m
    corr_y: float
    seed: int = 0


def generate_log_perm_field(spec, mesh):
    """Sample one lognormal field at the cell centroids: (T,) values.

    The sample is rescaled so its arithmetic mean matches spec.mean
    exactly, making runs comparable across seeds.
    """
    pts = mesh.cell_centroids
    T = len(pts)
    if T > _DENSE_WARN_CELLS:
        logger.warning("dense covariance factorization for %d cells", T)
    dx = np.abs(pts[:, 0:1] - pts[None, :, 0])
    dy = np.abs(pts[:, 1:2] - pts[None, :, 1])
    cov = spec.log_variance * np.exp(-dx / spec.corr_x - dy / spec.corr_y)
    chol = None
    for jit in _CHOLESKY_JITTERS:
        try:
            chol = np.linalg.cholesky(cov + jit * spec.log_variance * np.eye(T))
            if jit:
                logger.debug("covariance needed jitter %.0e", jit)
            break
        except np.linalg.LinAlgError:
            continue
    if chol is None:
        raise np.linalg.LinAlgError("covariance not factorable even with jitter")
    rng = np.random.default_rng(spec.seed)
    z = chol @ rng.standard_normal(T)
    field = np.exp(z)
    return field * (spec.mean / field.mean())


def field_range_report(field):
    """(min, max, decades spanned) of a positive cellwise field."""
    field = np.asarray(field, dtype=float)
    lo, hi = float(field.min()), float(field.max())
    return lo, hi, float(np.log10(hi / lo))


def export_field_csv(path, values):
    """One value per line, full precision."""
    np.savetxt(path, np.asarray(values, dtype=float), fmt="%.17g")


def import_field_csv(path):
    return np.loadtxt(path, dtype=float, ndmin=1)
