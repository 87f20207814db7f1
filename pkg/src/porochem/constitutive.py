"""Material laws for the coupled flow-mechanics-chemistry system.

Covers the poroelastic coefficients, porosity evolution (mechanical and
chemical), permeability/surface-area/viscosity closures, and the calcite
dissolution-precipitation rate law with its pressure- and
temperature-dependent equilibrium concentration.

Concentration convention: the transport solver works in mol per cubic
metre. The equilibrium polynomial is calibrated in mol per litre, so the
working equilibrium value is the polynomial times c_eq_scale (1000 by
default). The saturation ratio used by the rate law is dimensionless and
unaffected as long as both concentrations share one unit.
"""

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

PHI_MIN = 1e-4
PHI_MAX = 0.999

# Equilibrium concentration polynomial, mol/L, p in MPa, temperature in C:
# c_eq = e0 + e1 p + e2 T + e3 p^2 + e4 p T + e5 T^2
_CEQ = np.array([1.417e-3, 3.823e-6, -4.313e-7, -2.148e-8, 4.304e-8, -7.117e-8])

# log10 rate surfaces r(T, L) with L = log10|saturation ratio|, one row per
# regime: r = a0 + a1 T + a2 L + a3 T^2 + a4 T L + a5 L^2, rate = 10^r in
# mol/(m^2 s), signed positive for dissolution.
_RATE_DISSOLUTION = np.array([-5.73, 1.25e-2, 1.38, 2.61e-5, -4.01e-3, 3.26e-1])
_RATE_PRECIPITATION = np.array([-6.45, 2.09e-2, -4.65e-2, 3.06e-5, 9.25e-3, -4.59e-1])
_RATE_NEAR_EQUILIBRIUM = np.array([-5.80, 1.35e-2, 9.97e-1, 3.80e-5, 1.51e-5, -4.87e-4])
_REGIME_SWITCH = 0.01


@dataclass
class MaterialParams:
    """Physical constants of one simulation. Defaults follow the reference
    sandstone-brine-calcite configuration; presets override per case."""

    K: float = 8.4e9               # drained bulk modulus, Pa
    nu: float = 0.18               # drained Poisson ratio
    alpha: float = 0.74            # Biot coefficient
    phi0: float = 0.2              # reference porosity
    c_f: float = 1e-10             # fluid compressibility, 1/Pa
    rho_f: float = 1000.0          # fluid density, kg/m^3
    D: float = 1e-12               # molecular diffusion, m^2/s
    mu_low: float = 1e-4           # viscosity at c_low, Pa s
    mu_high: float = 5.0           # viscosity at c_high, Pa s
    c_low: float = 0.0             # mol/m^3
    c_high: float = 1.68           # mol/m^3
    b_perm: float = 22.2           # permeability exponent
    A0: float = 5000.0             # reference specific surface, 1/m
    rho_s: float = 2500.0          # mineral density, kg/m^3
    omega: float = 10.0            # mineral moles per kg
    temperature: float = 20.0      # C
    c_eq_scale: float = 1000.0     # mol/L -> working units
    reaction_scale: float = 1.0    # 0 switches the chemistry off
    gamma_stab: float = 0.25       # advective diffusion stabilization
    beta_penalty: float = 1.1      # interior penalty factor
    theta_sym: float = -1.0        # facet symmetrization parameter
    gravity: tuple = (0.0, 0.0)    # body force per unit mass, m/s^2

    @property
    def K_s(self):
        return self.K / (1.0 - self.alpha)

    @property
    def lam(self):
        return lame_constants(self.K, self.nu)[0]

    @property
    def mu(self):
        return lame_constants(self.K, self.nu)[1]

    @property
    def inv_M(self):
        return biot_modulus_inverse(self.phi0, self.c_f, self.alpha, self.K_s)


def biot_alpha(K, K_s):
    """alpha = 1 - K/K_s."""
    return 1.0 - K / K_s


def lame_constants(K, nu):
    """Lame pair (lam, mu) from bulk modulus and Poisson ratio.

    lam = 3 K nu / (1 + nu), mu = 3 K (1 - 2 nu) / (2 (1 + nu)); these
    satisfy lam + 2 mu / 3 = K.
    """
    lam = 3.0 * K * nu / (1.0 + nu)
    mu = 3.0 * K * (1.0 - 2.0 * nu) / (2.0 * (1.0 + nu))
    return lam, mu


def biot_modulus_inverse(phi0, c_f, alpha, K_s):
    """Storage coefficient 1/M = phi0 c_f + (alpha - phi0)/K_s."""
    return phi0 * c_f + (alpha - phi0) / K_s


def equilibrium_concentration(p, temp):
    """Equilibrium calcium concentration in mol/L; p in MPa, temp in C."""
    p = np.asarray(p, dtype=float)
    return (_CEQ[0] + _CEQ[1] * p + _CEQ[2] * temp + _CEQ[3] * p * p
            + _CEQ[4] * p * temp + _CEQ[5] * temp * temp)


def saturation_ratio(c, p, temp, c_eq_scale=1000.0):
    """(c_eq - c)/c_eq with c in working units. Positive: undersaturated."""
    ceq = equilibrium_concentration(p, temp) * c_eq_scale
    return (ceq - c) / ceq


def reaction_rate(c, p, temp, c_eq_scale=1000.0):
    """Signed surface reaction rate in mol/(m^2 s).

    Positive rates dissolve (undersaturated fluid), negative rates
    precipitate. The log10 rate is quadratic in temperature and in
    log10 of the saturation ratio, with separate fits for the
    dissolution, precipitation, and near-equilibrium regimes; the rate
    vanishes continuously at equilibrium.
    """
    ratio = saturation_ratio(c, p, temp, c_eq_scale)
    ratio = np.asarray(ratio, dtype=float)
    scalar = ratio.ndim == 0
    ratio = np.atleast_1d(ratio)
    out = np.zeros_like(ratio)
    active = ratio != 0.0
    if np.any(active):
        L = np.log10(np.abs(ratio[active]))
        T = temp
        rows = np.select(
            [ratio[active] > _REGIME_SWITCH, ratio[active] < -_REGIME_SWITCH],
            [0, 1], default=2)
        table = np.stack([_RATE_DISSOLUTION, _RATE_PRECIPITATION,
                          _RATE_NEAR_EQUILIBRIUM])[rows]
        r = (table[:, 0] + table[:, 1] * T + table[:, 2] * L
             + table[:, 3] * T * T + table[:, 4] * T * L + table[:, 5] * L * L)
        out[active] = np.sign(ratio[active]) * 10.0 ** r
    return out[0] if scalar else out


def porosity_mech(phi0, alpha, eps_v, eps_v0, p, p0, K):
    """Mechanically updated porosity from global reference state."""
    return (phi0 + (alpha - phi0) * (eps_v - eps_v0)
            + (alpha - phi0) * (1.0 - alpha) * (p - p0) / K)


def porosity_flow(phi_prev, alpha, K, p_iter, p_prev):
    """Flow-side porosity predictor under the fixed-stress assumption."""
    return phi_prev + (alpha - phi_prev) * (p_iter - p_prev) / K


def porosity_chem_rate(c, p, temp, A_s, rho_s, omega, c_eq_scale=1000.0):
    """Rate of chemically created porosity, 1/s.

    Dissolution converts mineral volume to pore volume at
    R A_s / (rho_s omega) with A_s the specific reactive surface.
    """
    rate = reaction_rate(c, p, temp, c_eq_scale)
    return rate * A_s / (rho_s * omega)


def specific_surface(A0, phi, phi0):
    """Reactive surface area per volume: A0 (phi/phi0) (ln phi / ln phi0)."""
    return A0 * (phi / phi0) * (np.log(phi) / np.log(phi0))


def perm_multiplier(phi, phi0, b):
    """Permeability change factor exp(b (phi/phi0 - 1))."""
    return np.exp(b * (phi / phi0 - 1.0))


def viscosity_of_c(c, c_low, c_high, mu_low, mu_high):
    """Log-linear viscosity between the two calibration concentrations.

    Concentrations outside [c_low, c_high] are clamped (here only; the
    transport solution itself is never clipped).
    """
    cc = np.clip(c, c_low, c_high)
    frac = (cc - c_low) / (c_high - c_low)
    return np.exp(np.log(mu_low) + frac * (np.log(mu_high) - np.log(mu_low)))


def effective_diffusion(D, phi):
    """Porosity-scaled diffusion phi^1.5 D."""
    return np.asarray(phi) ** 1.5 * D


def clamp_porosity(phi, where=""):
    """Clip porosity into (0, 1) with a logged warning when active."""
    phi = np.asarray(phi, dtype=float)
    low = phi < PHI_MIN
    high = phi > PHI_MAX
    if np.any(low) or np.any(high):
        logger.warning("porosity clamped%s: %d below %.0e, %d above %.3f",
                       f" ({where})" if where else "", int(np.sum(low)),
                       PHI_MIN, int(np.sum(high)), PHI_MAX)
    return np.clip(phi, PHI_MIN, PHI_MAX)
