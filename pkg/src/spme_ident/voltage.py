"""Electrode-averaged algebraic voltage relations.

Current density ``I`` is in A/m^2 and positive on discharge.  Every function
accepts scalars or equally shaped arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ocp import DomainError, ocp
from .parameters import ParameterSet

_DEFAULT = ParameterSet()


class SingularityError(ValueError):
    """Non-zero current through an electrode with vanishing exchange current."""


@dataclass(frozen=True)
class ElectrodeReadout:
    """Surface and electrode-averaged electrolyte concentrations (mol/m^3)."""
    c_ss_n: np.ndarray | float
    c_ss_p: np.ndarray | float
    c_e_n: np.ndarray | float
    c_e_p: np.ndarray | float

    def check(self, params: ParameterSet):
        for value, cmax, name in ((self.c_ss_n, params.c_max_n, "c_ss_n"),
                                  (self.c_ss_p, params.c_max_p, "c_ss_p")):
            v = np.asarray(value)
            if np.any(~(v >= 0.0)) or np.any(~(v <= cmax)):
                raise DomainError(f"{name} outside [0, c_max]")
        for value, name in ((self.c_e_n, "c_e_n"), (self.c_e_p, "c_e_p")):
            if np.any(~(np.asarray(value) > 0.0)):
                raise DomainError(f"{name} must be positive")


@dataclass(frozen=True)
class VoltageBreakdown:
    U_eq: np.ndarray | float
    eta_r: np.ndarray | float
    eta_c: np.ndarray | float
    dphi_elec: np.ndarray | float
    dphi_solid: np.ndarray | float

    @property
    def total(self):
        return self.U_eq + self.eta_r + self.eta_c + self.dphi_elec + self.dphi_solid


def exchange_current_density(m, c_ss, c_max, c_e):
    """j0 = m sqrt(c_ss) sqrt(c_max - c_ss) sqrt(c_e), in A/m^2."""
    c_ss = np.asarray(c_ss, dtype=float)
    c_e = np.asarray(c_e, dtype=float)
    if np.any(~(c_ss >= 0.0)) or np.any(~(c_ss <= c_max)):
        raise DomainError("surface concentration must lie in [0, c_max]")
    if np.any(~(c_e >= 0.0)):
        raise DomainError("electrolyte concentration must be non-negative")
    j0 = m * np.sqrt(c_ss) * np.sqrt(c_max - c_ss) * np.sqrt(c_e)
    return float(j0) if j0.ndim == 0 else j0


def reaction_overpotential(I, a_k, L_k, j0, params: ParameterSet = _DEFAULT):
    """-(2RT/F) asinh(I / (a_k j0 L_k)) for interfacial current ``I``."""
    I = np.asarray(I, dtype=float)
    j0 = np.asarray(j0, dtype=float)
    if np.any((j0 == 0.0) & (I != 0.0)):
        raise SingularityError("zero exchange-current density with non-zero current")
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.where(I == 0.0, 0.0, I / (a_k * j0 * L_k))
    eta = -2.0 * params.thermal_voltage * np.arcsinh(arg)
    return float(eta) if eta.ndim == 0 else eta


def concentration_overpotential(c_e_p, c_e_n, t_plus, params: ParameterSet = _DEFAULT):
    c_e_p = np.asarray(c_e_p, dtype=float)
    c_e_n = np.asarray(c_e_n, dtype=float)
    if np.any(~(c_e_p >= 0.0)) or np.any(~(c_e_n >= 0.0)):
        raise DomainError("electrolyte concentrations must be non-negative")
    eta = 2.0 * params.thermal_voltage / params.c_e_typ * (1.0 - t_plus) * (c_e_p - c_e_n)
    return float(eta) if eta.ndim == 0 else eta


def electrolyte_resistance(params: ParameterSet) -> float:
    """Area-specific electrolyte Ohmic resistance (Ohm m^2)."""
    b = params.brug
    return (params.L_n / (3.0 * params.eps_n ** b) + params.L_s / params.eps_s ** b
            + params.L_p / (3.0 * params.eps_p ** b)) / params.kappa_e_typ


def solid_resistance(params: ParameterSet) -> float:
    return (params.L_p / params.sigma_p + params.L_n / params.sigma_n) / 3.0


def ohmic_losses(I, params: ParameterSet = _DEFAULT):
    """Return ``(dphi_elec, dphi_solid)`` in volts; both linear in ``I``."""
    I = np.asarray(I, dtype=float)
    elec = -I * electrolyte_resistance(params)
    solid = -I * solid_resistance(params)
    if I.ndim == 0:
        return float(elec), float(solid)
    return elec, solid


def terminal_voltage(readout: ElectrodeReadout, I, theta, params: ParameterSet = _DEFAULT):
    """Voltage breakdown from electrode-averaged readouts.

    ``theta`` is either the transference number itself or any object with a
    ``t_plus`` attribute.  The OCV term evaluates the OCP fits at the surface
    stoichiometries.  Positive current is anodic at the negative electrode,
    so that electrode's overpotential is evaluated with ``-I``; both kinetic
    terms then lower the voltage on discharge.
    """
    t_plus = getattr(theta, "t_plus", theta)
    readout.check(params)
    I = np.asarray(I, dtype=float)
    x_n = np.asarray(readout.c_ss_n) / params.c_max_n
    x_p = np.asarray(readout.c_ss_p) / params.c_max_p
    u_eq = ocp("p", x_p, params) - ocp("n", x_n, params)
    j0_n = exchange_current_density(params.m_n, readout.c_ss_n, params.c_max_n, readout.c_e_n)
    j0_p = exchange_current_density(params.m_p, readout.c_ss_p, params.c_max_p, readout.c_e_p)
    eta_r_n = reaction_overpotential(-I, params.a_n, params.L_n, j0_n, params)
    eta_r_p = reaction_overpotential(I, params.a_p, params.L_p, j0_p, params)
    eta_c = concentration_overpotential(readout.c_e_p, readout.c_e_n, t_plus, params)
    dphi_elec, dphi_solid = ohmic_losses(I, params)
    return VoltageBreakdown(U_eq=u_eq, eta_r=eta_r_p - eta_r_n, eta_c=eta_c,
                            dphi_elec=dphi_elec, dphi_solid=dphi_solid)
