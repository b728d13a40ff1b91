"""Characteristic scales that make the elastodynamic PINN dimensionless."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..elastodyn import LoadSchedule, MaterialField

logger = logging.getLogger(__name__)

# time is kept dimensional, expressed in microseconds
TIME_UNIT = 1.0e-6


@dataclass(frozen=True)
class NondimensionalScales:
    """L [mm], rho_c [kg/m^3], lambda_c / mu_c [GPa], u_c [mm], sigma_c [MPa]."""

    L: float
    rho_c: float
    lambda_c: float
    mu_c: float
    u_c: float

    @property
    def sigma_c(self) -> float:
        """mu_c u_c / L in MPa."""
        return self.mu_c * 1.0e3 * self.u_c / self.L

    @property
    def kappa(self) -> float:
        return self.lambda_c / self.mu_c

    @property
    def inertia_factor(self) -> float:
        """mu_c / (rho_c L^2) in 1 / (time unit)^2, the prefactor of the momentum residual."""
        per_s2 = self.mu_c * 1.0e9 / (self.rho_c * (self.L * 1.0e-3) ** 2)
        return per_s2 * TIME_UNIT ** 2

    def nondim_material(self, material: MaterialField):
        """(rho_bar, lambda_bar, mu_bar) pixel maps."""
        return material.rho / self.rho_c, material.lam / self.lambda_c, material.mu / self.mu_c


def compute_scales(material: MaterialField, length: float | None = None,
                   load: LoadSchedule | None = None, u_c: float | None = None) -> NondimensionalScales:
    """Maxima of rho, lambda, mu over the domain; u_c from the boundary history.

    ``u_c`` does not enter the source-free momentum balance, so it is free to
    choose; the default is the largest prescribed boundary displacement.
    """
    L = float(length if length is not None else material.length)
    if u_c is None:
        u_c = load.max_abs_displacement() if load is not None else 0.0
        if u_c <= 0.0:
            logger.warning("boundary displacement is identically zero; using u_c = 1 mm")
            u_c = 1.0
    return NondimensionalScales(L=L, rho_c=float(np.max(material.rho)),
                                lambda_c=float(np.max(material.lam)),
                                mu_c=float(np.max(material.mu)), u_c=float(u_c))
