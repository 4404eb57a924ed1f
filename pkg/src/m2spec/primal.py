"""Primal density recovery, moment residuals and the primal-dual certificate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import herm
from .divergence import itakura_saito, nu_divergence
from .dual import (
    DualVariable,
    SolverReport,
    _check_nu,
    _check_shapes,
    _rational_density,
    _require_interior,
    _resolvent,
    dual_value,
)
from .errors import CertificateRefusedError, DimensionError
from .grid import CovarianceData, TorusGrid, gamma_moments, quadrature
from .spectra import GridDensity


def primal_density(Q: DualVariable, psi: GridDensity, nu: int, grid: TorusGrid) -> GridDensity:
    """Phi_nu = R^{-1} Psi^{-1} R^{-1} ... R^{-1} (nu factors R^{-1}), R = Psi^{-1} + Q/nu."""
    nu = _check_nu(nu, allow_one=True)
    _check_shapes(Q, psi, grid)
    R, margin = _resolvent(Q, psi, nu, grid)
    _require_interior(margin)
    return GridDensity(grid, _rational_density(herm.herm_inv(R), psi.inv(), nu))


def primal_density_power_form(Q: DualVariable, psi: GridDensity, nu: int, grid: TorusGrid) -> np.ndarray:
    """Phi_nu = Psi [(Psi^{-1} + Q/nu) Psi]^{-nu}, evaluated through a Hermitian power.

    With S = Psi^{1/2} R Psi^{1/2} one has (R Psi)^{-nu} = Psi^{-1/2} S^{-nu} Psi^{1/2},
    hence Phi_nu = Psi^{1/2} S^{-nu} Psi^{1/2}.
    """
    nu = _check_nu(nu, allow_one=True)
    _check_shapes(Q, psi, grid)
    R, margin = _resolvent(Q, psi, nu, grid)
    _require_interior(margin)
    root = herm.matrix_power(psi.samples, 0.5)
    S = root @ R @ root
    return herm.hermitize(root @ herm.matrix_power(herm.hermitize(S), -float(nu)) @ root)


def moment_residual(phi: GridDensity, sigma: CovarianceData, grid: TorusGrid):
    """Frobenius residuals ||Gamma(Phi)_k - Sigma_k|| for every k, and their max."""
    if phi.grid != grid or phi.m != sigma.m:
        raise DimensionError("density and covariance data do not match")
    diff = gamma_moments(phi.samples, grid, sigma.index_set).values - sigma.values
    res = np.sqrt(np.sum(np.abs(diff) ** 2, axis=(1, 2)))
    return res, float(res.max())


@dataclass
class Certificate:
    nu: int
    dual_value: float
    primal_value: float
    divergence: float
    gap: float
    tolerance: float
    feasibility_margin: float
    max_residual: float
    residuals: np.ndarray

    @property
    def ok(self) -> bool:
        return self.gap <= self.tolerance

    def as_dict(self) -> dict:
        return {
            "nu": self.nu,
            "dual_value": self.dual_value,
            "primal_value": self.primal_value,
            "divergence": self.divergence,
            "gap": self.gap,
            "tolerance": self.tolerance,
            "feasibility_margin": self.feasibility_margin,
            "max_residual": self.max_residual,
            "residuals": [float(r) for r in self.residuals],
            "ok": self.ok,
        }


def dual_constant(psi: GridDensity, nu: int) -> float:
    """Constant c with D(Phi_nu(Q*), Psi) = c - J(Q*) at the optimum.

    For nu >= 2 this is the additive constant m*nu/(nu-1) of the divergence;
    for nu = 1 the log det Psi term that the Itakura-Saito dual omits.
    """
    if nu == 1:
        logdet = np.log(np.linalg.eigvalsh(psi.samples)).sum(axis=-1)
        return float(quadrature(psi.grid, logdet))
    return psi.m * nu / (nu - 1.0)


def certify(report: SolverReport, sigma: CovarianceData, psi: GridDensity, nu: int, grid: TorusGrid,
            rtol: float = 1e-6) -> Certificate:
    """Check that the divergence of the recovered density equals the dual optimum.

    Raises ``CertificateRefusedError`` unless the report is converged-interior
    and the duality gap is within ``rtol * (1 + |J|)``.
    """
    if not report.converged:
        raise CertificateRefusedError(f"solver status is {report.status.value}, not converged-interior")
    nu = _check_nu(nu, allow_one=True)
    phi = primal_density(report.Q, psi, nu, grid)
    J = dual_value(report.Q, sigma, psi, nu, grid)
    div = itakura_saito(phi, psi) if nu == 1 else nu_divergence(phi, psi, nu)
    primal_from_dual = dual_constant(psi, nu) - J
    gap = abs(div - primal_from_dual)
    res, max_res = moment_residual(phi, sigma, grid)
    cert = Certificate(
        nu=nu,
        dual_value=J,
        primal_value=primal_from_dual,
        divergence=div,
        gap=gap,
        tolerance=rtol * (1.0 + abs(J)),
        feasibility_margin=report.feasibility_margin,
        max_residual=max_res,
        residuals=res,
    )
    if not cert.ok:
        raise CertificateRefusedError(f"duality gap {gap:.3e} exceeds {cert.tolerance:.3e}")
    return cert
