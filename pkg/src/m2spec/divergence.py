"""Tau-divergence family between matrix densities on a common grid."""

from __future__ import annotations

import numpy as np

from . import herm
from .errors import DimensionError, DomainError, PriorInvalidError, SingularityError
from .grid import quadrature
from .spectra import GridDensity


def _check_pair(phi: GridDensity, psi: GridDensity) -> None:
    if phi.grid != psi.grid or phi.m != psi.m:
        raise DimensionError("densities live on different grids or have different m")
    if not psi.coercive:
        raise PriorInvalidError("second argument must be a coercive density")


def _trace(A) -> np.ndarray:
    return np.trace(A, axis1=-2, axis2=-1).real


def tau_divergence(phi: GridDensity, psi: GridDensity, tau: float, factor_kind: str = "hermitian") -> float:
    """D_tau(Phi, Psi) for tau in (0, 1).

    Uses the whitened density W^{-1} Phi W^{-*} with W a pointwise square root
    of Psi; the value does not depend on which root ``factor_kind`` selects.
    """
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (0, 1), got {tau}")
    _check_pair(phi, psi)
    W = herm.sqrt_factor(psi.samples, factor_kind)
    Winv = np.linalg.inv(W)
    X = Winv @ phi.samples @ np.conj(np.swapaxes(Winv, 1, 2))
    powered = _trace(herm.matrix_power(herm.hermitize(X), tau))
    linear = _trace(psi.inv() @ phi.samples)
    integrand = powered / (tau * (tau - 1.0)) - linear / (tau - 1.0)
    return float(np.real(quadrature(phi.grid, integrand))) + phi.m / tau


def nu_divergence(phi: GridDensity, psi: GridDensity, nu: int, factor_kind: str = "hermitian") -> float:
    """Divergence with tau = 1 - 1/nu, written with the nu-dependent constants."""
    if int(nu) != nu or nu < 2:
        raise DomainError("nu must be an integer >= 2 (use itakura_saito for nu = 1)")
    nu = int(nu)
    _check_pair(phi, psi)
    W = herm.sqrt_factor(psi.samples, factor_kind)
    Winv = np.linalg.inv(W)
    X = herm.hermitize(Winv @ phi.samples @ np.conj(np.swapaxes(Winv, 1, 2)))
    powered = _trace(herm.matrix_power(X, 1.0 - 1.0 / nu))
    linear = _trace(psi.inv() @ phi.samples)
    integrand = nu**2 / (1.0 - nu) * powered + nu * linear
    return float(np.real(quadrature(phi.grid, integrand))) + phi.m * nu / (nu - 1.0)


def itakura_saito(phi: GridDensity, psi: GridDensity) -> float:
    """Itakura-Saito distance, the tau -> 0 endpoint of the family."""
    _check_pair(phi, psi)
    w_phi = np.linalg.eigvalsh(phi.samples)
    if np.any(w_phi <= herm.POWER_FLOOR):
        raise SingularityError("itakura_saito needs Phi positive definite at every node")
    logdet_phi = np.log(w_phi).sum(axis=-1)
    logdet_psi = np.log(np.linalg.eigvalsh(psi.samples)).sum(axis=-1)
    linear = _trace(psi.inv() @ phi.samples)
    return float(np.real(quadrature(phi.grid, logdet_psi - logdet_phi + linear))) - phi.m


def divergence(phi: GridDensity, psi: GridDensity, *, tau: float | None = None, nu: int | None = None) -> float:
    """Dispatch on ``tau`` or ``nu``; ``nu=1`` selects Itakura-Saito."""
    if (tau is None) == (nu is None):
        raise ValueError("give exactly one of tau, nu")
    if tau is not None:
        return tau_divergence(phi, psi, tau)
    if nu == 1:
        return itakura_saito(phi, psi)
    return nu_divergence(phi, psi, nu)
