"""
Dual problem of the tau-divergence covariance extension.

For nu >= 2 the dual function is

    J(Q) = <Q, Sigma> + nu/(nu-1) * int trace[(Psi^{-1} R^{-1})^(nu-1)] dm,
    R = Psi^{-1} + Q/nu,

and for nu = 1 (Itakura-Saito) J(Q) = <Q, Sigma> - int log det(Psi^{-1} + Q) dm.
In both cases dJ = <dQ, Sigma - Gamma(Phi_nu(Q))>, where Phi_nu is the
rational density R^{-1} (Psi^{-1} R^{-1})^(nu-1).

The dual variable is kept in real coordinates with respect to an orthonormal
basis of conjugate-symmetric coefficient sets, so the gradient in coordinates
is just the coordinate vector of Sigma - Gamma(Phi_nu).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import herm
from .errors import BoundaryError, DataError, DimensionError, DomainError
from .grid import CovarianceData, IndexSet, TorusGrid, check_conjugate_symmetric
from .spectra import GridDensity

logger = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)


class DualVariable:
    """Coefficients {Q_k} of a Hermitian matrix trigonometric polynomial.

    Only Q_0 (Hermitian) and Q_k for k in the half-set are stored; the
    remaining coefficients are Q_{-k} = Q_k^*, so the symmetry holds exactly.
    """

    def __init__(self, index_set: IndexSet, q0, half):
        q0 = np.asarray(q0, dtype=complex)
        half = np.asarray(half, dtype=complex)
        m = q0.shape[0]
        if q0.shape != (m, m) or half.shape != (len(index_set.half), m, m):
            raise DimensionError("q0 must be (m, m) and half (len(half-set), m, m)")
        self.index_set = index_set
        self.q0 = herm.hermitize(q0)
        self.half = half

    @property
    def m(self) -> int:
        return self.q0.shape[0]

    @property
    def n_coords(self) -> int:
        return self.m**2 * len(self.index_set)

    @classmethod
    def zeros(cls, index_set: IndexSet, m: int) -> "DualVariable":
        return cls(index_set, np.zeros((m, m)), np.zeros((len(index_set.half), m, m)))

    @classmethod
    def from_coeffs(cls, index_set: IndexSet, coeffs) -> "DualVariable":
        c = np.asarray(coeffs, dtype=complex)
        check_conjugate_symmetric(index_set, c)
        return cls(index_set, c[index_set.zero], c[index_set.half])

    @classmethod
    def from_coords(cls, index_set: IndexSet, m: int, x) -> "DualVariable":
        x = np.asarray(x, dtype=float)
        nh = len(index_set.half)
        if x.shape != (m * m * len(index_set),):
            raise DimensionError(f"expected {m * m * len(index_set)} coordinates, got {x.shape}")
        iu = np.triu_indices(m, 1)
        nu_ = len(iu[0])
        q0 = np.diag(x[:m]).astype(complex)
        off = (x[m:m + nu_] + 1j * x[m + nu_:m + 2 * nu_]) / _SQRT2
        q0[iu] = off
        q0[iu[1], iu[0]] = np.conj(off)
        rest = x[m * m:]
        half = (rest[: nh * m * m] + 1j * rest[nh * m * m:]).reshape(nh, m, m) / _SQRT2
        return cls(index_set, q0, half)

    @property
    def coeffs(self) -> np.ndarray:
        """Full (L, m, m) coefficient array aligned with the index set."""
        ix = self.index_set
        c = np.empty((len(ix), self.m, self.m), dtype=complex)
        c[ix.zero] = self.q0
        c[ix.half] = self.half
        c[ix.neg[ix.half]] = np.conj(np.swapaxes(self.half, 1, 2))
        return c

    def coords(self) -> np.ndarray:
        return coords_of(self.index_set, self.coeffs)

    def __add__(self, other: "DualVariable") -> "DualVariable":
        return DualVariable(self.index_set, self.q0 + other.q0, self.half + other.half)

    def __mul__(self, c: float) -> "DualVariable":
        return DualVariable(self.index_set, c * self.q0, c * self.half)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"DualVariable(m={self.m}, {self.index_set!r}, norm={q_norm(self):.3g})"


def coords_of(index_set: IndexSet, coeffs) -> np.ndarray:
    """Real coordinates <X_j, C> of a conjugate-symmetric coefficient set.

    Basis order: diagonal of Q_0, sqrt2*Re and sqrt2*Im of the strict upper
    triangle of Q_0, then sqrt2*Re and sqrt2*Im of the half-set coefficients.
    """
    c = np.asarray(coeffs)
    m = c.shape[-1]
    iu = np.triu_indices(m, 1)
    c0 = c[index_set.zero]
    h = c[index_set.half].ravel()
    return np.concatenate([
        c0.real.diagonal(),
        _SQRT2 * c0[iu].real,
        _SQRT2 * c0[iu].imag,
        _SQRT2 * h.real,
        _SQRT2 * h.imag,
    ])


def basis(index_set: IndexSet, m: int) -> list:
    """The orthonormal basis {X_j} as explicit DualVariables (slow; for checks)."""
    n = m * m * len(index_set)
    return [DualVariable.from_coords(index_set, m, np.eye(n)[j]) for j in range(n)]


def q_norm(Q: DualVariable) -> float:
    """sqrt(sum_k trace(Q_k Q_k^*))."""
    return float(np.sqrt(np.vdot(Q.coeffs, Q.coeffs).real))


def choose_nu(m: int, d: int) -> int:
    """Smallest integer nu >= max(2, m*d/2 + 1); guarantees an interior optimum."""
    if m < 1 or d < 1:
        raise DomainError("m and d must be positive")
    return max(2, math.ceil(m * d / 2 + 1))


# --- pointwise machinery ------------------------------------------------------

def _q_field(Q: DualVariable, grid: TorusGrid, phases=None) -> np.ndarray:
    E = np.conj(grid.phases(Q.index_set)) if phases is None else phases
    F = np.tensordot(E, Q.coeffs, axes=(1, 0))
    return herm.hermitize(F)


def _check_shapes(Q: DualVariable, psi: GridDensity, grid: TorusGrid) -> None:
    if psi.grid != grid:
        raise DimensionError("prior sampled on a different grid")
    if Q.m != psi.m:
        raise DimensionError(f"Q has m={Q.m}, prior has m={psi.m}")
    grid.check_resolves(Q.index_set)


def _resolvent(Q, psi, nu, grid, phases=None):
    """(R, min eigenvalue of R) with R = Psi^{-1} + Q/nu at every node."""
    R = herm.hermitize(psi.inv() + _q_field(Q, grid, phases) / nu)
    return R, float(np.linalg.eigvalsh(R).min())


def _rational_density(Rinv, psi_inv, nu: int) -> np.ndarray:
    """R^{-1} Psi^{-1} R^{-1} ... R^{-1} with nu copies of R^{-1}."""
    out = Rinv
    for _ in range(nu - 1):
        out = out @ psi_inv @ Rinv
    return herm.hermitize(out)


def feasibility_margin(Q: DualVariable, psi: GridDensity, nu: int, grid: TorusGrid) -> float:
    """Minimum over the grid of the smallest eigenvalue of Psi^{-1} + Q/nu."""
    _check_shapes(Q, psi, grid)
    return _resolvent(Q, psi, nu, grid)[1]


def _require_interior(margin: float) -> None:
    if not margin > 0:
        raise BoundaryError(f"Q is not in the interior of the feasible set (margin {margin:.3e})")


def _check_nu(nu, allow_one: bool) -> int:
    if int(nu) != nu or nu < (1 if allow_one else 2):
        raise DomainError(f"nu must be an integer >= {1 if allow_one else 2}, got {nu}")
    return int(nu)


def _check_sigma(sigma: CovarianceData, Q: DualVariable) -> None:
    if sigma.index_set != Q.index_set or sigma.m != Q.m:
        raise DimensionError("Sigma and Q live on different index sets or sizes")


def dual_objective(Q: DualVariable, sigma: CovarianceData, psi: GridDensity, nu: int, grid: TorusGrid) -> float:
    """J_nu(Q) for integer nu >= 2."""
    nu = _check_nu(nu, allow_one=False)
    return _Evaluator(sigma, psi, nu, grid).value(Q)


def dual_gradient(Q: DualVariable, sigma: CovarianceData, psi: GridDensity, nu: int, grid: TorusGrid) -> CovarianceData:
    """Coefficient gradient G_k = Sigma_k - Gamma(Phi_nu(Q))_k (nu >= 1)."""
    nu = _check_nu(nu, allow_one=True)
    return _Evaluator(sigma, psi, nu, grid).gradient(Q)


def dual_objective_is(Q: DualVariable, sigma: CovarianceData, psi: GridDensity, grid: TorusGrid) -> float:
    """J_1(Q) = <Q, Sigma> - int log det(Psi^{-1} + Q) dm."""
    return _Evaluator(sigma, psi, 1, grid).value(Q)


def dual_value(Q, sigma, psi, nu, grid) -> float:
    """J_nu for any integer nu >= 1."""
    nu = _check_nu(nu, allow_one=True)
    return _Evaluator(sigma, psi, nu, grid).value(Q)


class _Evaluator:
    """Caches grid phases and Psi^{-1} for repeated dual evaluations."""

    def __init__(self, sigma: CovarianceData, psi: GridDensity, nu: int, grid: TorusGrid):
        if psi.grid != grid:
            raise DimensionError("prior sampled on a different grid")
        if sigma.m != psi.m:
            raise DimensionError(f"Sigma has m={sigma.m}, prior has m={psi.m}")
        grid.check_resolves(sigma.index_set)
        self.sigma = sigma
        self.psi = psi
        self.psi_inv = psi.inv()
        self.nu = nu
        self.grid = grid
        self.index_set = sigma.index_set
        self.phases = grid.phases(sigma.index_set)
        self.conj_phases = np.conj(self.phases)

    def resolvent(self, Q):
        _check_sigma(self.sigma, Q)
        F = herm.hermitize(np.tensordot(self.conj_phases, Q.coeffs, axes=(1, 0)))
        R = herm.hermitize(self.psi_inv + F / self.nu)
        return R, float(np.linalg.eigvalsh(R).min())

    def _integral(self, R):
        nu = self.nu
        if nu == 1:
            sign, logdet = np.linalg.slogdet(R)
            return -float(np.sum(logdet)) / self.grid.n_nodes, None
        Rinv = np.linalg.inv(R)
        T = self.psi_inv @ Rinv
        Tp = np.linalg.matrix_power(T, nu - 1)
        tr = np.trace(Tp, axis1=1, axis2=2)
        return nu / (nu - 1.0) * float(np.sum(tr.real)) / self.grid.n_nodes, (Rinv, Tp)

    def density_from(self, R, cache=None) -> np.ndarray:
        if cache is not None:
            Rinv, Tp = cache
            return herm.hermitize(Rinv @ Tp)
        return _rational_density(np.linalg.inv(R), self.psi_inv, self.nu)

    def value(self, Q, R=None, margin=None):
        if R is None:
            R, margin = self.resolvent(Q)
        _require_interior(margin)
        integral, _ = self._integral(R)
        return herm.pairing(Q.coeffs, self.sigma.values) + integral

    def gradient(self, Q, R=None, margin=None) -> CovarianceData:
        if R is None:
            R, margin = self.resolvent(Q)
        _require_interior(margin)
        phi = self.density_from(R)
        return self._grad_from_density(phi)

    def _grad_from_density(self, phi) -> CovarianceData:
        mom = np.tensordot(self.phases.T, phi, axes=(1, 0)) / self.grid.n_nodes
        G = self.sigma.values - mom
        G = 0.5 * (G + np.conj(np.swapaxes(G[self.index_set.neg], 1, 2)))
        return CovarianceData(self.index_set, G)

    def value_and_grad(self, Q, R=None, margin=None):
        """(J, coordinate gradient) at an interior Q."""
        if R is None:
            R, margin = self.resolvent(Q)
        _require_interior(margin)
        integral, cache = self._integral(R)
        J = herm.pairing(Q.coeffs, self.sigma.values) + integral
        phi = np.linalg.inv(R) if cache is None else self.density_from(R, cache)
        G = self._grad_from_density(herm.hermitize(phi))
        return J, coords_of(self.index_set, G.values)


# --- solver -------------------------------------------------------------------

class Status(str, Enum):
    CONVERGED = "converged-interior"
    BOUNDARY = "boundary-suspect"
    NORM_CAP = "norm-cap-hit"
    MAX_ITERS = "max-iters"


@dataclass
class SolverOptions:
    tol_grad: float = 1e-8
    max_iters: int = 500
    interior_margin: float = 1e-9
    armijo_c1: float = 1e-4
    backtrack_ratio: float = 0.5
    norm_cap: float = 1e8
    precondition: bool = False
    max_backtracks: int = 80

    def __post_init__(self):
        for name in ("tol_grad", "max_iters", "interior_margin", "armijo_c1", "norm_cap", "max_backtracks"):
            if not getattr(self, name) > 0:
                raise ValueError(f"SolverOptions.{name} must be positive")
        if not 0 < self.backtrack_ratio < 1:
            raise ValueError("SolverOptions.backtrack_ratio must lie in (0, 1)")


@dataclass
class SolverReport:
    Q: DualVariable
    nu: int
    dual_value: float
    grad_norm: float
    feasibility_margin: float
    iterations: int
    status: Status
    message: str = ""
    history: list = field(default_factory=list, repr=False)
    zero_set_nodes: int = 0

    @property
    def converged(self) -> bool:
        return self.status == Status.CONVERGED

    def summary(self) -> dict:
        return {
            "status": self.status.value,
            "nu": self.nu,
            "dual_value": self.dual_value,
            "grad_norm": self.grad_norm,
            "feasibility_margin": self.feasibility_margin,
            "iterations": self.iterations,
            "q_norm": q_norm(self.Q),
            "zero_set_nodes": self.zero_set_nodes,
            "message": self.message,
        }


def _fd_curvature(ev: _Evaluator, x, g, m, h=1e-6):
    """Forward-difference diagonal of the Hessian, floored at a small positive value."""
    diag = np.empty_like(x)
    for j in range(x.size):
        xp = x.copy()
        xp[j] += h
        Qp = DualVariable.from_coords(ev.index_set, m, xp)
        R, margin = ev.resolvent(Qp)
        _, gp = ev.value_and_grad(Qp, R, margin)
        diag[j] = (gp[j] - g[j]) / h
    return np.maximum(diag, 1e-8 * max(1.0, float(np.abs(diag).max())))


def solve_dual(
    sigma: CovarianceData,
    psi: GridDensity,
    nu: int,
    grid: TorusGrid,
    opts: Optional[SolverOptions] = None,
    callback: Optional[Callable[[int, DualVariable, float], None]] = None,
) -> SolverReport:
    """Minimize the dual function over the interior of the feasible set.

    Steepest descent from Q = 0 with Barzilai-Borwein trial steps and
    backtracking; a trial point is accepted only if it keeps the feasibility
    margin above ``opts.interior_margin`` and satisfies the Armijo condition.

    ``callback(iteration, Q, J)`` is called at the start point and after each
    accepted step.
    """
    opts = opts or SolverOptions()
    nu = _check_nu(nu, allow_one=True)
    sigma.check_symmetric()
    if sigma.m != psi.m:
        raise DataError(f"Sigma has m={sigma.m}, prior has m={psi.m}")
    ev = _Evaluator(sigma, psi, nu, grid)
    m = sigma.m
    ix = sigma.index_set

    Q = DualVariable.zeros(ix, m)
    x = np.zeros(Q.n_coords)
    R, margin = ev.resolvent(Q)
    J, g = ev.value_and_grad(Q, R, margin)
    history = [J]
    if callback:
        callback(0, Q, J)
    scale = _fd_curvature(ev, x, g, m) if opts.precondition else np.ones_like(x)
    step = 1.0
    status = Status.MAX_ITERS
    message = ""
    it = 0
    eps = np.finfo(float).eps

    while True:
        gnorm = float(np.linalg.norm(g))
        if gnorm <= opts.tol_grad:
            status = Status.CONVERGED
            break
        if np.linalg.norm(x) > opts.norm_cap:
            status = Status.NORM_CAP
            message = "dual variable norm exceeded the cap; data may be infeasible"
            break
        if it >= opts.max_iters:
            break

        d = -g / scale
        slope = float(g @ d)
        t = step
        hit_margin = False
        accepted = False
        noise = 64 * eps * (abs(J) + abs(float(x @ coords_of(ix, sigma.values))) + 1.0)
        for _ in range(opts.max_backtracks):
            xt = x + t * d
            Qt = DualVariable.from_coords(ix, m, xt)
            Rt, mt = ev.resolvent(Qt)
            if mt < opts.interior_margin:
                hit_margin = True
                t *= opts.backtrack_ratio
                continue
            Jt, gt = ev.value_and_grad(Qt, Rt, mt)
            if Jt <= J + opts.armijo_c1 * t * slope:
                accepted = True
            elif Jt <= J + noise and np.linalg.norm(gt) < gnorm:
                # decrease is below round-off; accept on gradient reduction
                accepted = True
            if accepted:
                break
            t *= opts.backtrack_ratio
        if not accepted:
            status = Status.BOUNDARY
            message = (
                "line search stalled against the feasibility margin"
                if hit_margin
                else "line search stalled (no Armijo decrease)"
            )
            break

        s = xt - x
        y = gt - g
        sy = float(s @ y)
        step = float(s @ (s * scale)) / sy if sy > 0 else 1.0
        step = min(max(step, 1e-10), 1e10)
        x, Q, J, g, margin = xt, Qt, Jt, gt, mt
        it += 1
        history.append(J)
        if callback:
            callback(it, Q, J)

    R, margin = ev.resolvent(Q)
    prox = max(1e3 * opts.interior_margin, 1e-6)
    zero_nodes = int(np.sum(np.linalg.eigvalsh(R)[:, 0] < prox))
    logger.debug("solve_dual: %s after %d iterations, |g|=%.3e", status.value, it, np.linalg.norm(g))
    return SolverReport(
        Q=Q,
        nu=nu,
        dual_value=J,
        grad_norm=float(np.linalg.norm(g)),
        feasibility_margin=margin,
        iterations=it,
        status=status,
        message=message,
        history=history,
        zero_set_nodes=zero_nodes,
    )
