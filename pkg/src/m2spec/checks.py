"""Finite-difference verification of the dual gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dual import DualVariable, _Evaluator
from .errors import BoundaryError
from .grid import CovarianceData, TorusGrid
from .spectra import GridDensity


def random_interior_point(rng, sigma: CovarianceData, psi: GridDensity, nu: int, grid: TorusGrid,
                          radius: float = 0.5, min_margin_frac: float = 0.2) -> DualVariable:
    """Random Q with Psi^{-1} + Q/nu >= min_margin_frac * min eig(Psi^{-1}) on the grid."""
    ev = _Evaluator(sigma, psi, nu, grid)
    floor = min_margin_frac / psi.upper
    m = sigma.m
    n = m * m * len(sigma.index_set)
    x = rng.standard_normal(n)
    x *= radius * nu / np.linalg.norm(x)
    for _ in range(60):
        Q = DualVariable.from_coords(sigma.index_set, m, x)
        if ev.resolvent(Q)[1] >= floor:
            return Q
        x *= 0.5
    return DualVariable.zeros(sigma.index_set, m)


@dataclass
class GradCheckRow:
    point: int
    max_abs_error: float
    rel_error: float
    grad_norm: float


def gradcheck(sigma: CovarianceData, psi: GridDensity, nu: int, grid: TorusGrid,
              n_points: int = 20, step: float = 1e-5, seed: int = 0) -> list:
    """Compare the analytic coordinate gradient with central differences.

    The relative error at a point is max|fd - analytic| / max|analytic|.
    A finite-difference probe that leaves the feasible set counts as an
    infinite error.
    """
    rng = np.random.default_rng(seed)
    ev = _Evaluator(sigma, psi, nu, grid)
    m = sigma.m
    rows = []
    for p in range(n_points):
        Q = random_interior_point(rng, sigma, psi, nu, grid)
        x = Q.coords()
        _, g = ev.value_and_grad(Q)
        fd = np.empty_like(x)
        try:
            for j in range(x.size):
                e = np.zeros_like(x)
                e[j] = step
                jp = ev.value(DualVariable.from_coords(sigma.index_set, m, x + e))
                jm = ev.value(DualVariable.from_coords(sigma.index_set, m, x - e))
                fd[j] = (jp - jm) / (2 * step)
            err = float(np.abs(fd - g).max())
            rel = err / max(float(np.abs(g).max()), 1e-300)
        except BoundaryError:
            err = rel = float("inf")
        rows.append(GradCheckRow(p, err, rel, float(np.linalg.norm(g))))
    return rows
