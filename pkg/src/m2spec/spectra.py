"""
Matrix spectral densities sampled on a torus grid: priors, synthetic ground
truth, random-field realizations and the averaged periodogram.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import herm
from .errors import DimensionError, DomainError, PriorInvalidError
from .grid import CovarianceData, IndexSet, TorusGrid, eval_trig_poly, gamma_moments

PSD_TOL = 1e-10


@dataclass
class GridDensity:
    """An m x m Hermitian PSD matrix field sampled on ``grid``.

    ``lower`` and ``upper`` are the extreme eigenvalues over the grid; the
    density is coercive when ``lower > 0``.  ``inverse`` optionally caches
    exact per-node inverses (set for priors given as P^{-1}).
    """

    grid: TorusGrid
    samples: np.ndarray
    inverse: Optional[np.ndarray] = field(default=None, repr=False)
    lower: float = field(init=False)
    upper: float = field(init=False)

    def __post_init__(self):
        S = np.asarray(self.samples, dtype=complex)
        if S.ndim != 3 or S.shape[0] != self.grid.n_nodes or S.shape[1] != S.shape[2]:
            raise DimensionError(
                f"samples must have shape ({self.grid.n_nodes}, m, m), got {S.shape}"
            )
        self.samples = herm.as_hermitian(S, rtol=1e-10)
        w = np.linalg.eigvalsh(self.samples)
        self.lower = float(w.min())
        self.upper = float(w.max())
        if self.lower < -PSD_TOL * max(1.0, self.upper):
            raise DomainError(f"density is not PSD (min eigenvalue {self.lower:.3e})")

    @property
    def m(self) -> int:
        return self.samples.shape[1]

    @property
    def coercive(self) -> bool:
        return self.lower > 0 and np.isfinite(self.upper)

    def inv(self) -> np.ndarray:
        """Per-node inverse, cached."""
        if self.inverse is None:
            if not self.coercive:
                raise PriorInvalidError("density is singular somewhere on the grid")
            self.inverse = herm.herm_inv(self.samples)
        return self.inverse

    def moments(self, index_set: IndexSet) -> CovarianceData:
        return gamma_moments(self.samples, self.grid, index_set)


@dataclass
class PriorSpec:
    """How to build the prior density Psi.

    kind is one of ``'constant'`` (``matrix``), ``'inverse_polynomial'``
    (``coeffs`` on ``index_set``, Psi = P^{-1}) or ``'grid'`` (``density``).
    """

    kind: str
    matrix: Optional[np.ndarray] = None
    coeffs: Optional[np.ndarray] = None
    index_set: Optional[IndexSet] = None
    density: Optional[GridDensity] = None

    @classmethod
    def constant(cls, matrix) -> "PriorSpec":
        return cls("constant", matrix=np.atleast_2d(np.asarray(matrix, dtype=complex)))

    @classmethod
    def identity(cls, m: int) -> "PriorSpec":
        return cls.constant(np.eye(m))

    @classmethod
    def inverse_polynomial(cls, coeffs, index_set: IndexSet) -> "PriorSpec":
        return cls("inverse_polynomial", coeffs=np.asarray(coeffs, dtype=complex), index_set=index_set)

    @classmethod
    def from_grid(cls, density: GridDensity) -> "PriorSpec":
        return cls("grid", density=density)


def eval_prior(spec: PriorSpec, grid: TorusGrid) -> GridDensity:
    """Sample the prior on ``grid`` and check it is bounded and coercive."""
    if spec.kind == "constant":
        try:
            M = herm.as_hermitian(spec.matrix)
        except Exception as exc:
            raise PriorInvalidError(f"constant prior is not Hermitian: {exc}") from None
        samples = np.broadcast_to(M, (grid.n_nodes,) + M.shape).copy()
        dens = GridDensity(grid, samples) if _psd(M) else None
        inverse = None
    elif spec.kind == "inverse_polynomial":
        grid.check_resolves(spec.index_set)
        P = eval_trig_poly(spec.coeffs, spec.index_set, grid)
        if np.linalg.eigvalsh(P).min() <= 0:
            raise PriorInvalidError("polynomial P is not positive definite on the grid")
        inverse = P
        dens = GridDensity(grid, herm.herm_inv(P), inverse=P)
    elif spec.kind == "grid":
        dens = spec.density
        if dens.grid != grid:
            raise DimensionError("grid prior was sampled on a different grid")
        inverse = dens.inverse
    else:
        raise ValueError(f"unknown prior kind {spec.kind!r}")
    if dens is None or not dens.coercive:
        raise PriorInvalidError("prior is not coercive on the grid")
    if inverse is not None:
        dens.inverse = inverse
    return dens


def _psd(M) -> bool:
    return bool(np.linalg.eigvalsh(M).min() >= -PSD_TOL)


def random_coercive_density(
    seed: int, grid: TorusGrid, m: int, a: float, b: float, degree: int = 1
) -> GridDensity:
    """Bandlimited random density with a*I <= Phi <= b*I at every node.

    Built as a*I + (b - a) * A A^* / max_eig(A A^*), where A is a random
    matrix trigonometric polynomial with |k_j| <= ``degree``.
    """
    if not 0 < a <= b:
        raise DomainError("need 0 < a <= b")
    if a == b:
        return GridDensity(grid, np.broadcast_to(a * np.eye(m, dtype=complex), (grid.n_nodes, m, m)).copy())
    rng = np.random.default_rng(seed)
    ks = IndexSet.box(grid.d, degree)
    C = (rng.standard_normal((len(ks), m, m)) + 1j * rng.standard_normal((len(ks), m, m))) / np.sqrt(2)
    A = np.tensordot(np.conj(grid.phases(ks)), C, axes=(1, 0))
    F = herm.hermitize(A @ np.conj(np.swapaxes(A, 1, 2)))
    top = np.linalg.eigvalsh(F).max()
    samples = a * np.eye(m) + (b - a) * F / top
    return GridDensity(grid, samples)


def synth_field(phi: GridDensity, seed: int, n_realizations: Optional[int] = None) -> np.ndarray:
    """Gaussian realizations of a stationary field on the periodic lattice.

    Each realization draws an independent CN(0, I) vector at every frequency
    node, colors it by Phi(theta_n)^{1/2} and transforms back to the lattice,
    so the circular covariance of the output is exactly Gamma(Phi).

    Returns an array of shape (n_nodes, m), or (n_realizations, n_nodes, m)
    when ``n_realizations`` is given.  Lattice points are ordered like the
    grid nodes.
    """
    grid = phi.grid
    count = 1 if n_realizations is None else int(n_realizations)
    rng = np.random.default_rng(seed)
    root = herm.matrix_power(phi.samples, 0.5)
    shape = (count, grid.n_nodes, phi.m)
    Z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    X = np.einsum("nab,rnb->rna", root, Z)
    X = X.reshape((count,) + grid.shape + (phi.m,))
    axes = tuple(range(1, grid.d + 1))
    y = np.fft.ifftn(X, axes=axes) * np.sqrt(grid.n_nodes)
    y = y.reshape(shape)
    return y[0] if n_realizations is None else y


def periodogram(realizations, grid: TorusGrid) -> GridDensity:
    """Averaged matricial periodogram of one or more realizations."""
    Y = np.asarray(realizations, dtype=complex)
    if Y.ndim == 2:
        Y = Y[None]
    if Y.ndim != 3 or Y.shape[1] != grid.n_nodes:
        raise DimensionError(f"realizations must have shape (R, {grid.n_nodes}, m)")
    count, _, m = Y.shape
    Yg = Y.reshape((count,) + grid.shape + (m,))
    axes = tuple(range(1, grid.d + 1))
    Xh = np.fft.fftn(Yg, axes=axes).reshape(count, grid.n_nodes, m) / np.sqrt(grid.n_nodes)
    P = np.einsum("rna,rnb->nab", Xh, np.conj(Xh)) / count
    return GridDensity(grid, herm.hermitize(P))


def smoothed_periodogram(realizations, grid: TorusGrid, index_set: IndexSet) -> CovarianceData:
    """Moments of the averaged periodogram; feasible by construction."""
    return periodogram(realizations, grid).moments(index_set)

