"""
Uniform discretization of the d-torus.

All integrals against the normalized Lebesgue measure are replaced by the
arithmetic mean over the nodes of a tensor grid with N points per axis,
theta_n = 2*pi*n/N.  This rule is exact for trigonometric polynomials of
degree < N in every variable, which is what makes moment matching exact in
the discretized problem.

Matrix fields are stored node-major as complex arrays of shape
``(n_nodes, m, m)``; node order is lexicographic in the grid multi-index
(last axis fastest), the same order as ``np.ndindex((N,) * d)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DimensionError, IndexSetError, SymmetryError

# relative tolerance for conjugate-symmetry checks on coefficient sets
SYMMETRY_RTOL = 1e-12


class IndexSet:
    """Finite index set Lambda in Z^d, symmetric about the origin.

    Parameters
    ----------
    indices : array_like of int, shape (L, d)
        The multi-indices, in the order they should be stored.
    """

    def __init__(self, indices):
        idx = np.array(indices, dtype=np.int64)
        if idx.ndim == 1:
            idx = idx[:, None]
        if idx.ndim != 2 or idx.shape[0] == 0 or idx.shape[1] == 0:
            raise IndexSetError("indices must be a non-empty (L, d) integer array")
        keys = [tuple(int(v) for v in row) for row in idx]
        pos = {k: i for i, k in enumerate(keys)}
        if len(pos) != len(keys):
            raise IndexSetError("duplicate multi-indices")
        d = idx.shape[1]
        if (0,) * d not in pos:
            raise IndexSetError("index set must contain the zero index")
        try:
            neg = np.array([pos[tuple(-v for v in k)] for k in keys], dtype=np.int64)
        except KeyError as exc:
            raise IndexSetError(f"index set not closed under negation: {exc}") from None

        self.indices = idx
        self.indices.flags.writeable = False
        self.d = d
        self.zero = pos[(0,) * d]
        self.neg = neg
        # canonical half-set: first nonzero component positive
        self.half = np.array(
            [i for i, k in enumerate(keys) if _first_nonzero(k) > 0], dtype=np.int64
        )
        self._pos = pos

    @classmethod
    def box(cls, d: int, K: int) -> "IndexSet":
        """All k with |k_j| <= K, lexicographic order."""
        rng = range(-K, K + 1)
        return cls(list(itertools.product(rng, repeat=d)))

    def __len__(self) -> int:
        return self.indices.shape[0]

    def __iter__(self):
        return iter(self._pos)

    def __eq__(self, other) -> bool:
        return isinstance(other, IndexSet) and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash(self.indices.tobytes())

    def __repr__(self) -> str:
        return f"IndexSet(d={self.d}, size={len(self)})"

    def position(self, k) -> int:
        return self._pos[tuple(int(v) for v in np.atleast_1d(k))]

    @property
    def max_abs(self) -> int:
        return int(np.abs(self.indices).max())


def _first_nonzero(k) -> int:
    for v in k:
        if v != 0:
            return v
    return 0


@dataclass(frozen=True)
class TorusGrid:
    """Tensor grid on [0, 2*pi)^d with ``N`` nodes per axis."""

    d: int
    N: int
    thetas: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d < 1 or self.N < 1:
            raise DimensionError("grid needs d >= 1 and N >= 1")
        axis = 2.0 * np.pi * np.arange(self.N) / self.N
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        th = np.stack([g.ravel() for g in mesh], axis=-1)
        th.flags.writeable = False
        object.__setattr__(self, "thetas", th)

    @property
    def n_nodes(self) -> int:
        return self.N**self.d

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def weight(self) -> float:
        return 1.0 / self.n_nodes

    def check_resolves(self, index_set: IndexSet) -> None:
        """Raise unless every exponential in ``index_set`` is resolved exactly."""
        if index_set.d != self.d:
            raise DimensionError(f"index set has d={index_set.d}, grid has d={self.d}")
        if self.N < 2 * index_set.max_abs + 1:
            raise DimensionError(
                f"N={self.N} too small for max |k_j|={index_set.max_abs}; "
                f"need N >= {2 * index_set.max_abs + 1}"
            )

    def phases(self, index_set: IndexSet) -> np.ndarray:
        """exp(i <k, theta_n>) as an array of shape (n_nodes, L)."""
        if index_set.d != self.d:
            raise DimensionError(f"index set has d={index_set.d}, grid has d={self.d}")
        # reduce k*n mod N before forming the angle so the phases are exact multiples
        n = np.rint(self.thetas * self.N / (2.0 * np.pi)).astype(np.int64)
        kn = np.mod(n @ index_set.indices.T, self.N)
        return np.exp(2j * np.pi * kn / self.N)


@dataclass
class CovarianceData:
    """Moment data {Sigma_k}, stored as a (L, m, m) complex array aligned with ``index_set``."""

    index_set: IndexSet
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim != 3 or vals.shape[0] != len(self.index_set) or vals.shape[1] != vals.shape[2]:
            raise DataError(
                f"expected shape ({len(self.index_set)}, m, m), got {vals.shape}"
            )
        self.values = vals

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def __getitem__(self, k) -> np.ndarray:
        return self.values[self.index_set.position(k)]

    def symmetry_defect(self) -> float:
        """max_k ||Sigma_{-k} - Sigma_k^*||, relative to max ||Sigma_k||."""
        v = self.values
        diff = v[self.index_set.neg] - np.conj(np.swapaxes(v, 1, 2))
        scale = max(float(np.abs(v).max()), 1e-300)
        return float(np.abs(diff).max()) / scale

    def check_symmetric(self, rtol: float = SYMMETRY_RTOL) -> None:
        if not np.all(np.isfinite(self.values)):
            raise DataError("covariance data contains non-finite entries")
        defect = self.symmetry_defect()
        if defect > rtol:
            raise DataError(f"Sigma_(-k) != Sigma_k^* (relative defect {defect:.3e})")

    def scaled(self, c: float) -> "CovarianceData":
        return CovarianceData(self.index_set, c * self.values)


def quadrature(grid: TorusGrid, samples) -> complex | float:
    """Mean of ``samples`` over the grid, i.e. the integral against dm.

    ``samples`` has the node axis first; any trailing axes are kept.
    """
    arr = np.asarray(samples)
    if arr.shape[:1] != (grid.n_nodes,):
        raise DimensionError(f"expected {grid.n_nodes} samples, got shape {arr.shape}")
    out = arr.sum(axis=0) / grid.n_nodes
    if out.ndim == 0:
        return out.item()
    return out


def check_conjugate_symmetric(index_set: IndexSet, coeffs, rtol: float = SYMMETRY_RTOL) -> None:
    c = np.asarray(coeffs)
    diff = c[index_set.neg] - np.conj(np.swapaxes(c, -1, -2))
    scale = max(float(np.abs(c).max()) if c.size else 0.0, 1.0)
    if float(np.abs(diff).max()) > rtol * scale:
        raise SymmetryError("coefficients violate Q_(-k) = Q_k^*")


def eval_trig_poly(coeffs, index_set: IndexSet, grid: TorusGrid) -> np.ndarray:
    """Samples of sum_k Q_k exp(-i <k, theta>) on the grid.

    Parameters
    ----------
    coeffs : array_like, shape (L, m, m)
        Coefficients aligned with ``index_set``; must satisfy Q_{-k} = Q_k^*.

    Returns
    -------
    ndarray, shape (n_nodes, m, m)
        Hermitian at every node (symmetrized to remove round-off).
    """
    c = np.asarray(coeffs, dtype=complex)
    if c.ndim != 3 or c.shape[0] != len(index_set):
        raise DimensionError(f"coeffs must have shape ({len(index_set)}, m, m)")
    check_conjugate_symmetric(index_set, c)
    E = np.conj(grid.phases(index_set))
    field_ = np.tensordot(E, c, axes=(1, 0))
    return 0.5 * (field_ + np.conj(np.swapaxes(field_, 1, 2)))


def gamma_moments(field_, grid: TorusGrid, index_set: IndexSet) -> CovarianceData:
    """Fourier coefficients Sigma_k = int exp(i <k, theta>) F(theta) dm for k in Lambda."""
    F = np.asarray(field_, dtype=complex)
    if F.ndim != 3 or F.shape[0] != grid.n_nodes:
        raise DimensionError(f"field must have shape ({grid.n_nodes}, m, m), got {F.shape}")
    E = grid.phases(index_set)
    vals = np.tensordot(E.T, F, axes=(1, 0)) / grid.n_nodes
    # force exact conjugate symmetry: the kernel pairs k with -k
    vals = 0.5 * (vals + np.conj(np.swapaxes(vals[index_set.neg], 1, 2)))
    return CovarianceData(index_set, vals)
