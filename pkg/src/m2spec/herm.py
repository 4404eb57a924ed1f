"""
Dense Hermitian matrix primitives.

Every function accepts either a single ``(m, m)`` matrix or a stack
``(..., m, m)`` and works batch-wise over the leading axes.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, IndexSetError, SingularityError, SymmetryError

HERMITIAN_RTOL = 1e-12
# eigenvalues in [-CLIP_TOL, 0) are treated as round-off and set to zero
CLIP_TOL = 1e-10
# smallest eigenvalue accepted when raising to a negative power
POWER_FLOOR = 1e-12


def hermitize(A):
    A = np.asarray(A)
    return 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))


def as_hermitian(A, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    """Check that ``A`` is Hermitian to within ``rtol * ||A||`` and symmetrize it."""
    A = np.asarray(A, dtype=complex)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise SymmetryError(f"expected square matrices, got shape {A.shape}")
    AH = np.conj(np.swapaxes(A, -1, -2))
    scale = np.abs(A).max() if A.size else 0.0
    if np.abs(A - AH).max(initial=0.0) > rtol * max(scale, 1e-300):
        raise SymmetryError("matrix is not Hermitian")
    return 0.5 * (A + AH)


def herm_eig(A):
    """Eigenvalues (ascending) and unitary eigenvectors of Hermitian ``A``."""
    return np.linalg.eigh(as_hermitian(A))


def _from_eig(w, U):
    return hermitize((U * w[..., None, :]) @ np.conj(np.swapaxes(U, -1, -2)))


def _clipped_eig(A):
    w, U = herm_eig(A)
    if np.any(w < -CLIP_TOL):
        raise DomainError(f"matrix is not PSD (min eigenvalue {w.min():.3e})")
    return np.maximum(w, 0.0), U


def matrix_power(A, c: float) -> np.ndarray:
    """Real power A^c of a PSD matrix via its eigendecomposition.

    Negative exponents require every eigenvalue above ``POWER_FLOOR``.
    """
    if c == 0:
        A = as_hermitian(A)
        return np.broadcast_to(np.eye(A.shape[-1], dtype=complex), A.shape).copy()
    w, U = _clipped_eig(A)
    if c < 0:
        if np.any(w <= POWER_FLOOR):
            raise SingularityError(
                f"negative power of a (near-)singular matrix (min eigenvalue {w.min():.3e})"
            )
        wc = w**c
    else:
        # 0**c = 0 for c > 0
        wc = np.power(w, c, where=w > 0, out=np.zeros_like(w))
    return _from_eig(wc, U)


def matrix_log(A) -> np.ndarray:
    w, U = herm_eig(A)
    if np.any(w <= POWER_FLOOR):
        raise SingularityError(f"log of a (near-)singular matrix (min eigenvalue {w.min():.3e})")
    return _from_eig(np.log(w), U)


def sqrt_factor(A, kind: str = "hermitian") -> np.ndarray:
    """A square-root factor W of a positive definite A, with W W^* = A.

    ``kind='hermitian'`` gives the principal square root, ``kind='cholesky'``
    the lower-triangular factor with positive diagonal.
    """
    A = as_hermitian(A)
    w, U = herm_eig(A)
    if np.any(w <= 0):
        raise DomainError("sqrt_factor requires a positive definite matrix")
    if kind == "hermitian":
        return _from_eig(np.sqrt(w), U)
    if kind == "cholesky":
        return np.linalg.cholesky(A)
    raise ValueError(f"unknown factor kind {kind!r}")


def herm_inv(A) -> np.ndarray:
    return hermitize(np.linalg.inv(A))


def min_eig_field(field) -> float:
    """Smallest eigenvalue over all nodes of a Hermitian matrix field."""
    return float(np.linalg.eigvalsh(as_hermitian(field)).min())


def pairing(A, B, index_set_a=None, index_set_b=None) -> float:
    """Real inner product sum_k trace(A_k B_k^*) of two coefficient sets.

    ``A`` and ``B`` are (L, m, m) arrays, or objects with ``values`` and
    ``index_set`` attributes (e.g. ``CovarianceData``).
    """
    A, ia = _coeff_values(A, index_set_a)
    B, ib = _coeff_values(B, index_set_b)
    if A.shape != B.shape or (ia is not None and ib is not None and ia != ib):
        raise IndexSetError("pairing requires coefficient sets on the same index set")
    val = np.vdot(B, A)  # sum conj(B) * A == sum_k trace(A_k B_k^*)
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise SymmetryError(f"pairing has imaginary part {val.imag:.3e}; inputs not conjugate-symmetric")
    return float(val.real)


def _coeff_values(X, index_set):
    if hasattr(X, "values") and hasattr(X, "index_set"):
        return np.asarray(X.values), X.index_set
    if hasattr(X, "coeffs") and hasattr(X, "index_set"):
        return np.asarray(X.coeffs), X.index_set
    return np.asarray(X), index_set
