"""Exception types raised across the package."""


class M2Error(ValueError):
    """Base class for all package errors."""


class DimensionError(M2Error):
    pass


class SymmetryError(M2Error):
    """Hermitian or conjugate-symmetry requirement violated."""


class IndexSetError(M2Error):
    pass


class DomainError(M2Error):
    """Argument outside the domain of the operation (e.g. negative eigenvalue)."""


class SingularityError(M2Error):
    pass


class PriorInvalidError(M2Error):
    """Prior density is indefinite or not bounded/coercive on the grid."""


class BoundaryError(M2Error):
    """Dual variable is on or outside the boundary of the feasible set."""


class DataError(M2Error):
    """Covariance data is malformed (wrong shape or broken symmetry)."""


class CertificateRefusedError(M2Error):
    pass
