"""Dense matrix helpers and the SVD-based Moore-Penrose solve.

Matrices are plain 2-D float64 numpy arrays. Every public function validates
its inputs (2-D, finite) and never modifies them.
"""

import numpy as np

__all__ = [
    "ShapeError",
    "NumericError",
    "as_matrix",
    "matmul",
    "default_cutoff",
    "pseudoinverse",
    "solve_least_squares",
]


class ShapeError(ValueError):
    """Raised when matrix dimensions do not conform."""


class NumericError(ArithmeticError):
    """Raised when a decomposition fails to converge."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


def as_matrix(a, name="matrix"):
    """Return `a` as a finite 2-D float64 array.

    A 1-D input is read as a single column. NaN/Inf entries and empty
    matrices are rejected.
    """
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got {m.ndim}-D with shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"{name} must be nonempty, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return m


def matmul(a, b):
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def default_cutoff(shape):
    """Relative singular-value cutoff: machine epsilon times the larger dimension."""
    return np.finfo(np.float64).eps * max(shape)


def pseudoinverse(m, sv_cutoff_factor=None):
    """Moore-Penrose pseudoinverse of `m` via a thin SVD.

    Singular values at or below ``sv_cutoff_factor * sigma_max`` are treated
    as zero. With ``sv_cutoff_factor=None`` the factor defaults to
    ``eps * max(rows, cols)``.

    Returns an array of shape ``(cols, rows)``.
    """
    m = as_matrix(m, "m")
    if sv_cutoff_factor is None:
        sv_cutoff_factor = default_cutoff(m.shape)
    if sv_cutoff_factor < 0:
        raise ValueError(f"sv_cutoff_factor must be >= 0, got {sv_cutoff_factor}")

    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        # LAPACK gesdd reports non-convergence without an iteration count
        raise NumericError(f"SVD did not converge for {m.shape[0]}x{m.shape[1]} matrix: {exc}") from exc

    sigma_max = s[0] if s.size else 0.0
    keep = s > sv_cutoff_factor * sigma_max
    if sigma_max == 0.0 or not keep.any():
        return np.zeros((m.shape[1], m.shape[0]))
    r = int(np.count_nonzero(keep))
    # singular values come back sorted, so the kept ones are a prefix
    return (vt[:r].T / s[:r]) @ u[:, :r].T


def solve_least_squares(h, y, sv_cutoff_factor=None):
    """Minimum-norm minimizer of ``||h @ beta - y||_F``, i.e. ``pinv(h) @ y``."""
    h = as_matrix(h, "h")
    y = as_matrix(y, "y")
    if h.shape[0] != y.shape[0]:
        raise ShapeError(f"row mismatch: h is {h.shape[0]}x{h.shape[1]}, y is {y.shape[0]}x{y.shape[1]}")
    return pseudoinverse(h, sv_cutoff_factor) @ y
