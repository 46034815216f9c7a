"""Dense linear-algebra primitives every other module builds on.

Matrices are plain ``numpy.ndarray`` objects (2-D, float64). This module
owns the numerical conventions: the thin SVD, the rank threshold, orthogonal
projectors, and the CSV wire format for matrices. All tolerances live here
as named constants so the decomposition engine and the tests agree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure

# Frobenius defect allowed when checking Q^T Q = I preconditions.
ORTHONORMAL_TOL = 1e-8
# Relative Frobenius residual guaranteed by svd(): ||A - U S V^T||_F.
SVD_RESIDUAL_TOL = 1e-10
# Projector algebra checks (symmetry, idempotence, annihilation).
PROJECTOR_TOL = 1e-10
# Relative residual expected of exact-regime factorizations.
EXACT_REGIME_TOL = 1e-8


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a 2-D float64 array with finite entries.

    Raises ValueError for empty, non-2-D, or non-finite input.
    """
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    return m


@dataclass(frozen=True, eq=False)
class SvdResult:
    """Thin SVD factors A = U diag(s) V^T.

    Attributes
    ----------
    left_vectors : (n, r) array with orthonormal columns.
    singular_values : (r,) nonincreasing, nonnegative.
    right_vectors : (p, r) array with orthonormal columns.
    """

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    @property
    def rank(self) -> int:
        n = self.left_vectors.shape[0]
        p = self.right_vectors.shape[0]
        return numerical_rank(self.singular_values, n, p)


def svd(a) -> SvdResult:
    """Thin SVD of a dense matrix.

    Guarantees ``||A - U S V^T||_F <= SVD_RESIDUAL_TOL * max(1, ||A||_F)``
    with r = min(rows, cols) factors. LAPACK non-convergence is surfaced
    as NumericalFailure instead of silently returning garbage.
    """
    m = as_matrix(a)
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(
            f"SVD failed to converge on a {m.shape[0]}x{m.shape[1]} matrix"
        ) from exc
    return SvdResult(u, s, vt.T)


def numerical_rank(singular_values, rows: int, cols: int) -> int:
    """Count singular values above ``max(rows, cols) * eps * sigma_max``.

    Returns 0 for the zero matrix. Input must be sorted nonincreasing.
    """
    s = np.atleast_1d(np.asarray(singular_values, dtype=float))
    if s.size == 0 or s[0] <= 0.0:
        return 0
    tol = max(rows, cols) * np.finfo(float).eps * s[0]
    return int(np.count_nonzero(s > tol))


def orthonormality_defect(q) -> float:
    """Frobenius norm of Q^T Q - I."""
    m = np.asarray(q, dtype=float)
    return float(np.linalg.norm(m.T @ m - np.eye(m.shape[1])))


def projector_complement(q) -> np.ndarray:
    """Projector onto the orthogonal complement of span(Q): I - Q Q^T.

    Q must have orthonormal columns (checked to ORTHONORMAL_TOL). The result
    is symmetric and idempotent with ``P @ Q ~ 0``.
    """
    m = as_matrix(q, "Q")
    defect = orthonormality_defect(m)
    if defect > ORTHONORMAL_TOL:
        raise ValueError(
            f"columns are not orthonormal (defect {defect:.3e} > {ORTHONORMAL_TOL:.0e})"
        )
    return np.eye(m.shape[0]) - m @ m.T


def project_out(q: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Apply I - Q Q^T to the columns of ``a`` without forming the projector."""
    return a - q @ (q.T @ a)


def frobenius(a) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float)))


# CSV wire format: comma-separated reals, one row per line, no header.
# The parser rejects ragged rows and non-finite values.

def load_matrix_csv(path) -> np.ndarray:
    """Read a matrix from CSV; rejects ragged rows and non-finite entries."""
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                values = [float(tok) for tok in text.split(",")]
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: non-numeric entry") from exc
            if rows and len(values) != len(rows[0]):
                raise ValueError(
                    f"{path}: line {lineno}: ragged row "
                    f"({len(values)} columns, expected {len(rows[0])})"
                )
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    m = np.array(rows, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{path}: matrix contains non-finite entries")
    return m


def save_matrix_csv(path, a) -> None:
    """Write a matrix as CSV with round-trip-exact float formatting."""
    m = np.atleast_2d(np.asarray(a, dtype=float))
    np.savetxt(path, m, fmt="%.17g", delimiter=",")
