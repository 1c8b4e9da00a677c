"""Small shared linear-algebra helpers."""

from __future__ import annotations

import numpy as np

PSD_TOL = 1e-12


def psd_sqrt(matrix: np.ndarray, name: str = "covariance") -> np.ndarray:
    """Factor L of a symmetric PSD matrix with L @ L.T equal to the input.

    Uses Cholesky when the matrix is positive definite, otherwise an
    eigendecomposition with small negative eigenvalues clamped to zero.
    Raises ValueError on asymmetric or indefinite input.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if np.max(np.abs(m - m.T)) > PSD_TOL:
        raise ValueError(f"{name} must be symmetric")
    sym = 0.5 * (m + m.T)
    try:
        return np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(sym)
        if np.min(vals) < -PSD_TOL:
            raise ValueError(f"{name} has negative eigenvalue {np.min(vals)}")
        return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None)))
