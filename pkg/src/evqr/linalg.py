"""Small dense symmetric-matrix helpers.

Everything here works by symmetric eigendecomposition or Cholesky; matrices
in this package are at most a few dozen rows, so exactness wins over speed.
"""
from __future__ import annotations

import numpy as np
from scipy import linalg as sla

from .errors import DimensionMismatch, NotPSD, SingularMatrix

SYM_TOL = 1e-12
NEG_EIG_TOL = 1e-12
PIVOT_TOL = 1e-14


def as_sym(a) -> np.ndarray:
    """Return ``(A + A^T)/2`` after checking ``A`` is symmetric up to roundoff."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    scale = np.abs(a).max() if a.size else 0.0
    if np.abs(a - a.T).max(initial=0.0) > SYM_TOL * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (a + a.T)


def _clamped_eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(a)
    top = max(float(np.abs(w).max(initial=0.0)), 0.0)
    if w.size and w[0] < -NEG_EIG_TOL * top:
        raise NotPSD(f"smallest eigenvalue {w[0]:.3e} is below -{NEG_EIG_TOL:g} * {top:.3e}")
    # eigenvalues at roundoff level carry no information; their square roots
    # would otherwise inject O(sqrt(eps)) noise into singular inputs
    noise = a.shape[0] * np.finfo(float).eps * top
    w = np.where(w <= noise, 0.0, w)
    return w, v


def psd_sqrt(a) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Raises
    ------
    NotPSD
        If an eigenvalue is below ``-1e-12 * lambda_max``.
    """
    a = as_sym(a)
    w, v = _clamped_eigh(a)
    s = (v * np.sqrt(w)) @ v.T
    return 0.5 * (s + s.T)


def sym_solve(a, b) -> np.ndarray:
    """Solve ``A X = B`` for symmetric positive definite ``A`` by Cholesky."""
    a = as_sym(a)
    b = np.asarray(b, dtype=float)
    d = a.shape[0]
    try:
        c, low = sla.cho_factor(a, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from exc
    floor = PIVOT_TOL * max(np.trace(a) / d, 0.0)
    if np.diag(c).min() ** 2 < floor or np.diag(c).min() <= 0:
        raise SingularMatrix("Cholesky pivot below relative threshold")
    return sla.cho_solve((c, low), b)


def cholesky_logdet(a) -> float:
    """``log det A`` as twice the sum of the log Cholesky diagonal."""
    a = as_sym(a)
    try:
        c = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from exc
    return 2.0 * float(np.log(np.diag(c)).sum())


def bures_w2_squared(a, b) -> float:
    """Squared 2-Wasserstein distance between equal-mean Gaussians N(0, A), N(0, B).

    ``tr A + tr B - 2 tr (A^{1/2} B A^{1/2})^{1/2}``. The last trace equals the
    nuclear norm of ``A^{1/2} B^{1/2}``, which is what gets computed: singular
    values stay accurate to roundoff when either input is rank deficient,
    whereas the square root of a nearly singular product would not.
    """
    a, b = as_sym(a), as_sym(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    ra, rb = psd_sqrt(a), psd_sqrt(b)
    fidelity = np.linalg.svd(ra @ rb, compute_uv=False).sum()
    return max(float(np.trace(a) + np.trace(b) - 2.0 * fidelity), 0.0)
