"""Symmetric eigenvalue helpers that work in any numpy float dtype.

numpy's LAPACK-backed eigensolvers silently downcast longdouble input, which
is not acceptable for the extended-precision probe path; the cyclic Jacobi
iteration here stays in the input dtype throughout. Matrices of interest are
tiny (n <= 4 Hessians), where Jacobi converges in a handful of sweeps.
"""

from __future__ import annotations

import numpy as np


def jacobi_eigh(matrix: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60):
    """Eigenvalues (ascending) and eigenvector columns of a symmetric matrix.

    Cyclic Jacobi rotations in the dtype of the input; tol is relative to the
    Frobenius norm. Returns (eigenvalues, eigenvectors, converged).
    """
    a = np.array(matrix, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    n = a.shape[0]
    sym_gap = float(np.max(np.abs(a - a.T))) if n else 0.0
    scale = float(np.max(np.abs(a))) if n else 0.0
    if sym_gap > 1e-12 * max(1.0, scale):
        raise ValueError("matrix is not symmetric to 1e-12")
    a = (a + a.T) / 2
    vecs = np.eye(n, dtype=a.dtype)
    if n <= 1:
        return np.diag(a).copy(), vecs, True
    frob = np.sqrt(np.sum(a * a))
    threshold = tol * (frob if frob else 1.0)
    converged = False
    for _ in range(max_sweeps):
        hollow = a - np.diag(np.diag(a))
        off = np.sqrt(np.sum(hollow * hollow))
        if off <= threshold:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= threshold / (n * n):
                    continue
                tau = (a[q, q] - a[p, p]) / (2 * apq)
                if tau >= 0:
                    t = 1 / (tau + np.sqrt(1 + tau * tau))
                else:
                    t = -1 / (-tau + np.sqrt(1 + tau * tau))
                c = 1 / np.sqrt(1 + t * t)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                a[p, q] = a[q, p] = 0
                rot_p = c * vecs[:, p] - s * vecs[:, q]
                rot_q = s * vecs[:, p] + c * vecs[:, q]
                vecs[:, p], vecs[:, q] = rot_p, rot_q
    vals = np.diag(a).copy()
    order = np.argsort(vals)
    return vals[order], vecs[:, order], converged


def gershgorin_upper(matrix: np.ndarray) -> float:
    """Upper bound on the largest eigenvalue from Gershgorin discs."""
    a = np.asarray(matrix)
    radii = np.sum(np.abs(a), axis=1) - np.abs(np.diag(a))
    return float(np.max(np.diag(a) + radii))


def rayleigh_quotient(matrix: np.ndarray, direction: np.ndarray) -> float:
    v = np.asarray(direction, dtype=np.asarray(matrix).dtype)
    denom = float(v @ v)
    if denom == 0.0:
        raise ValueError("zero probe direction")
    return float(v @ np.asarray(matrix) @ v) / denom


def max_eigenvalue_estimate(matrix: np.ndarray) -> float:
    """Largest Rayleigh quotient over probe directions.

    Probes are the coordinate axes plus the Jacobi eigenvector basis; with a
    converged Jacobi sweep the best probe attains the top eigenvalue to
    machine precision. If Jacobi fails to converge, the Gershgorin disc upper
    bound is returned instead so the estimate never under-reports the sign.
    """
    a = np.asarray(matrix, dtype=float)
    n = a.shape[0]
    vals, vecs, converged = jacobi_eigh(a)
    if not converged:
        return gershgorin_upper(a)
    best = max(rayleigh_quotient(a, np.eye(n)[k]) for k in range(n))
    for k in range(n):
        best = max(best, rayleigh_quotient(a, vecs[:, k]))
    return best
