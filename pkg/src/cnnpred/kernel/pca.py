"""PCA on the sample covariance, diagonalised with cyclic Jacobi rotations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


@dataclass
class PcaFit:
    mean: np.ndarray                 # [d]
    components: np.ndarray           # [k, d], orthonormal rows
    explained_variance: np.ndarray   # [k], non-increasing


def jacobi_eigh(a, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Iterates until the off-diagonal Frobenius norm drops below
    ``tol * ||A||_F`` (or absolute ``tol`` for a zero matrix).

    Returns
    -------
    eigenvalues : ndarray, shape (d,)
        Unsorted.
    eigenvectors : ndarray, shape (d, d)
        Columns are eigenvectors.
    """
    a = np.array(a, dtype=np.float64)
    d = a.shape[0]
    v = np.eye(d)
    scale = max(np.linalg.norm(a), 1.0)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= tol * scale:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows/columns p and q
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v


def pca_fit(data, k: int) -> PcaFit:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"data must be a 2-D matrix, got shape {data.shape}")
    n, d = data.shape
    if n < 2:
        raise ValueError(f"PCA needs at least 2 rows, got {n}")
    if not 1 <= k <= d:
        raise ValueError(f"component count must be in [1, {d}], got {k}")
    mean = data.mean(axis=0)
    centred = data - mean
    cov = centred.T @ centred / (n - 1)
    values, vectors = jacobi_eigh(cov)
    order = np.argsort(-values, kind="stable")[:k]
    comps = vectors[:, order].T.copy()
    # sign convention: largest-magnitude loading positive
    flip = comps[np.arange(k), np.argmax(np.abs(comps), axis=1)] < 0
    comps[flip] *= -1.0
    return PcaFit(mean, comps, values[order].copy())


def pca_transform(data, fit: PcaFit):
    return (np.asarray(data, dtype=np.float64) - fit.mean) @ fit.components.T


def pca_inverse_transform(scores, fit: PcaFit):
    return np.asarray(scores, dtype=np.float64) @ fit.components + fit.mean
