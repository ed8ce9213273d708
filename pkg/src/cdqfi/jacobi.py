"""Cyclic Jacobi eigensolver for small dense Hermitian matrices.

Deterministic sweep order and a fixed eigenvector phase convention (the
largest-magnitude component is made real and positive, ties broken by the
lowest index) so extremal eigenvectors are reproducible bit-for-bit across
runs of the same build.  Never on the differentiation path.
"""

from __future__ import annotations

import numpy as np


def eigh_jacobi(
    mat: np.ndarray, tol: float = 1e-14, max_sweeps: int = 60
) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvector columns of a Hermitian matrix."""
    a = np.array(mat, dtype=np.complex128)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    herm_defect = float(np.max(np.abs(a - a.conj().T), initial=0.0))
    scale = float(np.max(np.abs(a), initial=0.0))
    if herm_defect > 1e-10 * max(scale, 1.0):
        raise ValueError(f"matrix is not Hermitian (defect {herm_defect:.3e})")
    v = np.eye(n, dtype=np.complex128)
    if n == 1:
        return a.real.diagonal().copy(), v

    fro = float(np.linalg.norm(a))
    thresh = tol * max(fro, 1.0)
    for _ in range(max_sweeps):
        off = np.sqrt(
            max(float(np.sum(np.abs(a) ** 2) - np.sum(np.abs(np.diagonal(a)) ** 2)), 0.0)
        )
        if off <= thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                g = abs(a[p, q])
                if g <= 1e-300:
                    continue
                phi = np.angle(a[p, q])
                theta = 0.5 * np.arctan2(2.0 * g, (a[q, q] - a[p, p]).real)
                c = np.cos(theta)
                s = np.sin(theta)
                e_plus = np.exp(1j * phi)
                e_minus = np.conj(e_plus)
                # columns: A <- A J with J = [[c, s e^{i phi}], [-s e^{-i phi}, c]]
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * e_minus * col_q
                a[:, q] = s * e_plus * col_p + c * col_q
                # rows: A <- J^dagger A
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * e_plus * row_q
                a[q, :] = s * e_minus * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                col_p = v[:, p].copy()
                col_q = v[:, q].copy()
                v[:, p] = c * col_p - s * e_minus * col_q
                v[:, q] = s * e_plus * col_p + c * col_q

    vals = a.real.diagonal().copy()
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = v[:, order]
    for j in range(n):
        idx = int(np.argmax(np.abs(vecs[:, j])))
        ref = vecs[idx, j]
        mag = abs(ref)
        if mag > 0:
            vecs[:, j] *= np.conj(ref) / mag
            vecs[idx, j] = mag  # exact real positive pivot component
    return vals, vecs
