"""Cyclic Jacobi eigensolver for real symmetric / complex Hermitian matrices.

Classic two-sided rotations with a per-sweep threshold; quadratic convergence
once the off-diagonal mass is small.  Used as the package-internal dense
oracle so the spectral route stays independent of the series code paths.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NoConvergence


def jacobi_eigh(matrix, tol=1e-14, max_sweeps=80):
    """Full eigensystem of a Hermitian matrix; eigenvalues ascending.

    Returns (eigenvalues, eigenvectors) with eigenvectors in columns.
    Raises NoConvergence if the off-diagonal mass stalls above tol * ||A||_F.
    """
    a = np.array(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("square matrix required")
    n = a.shape[0]
    herm_err = np.max(np.abs(a - a.conj().T)) if n else 0.0
    scale = max(np.max(np.abs(a)), 1.0)
    if herm_err > 1e-12 * scale:
        raise ValueError(f"matrix is not Hermitian (defect {herm_err:.3e})")
    complex_input = np.iscomplexobj(a)
    a = a.astype(np.complex128 if complex_input else np.float64)
    q = np.eye(n, dtype=a.dtype)
    if n <= 1:
        return a.diagonal().real.copy(), q

    norm = np.linalg.norm(a)
    if norm == 0.0:
        return np.zeros(n), q

    def offdiag_norm():
        # direct evaluation: the ||A||^2 - ||diag||^2 shortcut loses half the
        # mantissa once the off-diagonal part is small
        w = a.copy()
        np.fill_diagonal(w, 0.0)
        return np.linalg.norm(w)

    for _ in range(max_sweeps):
        off = offdiag_norm()
        if off <= tol * norm:
            break
        thresh = off / n
        for p in range(n - 1):
            row = a[p, p + 1:]
            for dq in np.nonzero(np.abs(row) > thresh)[0]:
                qi = p + 1 + dq
                b = a[p, qi]
                ab = abs(b)
                if ab == 0.0:
                    continue
                phase = b / ab if complex_input else (1.0 if b > 0 else -1.0)
                alpha = a[p, p].real
                gamma = a[qi, qi].real
                tau = (gamma - alpha) / (2.0 * ab)
                t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.hypot(1.0, t)
                s1 = t * c * phase
                # A <- J^H A J with J = [[c, s1], [-conj(s1), c]] on (p, qi)
                col_p = a[:, p].copy()
                col_q = a[:, qi].copy()
                a[:, p] = c * col_p - np.conj(s1) * col_q
                a[:, qi] = s1 * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[qi, :].copy()
                a[p, :] = c * row_p - s1 * row_q
                a[qi, :] = np.conj(s1) * row_p + c * row_q
                a[p, qi] = 0.0
                a[qi, p] = 0.0
                a[p, p] = a[p, p].real
                a[qi, qi] = a[qi, qi].real
                qcol_p = q[:, p].copy()
                qcol_q = q[:, qi].copy()
                q[:, p] = c * qcol_p - np.conj(s1) * qcol_q
                q[:, qi] = s1 * qcol_p + c * qcol_q
    else:
        raise NoConvergence(f"Jacobi sweeps exhausted (off-diagonal {offdiag_norm():.3e})")

    evals = a.diagonal().real.copy()
    idx = np.argsort(evals, kind="stable")
    return evals[idx], q[:, idx]
