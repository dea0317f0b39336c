"""Pure numpy/scipy implementations of the hot numerical kernels.

Mirrors the compiled extension module function-for-function so either can
back the solver; see __init__ for how one is chosen.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def pcg_solve(indptr, indices, data, b, x0, inv_diag, tol, max_iter):
    """Jacobi-preconditioned conjugate gradients on a CSR system.

    Returns (x, iterations, converged).  Convergence means the true
    residual satisfies ||b - Ax|| <= tol * ||b||; the recurrence residual
    is verified against a freshly computed one before reporting success,
    restarting the recurrence if they disagree.
    """
    n = b.shape[0]
    a = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), 0, True
    x = np.array(x0, dtype=np.float64, copy=True)
    r = b - a @ x
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    limit = tol * bnorm
    iterations = 0
    while iterations < max_iter:
        ap = a @ p
        pap = float(p @ ap)
        if pap <= 0.0:
            break
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        iterations += 1
        if float(np.linalg.norm(r)) <= limit:
            true_r = b - a @ x
            if float(np.linalg.norm(true_r)) <= limit:
                return x, iterations, True
            r = true_r
            z = inv_diag * r
            p = z.copy()
            rz = float(r @ z)
            continue
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, iterations, float(np.linalg.norm(b - a @ x)) <= limit


def element_energies(u, edofs, ke):
    """u_e^T ke u_e per element; tiny negative round-off clamped to zero."""
    ue = u[edofs]
    e = np.einsum("ea,ab,eb->e", ue, ke, ue)
    return np.maximum(e, 0.0)


def assemble_values(slots, e_mod, ke, nnz):
    """Accumulate per-element stiffness contributions into CSR value slots.

    slots maps each of the 64 entries of every element matrix to a CSR data
    index, with nnz used as a discard slot for constrained pairs.
    """
    vals = (e_mod[:, None] * ke.reshape(1, 64)).ravel()
    return np.bincount(slots.ravel(), weights=vals, minlength=nnz + 1)[:nnz]
