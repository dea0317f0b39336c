# cython: language_level=3
"""Compiled hot kernels: CSR conjugate gradients, element energies, assembly.

Function-for-function mirror of _fallback with the same return contracts;
the package __init__ picks whichever module imports.
"""

import numpy as np

cimport cython
from libc.math cimport sqrt
from libc.stdint cimport int32_t, int64_t


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _spmv(const int64_t[::1] indptr,
                const int32_t[::1] indices,
                const double[::1] data,
                const double[::1] v,
                double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double acc
    for i in range(out.shape[0]):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * v[indices[k]]
        out[i] = acc


@cython.boundscheck(False)
@cython.wraparound(False)
cdef double _dot(const double[::1] a, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(a.shape[0]):
        acc += a[i] * b[i]
    return acc


@cython.boundscheck(False)
@cython.wraparound(False)
def pcg_solve(const int64_t[::1] indptr,
              const int32_t[::1] indices,
              const double[::1] data,
              const double[::1] b,
              const double[::1] x0,
              const double[::1] inv_diag,
              double tol,
              Py_ssize_t max_iter):
    """Jacobi-preconditioned conjugate gradients on a CSR system.

    Returns (x, iterations, converged); success is verified against a
    freshly computed residual, restarting the recurrence on disagreement.
    """
    cdef Py_ssize_t n = b.shape[0]
    cdef double bnorm = sqrt(_dot(b, b))
    if bnorm == 0.0:
        return np.zeros(n), 0, True

    x_arr = np.array(x0, dtype=np.float64, copy=True)
    r_arr = np.empty(n)
    z_arr = np.empty(n)
    p_arr = np.empty(n)
    ap_arr = np.empty(n)
    cdef double[::1] x = x_arr
    cdef double[::1] r = r_arr
    cdef double[::1] z = z_arr
    cdef double[::1] p = p_arr
    cdef double[::1] ap = ap_arr

    cdef double limit = tol * bnorm
    cdef double rz, rz_new, pap, alpha, beta, tnorm
    cdef Py_ssize_t i, iterations = 0
    cdef bint done = False

    with nogil:
        _spmv(indptr, indices, data, x, ap)
        for i in range(n):
            r[i] = b[i] - ap[i]
            z[i] = inv_diag[i] * r[i]
            p[i] = z[i]
        rz = _dot(r, z)

        while iterations < max_iter:
            _spmv(indptr, indices, data, p, ap)
            pap = _dot(p, ap)
            if pap <= 0.0:
                break
            alpha = rz / pap
            for i in range(n):
                x[i] += alpha * p[i]
                r[i] -= alpha * ap[i]
            iterations += 1
            if sqrt(_dot(r, r)) <= limit:
                # verify with the true residual before trusting the recurrence
                _spmv(indptr, indices, data, x, ap)
                for i in range(n):
                    z[i] = b[i] - ap[i]
                tnorm = sqrt(_dot(z, z))
                if tnorm <= limit:
                    done = True
                    break
                for i in range(n):
                    r[i] = z[i]
                    z[i] = inv_diag[i] * r[i]
                    p[i] = z[i]
                rz = _dot(r, z)
                continue
            for i in range(n):
                z[i] = inv_diag[i] * r[i]
            rz_new = _dot(r, z)
            beta = rz_new / rz
            for i in range(n):
                p[i] = z[i] + beta * p[i]
            rz = rz_new

        if not done:
            _spmv(indptr, indices, data, x, ap)
            for i in range(n):
                z[i] = b[i] - ap[i]
            done = sqrt(_dot(z, z)) <= limit

    return x_arr, iterations, bool(done)


@cython.boundscheck(False)
@cython.wraparound(False)
def element_energies(const double[::1] u,
                     const int32_t[:, ::1] edofs,
                     const double[:, ::1] ke):
    """u_e^T ke u_e per element; tiny negative round-off clamped to zero."""
    cdef Py_ssize_t nel = edofs.shape[0]
    out_arr = np.empty(nel)
    cdef double[::1] out = out_arr
    cdef double ue[8]
    cdef double acc
    cdef Py_ssize_t e, a, c
    with nogil:
        for e in range(nel):
            for a in range(8):
                ue[a] = u[edofs[e, a]]
            acc = 0.0
            for a in range(8):
                for c in range(8):
                    acc += ue[a] * ke[a, c] * ue[c]
            out[e] = acc if acc > 0.0 else 0.0
    return out_arr


@cython.boundscheck(False)
@cython.wraparound(False)
def assemble_values(const int64_t[:, :, ::1] slots,
                    const double[::1] e_mod,
                    const double[:, ::1] ke,
                    Py_ssize_t nnz):
    """Accumulate per-element stiffness contributions into CSR value slots.

    slots maps each of the 64 entries of every element matrix to a CSR data
    index, with nnz used as a discard slot for constrained pairs.
    """
    out_arr = np.zeros(nnz + 1)
    cdef double[::1] out = out_arr
    cdef double em
    cdef Py_ssize_t e, a, c
    with nogil:
        for e in range(slots.shape[0]):
            em = e_mod[e]
            for a in range(8):
                for c in range(8):
                    out[slots[e, a, c]] += em * ke[a, c]
    return out_arr[:nnz]
