# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled classical RK4 stepping for vectorized master equations."""

import numpy as np

ctypedef double complex cplx


cdef inline void _matvec(const cplx* M, const cplx* x, cplx* y, Py_ssize_t D) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef cplx acc
    for i in range(D):
        acc = 0
        for j in range(D):
            acc = acc + M[i * D + j] * x[j]
        y[i] = acc


def rk4_chunk(const cplx[:, :, ::1] Ls, const cplx[::1] y0, double h, cplx[:, ::1] out):
    """Advance ``y0`` through ``(len(Ls) - 1) // 2`` steps.

    ``Ls[2k]``, ``Ls[2k + 1]`` and ``Ls[2k + 2]`` are the generators at the
    start, midpoint and end of step ``k``. ``out[k]`` receives the state after
    ``k`` steps (``out[0] = y0``).
    """
    cdef Py_ssize_t n = (Ls.shape[0] - 1) // 2
    cdef Py_ssize_t D = y0.shape[0]
    cdef Py_ssize_t DD = D * D
    if Ls.shape[1] != D or Ls.shape[2] != D:
        raise ValueError("generator and state sizes differ")
    if out.shape[0] < n + 1 or out.shape[1] != D:
        raise ValueError("output buffer too small")
    cdef cplx[::1] k1 = np.empty(D, dtype=np.complex128)
    cdef cplx[::1] k2 = np.empty(D, dtype=np.complex128)
    cdef cplx[::1] k3 = np.empty(D, dtype=np.complex128)
    cdef cplx[::1] k4 = np.empty(D, dtype=np.complex128)
    cdef cplx[::1] tmp = np.empty(D, dtype=np.complex128)
    cdef cplx[::1] y = np.empty(D, dtype=np.complex128)
    cdef const cplx* base = &Ls[0, 0, 0]
    cdef Py_ssize_t k, i
    cdef double h2 = 0.5 * h
    cdef double h6 = h / 6.0
    for i in range(D):
        y[i] = y0[i]
        out[0, i] = y0[i]
    with nogil:
        for k in range(n):
            _matvec(base + 2 * k * DD, &y[0], &k1[0], D)
            for i in range(D):
                tmp[i] = y[i] + h2 * k1[i]
            _matvec(base + (2 * k + 1) * DD, &tmp[0], &k2[0], D)
            for i in range(D):
                tmp[i] = y[i] + h2 * k2[i]
            _matvec(base + (2 * k + 1) * DD, &tmp[0], &k3[0], D)
            for i in range(D):
                tmp[i] = y[i] + h * k3[i]
            _matvec(base + (2 * k + 2) * DD, &tmp[0], &k4[0], D)
            for i in range(D):
                y[i] = y[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                out[k + 1, i] = y[i]
