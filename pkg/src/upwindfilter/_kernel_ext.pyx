# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stencil sum; mirrors ``_kernel_py.stencil_sum`` operation by operation.

Rows are processed one at a time with the node loop outside the column loop,
so the inner loop walks memory contiguously.  Each cell still accumulates
its terms in the fixed order (direction, then node), matching the numpy path.
"""
from libc.stdlib cimport free, malloc


cdef inline void _gather_row(const double* f, Py_ssize_t i, Py_ssize_t nx, Py_ssize_t ny,
                             Py_ssize_t ox, Py_ssize_t oy, const double* w, bint aligned,
                             double* dst) noexcept nogil:
    cdef Py_ssize_t j, j0, j1
    cdef Py_ssize_t i0 = i + ox
    cdef Py_ssize_t i1
    if i0 >= nx:
        i0 -= nx
    i1 = i0 + 1
    if i1 == nx:
        i1 = 0
    cdef const double* r0 = f + i0 * ny
    cdef const double* r1 = f + i1 * ny
    cdef double w0 = w[0], w1 = w[1], w2 = w[2], w3 = w[3]
    if aligned:
        for j in range(ny):
            j0 = j + oy
            if j0 >= ny:
                j0 -= ny
            dst[j] = r0[j0]
        return
    for j in range(ny):
        j0 = j + oy
        if j0 >= ny:
            j0 -= ny
        j1 = j0 + 1
        if j1 == ny:
            j1 = 0
        dst[j] = w0 * r0[j0] + w1 * r1[j0] + w2 * r0[j1] + w3 * r1[j1]


def stencil_rows(const double[:, :, ::1] gp, const double[:, :, ::1] gm,
                 const double[::1] omega, const Py_ssize_t[::1] node_start,
                 const double[::1] coef,
                 const Py_ssize_t[::1] pox, const Py_ssize_t[::1] poy, const double[:, ::1] pw,
                 const Py_ssize_t[::1] mox, const Py_ssize_t[::1] moy, const double[:, ::1] mw,
                 const unsigned char[::1] aligned,
                 double[:, ::1] out, Py_ssize_t row_lo, Py_ssize_t row_hi):
    """Fill ``out[row_lo:row_hi]``; releases the GIL for the whole loop."""
    cdef Py_ssize_t D = gp.shape[0]
    cdef Py_ssize_t nx = gp.shape[1]
    cdef Py_ssize_t ny = gp.shape[2]
    cdef Py_ssize_t plane = nx * ny
    cdef Py_ssize_t i, j, d, k
    cdef double c
    cdef const double* P
    cdef const double* M
    cdef const double* cp
    cdef const double* cm
    cdef double* buf
    cdef double* sp
    cdef double* sm
    cdef double* s
    cdef double* acc
    if plane == 0 or row_hi <= row_lo:
        return
    buf = <double*> malloc(4 * ny * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    sp = buf
    sm = buf + ny
    s = buf + 2 * ny
    acc = buf + 3 * ny
    try:
        with nogil:
            for i in range(row_lo, row_hi):
                for j in range(ny):
                    acc[j] = 0.0
                for d in range(D):
                    P = &gp[d, 0, 0]
                    M = &gm[d, 0, 0]
                    cp = P + i * ny
                    cm = M + i * ny
                    for j in range(ny):
                        s[j] = 0.0
                    for k in range(node_start[d], node_start[d + 1]):
                        _gather_row(P, i, nx, ny, pox[k], poy[k], &pw[k, 0], aligned[k], sp)
                        _gather_row(M, i, nx, ny, mox[k], moy[k], &mw[k, 0], aligned[k], sm)
                        c = coef[k]
                        for j in range(ny):
                            s[j] = s[j] + c * (((sp[j] + cm[j]) - cp[j]) - sm[j])
                    c = omega[d]
                    for j in range(ny):
                        acc[j] = acc[j] + c * s[j]
                for j in range(ny):
                    out[i, j] = acc[j]
    finally:
        free(buf)
