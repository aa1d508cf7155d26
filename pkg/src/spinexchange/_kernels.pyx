# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernels. Same contract as ``_kernels_py``."""
import numpy as np

cdef double SQRT2 = 1.4142135623730951
cdef double INV_SQRT2 = 0.7071067811865476


def meanfield_rhs(const double complex[:, :, ::1] rho, const double[:, ::1] chi,
                  const double[::1] weights, const double[::1] h, const double[::1] qeff,
                  const double[::1] gamma, double complex[:, :, ::1] out):
    cdef Py_ssize_t n = rho.shape[0]
    cdef Py_ssize_t i, j, a, b, k
    cdef double complex field, acc
    cdef double complex H[3][3]
    cdef double complex hr[3][3]
    cdef double complex bc, bb
    cdef double g
    cdef double ldl[3]
    ldl[0] = 0.0
    ldl[1] = 2.0
    ldl[2] = 2.0

    cdef double complex[::1] s = np.empty(n, dtype=np.complex128)
    for j in range(n):
        s[j] = weights[j] * SQRT2 * (rho[j, 1, 0] + rho[j, 2, 1])

    for a in range(3):
        for b in range(3):
            H[a][b] = 0

    for i in range(n):
        field = 0
        for j in range(n):
            field = field + chi[i, j] * s[j]
        field = 2.0 * (field - chi[i, i] * s[i])
        bc = field.conjugate() * INV_SQRT2
        bb = field * INV_SQRT2
        H[0][0] = h[i] + qeff[i]
        H[2][2] = -h[i] + qeff[i]
        H[0][1] = bc
        H[1][2] = bc
        H[1][0] = bb
        H[2][1] = bb

        for a in range(3):
            for b in range(3):
                acc = 0
                for k in range(3):
                    acc = acc + H[a][k] * rho[i, k, b]
                hr[a][b] = acc
        for a in range(3):
            for b in range(3):
                # -i (H rho - (H rho)^dagger)
                acc = hr[a][b] - hr[b][a].conjugate()
                out[i, a, b] = -1j * acc

        g = gamma[i]
        if g != 0.0:
            for a in range(2):
                for b in range(2):
                    out[i, a, b] = out[i, a, b] + g * 2.0 * rho[i, a + 1, b + 1]
            for a in range(3):
                for b in range(3):
                    out[i, a, b] = out[i, a, b] - g * 0.5 * (ldl[a] + ldl[b]) * rho[i, a, b]
    return np.asarray(out)


def threemode_rhs(const double complex[:, ::1] y, double chi, double q,
                  double complex[:, ::1] out):
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t t
    cdef double complex a, b, c, c2
    cdef double na, nb, nc, det
    for t in range(n):
        a = y[t, 0]
        b = y[t, 1]
        c = y[t, 2]
        na = a.real * a.real + a.imag * a.imag
        nb = b.real * b.real + b.imag * b.imag
        nc = c.real * c.real + c.imag * c.imag
        c2 = c * c
        det = 2.0 * chi * nc + q
        out[t, 0] = -1j * (2.0 * chi * c2 * b.conjugate() + det * a)
        out[t, 1] = -1j * (2.0 * chi * c2 * a.conjugate() + det * b)
        out[t, 2] = -1j * (4.0 * chi * c.conjugate() * a * b + 2.0 * chi * c * (na + nb))
    return np.asarray(out)
