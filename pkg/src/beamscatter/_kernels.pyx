# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pointwise kernels for the split-step integrator.

Arrays must be C-contiguous; they are processed as flat buffers.
"""

from libc.math cimport fabs, pow


cdef inline double _ipow(double x, int k) nogil:
    cdef double r = 1.0
    while k > 0:
        if k & 1:
            r *= x
        x *= x
        k >>= 1
    return r


def nonlinear_kick(u, v, double coeff, double p):
    """In place: ``v -= coeff * |u|**(p-1) * u``."""
    if not v.flags.c_contiguous:
        raise ValueError("v must be C-contiguous")
    cdef const double[::1] uf = u.reshape(-1)
    cdef double[::1] vf = v.reshape(-1)
    cdef Py_ssize_t i, n = uf.shape[0]
    cdef int pi = <int>p
    cdef double x
    if pi == p and pi % 2 == 1:
        with nogil:
            for i in range(n):
                vf[i] -= coeff * _ipow(uf[i], pi)
    else:
        with nogil:
            for i in range(n):
                x = uf[i]
                if x > 0:
                    vf[i] -= coeff * pow(x, p)
                elif x < 0:
                    vf[i] += coeff * pow(-x, p)


def linear_rotate(uh, vh, c, s_over_w, w_s):
    """In place on spectral pairs: ``(uh, vh) <- (c uh + s/w vh, -w s uh + c vh)``."""
    if not (uh.flags.c_contiguous and vh.flags.c_contiguous):
        raise ValueError("spectral arrays must be C-contiguous")
    cdef double complex[::1] uf = uh.reshape(-1)
    cdef double complex[::1] vf = vh.reshape(-1)
    cdef const double[::1] cf = c.reshape(-1)
    cdef const double[::1] sf = s_over_w.reshape(-1)
    cdef const double[::1] wf = w_s.reshape(-1)
    cdef Py_ssize_t i, n = uf.shape[0]
    cdef double complex a, b
    with nogil:
        for i in range(n):
            a = uf[i]
            b = vf[i]
            uf[i] = cf[i] * a + sf[i] * b
            vf[i] = cf[i] * b - wf[i] * a


def power_sum(u, double q):
    """``sum(|u|**q)``."""
    cdef const double[::1] uf = u.reshape(-1)
    cdef Py_ssize_t i, n = uf.shape[0]
    cdef int qi = <int>q
    cdef double acc = 0.0
    if qi == q and qi % 2 == 0:
        with nogil:
            for i in range(n):
                acc += _ipow(uf[i], qi)
    else:
        with nogil:
            for i in range(n):
                acc += pow(fabs(uf[i]), q)
    return acc
