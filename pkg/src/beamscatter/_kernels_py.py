"""Pure-numpy implementations of the hot pointwise kernels.

Same signatures and in-place semantics as the compiled ``_kernels`` module.
"""

import numpy as np


def _ipow(x, k):
    """Binary exponentiation with the same multiplication order as the compiled kernel."""
    r = np.ones_like(x)
    x = x.copy()
    while k > 0:
        if k & 1:
            r *= x
        x *= x
        k >>= 1
    return r


def nonlinear_kick(u, v, coeff, p):
    """In place: ``v -= coeff * |u|**(p-1) * u``."""
    pi = int(p)
    if pi == p and pi % 2 == 1:
        v -= coeff * _ipow(u, pi)
    else:
        v -= coeff * np.sign(u) * np.abs(u) ** p


def linear_rotate(uh, vh, c, s_over_w, w_s):
    """In place on spectral pairs: ``(uh, vh) <- (c uh + s/w vh, -w s uh + c vh)``."""
    u_new = c * uh + s_over_w * vh
    vh *= c
    vh -= w_s * uh
    uh[...] = u_new


def power_sum(u, q):
    """``sum(|u|**q)``."""
    qi = int(q)
    if qi == q and qi % 2 == 0:
        return float(np.sum(_ipow(u, qi)))
    return float(np.sum(np.abs(u) ** q))
