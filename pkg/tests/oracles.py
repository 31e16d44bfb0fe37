"""Independent reference computations used by the tests.

None of these touch the package's quadrature or Newton code.
"""
import math

import numpy as np
from scipy.integrate import quad


def bisect(f, lo, hi, iters=200):
    flo = f(lo)
    if (flo > 0) == (f(hi) > 0):
        raise ValueError("bracket does not change sign")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def isotropic_multiplier(gamma, u0=1.0):
    """alpha_0 solving 2 e^x + gamma x = u0 (MB entropy, isotropic data)."""
    return bisect(lambda x: 2.0 * math.exp(x) + gamma * x - u0, -60.0, 5.0)


def legendre(i, v):
    return float(np.polynomial.legendre.legval(v, np.eye(i + 1)[i]))


def adaptive_moments(alpha, weight=lambda v: 1.0):
    """<m_i weight(v) exp(alpha . m)> by adaptive quadrature."""
    n = len(alpha)

    def ansatz(v):
        return math.exp(sum(a * legendre(i, v) for i, a in enumerate(alpha)))

    return np.array([
        quad(lambda v: legendre(i, v) * weight(v) * ansatz(v), -1, 1, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
        for i in range(n)
    ])


def central_gradient(fun, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def central_jacobian(fun, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)
