"""Legendre velocity basis on [-1, 1] and the ansatz/moment maps built on it.

All velocity integrals ``<g> = int_{-1}^{1} g(v) dv`` are evaluated with a
Gauss-Legendre rule stored on the basis. Functions taking a multiplier accept
a single vector of length ``N + 1`` or a stack of shape ``(..., N + 1)``.
"""
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainViolation, OverflowGuard
from .entropy import EntropyKind

DEFAULT_EXPONENT_CAP = 600.0


def legendre_table(N, v):
    """Values ``P_0(v) .. P_N(v)`` by the three-term recurrence, shape ``(N + 1, len(v))``."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    P = np.empty((N + 1, v.size))
    P[0] = 1.0
    if N >= 1:
        P[1] = v
    for i in range(1, N):
        P[i + 1] = ((2 * i + 1) * v * P[i] - i * P[i - 1]) / (i + 1)
    return P


def default_quad_order(N):
    return max(40, 2 * N + 2)


@dataclass(frozen=True, eq=False)
class VelocityBasis:
    """Legendre polynomials ``m_i = P_i`` tabulated at Gauss nodes.

    ``basis_values[i, q]`` is ``P_i(quad_nodes[q])``. ``wm`` and ``wvm`` are the
    weighted tables used to form ``<m g>`` and ``<v m g>`` as matrix products.
    """

    N: int
    quad_nodes: np.ndarray
    quad_weights: np.ndarray
    basis_values: np.ndarray
    V_measure: float = 2.0
    wm: np.ndarray = field(repr=False, default=None)
    wvm: np.ndarray = field(repr=False, default=None)

    @property
    def n_moments(self):
        return self.N + 1

    @property
    def quad_order(self):
        return self.quad_nodes.size


def build_basis(N, quad_order=None):
    """Tabulate the Legendre basis of degree ``N`` on a ``quad_order``-point Gauss rule.

    The rule integrates polynomials up to degree ``2 * quad_order - 1`` exactly.
    """
    N = int(N)
    if N < 0:
        raise ValueError(f"N must be >= 0, got {N}")
    if quad_order is None:
        quad_order = default_quad_order(N)
    quad_order = int(quad_order)
    if quad_order < N + 1:
        raise ValueError(
            f"quad_order={quad_order} cannot resolve moments up to degree {N}; need >= {N + 1}"
        )
    nodes, weights = np.polynomial.legendre.leggauss(quad_order)
    values = legendre_table(N, nodes)
    for arr in (nodes, weights, values):
        arr.setflags(write=False)
    wm = values * weights
    wvm = wm * nodes
    wm.setflags(write=False)
    wvm.setflags(write=False)
    return VelocityBasis(N, nodes, weights, values, 2.0, wm, wvm)


def eval_basis(basis, v):
    """``(P_0(v), ..., P_N(v))`` at a single velocity ``v`` in [-1, 1]."""
    v = float(v)
    if abs(v) > 1.0:
        raise ValueError(f"velocity {v} outside V = [-1, 1]")
    return legendre_table(basis.N, v)[:, 0]


def dual_argument(basis, alpha):
    """``alpha . m(v_q)`` at every quadrature node, shape ``(..., Q)``."""
    return np.asarray(alpha, dtype=float) @ basis.basis_values


def check_dual_argument(entropy, y, exponent_cap=DEFAULT_EXPONENT_CAP):
    """Raise if ``y`` leaves the dual domain (or the exponent cap for MB)."""
    if entropy.kind is EntropyKind.MAXWELL_BOLTZMANN:
        if np.size(y) == 0:
            return
        top = np.max(y)
        if not top <= exponent_cap:
            raise OverflowGuard(
                f"ansatz exponent {top:.6g} exceeds cap {exponent_cap:g}"
            )
        return
    ok = entropy.in_dual_domain(y)
    if not np.all(ok):
        raise DomainViolation(
            f"alpha . m leaves the dual domain {entropy.dual_domain} "
            f"at {np.size(ok) - np.count_nonzero(ok)} quadrature node(s)"
        )


def ansatz_density(entropy, basis, alpha, exponent_cap=DEFAULT_EXPONENT_CAP):
    """Ansatz ``G_alpha = eta_star_prime(alpha . m)`` at the quadrature nodes."""
    y = dual_argument(basis, alpha)
    check_dual_argument(entropy, y, exponent_cap)
    return entropy.eta_star_prime(y)


def moments_of_multiplier(entropy, basis, alpha, exponent_cap=DEFAULT_EXPONENT_CAP):
    """The moment map ``u_hat(alpha) = <m G_alpha>``."""
    G = ansatz_density(entropy, basis, alpha, exponent_cap)
    return G @ basis.wm.T


def weighted_gram(basis, weight):
    """``<m m^T weight>`` for weights of shape ``(..., Q)``; returns ``(..., n, n)``."""
    weight = np.asarray(weight, dtype=float)
    return np.matmul(basis.basis_values * weight[..., None, :], basis.wm.T)


def dual_hessian_kernel(entropy, basis, alpha, exponent_cap=DEFAULT_EXPONENT_CAP):
    """``<m m^T eta_star''(alpha . m)>``, the Hessian of ``<eta_star(alpha . m)>``."""
    y = dual_argument(basis, alpha)
    check_dual_argument(entropy, y, exponent_cap)
    H = weighted_gram(basis, entropy.eta_star_double_prime(y))
    # symmetric by construction up to summation order; make it exact
    return 0.5 * (H + np.swapaxes(H, -1, -2))


def dual_potential(entropy, basis, alpha, exponent_cap=DEFAULT_EXPONENT_CAP):
    """``<eta_star(alpha . m)>``; its gradient is ``u_hat(alpha)``."""
    y = dual_argument(basis, alpha)
    check_dual_argument(entropy, y, exponent_cap)
    return entropy.eta_star(y) @ basis.quad_weights


def kinetic_entropy(entropy, basis, alpha, exponent_cap=DEFAULT_EXPONENT_CAP):
    """``<eta(G_alpha)>``, the entropy of the ansatz."""
    y = dual_argument(basis, alpha)
    check_dual_argument(entropy, y, exponent_cap)
    return entropy.eta_of_ansatz(y) @ basis.quad_weights
