"""Kinetic entropy functions and their Legendre duals.

Each model carries the entropy ``eta`` on ``(0, inf)``, its first two
derivatives, and the conjugate ``eta_star`` with derivatives on the dual
domain. ``eta_star_prime`` is the inverse of ``eta_prime``, so
``eta_star_prime(alpha . m)`` is the ansatz density.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np


class EntropyKind(str, Enum):
    MAXWELL_BOLTZMANN = "mb"
    BOSE_EINSTEIN = "be"
    BURG = "burg"


@dataclass(frozen=True)
class EntropyModel:
    """Base class. Subclasses are stateless; instances compare by kind."""

    kind = None
    dual_domain = (-np.inf, np.inf)  # open interval

    def eta(self, z):
        raise NotImplementedError

    def eta_prime(self, z):
        raise NotImplementedError

    def eta_double_prime(self, z):
        raise NotImplementedError

    def eta_star(self, y):
        raise NotImplementedError

    def eta_star_prime(self, y):
        raise NotImplementedError

    def eta_star_double_prime(self, y):
        raise NotImplementedError

    def in_dual_domain(self, y):
        lo, hi = self.dual_domain
        y = np.asarray(y)
        return (y > lo) & (y < hi)

    def eta_of_ansatz(self, y):
        """``eta(eta_star_prime(y))`` via the Legendre identity."""
        return y * self.eta_star_prime(y) - self.eta_star(y)

    def relative(self, ya, yb):
        """Pointwise Bregman divergence ``eta(G_a | G_b)`` from dual arguments.

        ``eta(G_a) - eta(G_b) - yb * (G_a - G_b)`` with ``G = eta_star_prime(y)``.
        """
        ga = self.eta_star_prime(ya)
        gb = self.eta_star_prime(yb)
        return self.eta_of_ansatz(ya) - self.eta_of_ansatz(yb) - yb * (ga - gb)


@dataclass(frozen=True)
class MaxwellBoltzmann(EntropyModel):
    kind = EntropyKind.MAXWELL_BOLTZMANN

    def eta(self, z):
        z = np.asarray(z, dtype=float)
        return z * np.log(z) - z

    def eta_prime(self, z):
        return np.log(z)

    def eta_double_prime(self, z):
        return 1.0 / np.asarray(z, dtype=float)

    def eta_star(self, y):
        return np.exp(y)

    eta_star_prime = eta_star
    eta_star_double_prime = eta_star

    def eta_of_ansatz(self, y):
        return np.exp(y) * (y - 1.0)

    def relative(self, ya, yb):
        # e^{yb} * (d e^d - e^d + 1) with d = ya - yb, arranged so that the
        # O(d^2) result does not cancel catastrophically when d is tiny.
        d = np.asarray(ya) - np.asarray(yb)
        em1 = np.expm1(d)
        return np.exp(yb) * (d * em1 - (em1 - d))


@dataclass(frozen=True)
class BoseEinstein(EntropyModel):
    kind = EntropyKind.BOSE_EINSTEIN
    dual_domain = (-np.inf, 0.0)

    def eta(self, z):
        z = np.asarray(z, dtype=float)
        return z * np.log(z) - (1.0 + z) * np.log1p(z)

    def eta_prime(self, z):
        z = np.asarray(z, dtype=float)
        return np.log(z) - np.log1p(z)

    def eta_double_prime(self, z):
        z = np.asarray(z, dtype=float)
        return 1.0 / (z * (1.0 + z))

    def eta_star(self, y):
        return -np.log(-np.expm1(y))

    def eta_star_prime(self, y):
        return 1.0 / np.expm1(-np.asarray(y, dtype=float))

    def eta_star_double_prime(self, y):
        y = np.asarray(y, dtype=float)
        em = np.expm1(-y)
        return np.exp(-y) / (em * em)


@dataclass(frozen=True)
class Burg(EntropyModel):
    kind = EntropyKind.BURG
    dual_domain = (-np.inf, 0.0)

    def eta(self, z):
        return -np.log(z)

    def eta_prime(self, z):
        return -1.0 / np.asarray(z, dtype=float)

    def eta_double_prime(self, z):
        z = np.asarray(z, dtype=float)
        return 1.0 / (z * z)

    def eta_star(self, y):
        return -1.0 - np.log(-np.asarray(y, dtype=float))

    def eta_star_prime(self, y):
        return -1.0 / np.asarray(y, dtype=float)

    def eta_star_double_prime(self, y):
        y = np.asarray(y, dtype=float)
        return 1.0 / (y * y)


_MODELS = {
    EntropyKind.MAXWELL_BOLTZMANN: MaxwellBoltzmann,
    EntropyKind.BOSE_EINSTEIN: BoseEinstein,
    EntropyKind.BURG: Burg,
}

_ALIASES = {
    "maxwellboltzmann": "mb",
    "maxwell-boltzmann": "mb",
    "boseeinstein": "be",
    "bose-einstein": "be",
}


def get_entropy(name):
    """Return an entropy model from a short name (``mb``, ``be``, ``burg``)."""
    if isinstance(name, EntropyModel):
        return name
    key = _ALIASES.get(str(name).lower(), str(name).lower())
    try:
        return _MODELS[EntropyKind(key)]()
    except ValueError:
        raise ValueError(f"unknown entropy {name!r}; expected mb, be or burg") from None
