"""scikit-learn style front end to the moment closure.

:class:`EntropyClosure` maps moment vectors (rows of ``X``) to their
regularized multipliers with ``transform`` and back to ansatz moments with
``inverse_transform``, so the closure can sit in a ``Pipeline`` or be cloned
and grid-searched over ``gamma`` like any other transformer.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import closure
from .dual import SolverConfig, solve_dual_batch
from .entropy import get_entropy
from .kernel import build_basis, moments_of_multiplier


class EntropyClosure(TransformerMixin, BaseEstimator):
    """Entropy-based closure for Legendre moments on V = [-1, 1].

    Parameters
    ----------
    N : int
        Highest Legendre degree; inputs have ``N + 1`` columns.
    entropy : {"mb", "be", "burg"}
        Kinetic entropy.
    gamma : float
        Regularization parameter; 0 solves the original dual problem.
    quad_order : int, optional
        Velocity Gauss rule size, ``max(40, 2N + 2)`` by default.
    tau, tau_desired, ell_max, k_max : solver stopping parameters.
    sigma_s : float
        Scattering coefficient used by :meth:`source`.
    strict : bool
        Raise :class:`~kinetic_moments.exceptions.ClosureError` on a failed
        solve instead of returning NaN rows.

    Attributes
    ----------
    basis_ : VelocityBasis
    entropy_ : EntropyModel
    n_features_in_ : int
    last_report_ : BatchSolveReport
        Solver diagnostics from the most recent ``transform``.
    """

    def __init__(self, N=5, entropy="mb", gamma=0.0, quad_order=None, tau=1e-8,
                 tau_desired=1e-11, ell_max=10, k_max=200, sigma_s=0.0, strict=True):
        self.N = N
        self.entropy = entropy
        self.gamma = gamma
        self.quad_order = quad_order
        self.tau = tau
        self.tau_desired = tau_desired
        self.ell_max = ell_max
        self.k_max = k_max
        self.sigma_s = sigma_s
        self.strict = strict

    def fit(self, X=None, y=None):
        """Build the basis and solver; ``X`` is only checked for width."""
        self.entropy_ = get_entropy(self.entropy)
        self.basis_ = build_basis(self.N, self.quad_order)
        self.solver_ = SolverConfig(
            gamma=float(self.gamma), tau=self.tau, tau_desired=self.tau_desired,
            ell_max=self.ell_max, k_max=self.k_max,
        )
        self.context_ = closure.ClosureContext(self.entropy_, self.basis_, self.solver_, self.sigma_s)
        self.n_features_in_ = self.N + 1
        if X is not None:
            self._check(X)
        return self

    def _check(self, X):
        X = check_array(X, dtype=np.float64, ensure_all_finite=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return X

    def transform(self, X, warm_start=None):
        """Multipliers ``alpha_gamma(u)`` for each row ``u`` of ``X``."""
        check_is_fitted(self, "basis_")
        X = self._check(X)
        if self.gamma == 0 and np.any(X[:, 0] <= 0):
            raise ValueError("with gamma = 0 every row needs u_0 > 0")
        rep = solve_dual_batch(self.entropy_, self.basis_, X, self.solver_, warm_start)
        self.last_report_ = rep
        if rep.failed.size:
            if self.strict:
                raise closure.ClosureError(f"{rep.failed.size} dual solve(s) failed", rep.failed)
            alpha = rep.alpha.copy()
            alpha[rep.failed] = np.nan
            return alpha
        return rep.alpha

    def inverse_transform(self, A):
        """Ansatz moments ``u_hat(alpha)`` for each row ``alpha`` of ``A``."""
        check_is_fitted(self, "basis_")
        A = self._check(A)
        return moments_of_multiplier(self.entropy_, self.basis_, A)

    def project(self, X):
        """``u_hat(alpha_gamma(u))``, the realizable moments the closure actually uses."""
        return self.inverse_transform(self.transform(X))

    def flux(self, X):
        check_is_fitted(self, "basis_")
        return closure.flux(self.context_, self._check(X), self.gamma)

    def source(self, X):
        check_is_fitted(self, "basis_")
        return closure.source(self.context_, self._check(X), self.gamma)

    def entropy_density(self, X):
        """``h_gamma`` of each row."""
        check_is_fitted(self, "basis_")
        return closure.entropy_h(self.context_, self._check(X), self.gamma)

    def score(self, X, y=None):
        """Negative mean entropy, so larger is better as scikit-learn expects."""
        return -float(np.mean(self.entropy_density(X)))

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.requires_fit = True
        return tags
