"""Moment-level closure quantities of the (regularized) entropy-based method.

Every quantity is evaluated from the multiplier ``alpha_gamma(u)``; ``gamma = 0``
gives the original closure. Functions accept one moment vector or a stack
``(..., N + 1)`` and return matching leading dimensions.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .dual import SolverConfig, solve_dual_batch, Status
from .exceptions import ClosureError
from .kernel import dual_argument, kinetic_entropy, weighted_gram

logger = logging.getLogger(__name__)

SOURCE_FORMS = ("regularized", "original")
RELATIVE_ENTROPY_ROUNDOFF = 1e-12


@dataclass(frozen=True)
class ClosureContext:
    """Entropy, basis, solver settings and slab scattering strength.

    ``source_form="regularized"`` evaluates the scattering term on the moments
    of the regularized ansatz, ``sigma_s R u_hat(alpha_gamma(u))``;
    ``"original"`` uses ``sigma_s R u``. The two agree at ``gamma = 0``.
    """

    entropy: object
    basis: object
    solver: SolverConfig = field(default_factory=SolverConfig)
    sigma_s: float = 0.0
    source_form: str = "regularized"

    def __post_init__(self):
        if not self.sigma_s >= 0:
            raise ValueError(f"sigma_s must be >= 0, got {self.sigma_s}")
        if self.source_form not in SOURCE_FORMS:
            raise ValueError(f"source_form must be one of {SOURCE_FORMS}")

    @property
    def R_matrix(self):
        d = -np.ones(self.basis.n_moments)
        d[0] = 0.0
        return np.diag(d)


@dataclass
class Closed:
    """Multipliers and ansatz values for a batch of moment vectors."""

    u: np.ndarray
    alpha: np.ndarray
    y: np.ndarray  # alpha . m at the velocity nodes
    G: np.ndarray
    gamma: float
    iterations: np.ndarray
    residual: np.ndarray
    status: np.ndarray

    def moments(self, basis):
        return self.G @ basis.wm.T

    def flux(self, basis):
        return self.G @ basis.wvm.T


def close(ctx, U, gamma, warm_start=None, raise_on_failure=True):
    """Solve the dual problem for each row of ``U`` and tabulate the ansatz.

    ``U`` has shape ``(P, N + 1)``. Raises :class:`ClosureError` naming the
    failed rows unless ``raise_on_failure`` is false.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    config = ctx.solver.with_gamma(gamma)
    rep = solve_dual_batch(ctx.entropy, ctx.basis, U, config, warm_start)
    failed = rep.failed
    if failed.size and raise_on_failure:
        raise ClosureError(
            f"{failed.size} dual solve(s) failed at gamma={gamma:g} "
            f"(worst residual {np.max(rep.residual[failed]):.3e})",
            points=failed,
        )
    y = dual_argument(ctx.basis, rep.alpha)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        G = ctx.entropy.eta_star_prime(y)
    return Closed(U, rep.alpha, y, G, float(gamma), rep.iterations, rep.residual, rep.status)


def _batched(fn):
    """Lift ``fn(ctx, U(P, n), gamma) -> (P, ...)`` to arbitrary leading shape."""

    def wrapper(ctx, u, gamma=0.0, **kw):
        u = np.asarray(u, dtype=float)
        lead = u.shape[:-1]
        out = fn(ctx, u.reshape(-1, u.shape[-1]), gamma, **kw)
        return out.reshape(lead + out.shape[1:])

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def multiplier(ctx, u, gamma=0.0, warm_start=None):
    """``alpha_gamma(u)``; raises :class:`ClosureError` if the solve fails."""
    u = np.asarray(u, dtype=float)
    c = close(ctx, u.reshape(-1, u.shape[-1]), gamma, warm_start)
    return c.alpha.reshape(u.shape)


@_batched
def flux(ctx, U, gamma):
    """Regularized flux ``f_gamma(u) = <v m G>``."""
    return close(ctx, U, gamma).flux(ctx.basis)


def source_from_closed(ctx, closed):
    """Slab scattering term for an already closed batch."""
    base = closed.moments(ctx.basis) if ctx.source_form == "regularized" else closed.u
    out = -ctx.sigma_s * base
    out[:, 0] = 0.0
    return out


@_batched
def source(ctx, U, gamma):
    """Scattering term ``sigma_s R u_hat(alpha_gamma(u))`` (or ``sigma_s R u``)."""
    if ctx.sigma_s == 0.0:
        return np.zeros_like(U)
    if ctx.source_form == "original" or gamma == 0.0:
        out = -ctx.sigma_s * U
        out[:, 0] = 0.0
        return out
    return source_from_closed(ctx, close(ctx, U, gamma))


def entropy_from_closed(ctx, closed):
    h = kinetic_entropy(ctx.entropy, ctx.basis, closed.alpha, np.inf)
    if closed.gamma > 0:
        gap = closed.moments(ctx.basis) - closed.u
        h = h + np.sum(gap * gap, axis=-1) / (2.0 * closed.gamma)
    return h


@_batched
def entropy_h(ctx, U, gamma):
    """Entropy ``h_gamma(u) = <eta(G)> + |<m G> - u|^2 / (2 gamma)``."""
    return entropy_from_closed(ctx, close(ctx, U, gamma))


@_batched
def entropy_h_multiplier_form(ctx, U, gamma):
    """``h(u_hat(alpha)) + gamma/2 |alpha|^2``; equal to :func:`entropy_h` at the solution."""
    c = close(ctx, U, gamma)
    h = kinetic_entropy(ctx.entropy, ctx.basis, c.alpha, np.inf)
    return h + 0.5 * gamma * np.sum(c.alpha * c.alpha, axis=-1)


@_batched
def entropy_flux_j(ctx, U, gamma):
    """Entropy flux ``j_gamma(u) = <v eta(G)>``."""
    c = close(ctx, U, gamma)
    eta_G = ctx.entropy.eta_of_ansatz(c.y)
    return eta_G @ (ctx.basis.quad_weights * ctx.basis.quad_nodes)


def relative_entropy_from_closed(ctx, reg, ref):
    """Kinetic form of ``h_gamma(u_reg | u_ref)`` for two closed batches."""
    if reg.gamma != ref.gamma:
        raise ValueError("both batches must be closed with the same gamma")
    pointwise = ctx.entropy.relative(reg.y, ref.y)
    dalpha = reg.alpha - ref.alpha
    val = pointwise @ ctx.basis.quad_weights + 0.5 * reg.gamma * np.sum(dalpha * dalpha, axis=-1)
    neg = val < 0
    if neg.any():
        worst = float(np.min(val))
        if worst < -RELATIVE_ENTROPY_ROUNDOFF:
            raise ClosureError(
                f"relative entropy {worst:.3e} is negative beyond roundoff",
                points=np.flatnonzero(val < -RELATIVE_ENTROPY_ROUNDOFF),
            )
        logger.debug("clamping %d negative relative entropies (min %.3e)", neg.sum(), worst)
        val = np.where(neg, 0.0, val)
    return val


def relative_entropy(ctx, u_reg, u_ref, gamma=0.0):
    """Relative entropy ``h_gamma(u_reg | u_ref)`` from the kinetic Bregman form.

    ``<eta(G_a | G_b)> + gamma/2 |a - b|^2`` with ``a, b`` the multipliers of
    ``u_reg`` and ``u_ref``. This form is nonnegative term by term, so solver
    error cannot make it negative.
    """
    u_reg = np.asarray(u_reg, dtype=float)
    u_ref = np.asarray(u_ref, dtype=float)
    u_reg, u_ref = np.broadcast_arrays(u_reg, u_ref)
    lead = u_reg.shape[:-1]
    n = u_reg.shape[-1]
    reg = close(ctx, u_reg.reshape(-1, n), gamma)
    ref = close(ctx, u_ref.reshape(-1, n), gamma)
    return relative_entropy_from_closed(ctx, reg, ref).reshape(lead)


def relative_entropy_moment_form(ctx, u_reg, u_ref, gamma=0.0):
    """``h_gamma(u_reg) - h_gamma(u_ref) - alpha_gamma(u_ref) . (u_reg - u_ref)``."""
    u_reg = np.asarray(u_reg, dtype=float)
    u_ref = np.asarray(u_ref, dtype=float)
    a_ref = multiplier(ctx, u_ref, gamma)
    return (
        entropy_h(ctx, u_reg, gamma)
        - entropy_h(ctx, u_ref, gamma)
        - np.sum(a_ref * (u_reg - u_ref), axis=-1)
    )


@_batched
def flux_jacobian(ctx, U, gamma):
    """``f_gamma'(u) = <v m m^T eta_star''> (<m m^T eta_star''> + gamma I)^{-1}``."""
    c = close(ctx, U, gamma)
    w = ctx.entropy.eta_star_double_prime(c.y)
    A = weighted_gram(ctx.basis, w * ctx.basis.quad_nodes)
    H = weighted_gram(ctx.basis, w)
    n = H.shape[-1]
    H[:, range(n), range(n)] += gamma
    # H is symmetric, so A H^{-1} = (H^{-1} A^T)^T
    return np.swapaxes(np.linalg.solve(H, np.swapaxes(A, -1, -2)), -1, -2)


@_batched
def moment_projection_jacobian(ctx, U, gamma):
    """Jacobian of ``u -> u_hat(alpha_gamma(u))``, i.e. ``H (H + gamma I)^{-1}``."""
    c = close(ctx, U, gamma)
    H = weighted_gram(ctx.basis, ctx.entropy.eta_star_double_prime(c.y))
    Hg = H.copy()
    n = H.shape[-1]
    Hg[:, range(n), range(n)] += gamma
    return np.swapaxes(np.linalg.solve(Hg, np.swapaxes(H, -1, -2)), -1, -2)


@dataclass(frozen=True)
class Realizability:
    realizable: bool
    multiplier_norm: float = None


def realizability_probe(ctx, u):
    """Try an unregularized dual solve; report success and ``|alpha(u)|``."""
    u = np.asarray(u, dtype=float)
    # |u_i| <= u_0 holds for every realizable vector since |m_i| <= 1
    if not u[0] > 0 or np.any(np.abs(u[1:]) > u[0]):
        return Realizability(False)
    rep = solve_dual_batch(ctx.entropy, ctx.basis, u[None], ctx.solver.with_gamma(0.0))[0]
    if rep.status is Status.Failed:
        return Realizability(False)
    return Realizability(True, float(np.linalg.norm(rep.alpha)))
