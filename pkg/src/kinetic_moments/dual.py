"""Newton solver for the (regularized) entropy dual problem.

The multiplier ``alpha_gamma(u)`` maximizes

    alpha . u - <eta_star(alpha . m)> - gamma / 2 * |alpha|^2,

so it is the zero of ``u_hat(alpha) + gamma * alpha - u``. The solver runs
Newton's method with Armijo backtracking and the two-tier stopping rule: a
solve returns as soon as the residual drops below ``tau_desired``; once it is
below ``tau`` it gets a bounded number of extra iterations to get there.

Everything is vectorized over a batch of moment vectors, since a transport
step needs a few hundred independent solves at once.
"""
import logging
from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from .kernel import (
    DEFAULT_EXPONENT_CAP,
    check_dual_argument,
    dual_argument,
    dual_potential,
    moments_of_multiplier,
    weighted_gram,
)
from .entropy import EntropyKind

logger = logging.getLogger(__name__)


class Status(IntEnum):
    DesiredTolerance = 0
    AcceptableTolerance = 1
    Failed = 2


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the dual Newton solver.

    ``ell_max`` is the number of extra iterations granted after the residual
    first drops below ``tau``. ``ls_shrink`` and ``ls_slope`` are the
    backtracking factor and Armijo constant; steps shorter than
    ``ls_min_step`` are not tried.
    """

    gamma: float = 0.0
    tau: float = 1e-8
    tau_desired: float = 1e-11
    ell_max: int = 10
    k_max: int = 200
    ls_shrink: float = 0.5
    ls_slope: float = 1e-4
    ls_min_step: float = 2.0**-40
    exponent_cap: float = DEFAULT_EXPONENT_CAP

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not 0 < self.tau_desired < self.tau:
            raise ValueError(
                f"need 0 < tau_desired < tau, got {self.tau_desired} and {self.tau}"
            )
        if self.ell_max < 0 or self.k_max < 0:
            raise ValueError("ell_max and k_max must be nonnegative")
        if not 0 < self.ls_shrink < 1:
            raise ValueError(f"ls_shrink must lie in (0, 1), got {self.ls_shrink}")
        if not 0 < self.ls_slope <= 0.5:
            raise ValueError(f"ls_slope must lie in (0, 0.5], got {self.ls_slope}")

    def with_gamma(self, gamma):
        return replace(self, gamma=float(gamma))


@dataclass
class DualSolveReport:
    alpha: np.ndarray
    iterations: int
    final_residual: float
    status: Status

    @property
    def converged(self):
        return self.status is not Status.Failed


@dataclass
class BatchSolveReport:
    """Per-point results of :func:`solve_dual_batch`, one row per moment vector."""

    alpha: np.ndarray
    iterations: np.ndarray
    residual: np.ndarray
    status: np.ndarray

    def __len__(self):
        return len(self.status)

    def __getitem__(self, i):
        return DualSolveReport(
            self.alpha[i].copy(),
            int(self.iterations[i]),
            float(self.residual[i]),
            Status(int(self.status[i])),
        )

    @property
    def failed(self):
        return np.flatnonzero(self.status == Status.Failed)


def dual_objective(entropy, basis, alpha, u, gamma):
    """The maximized dual functional ``alpha.u - <eta_star(alpha.m)> - gamma/2 |alpha|^2``."""
    alpha = np.asarray(alpha, dtype=float)
    u = np.asarray(u, dtype=float)
    return (
        np.sum(alpha * u, axis=-1)
        - dual_potential(entropy, basis, alpha)
        - 0.5 * gamma * np.sum(alpha * alpha, axis=-1)
    )


def dual_gradient(entropy, basis, alpha, u, gamma):
    """Gradient of :func:`dual_objective`: ``u - u_hat(alpha) - gamma * alpha``."""
    alpha = np.asarray(alpha, dtype=float)
    return np.asarray(u, dtype=float) - moments_of_multiplier(entropy, basis, alpha) - gamma * alpha


def default_initial_guess(entropy, basis, u):
    """Isotropic multiplier reproducing ``u_0``, or ``(-1, 0, ..., 0)`` if ``u_0 <= 0``."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    alpha = np.zeros_like(u)
    u0 = u[:, 0]
    pos = u0 > 0
    alpha[:, 0] = -1.0
    with np.errstate(divide="ignore"):
        alpha[pos, 0] = entropy.eta_prime(u0[pos] / basis.V_measure)
    return alpha


def _feasible_rows(entropy, y, cap):
    if entropy.kind is EntropyKind.MAXWELL_BOLTZMANN:
        return np.max(y, axis=-1) <= cap
    return np.all(entropy.in_dual_domain(y), axis=-1)


def _newton_directions(H, r):
    """Solve ``H d = -r`` row-wise by Cholesky, with the documented fallbacks."""
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return np.stack([_newton_direction_one(h, g) for h, g in zip(H, r)])
    z = np.linalg.solve(L, -r[..., None])
    return np.linalg.solve(np.swapaxes(L, -1, -2), z)[..., 0]


def _newton_direction_one(H, r):
    for shift in (0.0, 1e-12 * np.trace(H)):
        try:
            L = np.linalg.cholesky(H + shift * np.eye(len(H)))
        except np.linalg.LinAlgError:
            continue
        return np.linalg.solve(L.T, np.linalg.solve(L, -r))
    logger.debug("Hessian not numerically SPD; taking a gradient step")
    return -r


def solve_dual_batch(entropy, basis, U, config, warm_start=None):
    """Solve the dual problem for every row of ``U`` (shape ``(P, N + 1)``).

    Failed solves are reported in the returned status array, never raised.
    With ``gamma == 0`` a row with ``u_0 <= 0`` is not realizable and is marked
    failed without iterating.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    P, n = U.shape
    if n != basis.n_moments:
        raise ValueError(f"moment vectors have length {n}, basis expects {basis.n_moments}")
    gamma = float(config.gamma)
    cap = config.exponent_cap
    tau, tau_d = config.tau, config.tau_desired

    alpha = default_initial_guess(entropy, basis, U)
    if warm_start is not None:
        warm = np.broadcast_to(np.asarray(warm_start, dtype=float), U.shape)
        usable = np.all(np.isfinite(warm), axis=-1)
        usable &= _feasible_rows(entropy, dual_argument(basis, np.where(usable[:, None], warm, 0.0)), cap)
        alpha[usable] = warm[usable]

    iterations = np.zeros(P, dtype=int)
    residual = np.full(P, np.inf)
    status = np.full(P, int(Status.Failed))

    active = np.arange(P)
    if gamma == 0.0:
        active = active[U[:, 0] > 0]

    k = np.zeros(active.size, dtype=int)
    ell = np.zeros(active.size, dtype=int)
    flag = np.zeros(active.size, dtype=bool)
    stuck = np.zeros(active.size, dtype=bool)
    a = alpha[active]
    u = U[active]
    y = dual_argument(basis, a)
    with np.errstate(over="ignore", invalid="ignore"):
        G = entropy.eta_star_prime(y)
        r = G @ basis.wm.T + gamma * a - u
        nr = np.linalg.norm(r, axis=-1)
    nr[~np.isfinite(nr)] = np.inf

    while active.size:
        desired = nr < tau_d
        acceptable = (nr < tau) & (ell > config.ell_max)
        out_of_budget = k >= config.k_max
        finished = desired | acceptable | out_of_budget | stuck
        flag |= nr < tau

        if finished.any():
            idx = active[finished]
            alpha[idx] = a[finished]
            iterations[idx] = k[finished]
            residual[idx] = nr[finished]
            st = np.where(nr[finished] < tau, int(Status.AcceptableTolerance), int(Status.Failed))
            st[nr[finished] < tau_d] = int(Status.DesiredTolerance)
            status[idx] = st
            keep = ~finished
            active, k, ell, flag, stuck = active[keep], k[keep], ell[keep], flag[keep], stuck[keep]
            a, u, y, G, r, nr = a[keep], u[keep], y[keep], G[keep], r[keep], nr[keep]
            if not active.size:
                break

        H = weighted_gram(basis, entropy.eta_star_double_prime(y))
        H = 0.5 * (H + np.swapaxes(H, -1, -2))
        if gamma:
            H[:, range(n), range(n)] += gamma
        d = _newton_directions(H, r)

        a_new, y_new, G_new, r_new, nr_new, stalled = _backtrack(
            entropy, basis, config, a, u, y, G, r, nr, d
        )
        a, y, G, r = a_new, y_new, G_new, r_new
        k += 1
        ell += flag
        # No acceptable step: further iterations would repeat this one until
        # k_max, so settle now with the current residual.
        stuck = stalled
        nr = nr_new

    return BatchSolveReport(alpha, iterations, residual, status)


def _psi(entropy, basis, a, u, y, gamma):
    """Minimized form of the dual objective (its negative)."""
    return entropy.eta_star(y) @ basis.quad_weights + 0.5 * gamma * np.sum(a * a, -1) - np.sum(a * u, -1)


def _backtrack(entropy, basis, config, a, u, y, G, r, nr, d):
    gamma = float(config.gamma)
    cap = config.exponent_cap
    psi0 = _psi(entropy, basis, a, u, y, gamma)
    slope = np.sum(r * d, axis=-1)  # directional derivative of psi, < 0
    # Near the optimum the decrease in psi drops below its rounding error, so
    # a step is also accepted when psi does not grow beyond that error and the
    # residual strictly decreases.
    slack = 1e-13 * (1.0 + np.abs(psi0))

    a_out, y_out, G_out, r_out, nr_out = a.copy(), y.copy(), G.copy(), r.copy(), nr.copy()
    stalled = np.zeros(len(a), dtype=bool)
    pending = np.arange(len(a))
    step = 1.0
    while pending.size:
        if step < config.ls_min_step:
            stalled[pending] = True
            break
        at = a[pending] + step * d[pending]
        yt = dual_argument(basis, at)
        ok = _feasible_rows(entropy, yt, cap)
        psi_t = np.full(pending.size, np.inf)
        rt = np.full((pending.size, a.shape[1]), np.inf)
        Gt = np.zeros_like(yt)
        if ok.any():
            with np.errstate(over="ignore", invalid="ignore"):
                Gt[ok] = entropy.eta_star_prime(yt[ok])
                psi_t[ok] = _psi(entropy, basis, at[ok], u[pending][ok], yt[ok], gamma)
                rt[ok] = Gt[ok] @ basis.wm.T + gamma * at[ok] - u[pending][ok]
        with np.errstate(over="ignore", invalid="ignore"):
            nrt = np.linalg.norm(rt, axis=-1)
        armijo = psi_t <= psi0[pending] + config.ls_slope * step * slope[pending]
        roundoff = (psi_t - psi0[pending] <= slack[pending]) & (nrt < nr[pending])
        accept = ok & (armijo | roundoff)
        if accept.any():
            idx = pending[accept]
            a_out[idx], y_out[idx], G_out[idx] = at[accept], yt[accept], Gt[accept]
            r_out[idx], nr_out[idx] = rt[accept], nrt[accept]
        pending = pending[~accept]
        step *= config.ls_shrink
    return a_out, y_out, G_out, r_out, nr_out, stalled


def solve_dual(entropy, basis, u, config, warm_start=None):
    """Solve for the multiplier of a single moment vector ``u``."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 1:
        raise ValueError("solve_dual takes one moment vector; use solve_dual_batch for stacks")
    if config.gamma == 0 and not u[0] > 0:
        raise ValueError("with gamma = 0 the moment vector must be realizable (u_0 > 0)")
    return solve_dual_batch(entropy, basis, u[None], config, warm_start)[0]


def solve_dual_at_zero(entropy, basis, gamma, config=None):
    """Regularized multiplier of the zero moment vector, ``alpha_gamma(0)``.

    Only the zeroth component is nonzero; it solves
    ``|V| eta_star'(a) + gamma a = 0``.
    """
    if not gamma > 0:
        raise ValueError("the zero vector is only admissible for gamma > 0")
    config = (config or SolverConfig()).with_gamma(gamma)
    return solve_dual(entropy, basis, np.zeros(basis.n_moments), config)


def check_multiplier(entropy, basis, alpha, exponent_cap=DEFAULT_EXPONENT_CAP):
    check_dual_argument(entropy, dual_argument(basis, alpha), exponent_cap)
