"""Runge-Kutta discontinuous Galerkin solver for the slab moment system.

Solves ``u_t + f_gamma(u)_x = r_gamma(u)`` on ``X = [0, 1]`` with periodic
boundaries. Each cell carries a modal Legendre expansion of degree ``k`` per
moment component; interfaces use the local Lax-Friedrichs flux with
dissipation speed 1 (all characteristic speeds lie in [-1, 1]). Time stepping
is classical four-stage RK4 with no limiter.
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .closure import ClosureContext, close, relative_entropy_from_closed, entropy_from_closed, source_from_closed
from .dual import SolverConfig, Status
from .entropy import EntropyKind, get_entropy
from .exceptions import ClosureError, GridMismatch
from .kernel import build_basis, legendre_table

logger = logging.getLogger(__name__)

LLF_SPEED = 1.0
METRIC_SUBINTERVALS = 4
METRIC_POINTS = 8


@dataclass
class GridState:
    """Modal DG coefficients ``coefficients[cell, mode, component]`` at ``time``."""

    n_cells: int
    dg_degree: int
    coefficients: np.ndarray
    time: float = 0.0
    stats: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def width(self):
        return 1.0 / self.n_cells

    @property
    def n_moments(self):
        return self.coefficients.shape[-1]

    def mass(self):
        """Total zeroth moment ``int_X u_0 dx``."""
        return self.width * float(np.sum(self.coefficients[:, 0, 0]))

    def cell_averages(self):
        return self.coefficients[:, 0, :].copy()

    def evaluate(self, xi):
        """Values at reference points ``xi`` in [-1, 1] of every cell, ``(cells, len(xi), n)``."""
        P = legendre_table(self.dg_degree, xi)
        return np.einsum("jq,cjn->cqn", P, self.coefficients)

    def cell_centers(self):
        return (np.arange(self.n_cells) + 0.5) * self.width


@dataclass(frozen=True)
class RunConfig:
    N: int
    M0: float
    sigma_s: float = 1.0
    gamma: float = 0.0
    n_cells: int = 40
    dg_degree: int = 3
    cfl: float = 0.9
    final_time: float = 0.1
    solver: SolverConfig = field(default_factory=SolverConfig)
    entropy: str = "mb"
    quad_order: int = None
    source_form: str = "regularized"

    def __post_init__(self):
        if not self.final_time > 0:
            raise ValueError("final_time must be positive")
        if not 0 < self.cfl < 1:
            raise ValueError("cfl must lie in (0, 1)")
        if self.n_cells < 4:
            raise ValueError("need at least 4 cells")
        if self.dg_degree < 0 or self.N < 0:
            raise ValueError("N and dg_degree must be nonnegative")
        if not self.gamma >= 0:
            raise ValueError("gamma must be >= 0")

    def with_gamma(self, gamma):
        return replace(self, gamma=float(gamma))

    def context(self):
        return ClosureContext(
            get_entropy(self.entropy),
            build_basis(self.N, self.quad_order),
            self.solver,
            self.sigma_s,
            self.source_form,
        )

    def time_step(self):
        return self.cfl * (1.0 / self.n_cells) / (2 * self.dg_degree + 1)


class _Tables:
    """Reference-cell quadrature and Legendre tables for degree ``k``."""

    _cache = {}

    def __new__(cls, k):
        if k not in cls._cache:
            self = super().__new__(cls)
            xi, w = np.polynomial.legendre.leggauss(k + 1)
            self.k = k
            self.xi, self.w = xi, w
            self.P = legendre_table(k, xi)  # (k+1 modes, k+1 nodes)
            self.dP = np.stack(
                [np.polynomial.legendre.legval(xi, np.polynomial.legendre.legder(np.eye(k + 1)[j]))
                 for j in range(k + 1)]
            )
            self.sign = (-1.0) ** np.arange(k + 1)  # P_j(-1)
            self.inv_mass = 2 * np.arange(k + 1) + 1.0  # times 1/h or 1/2
            cls._cache[k] = self
        return cls._cache[k]


def initial_multiplier(M0, x, N):
    """Multiplier ``beta(x)`` of the smooth periodic test data.

    ``omega = M0 (1 + cos 2 pi x) / 2``, ``beta_1 = omega`` and ``beta_0`` makes
    the zeroth moment one, with limit ``-log 2`` where ``omega = 0``.
    """
    x = np.asarray(x, dtype=float)
    omega = 0.5 * M0 * (1.0 + np.cos(2.0 * np.pi * x))
    omega = np.maximum(omega, 0.0)
    beta = np.zeros(x.shape + (N + 1,))
    b0 = np.full(x.shape, -math.log(2.0))
    small = (omega > 0) & (omega < 1.0)
    large = omega >= 1.0
    b0[small] -= np.log(np.sinh(omega[small]) / omega[small])
    ol = omega[large]
    b0[large] = np.log(ol) - ol - np.log1p(-np.exp(-2.0 * ol))
    beta[..., 0] = b0
    if N >= 1:
        beta[..., 1] = omega
    return beta


def initial_moments(ctx, M0, x):
    """``u0(x) = <m exp(beta(x) . m)>`` at spatial points ``x``."""
    if ctx.entropy.kind is not EntropyKind.MAXWELL_BOLTZMANN:
        raise ValueError("the initial data are built from exponential ansatzes; use the MB entropy")
    beta = initial_multiplier(M0, x, ctx.basis.N)
    return np.exp(beta @ ctx.basis.basis_values) @ ctx.basis.wm.T


def build_initial_condition(ctx, M0, n_cells, dg_degree, projection_points=None):
    """L2-project the initial moments onto the DG space of ``n_cells`` cells."""
    if not M0 > 0:
        raise ValueError("M0 must be positive")
    if ctx.entropy.kind is not EntropyKind.MAXWELL_BOLTZMANN:
        raise ValueError("the initial data are built from exponential ansatzes; use the MB entropy")
    nq = projection_points or max(2 * dg_degree + 2, 8)
    xi, w = np.polynomial.legendre.leggauss(nq)
    h = 1.0 / n_cells
    x = (np.arange(n_cells)[:, None] + 0.5 * (1.0 + xi[None, :])) * h
    u = initial_moments(ctx, M0, x)  # (cells, nq, n)
    P = legendre_table(dg_degree, xi)
    coeffs = 0.5 * (2 * np.arange(dg_degree + 1) + 1.0)[None, :, None] * np.einsum(
        "q,jq,cqn->cjn", w, P, u
    )
    return GridState(n_cells, dg_degree, coeffs, 0.0)


@dataclass
class RunStats:
    dual_iterations: int = 0
    dual_solves: int = 0
    worst_residual: float = 0.0
    acceptable_only: int = 0
    steps: int = 0

    def add(self, closed):
        self.dual_iterations += int(np.sum(closed.iterations))
        self.dual_solves += closed.iterations.size
        if closed.residual.size:
            self.worst_residual = max(self.worst_residual, float(np.max(closed.residual)))
        self.acceptable_only += int(np.count_nonzero(closed.status == Status.AcceptableTolerance))

    def as_dict(self):
        return dict(self.__dict__)


class WarmStart:
    """Per-point multiplier cache reused between RK stages of one run."""

    def __init__(self):
        self.alpha = None

    def get(self, n_points):
        if self.alpha is not None and self.alpha.shape[0] == n_points:
            return self.alpha
        return None

    def put(self, alpha):
        self.alpha = alpha


def _rhs(ctx, state, coeffs, gamma, warm=None, stats=None, where=None):
    T = _Tables(state.dg_degree)
    C, kp1, n = coeffs.shape
    h = 1.0 / C
    u_vol = np.einsum("jq,cjn->cqn", T.P, coeffs)
    u_right = coeffs.sum(axis=1)  # trace at xi = +1
    u_left = np.einsum("j,cjn->cn", T.sign, coeffs)  # trace at xi = -1
    pts = np.concatenate([u_vol.reshape(-1, n), u_right, u_left])
    try:
        closed = close(ctx, pts, gamma, None if warm is None else warm.get(len(pts)))
    except ClosureError as err:
        raise _locate(err, C, kp1, gamma, where) from None
    if warm is not None:
        warm.put(closed.alpha)
    if stats is not None:
        stats.add(closed)

    f = closed.flux(ctx.basis)
    nv = C * kp1
    f_vol = f[:nv].reshape(C, kp1, n)
    f_right, f_left = f[nv : nv + C], f[nv + C :]

    # interface i+1/2: left state is cell i's right trace, right state is
    # cell i+1's left trace (periodic)
    uL, uR = u_right, np.roll(u_left, -1, axis=0)
    fL, fR = f_right, np.roll(f_left, -1, axis=0)
    fhat = 0.5 * (fL + fR) - 0.5 * LLF_SPEED * (uR - uL)
    fhat_left = np.roll(fhat, 1, axis=0)

    vol = np.einsum("q,jq,cqn->cjn", T.w, T.dP, f_vol)
    surf = fhat[:, None, :] - T.sign[None, :, None] * fhat_left[:, None, :]
    rhs = (T.inv_mass[None, :, None] / h) * (vol - surf)

    if ctx.sigma_s > 0:
        if ctx.source_form == "original" or gamma == 0.0:
            r = -ctx.sigma_s * u_vol
            r[..., 0] = 0.0
        else:
            r = source_from_closed(ctx, _slice(closed, nv)).reshape(C, kp1, n)
        rhs += 0.5 * T.inv_mass[None, :, None] * np.einsum("q,jq,cqn->cjn", T.w, T.P, r)
    return rhs


def _slice(closed, stop):
    return type(closed)(
        closed.u[:stop], closed.alpha[:stop], closed.y[:stop], closed.G[:stop],
        closed.gamma, closed.iterations[:stop], closed.residual[:stop], closed.status[:stop],
    )


def _locate(err, C, kp1, gamma, where):
    nv = C * kp1
    cells = sorted({p // kp1 if p < nv else (p - nv) % C for p in err.points})
    info = dict(where or {})
    info.update(gamma=gamma, cells=cells)
    msg = f"{err} in cell(s) {cells[:10]}" + "".join(f", {k}={v}" for k, v in (where or {}).items())
    return ClosureError(msg, err.points, info)


def semidiscrete_rhs(ctx, state, gamma, warm=None):
    """DG tendency ``d coefficients / dt`` for ``state``."""
    return _rhs(ctx, state, state.coefficients, gamma, warm, where={"time": state.time})


def rk4_step(ctx, state, dt, gamma, warm=None, stats=None):
    """Advance ``state`` by ``dt`` with the classical fourth-order Runge-Kutta method."""
    c0 = state.coefficients
    t = state.time

    def stage(coeffs, i):
        return _rhs(ctx, state, coeffs, gamma, warm, stats, where={"time": t, "stage": i})

    k1 = stage(c0, 1)
    k2 = stage(c0 + 0.5 * dt * k1, 2)
    k3 = stage(c0 + 0.5 * dt * k2, 3)
    k4 = stage(c0 + dt * k3, 4)
    c1 = c0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return GridState(state.n_cells, state.dg_degree, c1, t + dt, state.stats)


def step_sizes(final_time, dt):
    """Fixed steps of ``dt`` with the last one shortened to land on ``final_time``."""
    n = max(1, math.ceil(final_time / dt - 1e-9))
    steps = [dt] * (n - 1)
    steps.append(final_time - dt * (n - 1))
    return steps


def evolve(ctx, state, final_time, dt, gamma, callback=None):
    """Run RK4 from ``state`` to ``final_time``; ``callback(state)`` after each step."""
    stats = RunStats()
    warm = WarmStart()
    for h in step_sizes(final_time - state.time, dt):
        state = rk4_step(ctx, state, h, gamma, warm, stats)
        stats.steps += 1
        if callback is not None:
            callback(state)
    state.stats = stats.as_dict()
    return state


def run_simulation(ctx, cfg, callback=None):
    """Evolve the initial data of ``cfg`` to ``cfg.final_time``.

    The returned state's ``stats`` hold the total dual-solver iterations, the
    worst accepted residual and the number of solves that stopped at the
    acceptable (not desired) tolerance.
    """
    state = build_initial_condition(ctx, cfg.M0, cfg.n_cells, cfg.dg_degree)
    state = evolve(ctx, state, cfg.final_time, cfg.time_step(), cfg.gamma, callback)
    logger.info(
        "gamma=%g finished: %d steps, %d dual iterations, worst residual %.2e",
        cfg.gamma, state.stats["steps"], state.stats["dual_iterations"], state.stats["worst_residual"],
    )
    return state


def metric_rule():
    """Reference-cell points and weights: 8-point Gauss on each of 4 subintervals."""
    xi, w = np.polynomial.legendre.leggauss(METRIC_POINTS)
    s = METRIC_SUBINTERVALS
    left = -1.0 + 2.0 * np.arange(s) / s
    pts = (left[:, None] + (xi[None, :] + 1.0) / s).ravel()
    wts = np.tile(w / s, s)
    return pts, wts


@dataclass(frozen=True)
class Metrics:
    H_gamma: float
    L2: float
    Linf: float


def _check_same_grid(a, b):
    if (a.n_cells, a.dg_degree, a.coefficients.shape) != (b.n_cells, b.dg_degree, b.coefficients.shape):
        raise GridMismatch("states live on different grids")
    if abs(a.time - b.time) > 1e-12 * max(1.0, abs(a.time)):
        raise GridMismatch(f"states are at different times {a.time} and {b.time}")


def error_metrics(ctx, state_reg, state_ref, gamma):
    """Relative entropy, L2 and max-norm distance between two runs.

    ``H_gamma`` integrates the pointwise relative entropy ``h_gamma(u_reg | u_ref)``
    over X; ``L2`` is the square root of the integrated squared Euclidean
    distance and ``Linf`` the largest component difference over the same points.
    """
    _check_same_grid(state_reg, state_ref)
    xi, w = metric_rule()
    h = state_reg.width
    ur = state_reg.evaluate(xi)
    uu = state_ref.evaluate(xi)
    n = ur.shape[-1]
    diff = ur - uu
    wx = 0.5 * h * w  # dx = h/2 dxi
    L2 = math.sqrt(float(np.sum(np.sum(diff * diff, axis=-1) * wx[None, :])))
    Linf = float(np.max(np.abs(diff))) if diff.size else 0.0
    reg = close(ctx, ur.reshape(-1, n), gamma)
    ref = close(ctx, uu.reshape(-1, n), gamma)
    rel = relative_entropy_from_closed(ctx, reg, ref).reshape(ur.shape[:2])
    H = float(np.sum(rel * wx[None, :]))
    return Metrics(H, L2, Linf)


def entropy_integral(ctx, state, gamma):
    """``int_X h_gamma(u(x)) dx`` with the metric quadrature."""
    xi, w = metric_rule()
    u = state.evaluate(xi)
    c = close(ctx, u.reshape(-1, u.shape[-1]), gamma)
    hv = entropy_from_closed(ctx, c).reshape(u.shape[:2])
    return float(np.sum(hv * (0.5 * state.width * w)[None, :]))


def observed_order(values):
    """Observed orders between consecutive ``(gamma, metric)`` pairs.

    ``nu = log(m1 / m2) / log(g1 / g2)``; a pair with a nonpositive metric
    gets ``None``.
    """
    values = [(float(g), float(m)) for g, m in values]
    for (g1, _), (g2, _) in zip(values, values[1:]):
        if not g1 > g2:
            raise ValueError("gamma values must be strictly decreasing")
    out = []
    for (g1, m1), (g2, m2) in zip(values, values[1:]):
        if m1 > 0 and m2 > 0 and np.isfinite(m1) and np.isfinite(m2):
            out.append(math.log(m1 / m2) / math.log(g1 / g2))
        else:
            out.append(None)
    return out


def write_checkpoint(state, path, meta=None):
    """Write ``state`` as CSV rows ``cell,mode,component,value`` after ``#`` metadata lines."""
    header = {
        "n_cells": state.n_cells,
        "dg_degree": state.dg_degree,
        "n_moments": state.n_moments,
        "time": repr(float(state.time)),
    }
    header.update(meta or {})
    C, K, n = state.coefficients.shape
    with open(path, "w") as fh:
        for k, v in header.items():
            fh.write(f"# {k}={v}\n")
        fh.write("cell,mode,component,value\n")
        for c in range(C):
            for j in range(K):
                for i in range(n):
                    fh.write(f"{c},{j},{i},{float(state.coefficients[c, j, i])!r}\n")


def read_checkpoint(path):
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k.strip()] = v.strip()
            elif line.startswith("cell,"):
                continue
            elif line.strip():
                c, j, i, v = line.split(",")
                rows.append((int(c), int(j), int(i), float(v)))
    C, K, n = int(meta["n_cells"]), int(meta["dg_degree"]) + 1, int(meta["n_moments"])
    coeffs = np.zeros((C, K, n))
    for c, j, i, v in rows:
        coeffs[c, j, i] = v
    return GridState(C, K - 1, coeffs, float(meta["time"])), meta
