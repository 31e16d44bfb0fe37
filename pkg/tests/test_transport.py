import math

import numpy as np
import pytest

from kinetic_moments import (
    ClosureContext,
    ClosureError,
    GridMismatch,
    GridState,
    RunConfig,
    build_basis,
    build_initial_condition,
    error_metrics,
    get_entropy,
    observed_order,
    rk4_step,
    run_simulation,
    semidiscrete_rhs,
)
from kinetic_moments.closure import flux_jacobian
from kinetic_moments.kernel import legendre_table
from kinetic_moments.transport import (
    entropy_integral,
    evolve,
    initial_moments,
    read_checkpoint,
    step_sizes,
    write_checkpoint,
)

LN2 = math.log(2.0)


def context(N, sigma_s=1.0, **kw):
    return ClosureContext(get_entropy("mb"), build_basis(N), sigma_s=sigma_s, **kw)


def project(fun, n_cells, k, n):
    """L2 projection of ``fun(x) -> (..., n)`` onto degree-``k`` DG with ``n_cells`` cells."""
    xi, w = np.polynomial.legendre.leggauss(12)
    h = 1.0 / n_cells
    x = (np.arange(n_cells)[:, None] + 0.5 * (1 + xi)) * h
    P = legendre_table(k, xi)
    c = 0.5 * (2 * np.arange(k + 1) + 1.0)[None, :, None] * np.einsum("q,jq,cqn->cjn", w, P, fun(x))
    return GridState(n_cells, k, c)


def sample(state, x):
    """Point values of the DG solution at physical points ``x``."""
    cell = np.minimum((x * state.n_cells).astype(int), state.n_cells - 1)
    xi = 2 * (x * state.n_cells - cell) - 1
    P = legendre_table(state.dg_degree, xi)
    return np.einsum("jq,qjn->qn", P, state.coefficients[cell])


def constant_state(value, n_cells=10, k=3):
    c = np.zeros((n_cells, k + 1, len(value)))
    c[:, 0, :] = value
    return GridState(n_cells, k, c)


# --- initial data ------------------------------------------------------------

def test_initial_density_is_one():
    ctx = context(5)
    state = build_initial_condition(ctx, 8.0, 40, 3)
    np.testing.assert_allclose(state.coefficients[:, 0, 0], 1.0, atol=1e-12)
    np.testing.assert_allclose(state.coefficients[:, 1:, 0], 0.0, atol=1e-12)


def test_initial_first_moment_values():
    ctx = context(5)
    u = initial_moments(ctx, 8.0, np.array([0.0, 0.5]))
    assert u[0, 1] == pytest.approx(1 / math.tanh(8.0) - 1 / 8.0, abs=1e-12)
    assert u[0, 1] == pytest.approx(0.8750002250703748, abs=1e-12)
    assert u[1, 1] == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(u[:, 0], 1.0, atol=1e-12)


def test_initial_condition_rejects_sublinear_entropy():
    ctx = ClosureContext(get_entropy("be"), build_basis(3))
    with pytest.raises(ValueError):
        build_initial_condition(ctx, 2.0, 10, 2)


def test_run_config_step():
    cfg = RunConfig(N=5, M0=5)
    assert cfg.time_step() == pytest.approx(0.9 / 40 / 7)
    steps = step_sizes(0.1, 0.03)
    assert steps[:3] == [0.03] * 3
    assert steps[3] == pytest.approx(0.01)
    assert sum(step_sizes(0.1, cfg.time_step())) == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(ValueError):
        RunConfig(N=5, M0=5, cfl=1.5)


# --- scheme checks -----------------------------------------------------------

def test_constant_isotropic_state_is_fixed_point():
    ctx = context(5)
    state = constant_state(np.eye(6)[0] * 2.0)
    for gamma in (0.0, 1e-4):
        new = rk4_step(ctx, state, 0.01, gamma)
        assert np.max(np.abs(new.coefficients - state.coefficients)) <= 1e-14


def test_density_tendency_telescopes():
    ctx = context(3)
    state = build_initial_condition(ctx, 2.0, 16, 3)
    state.coefficients[:, 1:, 1:] += 1e-3 * np.random.default_rng(3).normal(size=(16, 3, 3))
    for gamma in (0.0, 1e-3):
        rhs = semidiscrete_rhs(ctx, state, gamma)
        assert abs(rhs[:, 0, 0].sum()) <= 1e-12


def test_mass_conserved_over_run():
    cfg = RunConfig(N=5, M0=8.0, sigma_s=1.0, n_cells=20)
    ctx = cfg.context()
    state = build_initial_condition(ctx, cfg.M0, cfg.n_cells, cfg.dg_degree)
    m0 = state.mass()
    masses = []
    evolve(ctx, state, 100 * cfg.time_step(), cfg.time_step(), 1e-4, lambda s: masses.append(s.mass()))
    assert len(masses) == 100
    assert max(abs(m - m0) for m in masses) <= 1e-10 * abs(m0)


def test_plane_wave_speed():
    ctx = context(1, sigma_s=0.0)
    speed = 1 / math.sqrt(3)
    ev = np.sort(np.linalg.eigvals(flux_jacobian(ctx, [1.0, 0.0], 0.0)).real)
    np.testing.assert_allclose(ev, [-speed, speed], atol=1e-12)

    eps = 1e-4
    state = project(lambda x: np.stack([1 + eps * np.cos(2 * np.pi * x),
                                        eps * speed * np.cos(2 * np.pi * x)], axis=-1), 40, 3, 2)
    T = 0.2
    end = evolve(ctx, state, T, 0.9 / 40 / 7, 0.0)
    xc = state.cell_centers()

    def phase(s):
        return np.angle(np.sum((s.coefficients[:, 0, 0] - 1) * np.exp(-2j * np.pi * xc)))

    measured = -(phase(end) - phase(state)) / (2 * np.pi * T)
    assert measured == pytest.approx(speed, abs=1e-3)


def _run_to(ctx, state, T, dt, gamma=0.0):
    return evolve(ctx, state, T, dt, gamma)


def test_temporal_order():
    ctx = context(3)
    state = build_initial_condition(ctx, 2.0, 20, 3)
    T, dt = 0.05, 0.005  # below the stability limit h / (2k + 1)
    runs = [_run_to(ctx, state, T, dt / 2**i).coefficients for i in range(3)]
    e1 = np.max(np.abs(runs[0] - runs[1]))
    e2 = np.max(np.abs(runs[1] - runs[2]))
    assert math.log2(e1 / e2) >= 3.8


@pytest.mark.parametrize("k", [1, 2])
def test_spatial_order(k):
    ctx = context(3)
    T = 0.05
    x = (np.arange(400) + 0.5) / 400

    def solve(cells):
        s = build_initial_condition(ctx, 2.0, cells, k)
        return sample(_run_to(ctx, s, T, 0.1 / 320), x)

    ref = solve(160)
    errs = [np.sqrt(np.mean(np.sum((solve(c) - ref) ** 2, axis=-1))) for c in (10, 20)]
    assert math.log2(errs[0] / errs[1]) >= k + 0.5


@pytest.mark.parametrize("gamma", [0.0, 1e-3])
def test_entropy_nonincreasing(gamma):
    cfg = RunConfig(N=5, M0=5.0, sigma_s=1.0, n_cells=20, final_time=0.05, gamma=gamma)
    ctx = cfg.context()
    values = [entropy_integral(ctx, build_initial_condition(ctx, cfg.M0, cfg.n_cells, cfg.dg_degree), gamma)]
    run_simulation(ctx, cfg, lambda s: values.append(entropy_integral(ctx, s, gamma)))
    assert np.all(np.diff(values) <= 1e-8)


def test_tiny_gamma_matches_original():
    base = RunConfig(N=3, M0=3.0, n_cells=40, final_time=0.05)
    ctx = base.context()
    ref = run_simulation(ctx, base)
    reg = run_simulation(ctx, base.with_gamma(1e-10))
    assert error_metrics(ctx, reg, ref, 1e-10).Linf <= 1e-8


def test_streaming_only_changes_state():
    cfg = RunConfig(N=3, M0=3.0, sigma_s=0.0, n_cells=10, final_time=0.02)
    ctx = cfg.context()
    start = build_initial_condition(ctx, cfg.M0, cfg.n_cells, cfg.dg_degree)
    end = run_simulation(ctx, cfg)
    assert np.max(np.abs(end.coefficients - start.coefficients)) > 1e-3
    assert end.time == pytest.approx(0.02)
    assert end.stats["steps"] == len(step_sizes(0.02, cfg.time_step()))


def test_failure_is_located():
    ctx = context(3)
    state = constant_state(np.eye(4)[0], n_cells=8, k=1)
    state.coefficients[5, 0, 0] = -1.0
    with pytest.raises(ClosureError) as info:
        semidiscrete_rhs(ctx, state, 0.0)
    assert 5 in info.value.where["cells"]
    assert info.value.where["gamma"] == 0.0


# --- error metrics and orders -----------------------------------------------

def test_metrics_of_identical_states():
    ctx = context(3)
    s = build_initial_condition(ctx, 3.0, 10, 2)
    m = error_metrics(ctx, s, s, 1e-4)
    assert (m.H_gamma, m.L2, m.Linf) == (0.0, 0.0, 0.0)


def test_metrics_of_constant_states():
    ctx = context(3)
    m = error_metrics(ctx, constant_state(np.eye(4)[0]), constant_state(2 * np.eye(4)[0]), 0.0)
    assert m.H_gamma == pytest.approx(1 - LN2, abs=1e-12)
    assert m.L2 == pytest.approx(1.0, abs=1e-13)
    assert m.Linf == pytest.approx(1.0, abs=1e-15)


def test_metrics_reject_mismatched_grids():
    ctx = context(3)
    a = constant_state(np.eye(4)[0], n_cells=10)
    with pytest.raises(GridMismatch):
        error_metrics(ctx, a, constant_state(np.eye(4)[0], n_cells=12), 0.0)
    b = constant_state(np.eye(4)[0], n_cells=10)
    b.time = 0.5
    with pytest.raises(GridMismatch):
        error_metrics(ctx, a, b, 0.0)


def test_observed_order_examples():
    assert observed_order([(1e-3, 1e-6), (1e-4, 1e-8)]) == [pytest.approx(2.0)]
    orders = observed_order([(1e-2, 4e-3), (1e-3, 4e-4), (1e-4, 0.0)])
    assert orders[0] == pytest.approx(1.0) and orders[1] is None
    with pytest.raises(ValueError):
        observed_order([(1e-4, 1.0), (1e-3, 1.0)])


def test_checkpoint_round_trip(tmp_path):
    ctx = context(3)
    s = build_initial_condition(ctx, 3.0, 6, 2)
    s.time = 0.1
    path = tmp_path / "state.csv"
    write_checkpoint(s, path, {"gamma": "1e-05"})
    back, meta = read_checkpoint(path)
    np.testing.assert_array_equal(back.coefficients, s.coefficients)
    assert back.time == 0.1 and meta["gamma"] == "1e-05"
    assert (back.n_cells, back.dg_degree) == (6, 2)


@pytest.mark.slow
def test_strong_scattering_reference_magnitudes():
    cfg = RunConfig(N=9, M0=100.0, sigma_s=1.0, n_cells=160, final_time=0.1)
    ctx = cfg.context()
    ref = run_simulation(ctx, cfg)
    m = error_metrics(ctx, run_simulation(ctx, cfg.with_gamma(1e-5)), ref, 1e-5)
    assert 5.439e-09 / 2 <= m.H_gamma <= 5.439e-09 * 2
    assert 2.123e-05 / 2 <= m.L2 <= 2.123e-05 * 2
