import numpy as np
import pytest
from scipy.stats import norm

import casmem.dynamics as dyn
from casmem.dynamics import (
    PathSlice,
    _adaptive_integral,
    drift,
    drift_with_stats,
    fp_residual,
    integrate_sde,
    movie_frames,
    path_slice,
    poisson_psi_grad,
    psi_potential,
    sample_bulk_points,
    shape_current,
)
from casmem.errors import NumericalError
from casmem.gm import GaussianMixture
from casmem.protocol import ProtocolGrid, incorporate, new_memory
from casmem.streams import default_prior, generate, make_config


def static_slice(gm, weight_rates=None):
    k, d = gm.k, gm.d
    wr = np.zeros(k) if weight_rates is None else np.asarray(weight_rates, float)
    return PathSlice(gm, wr, np.zeros((k, d)), np.zeros((k, d, d)))


def small_grid(kind="circular", n_days=12, L=5, **kw):
    targets = generate(make_config(kind, n_days=n_days, **kw))
    state = new_memory(default_prior(targets[0].k, targets[0].d), targets[0], L)
    for t in targets[1:]:
        state = incorporate(state, t)
    return state.grid


def test_path_slice_rates_are_segment_differences():
    grid = small_grid(n_days=6, L=3)
    segs = grid.L
    sl = path_slice(grid, 0.4)  # inside segment 1
    lo, hi = grid.nodes[1], grid.nodes[2]
    assert np.allclose(sl.mean_rates, (hi.means - lo.means) * segs)
    assert np.allclose(sl.cov_rates, (hi.covs - lo.covs) * segs)
    assert np.allclose(sl.weight_rates, (hi.weights - lo.weights) * segs)
    # rates are constant within a segment, and t = 1 takes the left limit
    sl2 = path_slice(grid, 0.55)
    assert np.allclose(sl.mean_rates, sl2.mean_rates)
    end = path_slice(grid, 1.0)
    assert np.allclose(end.mean_rates, (grid.nodes[3].means - grid.nodes[2].means) * segs)
    with pytest.raises(ValueError):
        path_slice(grid, 1.2)


def test_path_slice_validates_rates():
    gm = default_prior(2, 2)
    with pytest.raises(ValueError):
        PathSlice(gm, np.array([0.5, 0.1]), np.zeros((2, 2)), np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        PathSlice(gm, np.zeros(2), np.zeros((3, 2)), np.zeros((2, 2, 2)))


def test_shape_current_single_component_closed_form():
    gm = GaussianMixture(np.ones(1), np.zeros((1, 2)), 0.7 * np.eye(2)[None])
    mdot = np.array([[0.3, -0.2]])
    sl = PathSlice(gm, np.zeros(1), mdot, np.zeros((1, 2, 2)))
    pts = np.random.default_rng(0).normal(0.0, 1.0, (9, 2))
    expect = gm.density(pts)[:, None] * mdot
    assert np.allclose(shape_current(sl, pts), expect, rtol=1e-12)
    assert shape_current(sl, pts[0]).shape == (2,)


def test_poisson_gradient_matches_1d_closed_form():
    # In one dimension psi_k'' = g_k integrates to Phi((x - m)/sigma) - 1/2
    # (the heat-kernel construction picks the odd antiderivative).
    sigmas = np.array([0.8, 1.7])
    means = np.array([[-0.4], [0.9]])
    gm = GaussianMixture(np.array([0.5, 0.5]), means, (sigmas**2)[:, None, None] * np.eye(1))
    rate = 0.37
    sl = PathSlice(gm, np.array([rate, -rate]), np.zeros((2, 1)), np.zeros((2, 1, 1)))
    x = np.linspace(-4.0, 4.0, 41)[:, None]
    got = poisson_psi_grad(sl, x)[:, 0]
    expect = rate * (norm.cdf((x[:, 0] - means[0, 0]) / sigmas[0]) - 0.5)
    expect -= rate * (norm.cdf((x[:, 0] - means[1, 0]) / sigmas[1]) - 0.5)
    assert np.abs(got - expect).max() < 1e-8


def test_poisson_potential_solves_the_poisson_equation():
    # d = 3: finite-difference Laplacian of psi against the weight source.
    grid = small_grid("rotating_dominance", n_days=8, L=4, d=3)
    t = 0.37
    sl = path_slice(grid, t)
    assert np.abs(sl.weight_rates).sum() > 1e-6
    pts = sample_bulk_points(sl.gm, 10, seed=2)
    h = 1e-3
    offsets = h * np.eye(3)
    stencil = [pts]
    for i in range(3):
        stencil.append(pts + offsets[i])
        stencil.append(pts - offsets[i])
    psi = psi_potential(sl, np.concatenate(stencil)).reshape(7, len(pts))
    lap = (psi[1] + psi[2] + psi[3] + psi[4] + psi[5] + psi[6] - 6 * psi[0]) / h**2
    source = np.exp(sl.gm.component_log_density(pts)) @ sl.weight_rates
    rel = np.abs(lap - source).max() / np.abs(source).max()
    assert rel < 1e-4


def test_poisson_terms_vanish_for_static_weights():
    gm = default_prior(2, 2)
    sl = static_slice(gm)
    pts = np.random.default_rng(1).normal(0.0, 1.0, (5, 2))
    assert np.array_equal(poisson_psi_grad(sl, pts), np.zeros((5, 2)))
    # the zero fast path also sidesteps the d <= 2 divergence guard
    assert np.array_equal(psi_potential(sl, pts), np.zeros(5))
    with pytest.raises(ValueError):
        psi_potential(static_slice(gm, [0.5, -0.5]), pts)


def test_drift_reduces_to_half_score_when_frozen():
    gm = GaussianMixture(
        np.array([0.6, 0.4]),
        np.array([[0.0, 0.0], [1.5, -0.5]]),
        np.stack([0.5 * np.eye(2), np.diag([0.4, 1.1])]),
    )
    sl = static_slice(gm)
    pts = np.random.default_rng(2).normal(0.0, 1.2, (14, 2))
    vel, clamped = drift_with_stats(sl, pts)
    assert clamped == 0
    assert np.allclose(vel, 0.5 * gm.score(pts), atol=1e-12)
    assert np.allclose(drift(sl, pts), vel)
    assert drift(sl, pts[0]).shape == (2,)


def test_adaptive_integral_converges_and_stalls():
    # smooth integrand: int_0^1 exp(u) du
    got = _adaptive_integral(lambda u: np.exp(u)[:, None], 1e-10, 50)
    assert got[0] == pytest.approx(np.e - 1.0, rel=1e-12)
    # a moving spike cannot be resolved with a too-small panel budget
    spike = lambda u: (1.0 / (1e-8 + (u - 0.7312) ** 2))[:, None]
    with pytest.raises(NumericalError):
        _adaptive_integral(spike, 1e-12, 3)


def test_fp_residual_is_small_on_a_real_grid():
    grid = small_grid("circular", n_days=15, L=5)
    pts = sample_bulk_points(grid.eval_at(0.45), 25, seed=3)
    assert fp_residual(grid, 0.45, pts) < 1e-3


def test_fp_residual_with_moving_weights():
    grid = small_grid("rotating_dominance", n_days=8, L=4, d=3)
    pts = sample_bulk_points(grid.eval_at(0.37), 12, seed=4)
    assert fp_residual(grid, 0.37, pts) < 1e-3


def test_fp_residual_rejects_node_times():
    grid = small_grid("circular", n_days=8, L=4)
    pts = np.zeros((3, 2))
    with pytest.raises(ValueError):
        fp_residual(grid, 0.5, pts)  # node of the L=4 grid
    with pytest.raises(ValueError):
        fp_residual(grid, 1.0 - 1e-7, pts)
    with pytest.raises(ValueError):
        fp_residual(grid, 0.3, np.zeros(2))


def test_integrate_sde_is_deterministic_per_path():
    grid = small_grid("circular", n_days=8, L=4)
    a = integrate_sde(grid, n_paths=3, steps=30, seed=9)
    b = integrate_sde(grid, n_paths=3, steps=30, seed=9)
    for x, y in zip(a, b):
        assert np.array_equal(x.states, y.states, equal_nan=True)
    # path i does not depend on how many siblings were drawn
    solo = integrate_sde(grid, n_paths=1, steps=30, seed=9)[0]
    assert np.array_equal(solo.states, a[0].states)
    assert [t.path_id for t in a] == [0, 1, 2]
    assert a[0].times.shape == (31,)
    assert a[0].states.shape == (31, 2)
    assert a[0].diverged_at is None
    different = integrate_sde(grid, n_paths=1, steps=30, seed=10)[0]
    assert not np.array_equal(different.states, solo.states)


def test_integrate_sde_stationary_mixture():
    # identical nodes freeze the path; the mixture is then invariant, so
    # terminal samples must reproduce its moments within MC error
    gm = GaussianMixture(
        np.array([0.5, 0.5]),
        np.array([[-1.0, 0.0], [1.0, 0.5]]),
        np.stack([0.4 * np.eye(2), 0.6 * np.eye(2)]),
    )
    grid = ProtocolGrid((gm, gm, gm))
    trajs = integrate_sde(grid, n_paths=1500, steps=150, seed=5)
    terminal = np.stack([t.states[-1] for t in trajs])
    mom = gm.overall_moments()
    n = len(terminal)
    se_mean = np.sqrt(np.diag(mom.cov) / n)
    assert np.all(np.abs(terminal.mean(axis=0) - mom.mean) < 5 * se_mean)
    centred = terminal - terminal.mean(axis=0)
    prods = centred[:, :, None] * centred[:, None, :]
    se_cov = prods.std(axis=0) / np.sqrt(n)
    assert np.all(np.abs(np.cov(terminal.T, bias=True) - mom.cov) < 5 * se_cov)


def test_integrate_sde_flags_divergence(monkeypatch):
    grid = small_grid("circular", n_days=6, L=3)
    real = dyn.drift_with_stats

    def exploding(sl, x, _step=[0]):
        vel, clamped = real(sl, x)
        _step[0] += 1
        if _step[0] > 3:
            vel = vel + np.inf
        return vel, clamped

    monkeypatch.setattr(dyn, "drift_with_stats", exploding)
    tr = integrate_sde(grid, n_paths=2, steps=10, seed=1)[0]
    assert tr.diverged_at == 4
    assert np.isfinite(tr.states[:4]).all()
    assert np.isnan(tr.states[4:]).all()


def test_integrate_sde_validates_arguments():
    grid = small_grid("circular", n_days=6, L=3)
    with pytest.raises(ValueError):
        integrate_sde(grid, n_paths=0)
    with pytest.raises(ValueError):
        integrate_sde(grid, steps=0)


def test_movie_frames_endpoints():
    grid = small_grid("circular", n_days=6, L=3)
    frames = movie_frames(grid, 7)
    assert len(frames) == 7
    assert frames[0] is grid.nodes[0]
    assert frames[-1] is grid.nodes[-1]
    with pytest.raises(ValueError):
        movie_frames(grid, 1)


def test_sample_bulk_points_properties():
    gm = default_prior(2, 3)
    pts = sample_bulk_points(gm, 40, seed=6)
    assert pts.shape == (40, 3)
    assert np.array_equal(pts, sample_bulk_points(gm, 40, seed=6))
    dens = np.asarray(gm.density(pts))
    assert dens.min() >= 1e-8 * dens.max() * 0.999
    with pytest.raises(NumericalError):
        sample_bulk_points(gm, 5, seed=6, floor_ratio=2.0)
