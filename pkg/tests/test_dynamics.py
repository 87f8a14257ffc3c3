import numpy as np
import pytest

from eotpairs import (
    CustomDrift,
    OptimalDrift,
    PerturbedDrift,
    Seed,
    brownian_bridge_sample,
    conditional_moments,
    conditional_plan,
    drift_quadrature_oracle,
    optimal_drift,
    sample_joint,
    sample_sb_trajectories_exact,
    sample_sb_trajectory_exact,
    simulate_endpoints,
    simulate_sb,
)

from conftest import random_pair, single_component_pair


class TestOptimalDrift:
    def test_flat_potential_gives_zero_drift(self):
        pair = single_component_pair(dim=2, a=0.0, epsilon=1.0)
        rng = np.random.default_rng(0)
        for t in (0.0, 0.3, 0.99):
            x = rng.normal(size=2)
            assert np.allclose(optimal_drift(pair, x, t), 0.0)

    def test_single_isotropic_component_closed_form(self):
        # One component, A = a I, b = 0: v(x, t) = -a x / ((1 - t) a + 1).
        for a, eps in ((1.0, 1.0), (0.5, 0.3)):
            pair = single_component_pair(dim=1, a=a, epsilon=eps)
            for t in (0.0, 0.4, 0.9):
                x = np.array([1.7])
                expected = -a * x / ((1.0 - t) * a + 1.0)
                assert optimal_drift(pair, x, t) == pytest.approx(expected, rel=1e-12)
        pair = single_component_pair(dim=1, a=1.0, epsilon=1.0)
        assert optimal_drift(pair, np.array([1.0]), 0.0) == pytest.approx([-0.5])

    def test_time_domain_enforced(self, preset_d2):
        x = np.zeros(2)
        with pytest.raises(ValueError):
            optimal_drift(preset_d2, x, 1.0)
        with pytest.raises(ValueError):
            optimal_drift(preset_d2, x, -0.01)

    def test_matches_quadrature_oracle(self):
        rng = np.random.default_rng(1)
        for dim in (1, 2):
            pair = random_pair(rng, dim=dim, n=2, epsilon=1.0)
            x = rng.normal(size=dim)
            for t in (0.0, 0.5, 0.9):
                closed = optimal_drift(pair, x, t)
                quad = drift_quadrature_oracle(pair, x, t)
                scale = max(1e-8, float(np.max(np.abs(quad))))
                assert np.max(np.abs(closed - quad)) / scale < 1e-4

    def test_oracle_near_terminal_time(self, preset_d1):
        x = np.array([0.6])
        closed = optimal_drift(preset_d1, x, 0.999)
        quad = drift_quadrature_oracle(preset_d1, x, 0.999)
        assert np.max(np.abs(closed - quad)) / max(1e-8, np.max(np.abs(quad))) < 1e-3

    def test_terminal_continuity_of_quadratic_forms(self, preset_d2):
        # The cancellation-free form stays smooth as t -> 1.
        eps = preset_d2.epsilon
        for comp in preset_d2.components:
            forms = []
            for t in (1 - 1e-6, 1 - 1e-12):
                bt = comp.matrix.map_eigenvalues(lambda v: v / (eps * ((1.0 - t) * v + 1.0)))
                forms.append(bt.to_dense())
            rel = np.max(np.abs(forms[0] - forms[1])) / np.max(np.abs(forms[1]))
            assert rel <= 1e-5

    def test_drift_continuous_up_to_terminal_time(self, preset_d2):
        x = np.array([0.4, -0.9])
        near = optimal_drift(preset_d2, x, 1 - 1e-6)
        nearer = optimal_drift(preset_d2, x, 1 - 1e-12)
        assert np.max(np.abs(near - nearer)) / np.max(np.abs(nearer)) < 1e-5

    def test_batch_matches_single(self, preset_d2):
        rng = np.random.default_rng(2)
        xs = rng.normal(size=(6, 2))
        batch = optimal_drift(preset_d2, xs, 0.3)
        for i, x in enumerate(xs):
            assert np.allclose(batch[i], optimal_drift(preset_d2, x, 0.3), rtol=1e-14)


class TestPerturbedDrift:
    def test_zero_offset_equals_optimal(self, preset_d2):
        base = OptimalDrift(preset_d2)
        perturbed = PerturbedDrift(base, np.zeros(2))
        xs = np.random.default_rng(3).normal(size=(5, 2))
        assert np.array_equal(base(xs, 0.2), perturbed(xs, 0.2))

    def test_offset_applied(self, preset_d2):
        base = OptimalDrift(preset_d2)
        delta = np.array([0.5, -1.0])
        perturbed = PerturbedDrift(base, delta)
        xs = np.zeros((2, 2))
        assert np.allclose(perturbed(xs, 0.1) - base(xs, 0.1), delta)


class TestSimulate:
    def test_pure_diffusion_variance(self):
        zero = CustomDrift(lambda x, t: np.zeros_like(x))
        x0 = np.zeros((100_000, 1))
        final, diverged = simulate_endpoints(zero, x0, 1.0, 200, Seed(4))
        assert not diverged.any()
        assert final.var() == pytest.approx(1.0, rel=0.01)
        assert abs(final.mean()) < 0.02

    def test_single_step_shapes(self, preset_d2):
        trajectories = simulate_sb(OptimalDrift(preset_d2), np.zeros((3, 2)), 1.0, 1, Seed(5))
        assert len(trajectories) == 3
        assert trajectories[0].states.shape == (2, 2)
        assert np.array_equal(trajectories[0].times, [0.0, 1.0])

    def test_conditional_endpoint_law(self, preset_d2):
        x = np.array([0.5, -0.25])
        paths = 30_000
        final, diverged = simulate_endpoints(
            OptimalDrift(preset_d2), np.tile(x, (paths, 1)), preset_d2.epsilon, 100, Seed(6)
        )
        assert not diverged.any()
        mean, cov = conditional_moments(conditional_plan(preset_d2, x))
        scale = np.sqrt(np.trace(cov.to_dense()))
        assert np.linalg.norm(final.mean(axis=0) - mean) / scale < 0.05
        emp = np.cov(final, rowvar=False)
        assert np.linalg.norm(emp - cov.to_dense()) / np.linalg.norm(cov.to_dense()) < 0.05

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_divergent_drift_flagged(self):
        exploding = CustomDrift(lambda x, t: x * 1e160)
        trajectories = simulate_sb(exploding, np.zeros((2, 1)), 1.0, 4, Seed(7))
        assert all(t.diverged for t in trajectories)
        assert np.isnan(trajectories[0].states[-1]).all()

    def test_endpoint_error_shrinks_as_steps_double(self):
        # Stiff single-component pair so the discretization bias dominates
        # the Monte-Carlo noise floor; the endpoint error should fall
        # monotonically across 100 / 200 / 400 steps.
        pair = single_component_pair(dim=1, a=5.0, epsilon=0.5)
        drift = OptimalDrift(pair)
        x = np.array([2.0])
        true_mean, true_var = x / 6.0, 0.5 / 6.0
        errors = []
        for steps in (100, 200, 400):
            final, _ = simulate_endpoints(
                drift, np.tile(x, (200_000, 1)), 0.5, steps, Seed(900)
            )
            errors.append(
                abs(final.var() / true_var - 1.0)
                + abs(final.mean() - true_mean[0]) / np.sqrt(true_var)
            )
        assert errors[0] > errors[1] > errors[2]

    def test_deterministic_and_block_independent(self, preset_d2):
        import eotpairs.dynamics as dyn

        x0 = preset_d2.source.sample(Seed(8), 50)
        a, _ = simulate_endpoints(OptimalDrift(preset_d2), x0, 1.0, 20, Seed(9))
        old_block = dyn._SIM_BLOCK
        dyn._SIM_BLOCK = 7
        try:
            b, _ = simulate_endpoints(OptimalDrift(preset_d2), x0, 1.0, 20, Seed(9))
        finally:
            dyn._SIM_BLOCK = old_block
        assert np.array_equal(a, b)


class TestBrownianBridge:
    def test_pinned_endpoints(self):
        x, y = np.array([1.0, 2.0]), np.array([-3.0, 0.5])
        assert np.array_equal(brownian_bridge_sample(x, y, 0.0, 1.0, Seed(10)), x)
        assert np.array_equal(brownian_bridge_sample(x, y, 1.0, 1.0, Seed(10)), y)

    def test_midpoint_variance(self):
        x = np.zeros((100_000, 1))
        draws = brownian_bridge_sample(x, x, 0.5, 1.0, Seed(11))
        assert draws.var() == pytest.approx(0.25, rel=0.02)

    def test_mean_interpolation(self):
        x = np.zeros((50_000, 2))
        y = np.tile([2.0, -4.0], (50_000, 1))
        draws = brownian_bridge_sample(x, y, 0.3, 1.0, Seed(12))
        assert np.allclose(draws.mean(axis=0), [0.6, -1.2], atol=0.02)


class TestExactTrajectorySampler:
    def test_two_point_grid_reduces_to_joint(self, preset_d2):
        times, states = sample_sb_trajectories_exact(preset_d2, Seed(13), [0.0, 1.0], 32)
        js = sample_joint(preset_d2, Seed(13), 32)
        assert np.array_equal(states[:, 0, :], js.xs)
        assert np.array_equal(states[:, -1, :], js.ys)

    def test_grid_validation(self, preset_d2):
        with pytest.raises(ValueError):
            sample_sb_trajectories_exact(preset_d2, Seed(0), [0.0, 0.5], 2)
        with pytest.raises(ValueError):
            sample_sb_trajectories_exact(preset_d2, Seed(0), [0.2, 1.0], 2)

    def test_interior_bridge_law(self, preset_d2):
        t = 0.3
        times, states = sample_sb_trajectories_exact(preset_d2, Seed(14), [0.0, t, 1.0], 100_000)
        xs, mids, ys = states[:, 0, :], states[:, 1, :], states[:, 2, :]
        residual = mids - (xs + t * (ys - xs))
        assert np.max(np.abs(residual.mean(axis=0))) < 0.01
        expected_var = preset_d2.epsilon * t * (1 - t)
        assert residual.var(axis=0) == pytest.approx(np.full(2, expected_var), rel=0.03)

    def test_matches_euler_maruyama_marginals(self, preset_d2):
        # Cross-sampler consistency at an interior time.
        steps, paths, t_idx = 100, 30_000, 50
        x0 = preset_d2.source.sample(Seed(15), paths)
        collected = {}

        def observer(k, t, x):
            if k == t_idx:
                collected.setdefault("states", []).append(x.copy())

        simulate_endpoints(OptimalDrift(preset_d2), x0, preset_d2.epsilon, steps, Seed(16),
                           observer=observer)
        em_states = np.vstack(collected["states"])
        times, exact = sample_sb_trajectories_exact(
            preset_d2, Seed(17), [0.0, t_idx / steps, 1.0], paths
        )
        exact_states = exact[:, 1, :]
        scale = np.sqrt(np.trace(np.cov(exact_states, rowvar=False)))
        assert np.linalg.norm(em_states.mean(axis=0) - exact_states.mean(axis=0)) / scale < 0.03
        c1 = np.cov(em_states, rowvar=False)
        c2 = np.cov(exact_states, rowvar=False)
        assert np.linalg.norm(c1 - c2) / np.linalg.norm(c2) < 0.03

    def test_single_trajectory_wrapper(self, preset_d2):
        traj = sample_sb_trajectory_exact(preset_d2, Seed(18), np.linspace(0, 1, 5))
        assert traj.states.shape == (5, 2)
        assert not traj.diverged
