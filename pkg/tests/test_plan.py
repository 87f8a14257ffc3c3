import numpy as np
import pytest

from eotpairs import (
    Gaussian,
    Seed,
    SymMatrix,
    conditional_log_density,
    conditional_moments,
    conditional_moments_batch,
    conditional_plan,
    log_forward_density_unnormalized,
    log_reverse_density_unnormalized,
    log_z_quadrature_oracle,
    sample_conditional,
    sample_joint,
    sample_target,
    standard_source,
    target_moments,
    z_quadrature_oracle,
)

from conftest import make_pair, random_pair, single_component_pair


def symmetric_1d_pair(epsilon=1.0):
    # Two mirrored components: at x=0 the plan is gamma=(1/2, 1/2),
    # means (-1, +1), variances 1/2.
    return make_pair(
        epsilon,
        [0.5, 0.5],
        [[-2.0], [2.0]],
        (SymMatrix.scaled_identity(1, 1.0), SymMatrix.scaled_identity(1, 1.0)),
        source=standard_source(1, 1.0),
    )


class TestConditionalPlan:
    def test_identity_component(self):
        pair = single_component_pair(dim=2, a=0.0, epsilon=1.0)
        x = np.array([0.7, -1.2])
        plan = conditional_plan(pair, x)
        assert plan.gammas == pytest.approx([1.0])
        assert plan.means[0] == pytest.approx(x)
        assert np.allclose(plan.covariances[0].to_dense(), np.eye(2))

    def test_symmetric_two_component(self):
        plan = conditional_plan(symmetric_1d_pair(), np.array([0.0]))
        assert plan.gammas == pytest.approx([0.5, 0.5])
        assert plan.means.ravel() == pytest.approx([-1.0, 1.0])
        assert [c.scalar for c in plan.covariances] == pytest.approx([0.5, 0.5])

    def test_preset_sigma_value(self, preset_d16_small_eps):
        # eps = 0.1 with matrices I/16: sigma = 0.1 * 16/17 per coordinate.
        expected = 0.1 * 16.0 / 17.0
        for comp in preset_d16_small_eps.components:
            assert comp.sigma.scalar == pytest.approx(expected, rel=1e-12)

    def test_gamma_normalization_sweep(self, preset_d2):
        rng = np.random.default_rng(0)
        xs = rng.normal(scale=2.0, size=(1000, 2))
        from eotpairs.plan import conditional_parameters

        log_gammas, _ = conditional_parameters(preset_d2, xs)
        sums = np.exp(log_gammas).sum(axis=1)
        assert np.max(np.abs(sums - 1.0)) <= 1e-12

    def test_rejects_wrong_dimension(self, preset_d2):
        with pytest.raises(Exception):
            conditional_plan(preset_d2, np.array([1.0, 2.0, 3.0]))


class TestSampleConditional:
    def test_standard_normal_moments(self):
        pair = single_component_pair(dim=3, a=0.0, epsilon=1.0)
        plan = conditional_plan(pair, np.zeros(3))
        draws = sample_conditional(plan, Seed(1), 100_000)
        assert np.max(np.abs(draws.mean(axis=0))) < 0.02
        assert np.cov(draws, rowvar=False).diagonal() == pytest.approx(np.ones(3), rel=0.02)

    def test_degenerate_weights_pick_single_component(self):
        pair = make_pair(
            1.0,
            [1.0, 0.0],
            [[-2.0], [2.0]],
            (SymMatrix.scaled_identity(1, 1.0), SymMatrix.scaled_identity(1, 1.0)),
        )
        plan = conditional_plan(pair, np.array([0.0]))
        draws = sample_conditional(plan, Seed(2), 2000)
        # All mass at the first component: mean -1, variance 1/2.
        assert draws.mean() == pytest.approx(-1.0, abs=0.06)
        assert draws.var() == pytest.approx(0.5, rel=0.1)

    def test_two_component_mixture_moments(self):
        plan = conditional_plan(symmetric_1d_pair(), np.array([0.0]))
        draws = sample_conditional(plan, Seed(3), 100_000)
        mean, cov = conditional_moments(plan)
        assert abs(draws.mean() - mean[0]) < 0.02
        assert draws.var() == pytest.approx(cov.to_dense()[0, 0], rel=0.02)

    def test_determinism(self, preset_d2):
        plan = conditional_plan(preset_d2, np.array([0.1, 0.2]))
        a = sample_conditional(plan, Seed(4), 64)
        b = sample_conditional(plan, Seed(4), 64)
        assert np.array_equal(a, b)


class TestSampleJoint:
    def test_empty(self, preset_d2):
        js = sample_joint(preset_d2, Seed(0), 0)
        assert len(js) == 0
        assert js.xs.shape == (0, 2)

    def test_affine_gaussian_joint_covariance(self):
        # One component, A = a I, b = 0: y = x/(a+1) + noise, so the joint
        # (x, y) is Gaussian with blocks written out by hand below.
        a, eps, svar = 1.5, 0.8, 1.3
        pair = single_component_pair(dim=1, a=a, epsilon=eps, source_var=svar)
        js = sample_joint(pair, Seed(5), 100_000)
        sample = np.hstack([js.xs, js.ys])
        emp = np.cov(sample, rowvar=False)
        var_x = svar
        cov_xy = svar / (a + 1.0)
        var_y = svar / (a + 1.0) ** 2 + eps / (a + 1.0)
        expected = np.array([[var_x, cov_xy], [cov_xy, var_y]])
        assert np.allclose(emp, expected, rtol=0.01)

    def test_marginal_matches_target_moments(self, preset_d2):
        js = sample_joint(preset_d2, Seed(6), 100_000)
        tm = target_moments(preset_d2, Seed(7), 100_000)
        scale = np.sqrt(np.trace(tm.cov))
        assert np.linalg.norm(js.ys.mean(axis=0) - tm.mean) / scale < 0.01
        emp_cov = np.cov(js.ys, rowvar=False)
        assert np.linalg.norm(emp_cov - tm.cov) / np.linalg.norm(tm.cov) < 0.01

    def test_marginal_consistency_in_standard_errors(self, preset_d2):
        n = 20_000
        js = sample_joint(preset_d2, Seed(8), n)
        tm = target_moments(preset_d2, Seed(9), 200_000)
        se = np.sqrt(np.diag(tm.cov) / n)
        assert np.all(np.abs(js.ys.mean(axis=0) - tm.mean) <= 3.0 * se)

    def test_component_indices_in_range(self, preset_d2):
        js = sample_joint(preset_d2, Seed(10), 500)
        assert js.components.min() >= 0
        assert js.components.max() < preset_d2.n_components

    def test_iteration_yields_pairs(self, preset_d2):
        js = sample_joint(preset_d2, Seed(11), 3)
        pairs = list(js)
        assert len(pairs) == 3
        assert pairs[0].x.shape == (2,)

    def test_determinism(self, preset_d2):
        a = sample_joint(preset_d2, Seed(12), 100)
        b = sample_joint(preset_d2, Seed(12), 100)
        assert np.array_equal(a.ys, b.ys) and np.array_equal(a.xs, b.xs)


class TestConditionalMoments:
    def test_single_component(self):
        pair = single_component_pair(dim=2, a=1.0, epsilon=1.0)
        plan = conditional_plan(pair, np.array([2.0, 0.0]))
        mean, cov = conditional_moments(plan)
        assert mean == pytest.approx(plan.means[0])
        assert np.allclose(cov.to_dense(), plan.covariances[0].to_dense())

    def test_law_of_total_variance(self):
        plan = conditional_plan(symmetric_1d_pair(), np.array([0.0]))
        mean, cov = conditional_moments(plan)
        assert mean[0] == pytest.approx(0.0, abs=1e-15)
        assert cov.to_dense()[0, 0] == pytest.approx(1.5, rel=1e-12)

    def test_against_monte_carlo(self):
        rng = np.random.default_rng(13)
        pair = random_pair(rng, dim=2, n=3, epsilon=0.9)
        x = rng.normal(size=2)
        plan = conditional_plan(pair, x)
        mean, cov = conditional_moments(plan)
        draws = sample_conditional(plan, Seed(14), 1_000_000)
        assert np.allclose(draws.mean(axis=0), mean, atol=0.01 * np.sqrt(np.trace(cov.to_dense())))
        assert np.allclose(np.cov(draws, rowvar=False), cov.to_dense(), rtol=0.01)

    def test_batch_agrees_with_single(self, preset_d2):
        rng = np.random.default_rng(15)
        xs = rng.normal(size=(7, 2))
        means, covs = conditional_moments_batch(preset_d2, xs)
        for i, x in enumerate(xs):
            mean, cov = conditional_moments(conditional_plan(preset_d2, x))
            assert np.allclose(means[i], mean, rtol=1e-12)
            assert np.allclose(covs[i], cov.to_dense(), rtol=1e-12, atol=1e-14)


class TestTargetMoments:
    def test_heat_smoothing_of_gaussian(self):
        pair = single_component_pair(dim=2, a=0.0, epsilon=0.7, source_var=1.5)
        tm = target_moments(pair, Seed(16), 200_000)
        assert np.allclose(tm.mean, 0.0, atol=0.02)
        assert np.allclose(tm.cov, (1.5 + 0.7) * np.eye(2), rtol=0.02, atol=0.02)

    def test_symmetric_pair_has_centered_target(self):
        tm = target_moments(symmetric_1d_pair(), Seed(17), 100_000)
        assert abs(tm.mean[0]) < 0.02

    def test_rao_blackwellized_matches_plain_mc(self, preset_d2):
        tm = target_moments(preset_d2, Seed(18), 100_000)
        plain = sample_target(preset_d2, Seed(19), 1_000_000)
        scale = np.sqrt(np.trace(tm.cov))
        assert np.linalg.norm(plain.mean(axis=0) - tm.mean) / scale < 0.01
        emp_cov = np.cov(plain, rowvar=False)
        assert np.linalg.norm(emp_cov - tm.cov) / np.linalg.norm(tm.cov) < 0.01


class TestDensities:
    def test_forward_density_trivial_values(self):
        pair = single_component_pair(dim=2, a=0.0, epsilon=1.0)
        x = np.array([0.3, 0.4])
        assert log_forward_density_unnormalized(pair, x, x) == pytest.approx(0.0)
        y = x + np.array([1.0, 1.0])  # |x - y|^2 = 2
        assert log_forward_density_unnormalized(pair, x, y) == pytest.approx(-1.0)

    def test_density_identity_against_quadrature(self):
        rng = np.random.default_rng(20)
        for dim in (1, 2):
            pair = random_pair(rng, dim=dim, n=3, epsilon=0.8)
            x = rng.normal(size=dim) * 0.5
            log_z = log_z_quadrature_oracle(pair, x)
            for _ in range(5):
                y = rng.normal(size=dim) * 1.5
                mixture = conditional_log_density(pair, x, y)
                unnorm = log_forward_density_unnormalized(pair, x, y)
                assert abs(np.expm1(unnorm - log_z - mixture)) < 1e-6

    def test_reverse_density_gaussian_product_case(self):
        pair = single_component_pair(dim=2, a=0.0, epsilon=1.0, source_var=1.0)
        y = np.array([2.0, -1.0])
        # Posterior is N(y/2, I/2); gradient vanishes at the posterior mean.
        _, grad = log_reverse_density_unnormalized(pair, y, y / 2.0)
        assert np.allclose(grad, 0.0, atol=1e-12)
        # Log-density differences match the analytic posterior.
        xa, xb = np.array([0.1, 0.3]), np.array([-0.7, 0.25])
        va, _ = log_reverse_density_unnormalized(pair, y, xa)
        vb, _ = log_reverse_density_unnormalized(pair, y, xb)
        post = lambda x: -np.sum((x - y / 2.0) ** 2)  # up to a constant
        assert (va - vb) == pytest.approx(post(xa) - post(xb), rel=1e-12)

    def test_reverse_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(21)
        for dim in (2, 4):
            pair = random_pair(rng, dim=dim, n=3, epsilon=1.1)
            for _ in range(10):
                x = rng.normal(size=dim)
                y = rng.normal(size=dim) * 2.0
                _, grad = log_reverse_density_unnormalized(pair, y, x)
                h = 1e-5
                for i in range(dim):
                    e = np.zeros(dim)
                    e[i] = h
                    vp, _ = log_reverse_density_unnormalized(pair, y, x + e)
                    vm, _ = log_reverse_density_unnormalized(pair, y, x - e)
                    assert abs((vp - vm) / (2 * h) - grad[i]) < 1e-5

    def test_reverse_density_respects_symmetry(self):
        pair = symmetric_1d_pair()
        y, x = np.array([1.3]), np.array([0.4])
        va, _ = log_reverse_density_unnormalized(pair, y, x)
        vb, _ = log_reverse_density_unnormalized(pair, -y, -x)
        assert va == pytest.approx(vb, rel=1e-12)

    def test_mixture_source_supported(self):
        comp = Gaussian(np.zeros(1), SymMatrix.scaled_identity(1, 1.0))
        comp2 = Gaussian(np.ones(1), SymMatrix.scaled_identity(1, 0.5))
        from eotpairs import GaussianMixture

        mix = GaussianMixture(weights=np.array([0.3, 0.7]), components=(comp, comp2))
        pair = make_pair(
            1.0, [1.0], [[0.0]], (SymMatrix.scaled_identity(1, 0.5),), source=mix
        )
        val, grad = log_reverse_density_unnormalized(pair, np.array([0.5]), np.array([0.2]))
        h = 1e-6
        vp, _ = log_reverse_density_unnormalized(pair, np.array([0.5]), np.array([0.2 + h]))
        vm, _ = log_reverse_density_unnormalized(pair, np.array([0.5]), np.array([0.2 - h]))
        assert grad[0] == pytest.approx((vp - vm) / (2 * h), abs=1e-6)


class TestZOracle:
    def test_flat_potential_gaussian_integral(self):
        for dim, eps in ((1, 1.0), (2, 0.5)):
            pair = single_component_pair(dim=dim, a=0.0, epsilon=eps)
            z = z_quadrature_oracle(pair, np.full(dim, 0.3))
            assert z == pytest.approx((2 * np.pi * eps) ** (dim / 2), rel=1e-8)

    def test_single_gaussian_complete_square(self):
        # dim 1, eps 1, A = 1, b = 0: Z_x = sqrt(pi) * exp(-x^2 / 4).
        pair = single_component_pair(dim=1, a=1.0, epsilon=1.0)
        for x in (-1.5, 0.0, 0.8):
            z = z_quadrature_oracle(pair, np.array([x]))
            assert z == pytest.approx(np.sqrt(np.pi) * np.exp(-x * x / 4.0), rel=1e-8)

    def test_preset_normalizers_finite(self, preset_d2, preset_d1):
        rng = np.random.default_rng(22)
        for pair, probes in ((preset_d1, 10), (preset_d2, 4)):
            for _ in range(probes):
                x = rng.normal(scale=0.5, size=pair.dim)
                assert np.isfinite(log_z_quadrature_oracle(pair, x, rel_tol=1e-7))
