"""Tests for exact multi-output GP posterior inference."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import dense_predict, random_kernel, random_trajectory

from adapal.errors import ConfigError, DomainError, InputError, NumericalError
from adapal.gp import GPPosterior, cholesky_with_jitter
from adapal.kernels import (
    SQUARED_EXPONENTIAL,
    MultiOutputKernel,
    ScalarKernel,
    prior_variances,
)


def se(variance: float = 1.0, lengthscale: float = 1.0) -> ScalarKernel:
    return ScalarKernel(
        family=SQUARED_EXPONENTIAL, variance=variance, lengthscale=lengthscale
    )


@pytest.fixture
def sim_kernel() -> MultiOutputKernel:
    return MultiOutputKernel(kernels=(se(0.5, 0.1), se(0.1, 0.06)))


def test_prior_prediction(sim_kernel) -> None:
    post = GPPosterior(kernel=sim_kernel, noise_var=1e-4)
    pred = post.predict(np.array([0.3]))
    assert pred.mean == pytest.approx([0.0, 0.0])
    assert pred.std == pytest.approx(np.sqrt([0.5, 0.1]))


def test_scalar_closed_form() -> None:
    """One evaluation, m=1, nu=1, noise 1: mean = y/2, var = 1/2."""
    kernel = MultiOutputKernel(kernels=(se(1.0, 0.5),))
    post = GPPosterior(kernel=kernel, noise_var=1.0)
    x = np.array([0.4])
    post = post.update(x, np.array([2.0]))
    pred = post.predict(x)
    assert pred.mean == pytest.approx([1.0], abs=1e-12)
    assert pred.std == pytest.approx([np.sqrt(0.5)], abs=1e-12)


def test_first_update_matches_one_block_solve(sim_kernel) -> None:
    post = GPPosterior(kernel=sim_kernel, noise_var=1e-2)
    x = np.array([0.7])
    y = np.array([0.3, -0.2])
    post = post.update(x, y)
    # k(x,x) (k(x,x) + noise I)^{-1} y, blockwise diagonal here
    nu = prior_variances(sim_kernel)
    expected = nu / (nu + 1e-2) * y
    assert post.predict(x).mean == pytest.approx(expected, abs=1e-10)


def test_far_point_reverts_to_prior(sim_kernel) -> None:
    post = GPPosterior(kernel=sim_kernel, noise_var=1e-4)
    post = post.update(np.array([0.0]), np.array([1.0, 1.0]))
    pred = post.predict(np.array([1.0]))  # 10-17 lengthscales away
    assert np.all(np.abs(pred.mean) < 1e-6)
    assert pred.std == pytest.approx(np.sqrt([0.5, 0.1]), abs=1e-6)


def test_repeat_evaluation_shrinks_variance(sim_kernel) -> None:
    post = GPPosterior(kernel=sim_kernel, noise_var=1e-3)
    x = np.array([0.25])
    y = np.array([0.1, 0.1])
    post1 = post.update(x, y)
    post2 = post1.update(x, y)
    assert np.all(post2.predict(x).std < post1.predict(x).std)


def test_colocated_variance_bound() -> None:
    """After n evaluations at the same x, sigma^2_j <= noise/n."""
    kernel = MultiOutputKernel(kernels=(se(0.5, 0.1), se(0.1, 0.06)))
    noise = 1e-2
    post = GPPosterior(kernel=kernel, noise_var=noise)
    x = np.array([0.6])
    for n in range(1, 6):
        post = post.update(x, np.array([0.2, -0.1]))
        var = post.predict(x).std ** 2
        assert np.all(var <= noise / n + 1e-12)


def test_update_is_immutable(sim_kernel) -> None:
    post0 = GPPosterior(kernel=sim_kernel, noise_var=1e-4)
    post1 = post0.update(np.array([0.5]), np.array([0.0, 0.0]))
    assert post0.tau == 0
    assert post1.tau == 1
    # the old posterior still predicts the prior
    assert post0.predict(np.array([0.5])).mean == pytest.approx([0.0, 0.0])


def test_non_finite_observation_rejected(sim_kernel) -> None:
    post = GPPosterior(kernel=sim_kernel, noise_var=1e-4)
    with pytest.raises(InputError):
        post.update(np.array([0.5]), np.array([np.nan, 0.0]))
    with pytest.raises(InputError):
        post.update(np.array([0.5]), np.array([np.inf, 0.0]))


def test_nonpositive_noise_rejected(sim_kernel) -> None:
    with pytest.raises(ConfigError):
        GPPosterior(kernel=sim_kernel, noise_var=0.0)


def test_posterior_std_never_exceeds_prior(sim_kernel) -> None:
    rng = np.random.default_rng(3)
    post = GPPosterior(kernel=sim_kernel, noise_var=1e-3)
    for _ in range(15):
        post = post.update(rng.uniform(0, 1, size=1), rng.normal(size=2))
    prior_std = np.sqrt(prior_variances(sim_kernel))
    for x in rng.uniform(0, 1, size=(30, 1)):
        assert np.all(post.predict(x).std <= prior_std + 1e-8)


def test_predict_batch_matches_pointwise(sim_kernel) -> None:
    rng = np.random.default_rng(11)
    post = GPPosterior(kernel=sim_kernel, noise_var=1e-4)
    for _ in range(7):
        post = post.update(rng.uniform(0, 1, size=1), rng.normal(size=2))
    Xs = rng.uniform(0, 1, size=(25, 1))
    means, stds = post.predict_batch(Xs)
    for i, x in enumerate(Xs):
        pred = post.predict(x)
        assert means[i] == pytest.approx(pred.mean, abs=1e-12)
        assert stds[i] == pytest.approx(pred.std, abs=1e-12)


class TestDenseEquivalence:
    """The incremental factorization against a from-scratch dense solve."""

    def test_fifty_random_trajectories(self) -> None:
        rng = np.random.default_rng(2024)
        for trial in range(50):
            m = int(rng.integers(1, 4))
            tau = int(rng.integers(1, 21))
            dim = int(rng.integers(1, 3))
            kernel = random_kernel(rng, m)
            noise = float(rng.uniform(1e-4, 1e-1))
            X, Y = random_trajectory(rng, tau, m, dim)
            post = GPPosterior(kernel=kernel, noise_var=noise)
            for s in range(tau):
                post = post.update(X[s], Y[s])
            for x in rng.uniform(0, 1, size=(3, dim)):
                mean, std = dense_predict(kernel, noise, X, Y, x)
                pred = post.predict(x)
                assert np.allclose(pred.mean, mean, rtol=1e-8, atol=1e-10), trial
                assert np.allclose(pred.std, std, rtol=1e-8, atol=1e-10), trial

    def test_mixed_structure_small_case(self) -> None:
        r = np.sqrt(0.5)
        kernel = MultiOutputKernel(
            kernels=(se(1.0, 0.3), se(0.7, 0.2)),
            mixing=np.array([[1.0, 0.0], [r, r]]),
        )
        rng = np.random.default_rng(5)
        X, Y = random_trajectory(rng, 6, 2)
        post = GPPosterior(kernel=kernel, noise_var=1e-3)
        for s in range(6):
            post = post.update(X[s], Y[s])
        x = np.array([0.35])
        mean, std = dense_predict(kernel, 1e-3, X, Y, x)
        pred = post.predict(x)
        assert np.allclose(pred.mean, mean, rtol=1e-8, atol=1e-12)
        assert np.allclose(pred.std, std, rtol=1e-8, atol=1e-12)


class TestInformationGain:
    def test_single_unit_variance_design(self) -> None:
        kernel = MultiOutputKernel(kernels=(se(1.0, 0.1), se(1.0, 0.1)))
        post = GPPosterior(kernel=kernel, noise_var=1.0)
        post = post.update(np.array([0.5]), np.array([0.3, -0.7]))
        assert post.information_gain() == pytest.approx(np.log(2.0), abs=1e-10)

    def test_pure_noise_gains_nothing(self) -> None:
        kernel = MultiOutputKernel(kernels=(se(1.0, 0.1), se(1.0, 0.1)))
        post = GPPosterior(kernel=kernel, noise_var=1e8)
        post = post.update(np.array([0.5]), np.array([0.0, 0.0]))
        assert post.information_gain() == pytest.approx(0.0, abs=1e-6)

    def test_empty_trajectory_rejected(self) -> None:
        kernel = MultiOutputKernel(kernels=(se(), se()))
        with pytest.raises(DomainError):
            GPPosterior(kernel=kernel, noise_var=1.0).information_gain()

    def test_chain_rule_matches_global_logdet(self) -> None:
        from adapal.gp import prior_gram

        rng = np.random.default_rng(17)
        for _ in range(20):
            m = int(rng.integers(1, 4))
            tau = int(rng.integers(1, 13))
            kernel = random_kernel(rng, m)
            noise = float(rng.uniform(1e-3, 1.0))
            X, Y = random_trajectory(rng, tau, m)
            post = GPPosterior(kernel=kernel, noise_var=noise)
            for s in range(tau):
                post = post.update(X[s], Y[s])
            G = prior_gram(kernel, X)
            sign, logdet = np.linalg.slogdet(np.eye(m * tau) + G / noise)
            assert sign > 0
            assert post.information_gain() == pytest.approx(0.5 * logdet, abs=1e-6)

    def test_lower_bound_holds(self) -> None:
        rng = np.random.default_rng(23)
        for _ in range(20):
            m = int(rng.integers(1, 4))
            kernel = random_kernel(rng, m)
            post = GPPosterior(kernel=kernel, noise_var=float(rng.uniform(1e-3, 1.0)))
            X, Y = random_trajectory(rng, int(rng.integers(1, 10)), m)
            for s in range(len(X)):
                post = post.update(X[s], Y[s])
            assert post.information_gain() >= post.information_gain_lower_bound() - 1e-10


def test_jitter_ladder_recovers_singular_matrix() -> None:
    singular = np.array([[1.0, 1.0], [1.0, 1.0]])
    L, jitter = cholesky_with_jitter(singular, jitters=(0.0, 1e-10, 1e-8))
    assert jitter > 0.0
    assert np.allclose(L @ L.T, singular + jitter * np.eye(2))


def test_jitter_ladder_exhaustion_raises_with_level() -> None:
    indefinite = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3, -1
    with pytest.raises(NumericalError) as exc_info:
        cholesky_with_jitter(indefinite, jitters=(0.0, 1e-10))
    assert exc_info.value.jitter == 1e-10
