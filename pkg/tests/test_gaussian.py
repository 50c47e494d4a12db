import numpy as np
import pytest

from minreveal import data_io, gaussian
from conftest import random_psd


def _dataset_from_rows(rows):
    rows = np.asarray(rows, dtype=float)
    labels = np.zeros(len(rows), dtype=int)
    labels[0] = 1  # make two classes without affecting the prior
    names = [f"f{i}" for i in range(rows.shape[1])]
    # rows are already in [-1, 1]; identity normalization keeps them as-is
    return data_io.make_dataset(rows, labels, names,
                                norm_params=[(-1.0, 1.0)] * rows.shape[1])


def test_fit_prior_two_points():
    train = _dataset_from_rows([[1.0, 0.0], [-1.0, 0.0]])
    prior = gaussian.fit_prior(train)
    assert np.allclose(prior.mean, [0.0, 0.0])
    assert np.allclose(prior.cov, [[1.0, 0.0], [0.0, 0.0]])


def test_fit_prior_repeated_row_degenerate():
    train = _dataset_from_rows([[0.5, -0.25], [0.5, -0.25]])
    prior = gaussian.fit_prior(train)
    assert np.allclose(prior.cov, 0.0)


def test_fit_prior_population_normalizer():
    # 1/N covariance, not 1/(N-1)
    rows = np.array([[0.2], [0.4], [0.9]])
    prior = gaussian.fit_prior(_dataset_from_rows(rows))
    mu = rows.mean()
    expected = ((rows - mu) ** 2).sum() / 3.0
    assert np.isclose(prior.cov[0, 0], expected)


def test_fit_prior_recovers_known_gaussian():
    # sampling oracle: draw 1e5 points from a known 3-D Gaussian
    rng = np.random.default_rng(7)
    mean = np.array([0.1, -0.2, 0.05])
    cov = np.array([[0.04, 0.01, 0.0], [0.01, 0.09, -0.02], [0.0, -0.02, 0.05]])
    rows = rng.multivariate_normal(mean, cov, size=100_000)
    rows = np.clip(rows, -1.0, 1.0)  # stays well inside the box
    prior = gaussian.fit_prior(_dataset_from_rows(rows))
    assert np.abs(prior.mean - mean).max() <= 0.02
    assert np.abs(prior.cov - cov).max() <= 0.02


def test_condition_empty_revealed_is_marginal():
    rng = np.random.default_rng(0)
    prior = gaussian.GaussianPrior(rng.normal(size=4), random_psd(rng, 4))
    cond = gaussian.condition(prior, (), np.array([]), (1, 3))
    assert np.allclose(cond.mean, prior.mean[[1, 3]])
    assert np.allclose(cond.cov, prior.cov[np.ix_([1, 3], [1, 3])])


def test_condition_diagonal_independence():
    prior = gaussian.GaussianPrior(np.array([0.3, -0.1, 0.7]),
                                   np.diag([0.5, 0.2, 0.8]))
    cond = gaussian.condition(prior, (0,), np.array([0.9]), (1, 2), jitter=0.0)
    assert np.allclose(cond.mean, prior.mean[[1, 2]])
    assert np.allclose(cond.cov, np.diag([0.2, 0.8]))


def test_condition_matches_rejection_sampling_oracle():
    # condition X2 on X1 = 1 for mu 0, unit variances, correlation 0.5:
    # keep joint samples with |X1 - 1| < 0.05 and match their moments
    prior = gaussian.GaussianPrior(np.zeros(2), np.array([[1.0, 0.5], [0.5, 1.0]]))
    cond = gaussian.condition(prior, (0,), np.array([1.0]), (1,), jitter=0.0)

    rng = np.random.default_rng(11)
    joint = rng.multivariate_normal(prior.mean, prior.cov, size=2_000_000)
    kept = joint[np.abs(joint[:, 0] - 1.0) < 0.05, 1]
    assert kept.size > 10_000
    assert abs(cond.mean[0] - kept.mean()) <= 0.03
    assert abs(cond.cov[0, 0] - kept.var()) <= 0.03
    assert np.isclose(cond.mean[0], 0.5, atol=1e-12)
    assert np.isclose(cond.cov[0, 0], 0.75, atol=1e-12)


def test_condition_jitter_escalation_on_singular_block():
    # rank-one revealed block is singular; jitter keeps it solvable
    cov = np.array([[1.0, 1.0, 0.3], [1.0, 1.0, 0.3], [0.3, 0.3, 1.0]])
    prior = gaussian.GaussianPrior(np.zeros(3), cov)
    cond = gaussian.condition(prior, (0, 1), np.array([0.5, 0.5]), (2,))
    assert np.all(np.isfinite(cond.mean)) and np.all(np.isfinite(cond.cov))


def test_sample_zero_covariance_returns_mean():
    cond = gaussian.ConditionalGaussian((0, 1), np.array([0.2, -0.4]), np.zeros((2, 2)))
    draws = gaussian.sample(cond, 50, seed=3)
    assert np.allclose(draws, np.array([0.2, -0.4]))


def test_sample_law_of_large_numbers():
    cond = gaussian.ConditionalGaussian((0,), np.array([0.5]), np.array([[0.75]]))
    draws = gaussian.sample(cond, 100_000, seed=5)[:, 0]
    assert abs(draws.mean() - 0.5) <= 0.02
    assert abs(draws.var() - 0.75) <= 0.03


def test_sample_deterministic_under_seed():
    rng = np.random.default_rng(1)
    cond = gaussian.ConditionalGaussian((0, 1, 2), rng.normal(size=3), random_psd(rng, 3))
    a = gaussian.sample(cond, 100, seed=17)
    b = gaussian.sample(cond, 100, seed=17)
    assert np.array_equal(a, b)


def test_conditioning_never_raises_diagonal_variance():
    rng = np.random.default_rng(9)
    for _ in range(25):
        prior = gaussian.GaussianPrior(rng.normal(size=5), random_psd(rng, 5))
        rev = tuple(rng.choice(5, size=2, replace=False))
        tgt = tuple(i for i in range(5) if i not in rev)
        cond = gaussian.condition(prior, rev, rng.normal(size=2), tgt)
        prior_diag = np.diag(prior.cov)[list(tgt)]
        assert np.all(np.diag(cond.cov) <= prior_diag + 1e-8)


def test_conditioning_chains_consistently():
    rng = np.random.default_rng(13)
    for _ in range(10):
        prior = gaussian.GaussianPrior(rng.normal(size=5), random_psd(rng, 5) + 0.5 * np.eye(5))
        vals = rng.normal(size=2)
        # one shot: condition on {0, 1}
        direct = gaussian.condition(prior, (0, 1), vals, (2, 3, 4), jitter=0.0)
        # chained: condition on {0}, then treat the result as a prior over
        # (1, 2, 3, 4) and condition on the first coordinate
        step1 = gaussian.condition(prior, (0,), vals[:1], (1, 2, 3, 4), jitter=0.0)
        inner = gaussian.GaussianPrior(step1.mean, step1.cov)
        step2 = gaussian.condition(inner, (0,), vals[1:], (1, 2, 3), jitter=0.0)
        assert np.abs(step2.mean - direct.mean).max() <= 1e-6
        assert np.abs(step2.cov - direct.cov).max() <= 1e-6


def test_conditional_cov_symmetric():
    rng = np.random.default_rng(21)
    for _ in range(20):
        prior = gaussian.GaussianPrior(rng.normal(size=6), random_psd(rng, 6))
        cond = gaussian.condition(prior, (0, 2), rng.normal(size=2), (1, 3, 4, 5))
        assert np.abs(cond.cov - cond.cov.T).max() <= 1e-12


def test_prior_rejects_asymmetric_covariance():
    cov = np.array([[1.0, 0.2], [0.1, 1.0]])
    with pytest.raises(ValueError):
        gaussian.GaussianPrior(np.zeros(2), cov)


def test_fit_prior_needs_two_rows():
    class Stub:
        rows = np.array([[0.1, 0.2]])

    with pytest.raises(ValueError):
        gaussian.fit_prior(Stub())
