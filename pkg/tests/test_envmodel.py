import numpy as np
import pytest

from dare.envmodel import (EnvironmentSpec, EnvPrior, GroundTruth, LabeledDataset,
                           example1_family, gen_environment, gen_environments, logistic_noise,
                           sample_env_params, sample_residuals)
from dare.matops import sqrt_psd


def test_class_balance_symmetric():
    d = 4
    ds = gen_environment(EnvironmentSpec(np.eye(d), np.zeros(d), "rademacher"),
                         GroundTruth(np.ones(d)), 100_000, "classify", seed=0)
    assert abs(ds.y.mean() - 0.5) <= 0.01


def test_mean_shift():
    d = 3
    b = np.eye(d)[0]
    ds = gen_environment(EnvironmentSpec(np.eye(d), b), GroundTruth(np.ones(d)), 100_000, seed=1)
    assert np.all(np.abs(ds.X.mean(axis=0) - b) <= 0.02)


def test_regression_covariance():
    A = np.diag([2.0, 1.0])
    ds = gen_environment(EnvironmentSpec(A, np.zeros(2)), GroundTruth([1.0, -1.0]), 100_000,
                         "regress", seed=2)
    assert np.linalg.norm(np.cov(ds.X.T, bias=True) - A @ A.T, 2) <= 0.05


def test_regression_targets_follow_linear_law():
    d = 5
    rng = np.random.default_rng(3)
    A = sqrt_psd(np.cov(rng.standard_normal((d, 3 * d))))
    truth = GroundTruth(rng.standard_normal(d), noise_std=0.1)
    ds, eps = gen_environment(EnvironmentSpec(A, rng.standard_normal(d)), truth, 50_000,
                              "regress", seed=4, return_latents=True)
    np.testing.assert_allclose(ds.X, eps @ A.T)
    resid = ds.y - eps @ truth.beta_star
    assert abs(resid.std() - 0.1) < 0.005 and abs(resid.mean()) < 0.005


@pytest.mark.parametrize("law", ["standard-gaussian", "rademacher", "uniform-symmetric"])
def test_residual_moments(law):
    Z = sample_residuals(law, 200_000, 4, np.random.default_rng(5))
    assert np.abs(Z.mean(axis=0)).max() < 4 / np.sqrt(200_000) * 3
    assert np.linalg.norm(np.cov(Z.T, bias=True) - np.eye(4), 2) < 0.02


def test_logistic_noise_distribution():
    eta = logistic_noise(400_000, np.random.default_rng(6))
    # logistic: mean 0, variance pi^2/3
    assert abs(eta.mean()) < 0.02
    assert abs(eta.var() - np.pi ** 2 / 3) < 0.05


@pytest.mark.slow
def test_logit_linearity():
    # binned empirical log-odds against beta*^T eps should have slope 1
    d = 3
    truth = GroundTruth(np.array([1.0, 0.5, -0.5]))
    ds, eps = gen_environment(EnvironmentSpec(np.eye(d), np.zeros(d)), truth, 1_000_000,
                              seed=7, return_latents=True)
    s = eps @ truth.beta_star
    edges = np.linspace(-2.5, 2.5, 21)
    idx = np.digitize(s, edges)
    xs, ls = [], []
    for k in range(1, len(edges)):
        m = idx == k
        p = ds.y[m].mean()
        xs.append(s[m].mean())
        ls.append(np.log(p / (1 - p)))
    slope = np.polyfit(xs, ls, 1)[0]
    assert abs(slope - 1.0) <= 0.05


def test_same_seed_same_bytes():
    spec = EnvironmentSpec(np.eye(3), np.ones(3))
    truth = GroundTruth(np.ones(3))
    a = gen_environment(spec, truth, 100, seed=11)
    b = gen_environment(spec, truth, 100, seed=11)
    assert a.X.tobytes() == b.X.tobytes() and a.y.tobytes() == b.y.tobytes()


def test_gen_environments_seeds_by_index():
    specs = [EnvironmentSpec(np.eye(2), np.zeros(2))] * 2
    truth = GroundTruth([1.0, 0.0])
    a, b = gen_environments(specs, truth, 50, seed=3)
    np.testing.assert_array_equal(b.X, gen_environment(specs[1], truth, 50, seed=4).X)
    assert (a.env_id, b.env_id) == ("0", "1")


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        gen_environment(EnvironmentSpec(np.eye(3), np.zeros(3)), GroundTruth(np.ones(2)), 10)


def test_dataset_validation():
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((3, 2)), [0, 1, 2], n_classes=2)
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((3, 2)), [0, 1])
    with pytest.raises(ValueError):
        GroundTruth(np.zeros(3))


# prior sampling

def test_zero_prior_gives_zero_means():
    envs = sample_env_params(EnvPrior(np.zeros((3, 3))), None, 5, seed=0)
    assert all(np.all(e.b == 0) for e in envs)
    assert all(np.array_equal(e.A, np.eye(3)) for e in envs)


def test_prior_moments():
    envs = sample_env_params(EnvPrior(np.diag([0.0, 1.0])), None, 10_000, seed=1)
    B = np.array([e.b for e in envs])
    assert np.all(B[:, 0] == 0.0)
    assert abs(B[:, 1].var() - 1.0) <= 0.05


def test_two_draws_span_rank_two_prior():
    rng = np.random.default_rng(2)
    Q, _ = np.linalg.qr(rng.standard_normal((5, 2)))
    prior = EnvPrior(Q @ Q.T)
    B = np.array([e.b for e in sample_env_params(prior, np.eye(5), 2, seed=9)]).T
    assert np.linalg.matrix_rank(B) == 2
    np.testing.assert_allclose(Q @ Q.T @ B, B, atol=1e-12)


def test_prior_span_condition():
    with pytest.raises(ValueError):
        EnvPrior(np.diag([1.0, 0.0]), invariant_projector=np.eye(2))
    prior = EnvPrior(np.diag([1.0, 0.0]))
    np.testing.assert_allclose(prior.invariant_projector, np.diag([0.0, 1.0]), atol=1e-15)


# block family

def test_example1_identical_blocks():
    specs = example1_family(2, 2, np.eye(2), [np.eye(2)] * 3)
    assert all(np.array_equal(s.A, specs[0].A) for s in specs)


def test_example1_scalar_roots():
    specs = example1_family(1, 1, np.array([[4.0]]), [np.array([[1.0]]), np.array([[9.0]])])
    np.testing.assert_allclose(specs[0].A, np.diag([2.0, 1.0]))
    np.testing.assert_allclose(specs[1].A, np.diag([2.0, 3.0]))


def test_example1_shared_block(rng):
    d1, d2 = 3, 4
    G = rng.standard_normal((d1, d1))
    covs = [(lambda H: H @ H.T)(rng.standard_normal((d2, d2))) for _ in range(4)]
    specs = example1_family(d1, d2, G @ G.T, covs)
    Pi = np.diag(np.r_[np.ones(d1), np.zeros(d2)])
    for s, c in zip(specs, covs):
        np.testing.assert_allclose(Pi @ s.A @ Pi, Pi @ specs[0].A @ Pi)
        np.testing.assert_allclose(s.A[d1:, d1:] @ s.A[d1:, d1:], c, atol=1e-9)


def test_example1_rejects_non_psd():
    with pytest.raises(ValueError):
        example1_family(1, 1, np.eye(1), [np.array([[-1.0]])])
