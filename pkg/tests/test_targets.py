"""Target densities against independent oracles (scipy implementations,
finite differences, and hand-computed constants) plus the data loaders."""

import json
import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import expit, logsumexp

from lfis.errors import ConfigError
from lfis.targets import (Funnel, GaussianMixture, GaussianPrior,
                          IsotropicGaussian, LogGaussianCoxProcess,
                          LogisticRegression, ScaledTarget, StandardNormal,
                          lgcp_synthetic_counts, load_lgcp_json, load_uci_csv,
                          make_logistic_data, save_lgcp_json,
                          save_logistic_csv)


def fd_score(target, X, h=1e-6):
    fd = np.zeros_like(X)
    for j in range(X.shape[1]):
        Xp = X.copy(); Xp[:, j] += h
        Xm = X.copy(); Xm[:, j] -= h
        fd[:, j] = (target.log_density(Xp) - target.log_density(Xm)) / (2 * h)
    return fd


def all_targets():
    return [
        ("std-normal", StandardNormal(3)),
        ("iso-gauss", IsotropicGaussian(2, 2.0)),
        ("mixture-full", GaussianMixture.grid(dim=2)),
        ("mixture-1ax", GaussianMixture.grid(dim=2, mode_normalizer="single-axis")),
        ("funnel", Funnel(dim=4)),
        ("scaled", ScaledTarget(StandardNormal(2), 3.7)),
    ]


@pytest.mark.parametrize("name,target", all_targets(),
                         ids=[n for n, _ in all_targets()])
def test_score_matches_finite_difference(name, target, rng):
    X = rng.standard_normal((25, target.dim)) * 0.8
    np.testing.assert_allclose(target.score(X), fd_score(target, X),
                               rtol=2e-5, atol=2e-6)


@pytest.mark.parametrize("name,target", all_targets(),
                         ids=[n for n, _ in all_targets()])
def test_log_density_and_score_consistent(name, target, rng):
    X = rng.standard_normal((10, target.dim)) * 0.8
    ld, sc = target.log_density_and_score(X)
    np.testing.assert_array_equal(ld, target.log_density(X))
    np.testing.assert_array_equal(sc, target.score(X))


def test_standard_normal_is_normalized(rng):
    t = StandardNormal(3)
    x0 = np.zeros((1, 3))
    assert t.log_density(x0)[0] == pytest.approx(-1.5 * math.log(2 * math.pi))
    X = t.sample(60_000, rng)
    assert np.abs(X.mean(axis=0)).max() < 0.03
    assert np.abs(X.std(axis=0) - 1.0).max() < 0.03


def test_isotropic_gaussian_is_unnormalized_with_known_normalizer(rng):
    t = IsotropicGaussian(2, 2.0)
    assert t.log_density(np.zeros((1, 2)))[0] == 0.0
    assert t.log_norm == pytest.approx(2 * math.log(2.0 * math.sqrt(2 * math.pi)))
    X = t.sample(50_000, rng)
    assert np.abs(X.std(axis=0) - 2.0).max() < 0.04


def test_mixture_against_scipy(rng):
    mix = GaussianMixture.grid(dim=2, variance=0.012)
    X = rng.uniform(-1.5, 1.5, size=(50, 2))
    ref = logsumexp(
        np.stack([np.log(w) + stats.multivariate_normal(c, 0.012 * np.eye(2)).logpdf(X)
                  for w, c in zip(mix.weights, mix.centers)], axis=1),
        axis=1)
    np.testing.assert_allclose(mix.log_density(X), ref, rtol=1e-10)


def test_mixture_grid_layout():
    mix = GaussianMixture.grid(dim=2)
    assert mix.centers.shape == (9, 2)
    assert sorted(map(tuple, mix.centers)) == sorted(
        (a, b) for a in (-1.0, 0.0, 1.0) for b in (-1.0, 0.0, 1.0))
    assert np.allclose(mix.weights, 1.0 / 9)


def test_mixture_normalizer_conventions():
    full = GaussianMixture.grid(dim=2, variance=0.012)
    oneax = GaussianMixture.grid(dim=2, variance=0.012,
                                 mode_normalizer="single-axis")
    assert full.log_norm == 0.0
    # leaving out one axis normalization per mode leaves
    # (D-1)/2 * log(2 pi s^2) unnormalized: 0.5*log(2*pi*0.012) = -1.2926
    assert oneax.log_norm == pytest.approx(-1.2926, abs=5e-4)
    X = np.array([[0.1, -0.2], [1.0, 1.0]])
    shift = oneax.log_density(X) - full.log_density(X)
    np.testing.assert_allclose(shift, 0.5 * math.log(2 * math.pi * 0.012),
                               rtol=1e-12)


def test_mixture_rejects_bad_weights():
    with pytest.raises(ConfigError):
        GaussianMixture([[0.0]], 1.0, weights=[0.5, 0.5])
    with pytest.raises(ConfigError):
        GaussianMixture([[0.0], [1.0]], 1.0, weights=[1.0, -1.0])
    with pytest.raises(ConfigError):
        GaussianMixture([[0.0]], 1.0, mode_normalizer="half")


def test_mixture_sample_hits_all_modes(rng):
    mix = GaussianMixture.grid(dim=2, variance=0.012)
    X = mix.sample(9000, rng)
    # nearest-center assignment: every mode should get roughly 1/9
    d2 = ((X[:, None, :] - mix.centers[None]) ** 2).sum(axis=2)
    counts = np.bincount(d2.argmin(axis=1), minlength=9)
    assert counts.min() > 800 and counts.max() < 1200


def test_funnel_against_scipy(rng):
    f = Funnel(dim=3)
    X = rng.standard_normal((40, 3))
    ref = (stats.norm(0, 3.0).logpdf(X[:, 0])
           + stats.norm(0, np.exp(0.5 * X[:, 0])[:, None]).logpdf(X[:, 1:]).sum(axis=1))
    np.testing.assert_allclose(f.log_density(X), ref, rtol=1e-10)


def test_funnel_sampler_matches_density(rng):
    f = Funnel(dim=5)
    X = f.sample(80_000, rng)
    assert X[:, 0].std() == pytest.approx(3.0, abs=0.05)
    # conditionally standardized coordinates must be standard normal
    z = X[:, 1:] / np.exp(0.5 * X[:, 0])[:, None]
    assert np.abs(z.mean(axis=0)).max() < 0.02
    assert np.abs(z.std(axis=0) - 1.0).max() < 0.02


def test_funnel_requires_two_dims():
    with pytest.raises(ConfigError):
        Funnel(dim=1)


def test_funnel_survives_extreme_negative_neck():
    f = Funnel(dim=3)
    X = np.array([[-800.0, 0.5, 0.5]])  # exp(-x0) overflows
    ld, sc = f.log_density_and_score(X)  # must not raise
    assert ld[0] == -np.inf
    assert not np.any(np.isnan(sc))


def test_scaled_target_shifts_log_density_only(rng):
    base = StandardNormal(2)
    scaled = ScaledTarget(base, -1.3)
    X = rng.standard_normal((12, 2))
    np.testing.assert_allclose(scaled.log_density(X), base.log_density(X) - 1.3)
    np.testing.assert_array_equal(scaled.score(X), base.score(X))
    np.testing.assert_array_equal(scaled.sample(5, np.random.default_rng(0)),
                                  base.sample(5, np.random.default_rng(0)))


def test_gaussian_prior_against_scipy(rng):
    A = rng.standard_normal((4, 4))
    cov = A @ A.T + 2.0 * np.eye(4)
    mean = rng.standard_normal(4)
    prior = GaussianPrior(mean, cov)
    X = rng.standard_normal((30, 4))
    ref = stats.multivariate_normal(mean, cov).logpdf(X)
    np.testing.assert_allclose(prior.log_density(X), ref, rtol=1e-10)
    np.testing.assert_allclose(prior.score(X), fd_score(prior, X),
                               rtol=2e-5, atol=2e-6)


def test_gaussian_prior_sampler_covariance(rng):
    cov = np.array([[2.0, 0.6], [0.6, 1.0]])
    prior = GaussianPrior(np.array([1.0, -2.0]), cov)
    X = prior.sample(120_000, rng)
    np.testing.assert_allclose(X.mean(axis=0), [1.0, -2.0], atol=0.02)
    np.testing.assert_allclose(np.cov(X.T), cov, atol=0.04)


def test_logistic_log_lik_by_hand():
    # two rows, one feature plus intercept, checked against the direct
    # Bernoulli log-likelihood at a fixed weight vector
    feats = np.array([[2.0, 1.0], [-1.0, 1.0]])
    labels = np.array([1.0, 0.0])
    lr = LogisticRegression(feats, labels)
    beta = np.array([[0.3, -0.2]])
    z = feats @ beta[0]
    expected = math.log(expit(z[0])) + math.log(1.0 - expit(z[1]))
    assert lr.log_lik(beta)[0] == pytest.approx(expected, rel=1e-12)


def test_logistic_score_matches_finite_difference(rng):
    U = rng.standard_normal((40, 3))
    y = (rng.random(40) < 0.5).astype(float)
    feats = np.hstack([U, np.ones((40, 1))])
    lr = LogisticRegression(feats, y)
    X = rng.standard_normal((8, 4)) * 0.5

    class _AsDensity:
        dim = 4
        log_density = staticmethod(lr.log_lik)

    np.testing.assert_allclose(lr.score_lik(X), fd_score(_AsDensity(), X),
                               rtol=2e-5, atol=2e-6)


def test_logistic_validates_inputs():
    with pytest.raises(ConfigError):
        LogisticRegression(np.zeros((3, 2)), np.array([0.0, 1.0]))
    with pytest.raises(ConfigError):
        LogisticRegression(np.zeros((2, 2)), np.array([0.0, 2.0]))


def test_lgcp_kernel_and_mean():
    m = 3
    lg = LogGaussianCoxProcess(m, np.zeros(9))
    K = lg.prior.cov
    assert K.shape == (9, 9)
    np.testing.assert_allclose(np.diag(K), 1.91)
    # neighbours (0,0) and (0,1) are distance 1 apart on the integer grid
    expected = 1.91 * math.exp(-1.0 / (m / 33.0))
    assert K[0, 1] == pytest.approx(expected, rel=1e-12)
    # cells are row-major: index 3 is (1,0), also distance 1 from (0,0)
    assert K[0, 3] == pytest.approx(expected, rel=1e-12)
    assert K[0, 4] == pytest.approx(1.91 * math.exp(-math.sqrt(2) / (m / 33.0)),
                                    rel=1e-12)
    assert lg.prior.mean[0] == pytest.approx(math.log(126.0) - 1.91)
    assert lg.alpha == pytest.approx(1.0 / 9.0)


def test_lgcp_log_lik_by_hand():
    lg = LogGaussianCoxProcess(2, np.array([1, 0, 2, 0]))
    x = np.array([[0.1, -0.2, 0.3, 0.4]])
    expected = (0.1 * 1 + 0.3 * 2) - 0.25 * np.sum(np.exp(x[0]))
    assert lg.log_lik(x)[0] == pytest.approx(expected, rel=1e-12)


def test_lgcp_score_matches_finite_difference(rng):
    lg = LogGaussianCoxProcess(2, np.array([1, 0, 2, 0]))
    X = rng.standard_normal((6, 4))

    class _AsDensity:
        dim = 4
        log_density = staticmethod(lg.log_lik)

    np.testing.assert_allclose(lg.score_lik(X), fd_score(_AsDensity(), X),
                               rtol=2e-5, atol=2e-6)


def test_lgcp_validates_counts():
    with pytest.raises(ConfigError):
        LogGaussianCoxProcess(2, np.zeros(3))
    with pytest.raises(ConfigError):
        LogGaussianCoxProcess(2, np.array([1, -1, 0, 0]))
    with pytest.raises(ConfigError):
        LogGaussianCoxProcess(2, np.array([1.5, 0, 0, 0]))


def test_lgcp_synthetic_counts_reproducible():
    c1, l1 = lgcp_synthetic_counts(4, seed=9)
    c2, l2 = lgcp_synthetic_counts(4, seed=9)
    np.testing.assert_array_equal(c1, c2)
    np.testing.assert_array_equal(l1, l2)
    assert c1.shape == (16,) and np.all(c1 >= 0)
    c3, _ = lgcp_synthetic_counts(4, seed=10)
    assert not np.array_equal(c1, c3)


def test_lgcp_json_round_trip(tmp_path):
    counts, _ = lgcp_synthetic_counts(3, seed=2)
    fp = tmp_path / "counts.json"
    save_lgcp_json(fp, 3, counts, seed=2)
    lg = load_lgcp_json(fp)
    assert lg.grid_size == 3
    np.testing.assert_array_equal(lg.counts, counts)
    doc = json.loads(fp.read_text())
    assert doc["seed"] == 2


def test_lgcp_json_rejects_malformed(tmp_path):
    fp = tmp_path / "bad.json"
    fp.write_text('{"grid": 3}')
    with pytest.raises(ConfigError):
        load_lgcp_json(fp)
    fp.write_text("not json")
    with pytest.raises(ConfigError):
        load_lgcp_json(fp)


def test_make_logistic_data_shapes():
    X, y = make_logistic_data(50, 4, seed=3)
    assert X.shape == (50, 4) and y.shape == (50,)
    assert set(np.unique(y)) <= {0, 1}
    X2, y2 = make_logistic_data(50, 4, seed=3)
    np.testing.assert_array_equal(X, X2)
    np.testing.assert_array_equal(y, y2)


def test_logistic_csv_round_trip(tmp_path):
    X, y = make_logistic_data(30, 3, seed=4)
    fp = tmp_path / "data.csv"
    save_logistic_csv(fp, X, y)
    lr = load_uci_csv(fp)
    assert lr.features.shape == (30, 4)  # 3 standardized + intercept
    np.testing.assert_array_equal(lr.labels, y.astype(float))
    np.testing.assert_allclose(lr.features[:, :3].mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(lr.features[:, :3].std(axis=0), 1.0, rtol=1e-12)
    np.testing.assert_array_equal(lr.features[:, 3], np.ones(30))


def test_load_uci_csv_header_and_string_labels(tmp_path):
    fp = tmp_path / "toy.csv"
    fp.write_text("a,b,class\n"
                  "1.0,2.0,good\n"
                  "2.0,1.0,bad\n"
                  "3.0,3.0,good\n")
    lr = load_uci_csv(fp)
    # sorted label order: 'bad' -> 0, 'good' -> 1
    np.testing.assert_array_equal(lr.labels, [1.0, 0.0, 1.0])
    assert lr.features.shape == (3, 3)


def test_load_uci_csv_constant_column_guard(tmp_path):
    fp = tmp_path / "toy.csv"
    fp.write_text("1.0,7.0,1\n2.0,7.0,0\n3.0,7.0,1\n")
    lr = load_uci_csv(fp)
    assert np.all(np.isfinite(lr.features))
    np.testing.assert_array_equal(lr.features[:, 1], np.zeros(3))


def test_load_uci_csv_errors(tmp_path):
    fp = tmp_path / "bad.csv"
    fp.write_text("1.0,2.0,1\n1.0,0\n")
    with pytest.raises(ConfigError, match="row 1"):
        load_uci_csv(fp)
    # row 0 is fully numeric so there is no header; the bad cell in row 1
    # must surface as a data error, not be mistaken for a header
    fp.write_text("1.0,2.0,1\n2.0,x,0\n")
    with pytest.raises(ConfigError, match="non-numeric"):
        load_uci_csv(fp)
    fp.write_text("1.0,2.0,1\n2.0,3.0,2\n3.0,1.0,0\n")
    with pytest.raises(ConfigError, match="two label"):
        load_uci_csv(fp)
    fp.write_text("")
    with pytest.raises(ConfigError, match="empty"):
        load_uci_csv(fp)
    with pytest.raises(ConfigError):
        load_uci_csv(tmp_path / "missing.csv")
