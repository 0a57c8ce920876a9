import json

import numpy as np
import pytest
from scipy import linalg

from errors import NumericalDomainError, SampleSizeError, ShapeError
from evaluation import (
    DISCLAIMER,
    GaussianFit,
    MetricsReport,
    evaluate_model,
    fit_gaussian,
    frechet_distance,
    matrix_sqrt_psd,
    split_half_frechet,
)
from imaging import synth_dataset
from pipeline import prepare_features
from training import TrainConfig, train


def fit_1d(mean, var):
    return GaussianFit(np.array([mean]), np.array([[var]]), 2)


def test_two_point_fit():
    fit = fit_gaussian(np.array([[0.0, 0.0], [2.0, 0.0]]))
    np.testing.assert_array_equal(fit.mean, [1.0, 0.0])
    np.testing.assert_array_equal(fit.covariance, [[2.0, 0.0], [0.0, 0.0]])


def test_identical_samples_have_zero_covariance():
    fit = fit_gaussian(np.ones((5, 3)))
    assert np.all(fit.covariance == 0.0)


def test_standard_normal_covariance_near_identity(rng):
    fit = fit_gaussian(rng.standard_normal((1000, 3)))
    assert np.max(np.abs(fit.covariance - np.eye(3))) < 0.15


def test_fit_needs_two_samples():
    with pytest.raises(SampleSizeError):
        fit_gaussian(np.zeros((1, 3)))


@pytest.mark.parametrize("matrix, expected", [(np.eye(3), np.eye(3)), (np.diag([4.0, 9.0]), np.diag([2.0, 3.0]))])
def test_sqrt_closed_forms(matrix, expected):
    np.testing.assert_allclose(matrix_sqrt_psd(matrix), expected, atol=1e-12)


def test_sqrt_of_random_spd_matches_oracle(rng):
    for _ in range(10):
        b = rng.normal(size=(6, 6))
        a = b @ b.T
        root = matrix_sqrt_psd(a)
        assert np.linalg.norm(root @ root - a) / np.linalg.norm(a) <= 1e-8
        np.testing.assert_allclose(root, np.real(linalg.sqrtm(a)), atol=1e-8)


def test_sqrt_rejects_indefinite_and_asymmetric():
    with pytest.raises(NumericalDomainError):
        matrix_sqrt_psd(np.diag([1.0, -1.0]))
    with pytest.raises(NumericalDomainError):
        matrix_sqrt_psd(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_identical_fits_have_zero_distance(rng):
    b = rng.normal(size=(5, 5))
    fit = GaussianFit(rng.normal(size=5), b @ b.T + np.eye(5), 10)
    assert frechet_distance(fit, fit) <= 1e-10


@pytest.mark.parametrize("a, b, expected", [((0.0, 1.0), (1.0, 1.0), 1.0), ((0.0, 4.0), (0.0, 1.0), 1.0)])
def test_one_dimensional_closed_form(a, b, expected):
    assert abs(frechet_distance(fit_1d(*a), fit_1d(*b)) - expected) <= 1e-9


def test_one_dimensional_arbitrary_fits(rng):
    for _ in range(20):
        m1, m2 = rng.normal(size=2)
        v1, v2 = rng.uniform(0.5, 2.0, size=2)
        expected = (m1 - m2) ** 2 + (np.sqrt(v1) - np.sqrt(v2)) ** 2
        assert abs(frechet_distance(fit_1d(m1, v1), fit_1d(m2, v2)) - expected) <= 1e-9


def test_symmetry_and_scipy_oracle(rng):
    a = fit_gaussian(rng.normal(size=(50, 4)))
    b = fit_gaussian(rng.normal(1.0, 2.0, size=(50, 4)))
    forward, backward = frechet_distance(a, b), frechet_distance(b, a)
    assert abs(forward - backward) <= 1e-8
    diff = a.mean - b.mean
    oracle = diff @ diff + np.trace(a.covariance + b.covariance - 2 * np.real(linalg.sqrtm(a.covariance @ b.covariance)))
    assert abs(forward - oracle) <= 1e-6


def test_dimension_mismatch():
    with pytest.raises(ShapeError):
        frechet_distance(fit_1d(0.0, 1.0), GaussianFit(np.zeros(2), np.eye(2), 2))


def test_split_half_is_small_relative_to_noise(rng):
    real = rng.normal(0.5, 0.1, size=(2000, 3))
    noise = rng.uniform(0, 1, size=(1000, 3))
    baseline = split_half_frechet(real, rng)
    versus_noise = frechet_distance(fit_gaussian(real), fit_gaussian(noise))
    assert baseline <= 0.05 * versus_noise
    with pytest.raises(SampleSizeError):
        split_half_frechet(real[:3], rng)


def test_report_json_round_trip():
    report = MetricsReport(frechet=0.25, n_samples=64, space="features", seed=3, checkpoint_epoch=7,
                           config_hash="abc", per_class={"healthy": 0.2})
    data = json.loads(report.to_json())
    assert list(data)[0] == "disclaimer"
    assert data["disclaimer"] == DISCLAIMER
    for key in ("frechet", "n_samples", "space", "seed", "checkpoint_epoch"):
        assert key in data
    assert MetricsReport.from_json(report.to_json()) == report


def test_untrained_generator_is_worse_than_split_half():
    dataset = synth_dataset("two-blobs", 256, 8, np.random.default_rng(0))
    config = TrainConfig(n_subgens=2, n_qubits=5, depth=6, epochs=0, eval_samples=64)
    pca, features = prepare_features(dataset, config.n_features, config.he_enabled)
    untrained = next(train(features, config, pca, wall_clock=False))
    assert untrained.epoch == 0

    report = evaluate_model(untrained, dataset, 512)
    assert report.baseline is not None
    assert report.frechet > report.baseline
