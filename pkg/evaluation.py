"""
Fréchet distance between Gaussian fits of real and generated samples, plus
the metrics report written by the evaluate command.
"""

from __future__ import annotations

import dataclasses
import json
from datetime import datetime, timezone

import numpy as np
from scipy import linalg

from config import logger
from errors import NumericalDomainError, SampleSizeError, ShapeError

DIAGONAL_JITTER = 1e-10
PSD_TOLERANCE = 1e-8
DISCLAIMER = (
    "Fréchet distance computed over this toolkit's own scaled PCA feature space "
    "(or reconstructed pixel space), not Inception-v3 activations; values are not "
    "comparable to published FID scores."
)


@dataclasses.dataclass(frozen=True)
class GaussianFit:
    mean: np.ndarray
    covariance: np.ndarray
    sample_count: int

    @property
    def dim(self):
        return self.mean.shape[0]


@dataclasses.dataclass
class MetricsReport:
    frechet: float
    n_samples: int
    space: str
    seed: int
    checkpoint_epoch: int
    config_hash: str = ""
    timestamp: str = ""
    per_class: dict | None = None
    baseline: float | None = None
    disclaimer: str = DISCLAIMER

    def to_dict(self):
        # disclaimer leads so it heads every serialised report
        body = dataclasses.asdict(self)
        return {"disclaimer": body.pop("disclaimer"), **body}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def fit_gaussian(samples):
    """Sample mean and unbiased (n - 1) covariance of an (n, k) matrix."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    n = samples.shape[0]
    if n < 2:
        raise SampleSizeError(f"a Gaussian fit needs at least 2 samples, got {n}")
    mean = samples.mean(axis=0)
    centered = samples - mean
    covariance = centered.T @ centered / (n - 1)
    covariance = (covariance + covariance.T) / 2.0
    return GaussianFit(mean, covariance, n)


def matrix_sqrt_psd(matrix):
    """Principal square root of a symmetric PSD matrix via eigendecomposition."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {matrix.shape}")
    scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
    if np.max(np.abs(matrix - matrix.T), initial=0.0) > PSD_TOLERANCE * scale:
        raise NumericalDomainError("matrix is not symmetric")
    eigvals, eigvecs = linalg.eigh((matrix + matrix.T) / 2.0)
    if eigvals.size and eigvals.min() < -PSD_TOLERANCE * max(1.0, float(np.max(np.abs(eigvals)))):
        raise NumericalDomainError(f"matrix is not positive semidefinite (eigenvalue {eigvals.min():.3e})")
    root = np.sqrt(np.clip(eigvals, 0.0, None))
    return (eigvecs * root) @ eigvecs.T


def frechet_distance(real, fake):
    """
    ||mu_r - mu_g||^2 + Tr(S_r + S_g - 2 (S_r S_g)^(1/2)).

    The cross term uses the similar symmetric form sqrt(S_r) S_g sqrt(S_r), and
    both covariances carry a 1e-10 diagonal jitter.
    """
    if real.dim != fake.dim:
        raise ShapeError(f"Gaussian fits have dimensions {real.dim} and {fake.dim}")
    jitter = DIAGONAL_JITTER * np.eye(real.dim)
    sigma_r = real.covariance + jitter
    sigma_g = fake.covariance + jitter

    root_r = matrix_sqrt_psd(sigma_r)
    product = root_r @ sigma_g @ root_r
    cross = np.trace(matrix_sqrt_psd((product + product.T) / 2.0))

    diff = real.mean - fake.mean
    value = float(diff @ diff + np.trace(sigma_r) + np.trace(sigma_g) - 2.0 * cross)
    if value < -PSD_TOLERANCE:
        logger.warning(f"Fréchet distance came out negative ({value:.3e}); clamping to 0")
    return max(value, 0.0)


def split_half_frechet(samples, rng):
    """Real-vs-real baseline: distance between two random halves of the same sample."""
    samples = np.asarray(samples, dtype=np.float64)
    if len(samples) < 4:
        raise SampleSizeError(f"split-half baseline needs at least 4 samples, got {len(samples)}")
    order = rng.permutation(len(samples))
    half = len(samples) // 2
    return frechet_distance(fit_gaussian(samples[order[:half]]), fit_gaussian(samples[order[half:2 * half]]))


def _real_and_fake(checkpoint, dataset, n_samples, space, rng):
    from features import inverse_transform, scale_scores, transform, unscale_scores
    from imaging import dataset_pixels
    from training import sample_features

    pca = checkpoint.pca
    real_pixels = dataset_pixels(dataset, checkpoint.config.he_enabled)
    if real_pixels.shape[1] != pca.n_pixels:
        raise ShapeError(f"dataset images have {real_pixels.shape[1]} pixels, checkpoint PCA expects {pca.n_pixels}")
    fake = sample_features(checkpoint.generator, n_samples, rng)
    if space == "features":
        return scale_scores(pca, transform(pca, real_pixels)), fake
    if space == "pixels":
        return real_pixels, inverse_transform(pca, unscale_scores(pca, fake), clamp=True)
    raise ShapeError(f"unknown evaluation space {space!r}")


def evaluate_model(checkpoint, dataset, n_samples, space="features", seed=None, per_class=None):
    """
    Fréchet distance between the real dataset and n_samples generated vectors.

    Args:
        checkpoint: Trained Checkpoint (generator, PCA and config).
        dataset: Real images the checkpoint was trained on.
        n_samples: Number of generated samples (>= 2).
        space: "features" (scaled PCA scores) or "pixels" (reconstructed images).
        seed: Sampling seed; defaults to the checkpoint's training seed.
        per_class: Optional {label: Dataset} for a per-class breakdown.
    """
    if n_samples < 2:
        raise SampleSizeError(f"evaluation needs at least 2 generated samples, got {n_samples}")
    seed = checkpoint.config.seed if seed is None else seed
    rng = np.random.default_rng(seed)

    real, fake = _real_and_fake(checkpoint, dataset, n_samples, space, rng)
    frechet = frechet_distance(fit_gaussian(real), fit_gaussian(fake))
    baseline = split_half_frechet(real, rng) if len(real) >= 4 else None

    breakdown = None
    if per_class:
        breakdown = {}
        for label, class_dataset in per_class.items():
            class_rng = np.random.default_rng([seed, len(breakdown) + 1])
            class_real, class_fake = _real_and_fake(checkpoint, class_dataset, n_samples, space, class_rng)
            breakdown[label] = frechet_distance(fit_gaussian(class_real), fit_gaussian(class_fake))

    logger.info(f"Evaluated epoch {checkpoint.epoch} in {space} space: Fréchet {frechet:.6f}")
    return MetricsReport(
        frechet=frechet,
        n_samples=n_samples,
        space=space,
        seed=seed,
        checkpoint_epoch=checkpoint.epoch,
        config_hash=checkpoint.metadata.get("config_hash", ""),
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        per_class=breakdown,
        baseline=baseline,
    )
