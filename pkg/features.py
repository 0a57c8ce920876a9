"""
PCA feature extraction over flattened images, global min-max scaling of the
scores, and the two feature-to-sub-generator assignments.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from errors import DegenerateDataError, DegenerateScaleError, RankError, ShapeError

CONVENTIONAL = "conventional"
BALANCED = "balanced"


@dataclasses.dataclass(frozen=True)
class PcaModel:
    """
    Fitted PCA state.

    Attributes:
        mean: (d,) pixel-space mean.
        axes: (k, d) principal directions, orthonormal rows.
        singular_values: (k,) nonincreasing.
        explained_variance_ratio: (k,) share of total variance per kept axis.
        pca_min, pca_max: global bounds of the training score matrix.
        full_variance_ratio: explained ratio over the whole spectrum, for threshold queries.
    """

    mean: np.ndarray
    axes: np.ndarray
    singular_values: np.ndarray
    explained_variance_ratio: np.ndarray
    pca_min: float
    pca_max: float
    full_variance_ratio: np.ndarray

    @property
    def n_components(self):
        return self.axes.shape[0]

    @property
    def n_pixels(self):
        return self.axes.shape[1]

    def cumulative_variance(self):
        return float(np.sum(self.explained_variance_ratio))


@dataclasses.dataclass(frozen=True)
class FeatureAssignment:
    """Which PCA feature indices each sub-generator produces, qubit by qubit."""

    subsets: tuple[tuple[int, ...], ...]
    mode: str

    def __post_init__(self):
        subsets = tuple(tuple(int(i) for i in s) for s in self.subsets)
        object.__setattr__(self, "subsets", subsets)
        if not subsets:
            raise ShapeError("assignment needs at least one sub-generator")
        width = len(subsets[0])
        if any(len(s) != width for s in subsets):
            raise ShapeError("every sub-generator must receive the same number of features")
        flat = sorted(i for s in subsets for i in s)
        if flat != list(range(len(flat))):
            raise ShapeError("assignment subsets must partition the feature indices exactly")

    @property
    def n_subgens(self):
        return len(self.subsets)

    @property
    def n_qubits(self):
        return len(self.subsets[0])

    @property
    def n_features(self):
        return self.n_subgens * self.n_qubits

    @property
    def flat_indices(self):
        """PCA index of raw output position s*n_qubits + q."""
        return np.array([i for s in self.subsets for i in s], dtype=np.int64)

    def to_pca_order(self, raw):
        """Places concatenated sub-generator outputs (..., F) at their PCA indices."""
        raw = np.asarray(raw)
        out = np.empty_like(raw)
        out[..., self.flat_indices] = raw
        return out

    def to_raw_order(self, values):
        """Inverse of to_pca_order."""
        return np.asarray(values)[..., self.flat_indices]


def _check_sizes(n_features, n_subgens, n_qubits):
    if n_subgens < 1 or n_qubits < 1 or n_features != n_subgens * n_qubits:
        raise ShapeError(
            f"{n_features} features cannot be split over {n_subgens} sub-generators "
            f"of {n_qubits} qubits"
        )


def conventional_assignment(n_features=40, n_subgens=8, n_qubits=5):
    """Sequential blocks: sub-generator i gets [i*n, ..., i*n + n - 1]."""
    _check_sizes(n_features, n_subgens, n_qubits)
    subsets = [tuple(range(i * n_qubits, (i + 1) * n_qubits)) for i in range(n_subgens)]
    return FeatureAssignment(tuple(subsets), CONVENTIONAL)


def balanced_assignment(n_features=40, n_subgens=8, n_qubits=5):
    """
    Gives sub-generator i the top component i, then deals the remaining
    components from the tail in blocks of n_qubits - 1, so sub-generator i
    also receives [F-1-i*(n-1), ..., F-(i+1)*(n-1)]. With the defaults this is
    {i, 39-4i, 38-4i, 37-4i, 36-4i}.
    """
    _check_sizes(n_features, n_subgens, n_qubits)
    block = n_qubits - 1
    subsets = []
    for i in range(n_subgens):
        start = n_features - 1 - i * block
        subsets.append((i,) + tuple(start - j for j in range(block)))
    return FeatureAssignment(tuple(subsets), BALANCED)


def make_assignment(mode, n_features, n_subgens, n_qubits):
    if mode == BALANCED:
        return balanced_assignment(n_features, n_subgens, n_qubits)
    if mode == CONVENTIONAL:
        return conventional_assignment(n_features, n_subgens, n_qubits)
    raise ShapeError(f"unknown assignment mode {mode!r}")


def fit_pca(data, k):
    """
    Fits PCA on an (n, d) matrix of [0, 1] pixel rows via a thin SVD.

    Each axis is sign-fixed so its largest-magnitude entry is positive.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ShapeError(f"PCA input must be a 2-D matrix, got shape {data.shape}")
    n, d = data.shape
    if n < 2:
        raise RankError(f"PCA needs at least 2 samples, got {n}")
    if not 1 <= k <= min(n - 1, d):
        raise RankError(f"k={k} outside [1, {min(n - 1, d)}] for a {n}x{d} matrix")

    mean = data.mean(axis=0)
    centered = data - mean
    _, sigma, vt = np.linalg.svd(centered, full_matrices=False)
    if sigma[0] <= 1e-12 * max(1.0, np.sqrt(n * d)):
        raise DegenerateDataError("all rows are identical; there is no variance to decompose")

    order = np.argsort(-sigma, kind="stable")
    sigma, vt = sigma[order], vt[order]

    axes = vt[:k].copy()
    pivots = np.argmax(np.abs(axes), axis=1)
    signs = np.sign(axes[np.arange(k), pivots])
    axes *= signs[:, None]

    power = sigma ** 2
    full_ratio = power / power.sum()
    scores = centered @ axes.T
    pca_min, pca_max = float(scores.min()), float(scores.max())
    if not pca_max > pca_min:
        raise DegenerateScaleError("training scores span a single value")

    return PcaModel(
        mean=mean,
        axes=axes,
        singular_values=sigma[:k].copy(),
        explained_variance_ratio=full_ratio[:k].copy(),
        pca_min=pca_min,
        pca_max=pca_max,
        full_variance_ratio=full_ratio,
    )


def components_for_variance(model, eta=0.98):
    """Smallest component count whose cumulative explained variance reaches eta."""
    cumulative = np.cumsum(model.full_variance_ratio)
    hits = np.nonzero(cumulative >= eta - 1e-12)[0]
    return int(hits[0]) + 1 if hits.size else len(cumulative)


def transform(model, data):
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != model.n_pixels:
        raise ShapeError(f"expected (n, {model.n_pixels}) data, got {data.shape}")
    return (data - model.mean) @ model.axes.T


def inverse_transform(model, scores, clamp=False):
    """scores @ axes + mean; clamp=True limits pixels to [0, 1] for image emission."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[1] != model.n_components:
        raise ShapeError(f"expected (n, {model.n_components}) scores, got {scores.shape}")
    pixels = scores @ model.axes + model.mean
    if clamp:
        pixels = np.clip(pixels, 0.0, 1.0)
    return pixels


def _span(model):
    span = model.pca_max - model.pca_min
    if not span > 0:
        raise DegenerateScaleError(f"pca_max ({model.pca_max}) must exceed pca_min ({model.pca_min})")
    return span


def scale_scores(model, scores):
    """Affine map of scores onto [0, 1] using the global training bounds."""
    return (np.asarray(scores, dtype=np.float64) - model.pca_min) / _span(model)


def unscale_scores(model, scaled):
    """Exact inverse of scale_scores; values outside [0, 1] extend linearly."""
    return np.asarray(scaled, dtype=np.float64) * _span(model) + model.pca_min
