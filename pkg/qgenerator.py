"""
Quantum generator: an ensemble of sub-generator circuits whose concatenated
Pauli-X readouts form the PCA feature vector, with parameter-shift gradients.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from config import get_thread_count
from errors import ArgumentError, ShapeError
from features import FeatureAssignment
from qcircuit import CircuitSpec, run_circuits

NOISE_HIGH = np.pi / 2
SHIFT = np.pi / 2


@dataclasses.dataclass
class SubGeneratorParams:
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ShapeError(f"sub-generator weights must be a (depth, n_qubits) grid, got {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)):
            raise ArgumentError("sub-generator weights must be finite")


@dataclasses.dataclass
class NoiseVector:
    """Latent input of one generator call: n_qubits angles per sub-generator."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ShapeError(f"noise must have shape (n_subgens, n_qubits), got {self.values.shape}")
        if np.any(self.values < 0) or np.any(self.values > NOISE_HIGH):
            raise ArgumentError("noise entries must lie in [0, pi/2]")


@dataclasses.dataclass
class GeneratorEnsemble:
    sub_generators: list[SubGeneratorParams]
    circuit_spec: CircuitSpec
    assignment: FeatureAssignment

    def __post_init__(self):
        spec = self.circuit_spec
        if len(self.sub_generators) != self.assignment.n_subgens:
            raise ShapeError(
                f"{len(self.sub_generators)} sub-generators but the assignment has "
                f"{self.assignment.n_subgens} subsets"
            )
        if self.assignment.n_qubits != spec.n_qubits:
            raise ShapeError(
                f"assignment gives {self.assignment.n_qubits} features per sub-generator, "
                f"circuits have {spec.n_qubits} qubits"
            )
        for sub in self.sub_generators:
            if sub.weights.shape != (spec.depth, spec.n_qubits):
                raise ShapeError(
                    f"sub-generator weights {sub.weights.shape} do not match "
                    f"({spec.depth}, {spec.n_qubits})"
                )

    @property
    def n_subgens(self):
        return len(self.sub_generators)

    @property
    def n_features(self):
        return self.n_subgens * self.circuit_spec.n_qubits

    @property
    def weights(self):
        """Stacked (n_subgens, depth, n_qubits) parameter tensor."""
        return np.stack([s.weights for s in self.sub_generators])

    def with_weights(self, weights):
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != self.weights.shape:
            raise ShapeError(f"expected weights of shape {self.weights.shape}, got {weights.shape}")
        return dataclasses.replace(self, sub_generators=[SubGeneratorParams(w) for w in weights])


def init_ensemble(n_subgens, spec, assignment, rng, scale=1.0):
    """Draws every variational angle uniformly from [0, scale)."""
    weights = scale * rng.random((n_subgens, spec.depth, spec.n_qubits))
    return GeneratorEnsemble([SubGeneratorParams(w) for w in weights], spec, assignment)


def generator_param_count(ensemble):
    spec = ensemble.circuit_spec
    return ensemble.n_subgens * spec.depth * spec.n_qubits


def sample_noise(ensemble, batch, rng):
    """(batch, n_subgens, n_qubits) i.i.d. Uniform[0, pi/2] angles."""
    if batch < 1:
        raise ArgumentError(f"batch must be >= 1, got {batch}")
    return rng.uniform(0.0, NOISE_HIGH, size=(batch, ensemble.n_subgens, ensemble.circuit_spec.n_qubits))


def _noise_batch(ensemble, noise):
    if isinstance(noise, NoiseVector):
        noise = noise.values
    noise = np.asarray(noise, dtype=np.float64)
    shape = (ensemble.n_subgens, ensemble.circuit_spec.n_qubits)
    if noise.shape == shape:
        return noise[None], True
    if noise.ndim == 3 and noise.shape[1:] == shape:
        return noise, False
    raise ShapeError(f"noise must have shape {shape} or (batch, *{shape}), got {noise.shape}")


def _encodings(noise):
    """Each noise angle drives both the RX and the RY encoding gate of its qubit."""
    return np.repeat(noise[..., None], 2, axis=-1)


def forward_batch(ensemble, noise):
    """(batch, n_subgens, n_qubits) noise -> (batch, F) expectations in PCA order."""
    noise, _ = _noise_batch(ensemble, noise)
    batch, n_subgens, n_qubits = noise.shape
    spec = ensemble.circuit_spec
    weights = np.broadcast_to(ensemble.weights, (batch,) + ensemble.weights.shape)
    raw = run_circuits(
        spec,
        _encodings(noise).reshape(batch * n_subgens, n_qubits, 2),
        weights.reshape(batch * n_subgens, spec.depth, n_qubits),
        workers=get_thread_count(),
    )
    return ensemble.assignment.to_pca_order(raw.reshape(batch, n_subgens * n_qubits))


def forward(ensemble, noise):
    """One noise vector -> length-F expectation vector m in PCA component order."""
    noise, single = _noise_batch(ensemble, noise)
    out = forward_batch(ensemble, noise)
    return out[0] if single else out


def _shift_gradients(ensemble, noise):
    """
    d m_raw[b, s, q] / d theta[s, p] for every sample b, sub-generator s,
    flattened parameter p = layer * n_qubits + q', and qubit q.

    Returns an array of shape (batch, n_subgens, depth * n_qubits, n_qubits).
    """
    batch, n_subgens, n_qubits = noise.shape
    spec = ensemble.circuit_spec
    n_params = spec.depth * n_qubits
    base = ensemble.weights.reshape(n_subgens, n_params)

    shifts = SHIFT * np.eye(n_params)
    shifted = np.stack([base[:, None, :] + shifts, base[:, None, :] - shifts], axis=1)
    # shifted: (n_subgens, 2, n_params, n_params) -> broadcast over the batch
    shifted = np.broadcast_to(shifted, (batch,) + shifted.shape)
    encodings = np.broadcast_to(
        _encodings(noise)[:, :, None, None, :, :],
        (batch, n_subgens, 2, n_params, n_qubits, 2),
    )

    total = batch * n_subgens * 2 * n_params
    readout = run_circuits(
        spec,
        encodings.reshape(total, n_qubits, 2),
        shifted.reshape(total, spec.depth, n_qubits),
        workers=get_thread_count(),
    ).reshape(batch, n_subgens, 2, n_params, n_qubits)
    return (readout[:, :, 0] - readout[:, :, 1]) / 2.0


def parameter_shift_jacobians(ensemble, noise):
    """
    Batched Jacobians dm/dtheta of shape (batch, F, P).

    Rows follow PCA component order; columns follow the flattened
    (sub-generator, layer, qubit) parameter order. Entries linking a feature to
    another sub-generator's parameters are exactly zero.
    """
    noise, _ = _noise_batch(ensemble, noise)
    batch, n_subgens, n_qubits = noise.shape
    grads = _shift_gradients(ensemble, noise)
    n_params = grads.shape[2]

    raw = np.zeros((batch, n_subgens * n_qubits, n_subgens * n_params))
    for s in range(n_subgens):
        rows = slice(s * n_qubits, (s + 1) * n_qubits)
        cols = slice(s * n_params, (s + 1) * n_params)
        raw[:, rows, cols] = np.swapaxes(grads[:, s], 1, 2)

    jac = np.empty_like(raw)
    jac[:, ensemble.assignment.flat_indices, :] = raw
    return jac


def parameter_shift_jacobian(ensemble, noise):
    """Jacobian dm/dtheta (F x P) for a single noise vector."""
    noise, single = _noise_batch(ensemble, noise)
    if not single and noise.shape[0] != 1:
        raise ShapeError("parameter_shift_jacobian takes one noise vector; use parameter_shift_jacobians")
    return parameter_shift_jacobians(ensemble, noise)[0]


def generator_gradient(ensemble, noise, upstream):
    """
    sum_b upstream[b] . J_b, reshaped to the (n_subgens, depth, n_qubits) weight layout.

    Args:
        noise: (batch, n_subgens, n_qubits) noise used for the forward pass.
        upstream: (batch, F) gradient of the loss w.r.t. m, in PCA order.
    """
    noise, _ = _noise_batch(ensemble, noise)
    upstream = np.asarray(upstream, dtype=np.float64)
    batch, n_subgens, n_qubits = noise.shape
    if upstream.shape != (batch, n_subgens * n_qubits):
        raise ShapeError(f"upstream must have shape ({batch}, {n_subgens * n_qubits}), got {upstream.shape}")

    grads = _shift_gradients(ensemble, noise)
    upstream_raw = ensemble.assignment.to_raw_order(upstream).reshape(batch, n_subgens, n_qubits)
    total = np.einsum("bspq,bsq->sp", grads, upstream_raw)
    return total.reshape(ensemble.weights.shape)


def to_critic_space(m):
    """Maps generator readouts in [-1, 1] onto the [0, 1] scaled-score space."""
    return (np.asarray(m) + 1.0) / 2.0


def from_critic_space(x):
    return 2.0 * np.asarray(x) - 1.0
