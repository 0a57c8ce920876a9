"""
Dense statevector simulator for small registers.

Amplitudes are little-endian: qubit 0 is the least significant bit of the
basis index, so basis index i has qubit q set when (i >> q) & 1 == 1.
Every kernel works on a leading batch axis so many independent circuits can be
evaluated in one pass; the single-state API wraps a batch of one.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from enum import Enum

import numpy as np

from errors import ArgumentError, QubitIndexError, ShapeError, SizeError, StateError

MAX_QUBITS = 24
NORM_TOLERANCE = 1e-9


class GateKind(str, Enum):
    RX = "RX"
    RY = "RY"
    CZ = "CZ"


@dataclasses.dataclass(frozen=True)
class GateOp:
    kind: GateKind
    target: int
    control: int | None = None
    angle: float | None = None

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is GateKind.CZ:
            if self.control is None:
                raise ArgumentError("CZ requires a control qubit")
            if self.angle is not None:
                raise ArgumentError("CZ carries no angle")
            if self.control == self.target:
                raise ArgumentError(f"CZ control and target are both {self.target}")
        else:
            if self.angle is None:
                raise ArgumentError(f"{kind.value} requires an angle")
            if self.control is not None:
                raise ArgumentError(f"{kind.value} takes no control qubit")

    def validate(self, n_qubits):
        _check_qubit(self.target, n_qubits)
        if self.control is not None:
            _check_qubit(self.control, n_qubits)


@dataclasses.dataclass(frozen=True)
class CircuitSpec:
    """Register width, layer count, and the CZ pairs applied after every variational layer."""

    n_qubits: int
    depth: int
    entangler_topology: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        _check_size(self.n_qubits)
        if self.depth < 1:
            raise ArgumentError(f"circuit depth must be >= 1, got {self.depth}")
        pairs = tuple((int(c), int(t)) for c, t in self.entangler_topology)
        for control, target in pairs:
            _check_qubit(control, self.n_qubits)
            _check_qubit(target, self.n_qubits)
            if control == target:
                raise ArgumentError(f"entangler pair ({control}, {target}) acts on one qubit")
        object.__setattr__(self, "entangler_topology", pairs)

    @classmethod
    def linear(cls, n_qubits, depth):
        """Nearest-neighbour chain 0-1, 1-2, ..., (n-2)-(n-1)."""
        return cls(n_qubits, depth, tuple((q, q + 1) for q in range(n_qubits - 1)))

    @property
    def n_parameters(self):
        return self.depth * self.n_qubits


@dataclasses.dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_size(self.n_qubits)
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (2 ** self.n_qubits,):
            raise ShapeError(
                f"expected {2 ** self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {self.amplitudes.shape}"
            )

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))


def _check_size(n_qubits):
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise SizeError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")


def _check_qubit(qubit, n_qubits):
    if not 0 <= qubit < n_qubits:
        raise QubitIndexError(f"qubit {qubit} outside a {n_qubits}-qubit register")


# Batched kernels: psi has shape (batch, 2**n)

def _rotation_matrices(kind, angles):
    """Stack of 2x2 rotation matrices exp(-i*angle*P/2), one per batch row."""
    half = np.asarray(angles, dtype=np.float64) / 2.0
    c, s = np.cos(half), np.sin(half)
    mats = np.empty(half.shape + (2, 2), dtype=np.complex128)
    if kind is GateKind.RX:
        mats[..., 0, 0] = c
        mats[..., 0, 1] = -1j * s
        mats[..., 1, 0] = -1j * s
        mats[..., 1, 1] = c
    else:
        mats[..., 0, 0] = c
        mats[..., 0, 1] = -s
        mats[..., 1, 0] = s
        mats[..., 1, 1] = c
    return mats


def _apply_1q(psi, n_qubits, target, mats):
    batch = psi.shape[0]
    view = psi.reshape(batch, 2 ** (n_qubits - 1 - target), 2, 2 ** target)
    return np.einsum("bij,bhjl->bhil", mats, view).reshape(batch, -1)


def _cz_signs(n_qubits, control, target):
    index = np.arange(2 ** n_qubits)
    both = ((index >> control) & 1) & ((index >> target) & 1)
    return np.where(both == 1, -1.0, 1.0)


def _x_expectations(psi, n_qubits):
    batch = psi.shape[0]
    out = np.empty((batch, n_qubits), dtype=np.float64)
    conj = psi.conj()
    for q in range(n_qubits):
        view = psi.reshape(batch, 2 ** (n_qubits - 1 - q), 2, 2 ** q)
        flipped = view[:, :, ::-1, :].reshape(batch, -1)
        out[:, q] = np.real(np.sum(conj * flipped, axis=1))
    return out


def _check_norm(psi):
    deviation = np.max(np.abs(np.linalg.norm(psi, axis=1) - 1.0))
    if deviation > NORM_TOLERANCE:
        raise StateError(f"state norm deviates from 1 by {deviation:.3e}")


# Single-state API

def init_zero_state(n_qubits):
    """Returns |0...0> on n_qubits qubits."""
    _check_size(n_qubits)
    amplitudes = np.zeros(2 ** n_qubits, dtype=np.complex128)
    amplitudes[0] = 1.0
    return StateVector(n_qubits, amplitudes)


def _rotate(state, kind, target, angle):
    _check_qubit(target, state.n_qubits)
    mats = _rotation_matrices(kind, np.array([angle]))
    psi = _apply_1q(state.amplitudes[None, :], state.n_qubits, target, mats)
    return StateVector(state.n_qubits, psi[0])


def apply_rx(state, target, angle):
    """Applies exp(-i*angle*X/2) on `target`."""
    return _rotate(state, GateKind.RX, target, angle)


def apply_ry(state, target, angle):
    """Applies exp(-i*angle*Y/2) on `target`."""
    return _rotate(state, GateKind.RY, target, angle)


def apply_cz(state, control, target):
    """Negates every amplitude whose basis index has both qubits set."""
    if control == target:
        raise ArgumentError(f"CZ control and target are both {target}")
    _check_qubit(control, state.n_qubits)
    _check_qubit(target, state.n_qubits)
    signs = _cz_signs(state.n_qubits, control, target)
    return StateVector(state.n_qubits, state.amplitudes * signs)


def apply_gate(state, op):
    op.validate(state.n_qubits)
    if op.kind is GateKind.CZ:
        return apply_cz(state, op.control, op.target)
    return _rotate(state, op.kind, op.target, op.angle)


def pauli_x_expectations(state):
    """<psi|X_q|psi> for every qubit q, in qubit order."""
    psi = state.amplitudes[None, :]
    _check_norm(psi)
    return _x_expectations(psi, state.n_qubits)[0]


# Circuit evaluation

def _run_chunk(spec, encodings, weights):
    n = spec.n_qubits
    batch = encodings.shape[0]
    psi = np.zeros((batch, 2 ** n), dtype=np.complex128)
    psi[:, 0] = 1.0

    for q in range(n):
        psi = _apply_1q(psi, n, q, _rotation_matrices(GateKind.RX, encodings[:, q, 0]))
        psi = _apply_1q(psi, n, q, _rotation_matrices(GateKind.RY, encodings[:, q, 1]))

    signs = np.ones(2 ** n)
    for control, target in spec.entangler_topology:
        signs = signs * _cz_signs(n, control, target)

    for layer in range(spec.depth):
        for q in range(n):
            psi = _apply_1q(psi, n, q, _rotation_matrices(GateKind.RY, weights[:, layer, q]))
        # CZ gates are diagonal and commute, so one layer's entangler is a single sign mask
        psi = psi * signs

    _check_norm(psi)
    return _x_expectations(psi, n)


def run_circuits(spec, encoding_angles, weights, workers=1):
    """
    Evaluates a batch of independent circuits sharing one CircuitSpec.

    Args:
        spec: Register width, depth and entangler topology.
        encoding_angles: (batch, n_qubits, 2) array of (rx, ry) angles.
        weights: (batch, depth, n_qubits) array of variational RY angles.
        workers: Upper bound on threads used to split the batch.

    Returns:
        (batch, n_qubits) array of Pauli-X expectations.
    """
    encodings = np.asarray(encoding_angles, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    batch = encodings.shape[0] if encodings.ndim == 3 else -1
    if encodings.shape != (batch, spec.n_qubits, 2):
        raise ShapeError(f"encoding angles must have shape (batch, {spec.n_qubits}, 2), got {encodings.shape}")
    if weights.shape != (batch, spec.depth, spec.n_qubits):
        raise ShapeError(
            f"weights must have shape ({batch}, {spec.depth}, {spec.n_qubits}), got {weights.shape}"
        )
    if batch == 0:
        return np.zeros((0, spec.n_qubits))

    workers = max(1, min(int(workers), batch))
    if workers == 1:
        return _run_chunk(spec, encodings, weights)

    bounds = np.linspace(0, batch, workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(
            lambda lo_hi: _run_chunk(spec, encodings[lo_hi[0]:lo_hi[1]], weights[lo_hi[0]:lo_hi[1]]),
            zip(bounds[:-1], bounds[1:]),
        )
        return np.concatenate(list(parts), axis=0)


def run_circuit(spec, encoding_angles, weights):
    """
    Runs one circuit: RX(z_q) then RY(z_q) encoding on every qubit, then `depth`
    layers of [RY(w_lq) on every qubit, the CZ topology], and returns <X_q>.
    """
    encodings = np.asarray(encoding_angles, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if encodings.shape != (spec.n_qubits, 2):
        raise ShapeError(f"encoding angles must have shape ({spec.n_qubits}, 2), got {encodings.shape}")
    if weights.shape != (spec.depth, spec.n_qubits):
        raise ShapeError(f"weights must have shape ({spec.depth}, {spec.n_qubits}), got {weights.shape}")
    return run_circuits(spec, encodings[None], weights[None])[0]
