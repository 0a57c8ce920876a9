import numpy as np
import pytest

from errors import ArgumentError, QubitIndexError, ShapeError, SizeError, StateError
from qcircuit import (
    CircuitSpec,
    GateKind,
    GateOp,
    StateVector,
    apply_cz,
    apply_gate,
    apply_rx,
    apply_ry,
    init_zero_state,
    pauli_x_expectations,
    run_circuit,
    run_circuits,
)


def test_zero_state_is_basis_vector():
    state = init_zero_state(3)
    expected = np.zeros(8)
    expected[0] = 1.0
    np.testing.assert_array_equal(state.amplitudes, expected)


@pytest.mark.parametrize("n", [0, 25])
def test_register_size_limits(n):
    with pytest.raises(SizeError):
        init_zero_state(n)


def test_ry_half_pi_gives_unit_x_expectation():
    state = apply_ry(init_zero_state(1), 0, np.pi / 2)
    assert abs(pauli_x_expectations(state)[0] - 1.0) <= 1e-12


@pytest.mark.parametrize("angle", [0.1, 0.7, 1.3, np.pi / 2, 2.9])
def test_rx_alone_has_zero_x_expectation(angle):
    state = apply_rx(init_zero_state(1), 0, angle)
    assert abs(pauli_x_expectations(state)[0]) <= 1e-12


def test_rx_pi_maps_zero_to_minus_i_one():
    state = apply_rx(init_zero_state(1), 0, np.pi)
    np.testing.assert_allclose(state.amplitudes, [0.0, -1j], atol=1e-12)


@pytest.mark.parametrize("angle", [0.0, 0.4, 1.1, np.pi / 2, 2.5, -0.8])
def test_ry_x_expectation_is_sin(angle):
    state = apply_ry(init_zero_state(1), 0, angle)
    assert abs(pauli_x_expectations(state)[0] - np.sin(angle)) <= 1e-12


@pytest.mark.parametrize("angle", [0.3, 1.7, -2.2])
def test_rotation_followed_by_its_inverse_is_identity(rng, angle):
    amplitudes = rng.normal(size=8) + 1j * rng.normal(size=8)
    state = StateVector(3, amplitudes / np.linalg.norm(amplitudes))
    for apply in (apply_rx, apply_ry):
        back = apply(apply(state, 1, angle), 1, -angle)
        np.testing.assert_allclose(back.amplitudes, state.amplitudes, atol=1e-12)


def test_cz_is_its_own_inverse(rng):
    amplitudes = rng.normal(size=8) + 1j * rng.normal(size=8)
    state = StateVector(3, amplitudes / np.linalg.norm(amplitudes))
    np.testing.assert_array_equal(apply_cz(apply_cz(state, 0, 2), 0, 2).amplitudes, state.amplitudes)


def test_qubit_zero_is_least_significant_bit():
    state = apply_ry(init_zero_state(2), 0, np.pi)
    assert abs(abs(state.amplitudes[1]) - 1.0) <= 1e-12
    assert abs(state.amplitudes[2]) <= 1e-12


def test_cz_flips_sign_of_11_only():
    amplitudes = np.full(4, 0.5, dtype=np.complex128)
    out = apply_cz(StateVector(2, amplitudes), 0, 1)
    np.testing.assert_array_equal(out.amplitudes, [0.5, 0.5, 0.5, -0.5])


def test_cz_on_basis_state_11():
    state = StateVector(2, [0, 0, 0, 1])
    assert apply_cz(state, 1, 0).amplitudes[3] == -1


def test_cz_same_qubit_rejected():
    with pytest.raises(ArgumentError):
        apply_cz(init_zero_state(2), 1, 1)


def test_out_of_range_qubit_rejected():
    with pytest.raises(QubitIndexError):
        apply_ry(init_zero_state(2), 2, 0.3)
    with pytest.raises(QubitIndexError):
        apply_cz(init_zero_state(2), 0, 5)


def test_x_expectation_per_qubit():
    state = apply_ry(init_zero_state(2), 1, np.pi / 2)
    np.testing.assert_allclose(pauli_x_expectations(state), [0.0, 1.0], atol=1e-12)


def test_unnormalised_state_rejected():
    with pytest.raises(StateError):
        pauli_x_expectations(StateVector(1, [1.0, 1.0]))


def test_gate_op_validation():
    with pytest.raises(ArgumentError):
        GateOp(GateKind.RX, 0)
    with pytest.raises(ArgumentError):
        GateOp(GateKind.CZ, 0, control=1, angle=0.2)
    with pytest.raises(ArgumentError):
        GateOp(GateKind.CZ, 0)
    with pytest.raises(ArgumentError):
        GateOp(GateKind.RY, 0, control=1, angle=0.2)


def test_norm_conserved_over_random_gate_sequences(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 6))
        state = init_zero_state(n)
        for _ in range(int(rng.integers(1, 12))):
            kind = str(rng.choice(["RX", "RY", "CZ"] if n > 1 else ["RX", "RY"]))
            if kind == "CZ":
                control, target = rng.choice(n, size=2, replace=False)
                op = GateOp(kind, int(target), control=int(control))
            else:
                op = GateOp(kind, int(rng.integers(n)), angle=float(rng.uniform(-np.pi, np.pi)))
            state = apply_gate(state, op)
        assert abs(state.norm() - 1.0) <= 1e-12
        assert np.all(np.abs(pauli_x_expectations(state)) <= 1.0 + 1e-12)


def test_run_circuit_matches_gate_by_gate_evaluation(rng):
    spec = CircuitSpec.linear(4, 3)
    z = rng.uniform(0, np.pi / 2, size=4)
    weights = rng.uniform(0, 1, size=(3, 4))

    state = init_zero_state(4)
    for q in range(4):
        state = apply_rx(state, q, z[q])
        state = apply_ry(state, q, z[q])
    for layer in range(3):
        for q in range(4):
            state = apply_ry(state, q, weights[layer, q])
        for control, target in spec.entangler_topology:
            state = apply_cz(state, control, target)

    encodings = np.stack([z, z], axis=1)
    np.testing.assert_allclose(run_circuit(spec, encodings, weights), pauli_x_expectations(state), atol=1e-12)


def test_run_circuits_threads_do_not_change_results(rng):
    spec = CircuitSpec.linear(5, 2)
    encodings = rng.uniform(0, np.pi / 2, size=(13, 5, 2))
    weights = rng.uniform(0, 1, size=(13, 2, 5))
    serial = run_circuits(spec, encodings, weights, workers=1)
    threaded = run_circuits(spec, encodings, weights, workers=4)
    assert np.array_equal(serial, threaded)
    np.testing.assert_allclose(serial[6], run_circuit(spec, encodings[6], weights[6]), atol=1e-15)


def test_run_circuits_shape_checks():
    spec = CircuitSpec.linear(3, 2)
    with pytest.raises(ShapeError):
        run_circuits(spec, np.zeros((2, 3, 2)), np.zeros((2, 3, 3)))
    with pytest.raises(ShapeError):
        run_circuit(spec, np.zeros((3,)), np.zeros((2, 3)))


def test_linear_topology_and_parameter_count():
    spec = CircuitSpec.linear(5, 6)
    assert spec.entangler_topology == ((0, 1), (1, 2), (2, 3), (3, 4))
    assert spec.n_parameters == 30
