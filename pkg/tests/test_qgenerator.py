import numpy as np
import pytest

from errors import ArgumentError, ShapeError
from features import balanced_assignment, conventional_assignment
from qcircuit import CircuitSpec
from qgenerator import (
    GeneratorEnsemble,
    NoiseVector,
    SubGeneratorParams,
    forward,
    forward_batch,
    from_critic_space,
    generator_gradient,
    generator_param_count,
    init_ensemble,
    parameter_shift_jacobian,
    parameter_shift_jacobians,
    sample_noise,
    to_critic_space,
)


def make_ensemble(rng, n_subgens=8, n_qubits=5, depth=6, assignment=None):
    spec = CircuitSpec.linear(n_qubits, depth)
    features = n_subgens * n_qubits
    assignment = assignment or balanced_assignment(features, n_subgens, n_qubits)
    return init_ensemble(n_subgens, spec, assignment, rng)


def test_default_ensemble_has_240_parameters(rng):
    assert generator_param_count(make_ensemble(rng)) == 240


@pytest.mark.parametrize("shape, expected", [((2, 5, 6), 60), ((1, 1, 1), 1)])
def test_parameter_count_is_product(rng, shape, expected):
    n_subgens, n_qubits, depth = shape
    assert generator_param_count(make_ensemble(rng, n_subgens, n_qubits, depth)) == expected


def test_noise_range_mean_and_seeding():
    ensemble = make_ensemble(np.random.default_rng(0))
    a = sample_noise(ensemble, 10_000, np.random.default_rng(7))
    b = sample_noise(ensemble, 10_000, np.random.default_rng(7))
    assert a.shape == (10_000, 8, 5)
    assert a.min() >= 0.0 and a.max() <= np.pi / 2
    assert abs(a.mean() - np.pi / 4) < 0.02
    assert np.array_equal(a, b)


def test_noise_vector_rejects_out_of_range():
    with pytest.raises(ArgumentError):
        NoiseVector(np.full((2, 5), 2.0))


def test_zero_weights_and_noise_give_zero_output(rng):
    ensemble = make_ensemble(rng)
    ensemble = ensemble.with_weights(np.zeros_like(ensemble.weights))
    np.testing.assert_allclose(forward(ensemble, np.zeros((8, 5))), np.zeros(40), atol=1e-15)


def test_outputs_bounded_and_batch_consistent(rng):
    ensemble = make_ensemble(rng)
    noise = sample_noise(ensemble, 4, rng)
    batch = forward_batch(ensemble, noise)
    assert batch.shape == (4, 40)
    assert np.all(np.abs(batch) <= 1.0)
    np.testing.assert_allclose(forward(ensemble, noise[2]), batch[2], atol=1e-15)


def test_balanced_placement_of_subgenerator_zero_qubit_one(rng):
    ensemble = make_ensemble(rng)
    noise = sample_noise(ensemble, 1, rng)
    out = forward_batch(ensemble, noise)[0]
    conventional = GeneratorEnsemble(
        ensemble.sub_generators, ensemble.circuit_spec, conventional_assignment()
    )
    raw = forward_batch(conventional, noise)[0]
    assert out[39] == raw[1]
    # reordering by the assignment recovers the raw concatenation
    assert np.array_equal(ensemble.assignment.to_raw_order(out), raw)


def test_single_qubit_toy_derivative_is_one():
    spec = CircuitSpec.linear(1, 1)
    ensemble = GeneratorEnsemble([SubGeneratorParams(np.zeros((1, 1)))], spec, balanced_assignment(1, 1, 1))
    jac = parameter_shift_jacobian(ensemble, np.zeros((1, 1)))
    assert abs(jac[0, 0] - 1.0) <= 1e-12


def _finite_difference_jacobian(ensemble, noise, h=1e-5):
    flat = ensemble.weights.reshape(-1)
    columns = []
    for p in range(flat.size):
        plus, minus = flat.copy(), flat.copy()
        plus[p] += h
        minus[p] -= h
        f_plus = forward(ensemble.with_weights(plus.reshape(ensemble.weights.shape)), noise)
        f_minus = forward(ensemble.with_weights(minus.reshape(ensemble.weights.shape)), noise)
        columns.append((f_plus - f_minus) / (2 * h))
    return np.stack(columns, axis=1)


def test_parameter_shift_matches_finite_differences():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        ensemble = make_ensemble(rng, n_subgens=1, n_qubits=5, depth=6)
        noise = sample_noise(ensemble, 1, rng)[0]
        exact = parameter_shift_jacobian(ensemble, noise)
        assert exact.shape == (5, 30)
        assert np.max(np.abs(exact - _finite_difference_jacobian(ensemble, noise))) <= 1e-6


def test_cross_subgenerator_blocks_are_exactly_zero(rng):
    ensemble = make_ensemble(rng, n_subgens=2, n_qubits=3, depth=2, assignment=conventional_assignment(6, 2, 3))
    jac = parameter_shift_jacobians(ensemble, sample_noise(ensemble, 3, rng))
    assert jac.shape == (3, 6, 12)
    assert np.all(jac[:, 0:3, 6:12] == 0.0)
    assert np.all(jac[:, 3:6, 0:6] == 0.0)


def test_generator_gradient_contracts_jacobians(rng):
    ensemble = make_ensemble(rng, n_subgens=2, n_qubits=3, depth=2, assignment=balanced_assignment(6, 2, 3))
    noise = sample_noise(ensemble, 4, rng)
    upstream = rng.normal(size=(4, 6))
    expected = np.einsum("bf,bfp->p", upstream, parameter_shift_jacobians(ensemble, noise))
    np.testing.assert_allclose(
        generator_gradient(ensemble, noise, upstream).reshape(-1), expected, atol=1e-12
    )


def test_generator_gradient_shape_check(rng):
    ensemble = make_ensemble(rng, n_subgens=2, n_qubits=3, depth=2, assignment=balanced_assignment(6, 2, 3))
    with pytest.raises(ShapeError):
        generator_gradient(ensemble, sample_noise(ensemble, 2, rng), np.zeros((2, 5)))


def test_ensemble_validates_weight_shapes(rng):
    spec = CircuitSpec.linear(5, 6)
    with pytest.raises(ShapeError):
        GeneratorEnsemble([SubGeneratorParams(np.zeros((5, 5)))], spec, balanced_assignment(5, 1, 5))
    with pytest.raises(ShapeError):
        GeneratorEnsemble([SubGeneratorParams(np.zeros((6, 5)))], spec, balanced_assignment(10, 2, 5))


def test_critic_space_maps_are_inverse():
    m = np.array([-1.0, 0.0, 0.5, 1.0])
    np.testing.assert_array_equal(to_critic_space(m), [0.0, 0.5, 0.75, 1.0])
    np.testing.assert_array_equal(from_critic_space(to_critic_space(m)), m)
