import math

import numpy as np
import pytest

from oracles import loop_forward
from varnet.network import (ActivationKind, ArchitectureSpec, Network, build_network, forward,
                            hidden_states, input_gradient, predict, variation, zero_network)


def _net(rows):
    return Network(ArchitectureSpec((1, 1, 1)), tuple(np.array([r]) for r in rows))


@pytest.mark.parametrize("widths", [(5,), (), (3, 0, 1), (2, 3, 2)])
def test_bad_architectures(widths):
    with pytest.raises(ValueError):
        ArchitectureSpec(widths)


def test_architecture_shapes():
    spec = ArchitectureSpec((5, 50, 10, 1))
    assert spec.depth == 3
    assert spec.weight_shapes == [(50, 6), (10, 51), (1, 11)]
    assert spec.n_rows == 61
    assert spec.n_params == 300 + 510 + 11


def test_build_network_rows_on_sphere():
    net = build_network(ArchitectureSpec((5, 50, 10, 1)), 2.0, np.random.default_rng(0))
    norms = np.concatenate(variation(net).per_neuron_norms)
    assert norms.size == 61
    np.testing.assert_allclose(norms, 2.0, atol=1e-12)


def test_build_smallest_net():
    net = build_network(ArchitectureSpec((1, 1, 1)), 1.0, 3)
    np.testing.assert_allclose(np.concatenate(variation(net).per_neuron_norms), [1.0, 1.0], atol=1e-12)


def test_build_network_per_layer_radius():
    net = build_network(ArchitectureSpec((3, 4, 1)), [2.0, 0.5], 0)
    norms = variation(net).per_neuron_norms
    np.testing.assert_allclose(norms[0], 2.0)
    np.testing.assert_allclose(norms[1], 0.5)


def test_build_network_deterministic():
    spec = ArchitectureSpec((5, 50, 10, 1))
    a = build_network(spec, 2.0, np.random.default_rng(7))
    b = build_network(spec, 2.0, np.random.default_rng(7))
    assert a == b


@pytest.mark.parametrize("r", [0.0, -1.0, np.nan])
def test_build_network_bad_radius(r):
    with pytest.raises(ValueError):
        build_network(ArchitectureSpec((1, 1, 1)), r, 0)


def test_network_rejects_bad_weights():
    spec = ArchitectureSpec((1, 1, 1))
    with pytest.raises(ValueError):
        Network(spec, (np.zeros((1, 2)),))
    with pytest.raises(ValueError):
        Network(spec, (np.zeros((1, 3)), np.zeros((1, 2))))
    with pytest.raises(ValueError):
        Network(spec, (np.array([[np.nan, 0.0]]), np.zeros((1, 2))))


def test_network_is_immutable():
    net = build_network(ArchitectureSpec((2, 3, 1)), 1.0, 0)
    with pytest.raises(ValueError):
        net.weights[0][0, 0] = 5.0


def test_zero_output_row_gives_zero():
    rng = np.random.default_rng(0)
    net = build_network(ArchitectureSpec((3, 4, 1)), 2.0, rng)
    net = net.with_weights([net.weights[0], np.zeros((1, 5))])
    for x in rng.normal(size=(10, 3)):
        assert forward(net, x) == 0.0


def test_half_from_sigma_zero():
    net = _net([[0.0, 0.0], [1.0, 0.0]])
    assert forward(net, [0.7]) == 0.5
    states = hidden_states(net, [0.0])
    np.testing.assert_array_equal(states[0], [0.0, 1.0])
    np.testing.assert_array_equal(states[1], [0.5, 0.5])


def test_forward_matches_loop_oracle():
    rng = np.random.default_rng(4)
    net = build_network(ArchitectureSpec((3, 5, 4, 1)), 2.5, rng)
    X = rng.uniform(-1, 1, size=(50, 3))
    ref = [loop_forward(net.weights, x) for x in X]
    np.testing.assert_allclose([forward(net, x) for x in X], ref, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(predict(net, X), ref, rtol=1e-13, atol=1e-13)


def test_forward_is_last_state_dot_output_row():
    rng = np.random.default_rng(5)
    for _ in range(100):
        net = build_network(ArchitectureSpec((4, 6, 3, 1)), rng.uniform(0.1, 5), rng)
        x = rng.normal(size=4)
        assert forward(net, x) == float(net.weights[-1][0] @ hidden_states(net, x)[-1])


def test_hidden_entries_in_open_unit_interval():
    rng = np.random.default_rng(6)
    net = build_network(ArchitectureSpec((3, 8, 8, 1)), 5.0, rng)
    for x in rng.uniform(-1, 1, size=(100, 3)):
        for y in hidden_states(net, x)[1:]:
            assert np.all((y > 0) & (y < 1))


def test_forward_is_deterministic():
    net = build_network(ArchitectureSpec((3, 8, 1)), 2.0, 0)
    x = np.array([0.1, -0.2, 0.3])
    assert forward(net, x) == forward(net, x.copy())


@pytest.mark.parametrize("x", [[1.0], [np.nan, 0.0], [0.0, 0.0, 0.0]])
def test_forward_rejects_bad_input(x):
    net = build_network(ArchitectureSpec((2, 2, 1)), 1.0, 0)
    with pytest.raises(ValueError):
        forward(net, x)


def test_output_bound_by_sampling():
    rng = np.random.default_rng(8)
    net = build_network(ArchitectureSpec((3, 10, 5, 1)), 3.0, rng)
    X = rng.uniform(-1, 1, size=(10_000, 3))
    assert np.abs(predict(net, X)).max() <= variation(net).max_norm


def test_variation_examples():
    spec = ArchitectureSpec((1, 1, 1))
    rep = variation(Network(spec, (np.array([[1.0, -2.0]]), np.array([[0.5, 0.5]]))))
    assert [n.tolist() for n in rep.per_neuron_norms] == [[3.0], [1.0]]
    assert rep.max_norm == 3.0
    assert rep.total_variation == 9.0
    z = variation(zero_network(spec))
    assert z.max_norm == 0.0 and z.total_variation == 0.0


def test_variation_is_homogeneous():
    net = build_network(ArchitectureSpec((3, 4, 1)), 1.7, 2)
    assert variation(net.scaled(2.5)).max_norm == pytest.approx(2.5 * variation(net).max_norm, rel=1e-15)


def test_flat_round_trip():
    net = build_network(ArchitectureSpec((3, 4, 2, 1)), 1.0, 0)
    assert net.from_flat(net.flat()) == net
    with pytest.raises(ValueError):
        net.from_flat(np.zeros(3))


def test_logistic_derivatives_match_finite_differences():
    act = ActivationKind.LOGISTIC
    z = np.linspace(-10, 10, 2001)
    h = 1e-5
    fd1 = (act.fn(z + h) - act.fn(z - h)) / (2 * h)
    fd2 = (act.deriv(z + h) - act.deriv(z - h)) / (2 * h)
    d1, d2 = act.deriv(z), act.deriv2(z)
    assert np.max(np.abs(fd1 - d1) / np.abs(d1)) < 1e-6
    mask = np.abs(d2) > 1e-3  # away from the root of sigma'' at 0
    assert np.max(np.abs(fd2 - d2)[mask] / np.abs(d2[mask])) < 1e-6
    assert np.abs(fd2 - d2).max() < 1e-9


def test_logistic_constants():
    act = ActivationKind.LOGISTIC
    z = np.linspace(-20, 20, 400_001)
    assert act.at_zero == 0.5
    assert np.abs(act.deriv(z)).max() == pytest.approx(act.sup_deriv, abs=1e-12)
    assert np.abs(act.deriv2(z)).max() == pytest.approx(act.sup_deriv2, rel=1e-8)
    assert act.sup_deriv2 == pytest.approx(1 / (6 * math.sqrt(3)))


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(9)
    net = build_network(ArchitectureSpec((4, 6, 3, 1)), 2.0, rng)
    x = rng.uniform(-1, 1, 4)
    h = 1e-6
    fd = [(forward(net, x + h * e) - forward(net, x - h * e)) / (2 * h) for e in np.eye(4)]
    np.testing.assert_allclose(input_gradient(net, x), fd, atol=1e-8)


def test_first_derivative_envelope_on_grid():
    rng = np.random.default_rng(10)
    for L in (2, 3):
        widths = (3,) + (5,) * (L - 1) + (1,)
        net = build_network(ArchitectureSpec(widths), 2.0, rng)
        V = variation(net).max_norm
        g = np.array([input_gradient(net, x) for x in rng.uniform(-1, 1, size=(200, 3))])
        assert np.abs(g).max() <= 0.25 ** (L - 1) * V ** L
