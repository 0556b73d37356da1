"""Variation-constrained feedforward networks.

A network with layer widths ``[d, r_1, ..., r_{L-1}, 1]`` stores one weight
matrix per layer. Row ``i`` of layer ``l`` holds the incoming weights of neuron
``i`` followed by one bias weight. The bias weight multiplies a constant
coordinate: ``1.0`` at the input and ``sigma(0) = 0.5`` after every hidden
layer, so every hidden value, bias coordinate included, lies in ``[0, 1]``.

The variation of a network is the largest l1 norm over all rows, output row
and bias weights included.
"""
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

INPUT_BIAS = 1.0


class ActivationKind(str, enum.Enum):
    LOGISTIC = "logistic"

    @property
    def fn(self):
        return _ACTIVATIONS[self][0]

    @property
    def deriv(self):
        return _ACTIVATIONS[self][1]

    @property
    def deriv2(self):
        return _ACTIVATIONS[self][2]

    @property
    def at_zero(self):
        return float(self.fn(0.0))

    @property
    def sup_deriv(self):
        """sup_z |sigma'(z)|"""
        return _ACTIVATIONS[self][3]

    @property
    def sup_deriv2(self):
        """sup_z |sigma''(z)|"""
        return _ACTIVATIONS[self][4]


def logistic(z):
    return expit(z)


def logistic_deriv(z):
    s = expit(z)
    return s * (1.0 - s)


def logistic_deriv2(z):
    s = expit(z)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


_ACTIVATIONS = {
    ActivationKind.LOGISTIC: (
        logistic,
        logistic_deriv,
        logistic_deriv2,
        0.25,
        1.0 / (6.0 * math.sqrt(3.0)),
    ),
}


@dataclass(frozen=True)
class ArchitectureSpec:
    layer_widths: tuple
    activation: ActivationKind = ActivationKind.LOGISTIC

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2:
            raise ValueError(f"need at least input and output widths, got {widths}")
        if any(w < 1 for w in widths):
            raise ValueError(f"layer widths must be positive, got {widths}")
        if widths[-1] != 1:
            raise ValueError(f"output width must be 1, got {widths[-1]}")
        object.__setattr__(self, "layer_widths", widths)
        object.__setattr__(self, "activation", ActivationKind(self.activation))

    @property
    def input_dim(self):
        return self.layer_widths[0]

    @property
    def depth(self):
        """Number of weight layers L (hidden layers + output)."""
        return len(self.layer_widths) - 1

    @property
    def weight_shapes(self):
        w = self.layer_widths
        return [(w[l], w[l - 1] + 1) for l in range(1, len(w))]

    @property
    def n_rows(self):
        return sum(self.layer_widths[1:])

    @property
    def n_params(self):
        return sum(r * c for r, c in self.weight_shapes)


@dataclass(frozen=True)
class Network:
    """An immutable network value. Weight arrays are stored read-only."""

    spec: ArchitectureSpec
    weights: tuple = field(repr=False)

    def __post_init__(self):
        if len(self.weights) != self.spec.depth:
            raise ValueError(
                f"expected {self.spec.depth} weight matrices, got {len(self.weights)}"
            )
        frozen = []
        for l, (W, shape) in enumerate(zip(self.weights, self.spec.weight_shapes), start=1):
            W = np.array(W, dtype=np.float64)
            if W.shape != shape:
                raise ValueError(f"layer {l}: expected shape {shape}, got {W.shape}")
            if not np.all(np.isfinite(W)):
                raise ValueError(f"layer {l}: non-finite weights")
            W.flags.writeable = False
            frozen.append(W)
        object.__setattr__(self, "weights", tuple(frozen))

    @property
    def depth(self):
        return self.spec.depth

    def with_weights(self, weights):
        return Network(self.spec, tuple(weights))

    def scaled(self, c):
        return self.with_weights([c * W for W in self.weights])

    def flat(self):
        return np.concatenate([W.ravel() for W in self.weights])

    def from_flat(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        out, i = [], 0
        for shape in self.spec.weight_shapes:
            size = shape[0] * shape[1]
            out.append(theta[i:i + size].reshape(shape))
            i += size
        if i != theta.size:
            raise ValueError(f"flat parameter vector has {theta.size} entries, need {i}")
        return self.with_weights(out)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return self.spec == other.spec and all(
            np.array_equal(a, b) for a, b in zip(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.spec, tuple(W.tobytes() for W in self.weights)))


def _sample_l1_sphere(rng, n_rows, n_cols, radius):
    # exponential spacings are uniform on the simplex; random signs lift to the sphere
    e = rng.exponential(size=(n_rows, n_cols))
    e /= e.sum(axis=1, keepdims=True)
    signs = rng.choice(np.array([-1.0, 1.0]), size=(n_rows, n_cols))
    return radius * signs * e


def build_network(spec, init_radius, rng):
    """Random network whose every row lies on the l1 sphere of radius ``init_radius``.

    ``init_radius`` may also be a sequence with one radius per layer. The result
    is feasible for any budget ``V >= max(init_radius)``.
    """
    if not isinstance(spec, ArchitectureSpec):
        spec = ArchitectureSpec(tuple(spec))
    radii = np.broadcast_to(np.asarray(init_radius, dtype=np.float64), (spec.depth,))
    if not np.all(np.isfinite(radii) & (radii > 0)):
        raise ValueError(f"init_radius must be positive, got {init_radius}")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    weights = [
        _sample_l1_sphere(rng, r, c, radius)
        for (r, c), radius in zip(spec.weight_shapes, radii)
    ]
    return Network(spec, tuple(weights))


def zero_network(spec):
    if not isinstance(spec, ArchitectureSpec):
        spec = ArchitectureSpec(tuple(spec))
    return Network(spec, tuple(np.zeros(s) for s in spec.weight_shapes))


def _check_input(net, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != net.spec.input_dim:
        raise ValueError(f"input must be a vector of length {net.spec.input_dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    return x


def hidden_states(net, x):
    """Layer outputs ``y_0, ..., y_{L-1}`` for a single input.

    Each returned vector already carries its constant bias coordinate as the
    last entry (``1.0`` for ``y_0``, ``sigma(0)`` for hidden layers), i.e. it is
    exactly the vector the next layer's weight rows are applied to.
    """
    x = _check_input(net, x)
    act = net.spec.activation
    bias = act.at_zero
    y = np.append(x, INPUT_BIAS)
    states = [y]
    for W in net.weights[:-1]:
        y = np.append(act.fn(W @ y), bias)
        states.append(y)
    return states


def forward(net, x):
    states = hidden_states(net, x)
    return float(net.weights[-1][0] @ states[-1])


def predict(net, X):
    """Batched forward pass over the rows of ``X`` (shape ``(n, d)``)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.spec.input_dim:
        raise ValueError(f"inputs must have shape (n, {net.spec.input_dim}), got {X.shape}")
    act = net.spec.activation
    bias = act.at_zero
    A = np.hstack([X, np.full((X.shape[0], 1), INPUT_BIAS)])
    for W in net.weights[:-1]:
        H = act.fn(A @ W.T)
        A = np.hstack([H, np.full((H.shape[0], 1), bias)])
    return A @ net.weights[-1][0]


def input_gradient(net, x):
    """Analytic gradient of ``forward(net, .)`` with respect to the input."""
    x = _check_input(net, x)
    act = net.spec.activation
    d = net.spec.input_dim
    y = np.append(x, INPUT_BIAS)
    # Jacobian of the augmented layer output w.r.t. x; bias coordinate is constant
    J = np.vstack([np.eye(d), np.zeros((1, d))])
    for W in net.weights[:-1]:
        z = W @ y
        Jh = act.deriv(z)[:, None] * (W @ J)
        y = np.append(act.fn(z), act.at_zero)
        J = np.vstack([Jh, np.zeros((1, d))])
    return net.weights[-1][0] @ J


@dataclass(frozen=True)
class VariationReport:
    per_neuron_norms: tuple
    max_norm: float
    total_variation: float
    total_l1: float


def variation(net):
    norms = tuple(np.abs(W).sum(axis=1) for W in net.weights)
    max_norm = float(max(n.max() for n in norms))
    return VariationReport(
        per_neuron_norms=norms,
        max_norm=max_norm,
        total_variation=max_norm ** net.depth,
        total_l1=float(sum(n.sum() for n in norms)),
    )
