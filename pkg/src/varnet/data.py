"""Synthetic teachers and regression datasets ``y = f_*(x) + eps``."""
import csv
import enum
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .network import ArchitectureSpec, Network, build_network, predict


class InputLaw(str, enum.Enum):
    GAUSSIAN_STANDARD = "gaussian_standard"
    UNIFORM_BOX = "uniform_box"


class NoiseKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    NONE = "none"


SYMMETRIC_NOISE = frozenset({NoiseKind.GAUSSIAN, NoiseKind.LAPLACE, NoiseKind.NONE})


@dataclass(frozen=True)
class NoiseLaw:
    """Zero-mean noise with second moment ``tau**2``.

    Laplace noise uses scale ``tau / sqrt(2)`` so both kinds share the variance.
    """

    kind: NoiseKind = NoiseKind.GAUSSIAN
    tau: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if not (np.isfinite(self.tau) and self.tau >= 0):
            raise ValueError(f"noise scale tau must be >= 0, got {self.tau}")

    @property
    def symmetric(self):
        return self.kind in SYMMETRIC_NOISE

    def sample(self, rng, n):
        if self.kind is NoiseKind.NONE or self.tau == 0:
            return np.zeros(n)
        if self.kind is NoiseKind.GAUSSIAN:
            return rng.normal(0.0, self.tau, size=n)
        return rng.laplace(0.0, self.tau / np.sqrt(2.0), size=n)


@dataclass(frozen=True, eq=False)
class Teacher:
    """Ground-truth regression function plus the law of its inputs.

    Exactly one of ``beta`` (linear teacher) and ``net`` (network teacher) is set.
    """

    d: int
    beta: np.ndarray = None
    net: Network = None
    input_law: InputLaw = InputLaw.GAUSSIAN_STANDARD
    box: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "input_law", InputLaw(self.input_law))
        if (self.beta is None) == (self.net is None):
            raise ValueError("teacher needs exactly one of beta or net")
        if self.beta is not None:
            beta = np.array(self.beta, dtype=np.float64).reshape(-1)
            if beta.shape != (self.d,) or not np.all(np.isfinite(beta)):
                raise ValueError(f"beta must be a finite vector of length {self.d}")
            beta.flags.writeable = False
            object.__setattr__(self, "beta", beta)
        elif self.net.spec.input_dim != self.d:
            raise ValueError(f"teacher network input dim {self.net.spec.input_dim} != d={self.d}")
        if self.input_law is InputLaw.UNIFORM_BOX and not self.box > 0:
            raise ValueError(f"uniform box half-width must be > 0, got {self.box}")

    @property
    def kind(self):
        return "linear" if self.beta is not None else "teacher_net"

    @property
    def teacher_id(self):
        h = hashlib.blake2b(digest_size=6)
        if self.beta is not None:
            h.update(self.beta.tobytes())
        else:
            for W in self.net.weights:
                h.update(W.tobytes())
        return f"{self.kind}-d{self.d}-{h.hexdigest()}"

    def __call__(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if self.beta is not None:
            if X.shape[1] != self.d:
                raise ValueError(f"inputs must have {self.d} columns, got {X.shape[1]}")
            return X @ self.beta
        return predict(self.net, X)

    def sample_inputs(self, rng, n):
        if self.input_law is InputLaw.GAUSSIAN_STANDARD:
            return rng.standard_normal((n, self.d))
        return rng.uniform(-self.box, self.box, size=(n, self.d))


def make_teacher(kind, rng=None, *, d=None, beta=None, layer_widths=None, V=None,
                 input_law=InputLaw.GAUSSIAN_STANDARD, box=1.0):
    """Build a teacher.

    ``kind="linear"``: uses ``beta`` if given, otherwise draws a standard
    Gaussian ``beta`` of length ``d`` from ``rng``.
    ``kind="teacher_net"``: a random network with widths ``layer_widths`` whose
    every row has l1 norm ``V``.
    """
    if kind == "linear":
        if beta is None:
            if d is None or rng is None:
                raise ValueError("linear teacher needs beta, or d and rng")
            beta = rng.standard_normal(int(d))
        beta = np.asarray(beta, dtype=np.float64)
        return Teacher(d=beta.size, beta=beta, input_law=input_law, box=box)
    if kind == "teacher_net":
        if layer_widths is None or V is None or rng is None:
            raise ValueError("network teacher needs layer_widths, V and rng")
        net = build_network(ArchitectureSpec(tuple(layer_widths)), V, rng)
        return Teacher(d=net.spec.input_dim, net=net, input_law=input_law, box=box)
    raise ValueError(f"unknown teacher kind {kind!r}")


@dataclass(frozen=True, eq=False)
class Dataset:
    inputs: np.ndarray
    responses: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.responses, dtype=np.float64)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError(f"inconsistent dataset shapes {X.shape} / {y.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "responses", y)

    @property
    def n(self):
        return self.inputs.shape[0]

    @property
    def d(self):
        return self.inputs.shape[1]

    def to_csv(self, path):
        """Write ``x_1..x_d,y`` rows and a ``<path>.json`` provenance sidecar."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x_{j + 1}" for j in range(self.d)] + ["y"])
            for x, y in zip(self.inputs, self.responses):
                w.writerow([repr(float(v)) for v in x] + [repr(float(y))])
        with open(f"{path}.json", "w") as fh:
            json.dump(self.provenance, fh, indent=2, sort_keys=True)

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        try:
            with open(f"{path}.json") as fh:
                prov = json.load(fh)
        except FileNotFoundError:
            prov = {}
        return cls(data[:, :-1], data[:, -1], prov)


def sample_dataset(teacher, n, noise, rng, seed=None):
    """Draw ``n`` iid pairs from ``teacher`` under ``noise``.

    Inputs are drawn before noise, both from ``rng``. ``seed`` is recorded in the
    provenance only.
    """
    if int(n) < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    n = int(n)
    X = teacher.sample_inputs(rng, n)
    eps = noise.sample(rng, n)
    y = teacher(X) + eps
    prov = {
        "teacher": teacher.teacher_id,
        "noise": noise.kind.value,
        "tau": float(noise.tau),
        "seed": seed,
        "n": n,
        "d": teacher.d,
    }
    return Dataset(X, y, prov)
