"""JSON checkpoints for networks.

Floats are written with ``repr`` precision (the json module default), so a
load after save reproduces every weight bit for bit.
"""
import json

import numpy as np

from .network import ActivationKind, ArchitectureSpec, Network

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class MalformedCheckpointError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


def to_document(net):
    return {
        "format_version": FORMAT_VERSION,
        "layer_widths": list(net.spec.layer_widths),
        "activation": net.spec.activation.value,
        "weights": [W.tolist() for W in net.weights],
    }


def from_document(doc):
    if not isinstance(doc, dict):
        raise MalformedCheckpointError("checkpoint must be a JSON object", field="<root>")
    for key in ("format_version", "layer_widths", "activation", "weights"):
        if key not in doc:
            raise MalformedCheckpointError(f"missing field '{key}'", field=key)
    version = doc["format_version"]
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"unsupported format_version {version!r}, expected {FORMAT_VERSION}",
            field="format_version",
        )
    try:
        activation = ActivationKind(doc["activation"])
    except ValueError as exc:
        raise MalformedCheckpointError(f"unknown activation {doc['activation']!r}", field="activation") from exc
    try:
        spec = ArchitectureSpec(tuple(doc["layer_widths"]), activation)
    except (TypeError, ValueError) as exc:
        raise MalformedCheckpointError(f"bad layer_widths: {exc}", field="layer_widths") from exc
    weights = doc["weights"]
    if not isinstance(weights, list) or len(weights) != spec.depth:
        raise CheckpointShapeError(
            f"expected {spec.depth} weight matrices for widths {list(spec.layer_widths)}",
            field="weights",
        )
    arrays = []
    for l, (W, shape) in enumerate(zip(weights, spec.weight_shapes), start=1):
        try:
            A = np.array(W, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise MalformedCheckpointError(f"layer {l} is not a numeric matrix", field=f"weights[{l - 1}]") from exc
        if A.shape != shape:
            raise CheckpointShapeError(
                f"layer {l}: shape {A.shape} does not match expected {shape}",
                field=f"weights[{l - 1}]",
            )
        if not np.all(np.isfinite(A)):
            raise MalformedCheckpointError(f"layer {l} has non-finite entries", field=f"weights[{l - 1}]")
        arrays.append(A)
    return Network(spec, tuple(arrays))


def save(net, path):
    with open(path, "w") as fh:
        json.dump(to_document(net), fh)


def load(path):
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedCheckpointError(f"not valid JSON: {exc}", field="<document>") from exc
    return from_document(doc)
