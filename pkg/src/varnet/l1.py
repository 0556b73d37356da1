"""Euclidean projection onto l1 balls.

The sort-based soft-thresholding routine below is the only projection used by
training; rows of a weight matrix are projected independently.
"""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class L1Ball:
    radius: float

    def __post_init__(self):
        if not np.isfinite(self.radius) or self.radius < 0:
            raise ValueError(f"l1 ball radius must be finite and >= 0, got {self.radius}")

    def contains(self, w, atol=0.0):
        return l1_norm(w) <= self.radius + atol

    def project(self, w):
        return project_l1_ball(w, self.radius)


def l1_norm(w):
    w = np.asarray(w, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise ValueError("l1_norm requires finite entries")
    return float(np.sum(np.abs(w)))


def _check_radius(v):
    if not np.isfinite(v) or v < 0:
        raise ValueError(f"radius must be finite and >= 0, got {v}")


def project_rows(W, v):
    """Project every row of ``W`` onto the l1 ball of radius ``v``.

    Rows already inside the ball (``||w||_1 <= v``, boundary included) are
    returned unchanged. Others are soft-thresholded at the unique ``theta``
    with ``sum(max(|w_j| - theta, 0)) == v``.
    """
    _check_radius(v)
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise ValueError(f"expected a 2-d array of rows, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ValueError("cannot project non-finite entries")
    out = W.copy()
    A = np.abs(W)
    outside = A.sum(axis=1) > v
    if not np.any(outside):
        return out
    if v == 0:
        out[outside] = 0.0
        return out

    A_out = A[outside]
    # descending order; stable so equal magnitudes keep their index order
    U = -np.sort(-A_out, axis=1, kind="stable")
    css = np.cumsum(U, axis=1)
    k = np.arange(1, U.shape[1] + 1)
    # largest k with u_k > (css_k - v) / k; always >= 1 when v > 0
    active = U * k > css - v
    # k = 1 is always active; rounding can hide it when v is tiny relative to u_1
    active[:, 0] = True
    rho = U.shape[1] - 1 - np.argmax(active[:, ::-1], axis=1)
    rows = np.arange(U.shape[0])
    theta = (css[rows, rho] - v) / (rho + 1)
    theta = np.maximum(theta, 0.0)
    out[outside] = np.sign(W[outside]) * np.maximum(A_out - theta[:, None], 0.0)
    return out


def project_l1_ball(w, v):
    """Euclidean projection of the vector ``w`` onto ``{u : ||u||_1 <= v}``.

    >>> project_l1_ball([3.0, 1.0], 2.0)
    array([2., 0.])
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise ValueError(f"expected a vector, got shape {w.shape}")
    if w.size == 0:
        _check_radius(v)
        return w.copy()
    return project_rows(w[None, :], v)[0]
