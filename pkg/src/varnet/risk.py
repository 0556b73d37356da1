"""Monte-Carlo risk estimates and log-log slope fits."""
from dataclasses import dataclass

import numpy as np

from .network import predict

DEFAULT_TEST_SIZE = 10_000


@dataclass(frozen=True)
class RiskEstimate:
    value: float
    test_size: int
    std_error: float
    squared_value: float = None


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    points_used: int

    def predict(self, n):
        return np.exp(self.intercept) * np.asarray(n, dtype=np.float64) ** self.slope


def _model_values(model, X):
    if callable(model) and not hasattr(model, "weights"):
        return np.asarray(model(X), dtype=np.float64)
    return predict(model, X)


def _test_inputs(teacher, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError(f"test inputs must be a non-empty (n, d) array, got shape {X.shape}")
    if X.shape[1] != teacher.d:
        raise ValueError(f"test inputs have {X.shape[1]} columns, teacher expects {teacher.d}")
    return X


def risk_l2(model, teacher, test_inputs):
    """Root mean squared gap between ``model`` and ``teacher`` on ``test_inputs``.

    ``std_error`` refers to ``squared_value``.
    """
    X = _test_inputs(teacher, test_inputs)
    sq = (_model_values(model, X) - teacher(X)) ** 2
    m = X.shape[0]
    msq = float(np.mean(sq))
    se = float(np.std(sq, ddof=1) / np.sqrt(m)) if m > 1 else 0.0
    return RiskEstimate(value=float(np.sqrt(msq)), test_size=m, std_error=se, squared_value=msq)


def risk_l1(model, teacher, noise, test_inputs, noise_draws):
    """``mean|f(x) - f_*(x) - eps| - mean|eps|``; can dip below 0 by MC error."""
    if not noise.symmetric:
        raise ValueError(f"l1 risk requires symmetric noise, got {noise.kind.value}")
    X = _test_inputs(teacher, test_inputs)
    eps = np.asarray(noise_draws, dtype=np.float64)
    if eps.shape != (X.shape[0],):
        raise ValueError(f"need one noise draw per test input, got shape {eps.shape}")
    terms = np.abs(_model_values(model, X) - teacher(X) - eps) - np.abs(eps)
    m = X.shape[0]
    se = float(np.std(terms, ddof=1) / np.sqrt(m)) if m > 1 else 0.0
    return RiskEstimate(value=float(np.mean(terms)), test_size=m, std_error=se)


def fit_loglog_slope(points):
    """OLS of ``log(risk)`` on ``log(n)`` over ``(n, risk)`` pairs."""
    pts = [(float(n), float(r)) for n, r in points]
    if len(pts) < 2:
        raise ValueError(f"slope fit needs at least 2 points, got {len(pts)}")
    if any(n <= 0 or r <= 0 for n, r in pts):
        raise ValueError("slope fit needs positive n and risk values")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    if np.ptp(x) == 0:
        raise ValueError("slope fit needs at least two distinct n values")
    xc = x - x.mean()
    yc = y - y.mean()
    slope = float(xc @ yc / (xc @ xc))
    intercept = float(y.mean() - slope * x.mean())
    ss_tot = float(yc @ yc)
    ss_res = float(np.sum((yc - slope * xc) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return SlopeFit(slope=slope, intercept=intercept, r_squared=r2, points_used=len(pts))
