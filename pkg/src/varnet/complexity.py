"""Numerical probes of capacity: Rademacher estimates, derivative envelopes, covers.

``rademacher_estimate`` maximizes a non-convex objective by multi-start ascent,
so it is a *lower* estimate of the expected supremum.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .l1 import project_rows
from .network import ArchitectureSpec, Network, predict, variation


@dataclass(frozen=True)
class RademacherConfig:
    V: float
    d: int
    n: int
    sign_draws: int = 64
    starts: int = 32
    ascent_steps: int = 200
    lr: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.V) and self.V > 0):
            raise ValueError(f"V must be > 0, got {self.V}")
        for name in ("d", "n", "sign_draws", "starts", "ascent_steps"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")


def _l1_sphere_points(rng, k, d, radius):
    e = rng.exponential(size=(k, d))
    e /= e.sum(axis=1, keepdims=True)
    return radius * rng.choice(np.array([-1.0, 1.0]), size=(k, d)) * e


def max_sign_correlation(Z, signs, V, starts, steps=200, lr=0.1):
    """Best found ``|mean_i xi_i sigma(w . z_i)|`` over ``||w||_1 <= V``.

    ``signs`` has shape ``(m, n)``: one row per sign vector. ``starts`` is an
    ``(S, d)`` array of initial points used for every sign vector. Each start
    runs projected ascent with normalized steps of length ``lr * V`` decaying
    linearly to zero; the best value over all iterates is kept.
    Returns an array of length ``m``.
    """
    Z = np.asarray(Z, dtype=np.float64)
    signs = np.atleast_2d(np.asarray(signs, dtype=np.float64))
    starts = np.asarray(starts, dtype=np.float64)
    n, d = Z.shape
    m, S = signs.shape[0], starts.shape[0]
    W = np.broadcast_to(starts, (m, S, d)).copy()
    best = np.zeros(m)
    for t in range(steps + 1):
        s = expit(W @ Z.T)  # (m, S, n)
        g = np.einsum("msn,mn->ms", s, signs) / n
        best = np.maximum(best, np.abs(g).max(axis=1))
        if t == steps:
            break
        ds = s * (1.0 - s) * signs[:, None, :]
        grad = np.sign(g)[:, :, None] * (ds @ Z) / n  # (m, S, d)
        norm = np.linalg.norm(grad, axis=2, keepdims=True)
        step = lr * V * (1.0 - t / steps)
        W = W + step * np.divide(grad, norm, out=np.zeros_like(grad), where=norm > 0)
        W = project_rows(W.reshape(m * S, d), V).reshape(m, S, d)
    return best


def rademacher_estimate(cfg, chunk=8):
    """Lower estimate of ``E sup_{||w||_1 <= V} |n^-1 sum_i xi_i sigma(w . z_i)|``.

    Inputs ``z_i`` are uniform on ``[-1, 1]^d``. Starting points are the origin
    plus ``starts - 1`` points on the l1 sphere of radius ``V``; their directions
    depend only on ``(d, starts, seed)`` so estimates at different ``V`` share
    them.
    """
    rng = np.random.default_rng(cfg.seed)
    Z = rng.uniform(-1.0, 1.0, size=(cfg.n, cfg.d))
    signs = rng.choice(np.array([-1.0, 1.0]), size=(cfg.sign_draws, cfg.n))
    dirs = _l1_sphere_points(rng, cfg.starts - 1, cfg.d, 1.0)
    starts = np.vstack([np.zeros((1, cfg.d)), cfg.V * dirs])
    best = np.concatenate([
        max_sign_correlation(Z, signs[i:i + chunk], cfg.V, starts, cfg.ascent_steps, cfg.lr)
        for i in range(0, cfg.sign_draws, chunk)
    ])
    return float(best.mean())


def first_derivative_envelope(V, L, s1=0.25):
    """Explicit-constant bound ``s1**(L-1) * V**L`` on ``|df/dx_j|``."""
    return s1 ** (L - 1) * V ** L


def second_derivative_envelope(V, L, s1=0.25, s2=1.0 / (6.0 * np.sqrt(3.0))):
    """Bound on ``|d^2 f / dx_j dx_k|`` for f in the class with row budget ``V``.

    Chain rule through each hidden layer ``y = sigma(w . y_prev)``::

        D1[1] = s1 V,           D2[1] = s2 V^2
        D1[l+1] = s1 V D1[l],   D2[l+1] = s2 (V D1[l])^2 + s1 V D2[l]

    and the output adds one factor ``V``. For L = 2 this is ``s2 V^3``; for
    L = 3 it is ``s2 s1^2 V^5 + s1 s2 V^4``.
    """
    if L == 1:
        return 0.0
    D1, D2 = s1 * V, s2 * V ** 2
    for _ in range(L - 2):
        D1, D2 = s1 * V * D1, s2 * (V * D1) ** 2 + s1 * V * D2
    return V * D2


@dataclass
class DerivativeReport:
    L: int
    V: float
    max_first: float
    first_bound: float
    first_violations: int
    max_second: float = None
    second_bound: float = None
    second_violations: int = None
    # leading coefficient of the second-order bound when written as C2 * V**(2L-1)
    second_constant: float = None
    fd_tolerance: float = 1e-6
    points: int = 0

    @property
    def ok(self):
        return self.first_violations == 0 and not self.second_violations


def fd_input_gradients(net, X, h=1e-5):
    X = np.asarray(X, dtype=np.float64)
    G, d = X.shape
    E = np.eye(d) * h
    plus = (X[:, None, :] + E[None]).reshape(-1, d)
    minus = (X[:, None, :] - E[None]).reshape(-1, d)
    return ((predict(net, plus) - predict(net, minus)) / (2 * h)).reshape(G, d)


def fd_input_hessians(net, X, h=1e-4):
    X = np.asarray(X, dtype=np.float64)
    G, d = X.shape
    E = np.eye(d) * h
    pp = X[:, None, None, :] + E[None, :, None, :] + E[None, None, :, :]
    pm = X[:, None, None, :] + E[None, :, None, :] - E[None, None, :, :]
    mp = X[:, None, None, :] - E[None, :, None, :] + E[None, None, :, :]
    mm = X[:, None, None, :] - E[None, :, None, :] - E[None, None, :, :]
    f = [predict(net, A.reshape(-1, d)).reshape(G, d, d) for A in (pp, pm, mp, mm)]
    return (f[0] - f[1] - f[2] + f[3]) / (4 * h * h)


def derivative_bound_check(net, grid, max_order=2, box=1.0, fd_tolerance=1e-6):
    """Compare finite-difference input derivatives of ``net`` with the envelopes.

    A point counts as a violation only if it exceeds the envelope by more than
    ``fd_tolerance`` at first order, or by ``max(fd_tolerance, 1e-7 * max(V, 1))``
    at second order, where central second differences are noisier.
    """
    if max_order not in (1, 2):
        raise ValueError(f"max_order must be 1 or 2, got {max_order}")
    X = np.atleast_2d(np.asarray(grid, dtype=np.float64))
    if X.shape[1] != net.spec.input_dim:
        raise ValueError(f"grid must have {net.spec.input_dim} columns")
    if np.any(np.abs(X) > box):
        raise ValueError(f"grid leaves the box ||x||_inf <= {box}")
    L = net.depth
    act = net.spec.activation
    V = variation(net).max_norm
    grads = np.abs(fd_input_gradients(net, X))
    b1 = first_derivative_envelope(V, L, act.sup_deriv)
    report = DerivativeReport(
        L=L, V=V,
        max_first=float(grads.max()),
        first_bound=b1,
        first_violations=int(np.sum(grads.max(axis=1) > b1 + fd_tolerance)),
        fd_tolerance=fd_tolerance,
        points=X.shape[0],
    )
    if max_order == 2:
        hess = np.abs(fd_input_hessians(net, X))
        b2 = second_derivative_envelope(V, L, act.sup_deriv, act.sup_deriv2)
        report.max_second = float(hess.max())
        report.second_bound = b2
        # central second differences at h=1e-4 carry ~1e-8 |f| rounding noise
        tol2 = max(fd_tolerance, 1e-7 * max(V, 1.0))
        report.second_violations = int(np.sum(hess.reshape(len(X), -1).max(axis=1) > b2 + tol2))
        report.second_constant = b2 / V ** (2 * L - 1) if V > 0 else None
    return report


@dataclass
class CoverResult:
    eps: float
    size: int
    n_functions: int
    centers: list = field(default_factory=list, repr=False)


MAX_COVER_FUNCTIONS = 5000


def toy_class_values(V, weight_grid_step, x_grid):
    """Values on ``x_grid`` of every [1,1,1] network on the weight grid.

    Hidden row ``(w, b)`` and output row ``(v, c)`` each take grid values with
    l1 norm at most ``V``. Returns an array of shape ``(n_networks, len(x_grid))``.
    """
    if not weight_grid_step > 0:
        raise ValueError("weight_grid_step must be > 0")
    k = int(np.floor(V / weight_grid_step + 1e-9))
    ticks = weight_grid_step * np.arange(-k, k + 1)
    a, b = np.meshgrid(ticks, ticks, indexing="ij")
    rows = np.column_stack([a.ravel(), b.ravel()])
    rows = rows[np.abs(rows).sum(axis=1) <= V + 1e-12]
    if rows.shape[0] ** 2 > MAX_COVER_FUNCTIONS:
        raise ValueError(f"{rows.shape[0] ** 2} networks is beyond toy scale (max {MAX_COVER_FUNCTIONS}); "
                         "use a coarser weight grid")
    x = np.asarray(x_grid, dtype=np.float64)
    # hidden[i, t] = sigma(w_i x_t + b_i)
    hidden = expit(np.outer(rows[:, 0], x) + rows[:, 1][:, None])
    # f[(i, j), t] = v_j hidden[i, t] + c_j * sigma(0)
    vals = rows[None, :, 0, None] * hidden[:, None, :] + 0.5 * rows[None, :, 1, None]
    return vals.reshape(-1, x.size)


def pairwise_linf(F, chunk=256):
    N = F.shape[0]
    D = np.empty((N, N))
    for i in range(0, N, chunk):
        D[i:i + chunk] = np.abs(F[i:i + chunk, None, :] - F[None, :, :]).max(axis=2)
    return D


def greedy_cover(D, eps):
    """Greedy set cover: centres drawn from the class, ball radius ``eps``."""
    C = D <= eps
    uncovered = np.ones(C.shape[0], dtype=bool)
    centers = []
    while uncovered.any():
        gains = C[:, uncovered].sum(axis=1)
        j = int(np.argmax(gains))
        centers.append(j)
        uncovered &= ~C[j]
    return centers


def covering_estimate(V, eps, d=1, widths=(1, 1, 1), weight_grid_step=0.25, x_grid=None):
    """Greedy L_inf cover size of the toy class at radius ``eps``.

    Only ``d = 1`` with a single hidden neuron is supported.
    """
    if d != 1 or tuple(widths) != (1, 1, 1):
        raise ValueError("covering_estimate only supports d=1 with widths [1, 1, 1]")
    if x_grid is None:
        x_grid = np.linspace(-1.0, 1.0, 41)
    F = toy_class_values(V, weight_grid_step, x_grid)
    centers = greedy_cover(pairwise_linf(F), eps)
    return CoverResult(eps=float(eps), size=len(centers), n_functions=F.shape[0], centers=centers)


def covering_curve(V, eps_list, weight_grid_step=0.25, x_grid=None):
    """``(eps, cover size)`` pairs sharing one distance matrix."""
    if x_grid is None:
        x_grid = np.linspace(-1.0, 1.0, 41)
    D = pairwise_linf(toy_class_values(V, weight_grid_step, x_grid))
    return [(float(e), len(greedy_cover(D, e))) for e in eps_list]


def random_constrained_net(layer_widths, V, rng):
    """Random net with rows drawn uniformly in direction on the l1 sphere, radius in (0, V]."""
    spec = ArchitectureSpec(tuple(layer_widths))
    weights = []
    for r, c in spec.weight_shapes:
        W = _l1_sphere_points(rng, r, c, 1.0) * rng.uniform(0.0, V, size=(r, 1))
        weights.append(W)
    return Network(spec, tuple(weights))
