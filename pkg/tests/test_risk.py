import math

import numpy as np
import pytest

from oracles import half_normal_mean
from varnet.data import NoiseLaw, make_teacher
from varnet.network import zero_network
from varnet.risk import fit_loglog_slope, risk_l1, risk_l2


@pytest.fixture
def net_teacher():
    return make_teacher("teacher_net", np.random.default_rng(0), layer_widths=[3, 4, 1], V=2.0,
                        input_law="uniform_box")


def _e1_teacher():
    return make_teacher("linear", beta=[1.0, 0.0, 0.0])


def zero_model(X):
    return np.zeros(len(X))


def test_teacher_against_itself_is_exactly_zero(net_teacher):
    X = net_teacher.sample_inputs(np.random.default_rng(1), 500)
    r = risk_l2(net_teacher.net, net_teacher, X)
    assert r.value == 0.0 and r.squared_value == 0.0 and r.test_size == 500


def test_zero_model_squared_risk_is_second_moment():
    X = np.random.default_rng(2).normal(size=(100_000, 3))
    r = risk_l2(zero_model, _e1_teacher(), X)
    assert abs(r.squared_value - 1.0) < 0.03
    assert r.value == pytest.approx(math.sqrt(r.squared_value))
    assert r.std_error > 0


def test_risk_l2_permutation_invariant(net_teacher):
    rng = np.random.default_rng(3)
    X = net_teacher.sample_inputs(rng, 257)
    model = zero_network((3, 4, 1))
    a = risk_l2(model, net_teacher, X).squared_value
    b = risk_l2(model, net_teacher, X[rng.permutation(len(X))]).squared_value
    assert a == pytest.approx(b, rel=1e-14)


def test_risk_l2_dimension_mismatch(net_teacher):
    with pytest.raises(ValueError):
        risk_l2(zero_model, net_teacher, np.zeros((5, 2)))
    with pytest.raises(ValueError):
        risk_l2(zero_model, net_teacher, np.zeros((0, 3)))


@pytest.mark.parametrize("kind", ["gaussian", "laplace"])
def test_l1_risk_of_teacher_is_zero_within_error(net_teacher, kind):
    rng = np.random.default_rng(4)
    noise = NoiseLaw(kind, 1.0)
    X = net_teacher.sample_inputs(rng, 100_000)
    r = risk_l1(net_teacher.net, net_teacher, noise, X, noise.sample(rng, len(X)))
    # |f - f* - eps| - |eps| vanishes per sample here, so value and std_error are both 0
    assert abs(r.value) <= 3 * r.std_error
    assert r.value == 0.0


@pytest.mark.parametrize("kind", ["gaussian", "laplace"])
def test_l1_risk_near_teacher_is_small_and_nonnegative(net_teacher, kind):
    rng = np.random.default_rng(4)
    noise = NoiseLaw(kind, 1.0)
    X = net_teacher.sample_inputs(rng, 100_000)
    shifted = lambda Z: net_teacher(Z) + 0.05
    r = risk_l1(shifted, net_teacher, noise, X, noise.sample(rng, len(X)))
    assert r.std_error > 0
    assert 0 < r.value < 0.01


def test_l1_risk_noise_free_teacher_is_exactly_zero(net_teacher):
    X = net_teacher.sample_inputs(np.random.default_rng(5), 100)
    r = risk_l1(net_teacher.net, net_teacher, NoiseLaw("none"), X, np.zeros(100))
    assert r.value == 0.0


def test_l1_risk_zero_model_matches_half_normal_mean():
    X = np.random.default_rng(6).normal(size=(100_000, 3))
    r = risk_l1(zero_model, _e1_teacher(), NoiseLaw("none"), X, np.zeros(len(X)))
    assert abs(r.value - half_normal_mean()) < 0.01


def test_l1_risk_noise_draws_validated(net_teacher):
    X = net_teacher.sample_inputs(np.random.default_rng(5), 10)
    with pytest.raises(ValueError):
        risk_l1(zero_model, net_teacher, NoiseLaw(), X, np.zeros(9))


def test_exact_power_law_slope():
    fit = fit_loglog_slope([(2 ** k, 2.0 ** -k) for k in range(5, 12)])
    assert fit.slope == pytest.approx(-1.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.points_used == 7
    assert fit.predict(64) == pytest.approx(1 / 64)


def test_constant_risk_slope_is_zero():
    fit = fit_loglog_slope([(n, 0.3) for n in (10, 20, 40)])
    assert fit.slope == pytest.approx(0.0, abs=1e-12)
    assert 0.0 <= fit.r_squared <= 1.0


def test_slope_invariant_to_scaling():
    rng = np.random.default_rng(7)
    pts = [(2 ** k, rng.uniform(0.1, 1)) for k in range(5, 10)]
    a = fit_loglog_slope(pts)
    b = fit_loglog_slope([(n, 7.0 * r) for n, r in pts])
    assert a.slope == pytest.approx(b.slope, abs=1e-12)
    assert b.intercept == pytest.approx(a.intercept + math.log(7.0))


def test_noisy_power_law_band():
    rng = np.random.default_rng(8)
    ns = np.array([2 ** k for k in range(5, 12)], dtype=float)
    slopes = [fit_loglog_slope(zip(ns, 3.0 / ns * (1 + rng.uniform(-0.05, 0.05, ns.size)))).slope
              for _ in range(100)]
    assert -1.1 <= min(slopes) and max(slopes) <= -0.9


@pytest.mark.parametrize("pts", [[(2, 1.0)], [(2, 1.0), (4, 0.0)], [(0, 1.0), (4, 1.0)], [(4, 1.0), (4, 2.0)]])
def test_slope_fit_errors(pts):
    with pytest.raises(ValueError):
        fit_loglog_slope(pts)
