import math

import numpy as np
import pytest

from svgreeks import estimators as est
from svgreeks.engine import PathFunctionals, evaluate
from svgreeks.errors import (
    ConfigurationError,
    DegenerateDenominatorError,
    EmptySampleError,
    UnsupportedGreekError,
)
from svgreeks.estimators import GreekEstimate, Payoff, delta_weights, gamma_weights, mc_reduce, param_tangent
from svgreeks.models import preset
from svgreeks.oracles import bs_closed_form, fd_greek
from svgreeks.paths import RngStream, TimeGrid, simulate_block, simulate_path

CALL = Payoff("call", 100.0)
ONE = Payoff("digital_call", 1e-12)  # pays 1 on every path


def within(a: GreekEstimate, value, se=None, k=3.0):
    se = a.std_error if se is None else se
    return abs(a.value - value) <= k * se


def test_mc_reduce_examples():
    assert mc_reduce(np.full(10, 2.5)) == (2.5, 0.0)
    assert mc_reduce([1.0, -1.0]) == (0.0, 1.0)
    assert mc_reduce([4.0]) == (4.0, 0.0)
    assert mc_reduce([1.0, 5.0, 3.0], rejected=[False, True, False]) == (2.0, 1.0)
    with pytest.raises(EmptySampleError):
        mc_reduce([1.0, 2.0], rejected=[True, True])
    with pytest.raises(EmptySampleError):
        mc_reduce([])


def test_payoffs():
    x = np.array([90.0, 100.0, 110.0])
    assert Payoff("call", 100).__call__(x).tolist() == [0.0, 0.0, 10.0]
    assert Payoff("put", 100)(x).tolist() == [10.0, 0.0, 0.0]
    assert Payoff("digital_call", 100)(x).tolist() == [0.0, 0.0, 1.0]
    with pytest.raises(ConfigurationError):
        Payoff("barrier", 100)
    with pytest.raises(ConfigurationError):
        Payoff("call", 0.0)


def test_zero_payoff_prices_to_zero_exactly():
    e = est.price(preset("black_scholes"), Payoff("digital_call", 1e300), TimeGrid(1.0, 8), 1000, 0)
    assert (e.value, e.std_error) == (0.0, 0.0)


def test_put_call_parity():
    m, g = preset("alpha_hypergeometric", r=0.02), TimeGrid(1.0, 16)
    c = est.price(m, CALL, g, 40000, 5)
    p = est.price(m, Payoff("put", 100.0), g, 40000, 5)
    assert abs(c.value - p.value - (100.0 - 100.0 * math.exp(-0.02))) <= 3 * math.hypot(c.std_error, p.std_error)


@pytest.mark.parametrize("name", ["black_scholes", "alpha_hypergeometric"])
def test_constant_payoff_forces_known_values(name):
    m, g = preset(name, r=0.04), TimeGrid(1.0, 16)
    F = evaluate(m, g, 20000, 8, order=3, params=("rho_rate", "vega_scale"))
    price = est.estimate_from(F, ONE, "price")
    assert price.value == pytest.approx(math.exp(-0.04))
    for g_name in ("delta", "gamma", "vega"):
        e = est.estimate_from(F, ONE, g_name)
        assert within(e, 0.0), (g_name, e)
    r = est.estimate_from(F, ONE, "rho")
    assert within(r, -1.0 * price.value)
    r_off = est.estimate_from(F, ONE, "rho", discounting=False)
    assert within(r_off, 0.0)


def test_variant_identity_per_path_and_aggregate():
    m, g = preset("black_scholes"), TimeGrid(1.0, 16)
    F = evaluate(m, g, 5000, 1, order=2)
    diff = delta_weights(F, "paper_verbatim") - delta_weights(F, "corrected")
    expected = -(F.X_T * (1 - F.J / F.I**2) + F.J / F.I**2) / F.x0
    assert np.allclose(diff, expected, rtol=1e-14, atol=0)
    c = est.estimate_from(F, CALL, "delta", "corrected")
    v = est.estimate_from(F, CALL, "delta", "paper_verbatim")
    shift = F.discount / F.x0 * np.mean(CALL(F.X_T) * F.X_T)
    assert v.value == pytest.approx(c.value - shift, rel=1e-12)


def test_variant_identity_with_nonzero_J():
    m, g = preset("alpha_hypergeometric"), TimeGrid(1.0, 16)
    F = evaluate(m, g, 2000, 1, order=2)
    assert np.all(F.J != 0)
    diff = delta_weights(F, "paper_verbatim") - delta_weights(F, "corrected")
    expected = -(F.X_T * (1 - F.J / F.I**2) + F.J / F.I**2) / F.x0
    assert np.allclose(diff, expected, rtol=1e-12, atol=1e-15)


def test_black_scholes_greeks_small_sample():
    m, g = preset("black_scholes"), TimeGrid(1.0, 16)
    F = evaluate(m, g, 100_000, 21, order=3, params=("rho_rate", "vega_scale"))
    for greek in ("price", "delta", "gamma", "rho", "vega"):
        e = est.estimate_from(F, CALL, greek)
        assert within(e, bs_closed_form(100, 100, 0.05, 0.2, 1.0, greek)), (greek, e)
        assert e.n_rejected == 0


def test_black_scholes_gamma_constant_weight_closed_form():
    # with J = K = 0 the corrected Gamma weight reduces to the textbook
    # (W^2 / (sigma T) - 1/sigma - W) / (x^2 sigma T)
    m, g = preset("black_scholes"), TimeGrid(1.0, 8)
    F = evaluate(m, g, 1000, 2, order=3)
    W, s = F.skorohod_u, 0.2
    ref = (W**2 / s - 1 / s - W) / (100.0**2 * s)
    assert np.allclose(gamma_weights(F), ref, rtol=1e-12)


@pytest.mark.parametrize("greek,param", [("delta", "x"), ("gamma", "xx"), ("rho", "rho"), ("vega", "vega")])
def test_alpha_hypergeometric_against_finite_differences(greek, param):
    m = preset("alpha_hypergeometric", mu=0.06, r=0.02, mpr_b=0.1)
    g = TimeGrid(1.0, 16)
    e = getattr(est, greek)(m, CALL, g, 60000, 17)
    bump = {"x": 0.5, "xx": 2.0}.get(param)
    fd = fd_greek(m, CALL, g, 60000, 17, param, bump)
    assert abs(e.value - fd.value) <= 3 * math.hypot(e.std_error, fd.std_error), (e, fd)


@pytest.mark.parametrize("name", ["linear_sv", "hull_white_like"])
@pytest.mark.parametrize("greek,param", [("delta", "x"), ("rho", "rho"), ("vega", "vega")])
def test_first_order_greeks_on_state_dependent_vol_of_vol(name, greek, param):
    m = preset(name, mu=0.05, r=0.01)
    g = TimeGrid(1.0, 16)
    e = getattr(est, greek)(m, CALL, g, 60000, 3)
    fd = fd_greek(m, CALL, g, 60000, 3, param, 0.5 if param == "x" else None)
    assert e.std_error < 5 * fd.std_error + 0.05 * abs(fd.value)
    assert abs(e.value - fd.value) <= 3 * math.hypot(e.std_error, fd.std_error), (e, fd)


def test_square_root_volatility_denominator_changes_sign():
    # sigma = sqrt(y) has sigma' = 1 / (2 sqrt(y)); at low variance and strong
    # correlation the tangent terms of L dominate and int u L dt crosses zero
    # on a small set of paths.  The Delta weight then has no finite variance.
    m, g = preset("heston_like"), TimeGrid(1.0, 16)
    F = evaluate(m, g, 20000, 0, order=2)
    assert np.any(F.I <= 0)
    assert np.mean(F.I <= 0) < 0.01


def test_gamma_rejected_on_extension_models():
    with pytest.raises(UnsupportedGreekError):
        est.gamma(preset("hull_white_like"), CALL, TimeGrid(1.0, 8), 200, 0)


def test_gamma_grid_cap():
    with pytest.raises(ConfigurationError, match="512"):
        est.gamma(preset("black_scholes"), CALL, TimeGrid(1.0, 513), 200, 0)


def test_paper_verbatim_not_offered_for_rho():
    F = evaluate(preset("black_scholes"), TimeGrid(1.0, 4), 200, 0, params=("rho_rate",))
    with pytest.raises(UnsupportedGreekError):
        est.estimate_from(F, CALL, "rho", "paper_verbatim")


def test_digital_delta_std_error_scales_like_root_n():
    m, g = preset("black_scholes"), TimeGrid(1.0, 16)
    dig = Payoff("digital_call", 100.0)
    a = est.delta(m, dig, g, 20000, 4)
    b = est.delta(m, dig, g, 80000, 4)
    assert 1.8 <= a.std_error / b.std_error <= 2.2
    assert within(b, bs_closed_form(100, 100, 0.05, 0.2, 1.0, "digital_delta"))


def test_digital_gamma_matches_fd_of_malliavin_delta():
    m, g, n, seed, h = preset("black_scholes"), TimeGrid(1.0, 16), 100_000, 6, 0.5
    dig = Payoff("digital_call", 100.0)
    gm = est.gamma(m, dig, g, n, seed)
    up = evaluate(m.with_x0(100 + h), g, n, seed, order=2)
    dn = evaluate(m.with_x0(100 - h), g, n, seed, order=2)
    per_path = up.discount * (dig(up.X_T) * delta_weights(up) - dig(dn.X_T) * delta_weights(dn)) / (2 * h)
    fd, fd_se = mc_reduce(per_path)
    assert abs(gm.value - fd) <= 3 * math.hypot(gm.std_error, fd_se)


def test_param_tangent_black_scholes_rho():
    m, g = preset("black_scholes"), TimeGrid(1.0, 10)
    p = simulate_path(m, g, RngStream(0, 3))
    zx, zy = param_tangent(m, p, "rho_rate")
    assert np.allclose(zx, g.times * p.X, rtol=1e-13)
    assert not np.any(zy)


@pytest.mark.parametrize("name", ["black_scholes", "alpha_hypergeometric"])
def test_param_tangent_vega_matches_bumped_parameter(name):
    m, g = preset(name, mu=0.07, r=0.02), TimeGrid(1.0, 16)
    p = simulate_path(m, g, RngStream(1, 0))
    zx, zy = param_tangent(m, p, "vega_scale")
    e = 1e-5

    def run(scale):
        return simulate_block(m.with_sigma_scale(scale), g, p.dW[None], p.dWp[None])

    up, dn = run(1 + e), run(1 - e)
    assert np.allclose((up.X[0] - dn.X[0]) / (2 * e), zx, rtol=1e-4, atol=1e-8)
    assert np.allclose((up.Y[0] - dn.Y[0]) / (2 * e), zy, rtol=1e-4, atol=1e-8)


def test_param_tangent_vega_state_flat_when_beta_zero():
    m, g = preset("alpha_hypergeometric", beta=0.0), TimeGrid(1.0, 8)
    p = simulate_path(m, g, RngStream(0, 0))
    _, zy = param_tangent(m, p, "vega_scale")
    assert not np.any(zy)


def _fake_functionals(I):
    I = np.asarray(I, dtype=float)
    n = I.size
    return PathFunctionals(X_T=np.full(n, 110.0), I=I, skorohod_u=np.ones(n), J=np.zeros(n), K=np.zeros(n), x0=100.0)


def test_rejection_policy_counts_and_fails():
    I = np.full(2000, 0.2)
    I[7] = 1e-12
    e = est.estimate_from(_fake_functionals(I), CALL, "delta", eps_den=1e-9)
    assert e.n_rejected == 1
    assert e.value == pytest.approx(10.0 * (1 / 0.2) / 100.0)
    I[8:20] = 0.0
    with pytest.raises(DegenerateDenominatorError):
        est.estimate_from(_fake_functionals(I), CALL, "delta", eps_den=1e-9)


def test_default_threshold_rejects_nothing():
    m, g = preset("alpha_hypergeometric"), TimeGrid(1.0, 16)
    e = est.delta(m, CALL, g, 20000, 0)
    assert e.n_rejected == 0
    assert est.default_eps_den(m, 1.0) == pytest.approx(1e-8)
