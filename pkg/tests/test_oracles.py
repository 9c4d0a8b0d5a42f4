import numpy as np
import pytest

from svgreeks.errors import ConfigurationError, ContractViolation, ThirdOrderDisabledError
from svgreeks.estimators import Payoff
from svgreeks.models import preset
from svgreeks.oracles import (
    OracleReport,
    bs_closed_form,
    duality_check,
    exp_quadrature_form,
    fd_greek,
    first_order_closed_form,
    parity_check,
    tangent_oracles,
)
from svgreeks.paths import RngStream, TimeGrid, simulate_path, simulate_paths
from svgreeks.tangents import first_order_DY

BS = (100.0, 100.0, 0.05, 0.2, 1.0)
CALL = Payoff("call", 100.0)


def test_bs_reference_values():
    assert bs_closed_form(*BS, "delta") == pytest.approx(0.636831, abs=5e-7)
    assert bs_closed_form(*BS, "gamma") == pytest.approx(0.018762, abs=5e-7)
    assert bs_closed_form(*BS, "price") == pytest.approx(10.4506, abs=5e-5)
    assert bs_closed_form(*BS, "vega") == pytest.approx(7.5048, abs=5e-5)
    assert bs_closed_form(*BS, "rho") == pytest.approx(53.2325, abs=5e-5)
    assert bs_closed_form(*BS, "digital_delta") == pytest.approx(0.018762, abs=5e-7)


def test_bs_parity_and_limits():
    c, p = bs_closed_form(*BS, "price"), bs_closed_form(*BS, "put_price")
    assert c - p == pytest.approx(100.0 - 100.0 * np.exp(-0.05))
    assert bs_closed_form(1000.0, 100.0, 0.05, 0.2, 1.0, "delta") == pytest.approx(1.0, abs=1e-6)


def test_bs_vega_is_scale_convention():
    h = 1e-6
    up = bs_closed_form(100, 100, 0.05, 0.2 * (1 + h), 1.0, "price")
    dn = bs_closed_form(100, 100, 0.05, 0.2 * (1 - h), 1.0, "price")
    assert (up - dn) / (2 * h) == pytest.approx(bs_closed_form(*BS, "vega"), rel=1e-7)


@pytest.mark.parametrize("bad", [dict(sigma=0.0), dict(T=-1.0), dict(x=0.0)])
def test_bs_domain_errors(bad):
    args = dict(x=100.0, K=100.0, r=0.05, sigma=0.2, T=1.0) | bad
    with pytest.raises(ConfigurationError):
        bs_closed_form(quantity="price", **args)
    with pytest.raises(ConfigurationError):
        bs_closed_form(*BS, "theta")


def test_report_pass_is_pure_function_of_numbers():
    assert OracleReport("a", 1.0, 1.29, 0.1).passed
    assert not OracleReport("a", 1.0, 1.31, 0.1).passed
    assert OracleReport("b", 2.0, 2.0 + 1e-11, tolerance=1e-11).passed
    assert not OracleReport("b", 0.0, 1e-3, tolerance=1e-4).passed


def test_fd_delta_black_scholes():
    m, g = preset("black_scholes"), TimeGrid(1.0, 16)
    fd = fd_greek(m, CALL, g, 100_000, 0, "x", 0.5)
    assert abs(fd.value - bs_closed_form(*BS, "delta")) <= 3 * fd.std_error


def test_fd_zero_bump_is_contract_violation():
    with pytest.raises(ContractViolation):
        fd_greek(preset("black_scholes"), CALL, TimeGrid(1.0, 4), 200, 0, "x", 0.0)


def test_fd_converges_to_pathwise_derivative():
    # On common random numbers the bumped difference tends to the same-path
    # pathwise derivative disc 1{X_T > K} X_T / x; its distance to that limit
    # shrinks monotonically, while the distance to the closed form is
    # dominated by the shared Monte Carlo error.
    m, g, n, seed = preset("black_scholes"), TimeGrid(1.0, 4), 200_000, 1
    xt = simulate_paths(m, g, seed, 0, n).X[:, -1]
    pathwise = np.exp(-0.05) * np.mean((xt > 100.0) * xt / 100.0)
    ref = bs_closed_form(*BS, "delta")
    gaps = []
    for h in (1e-1, 1e-2, 1e-3):
        fd = fd_greek(m, CALL, g, n, seed, "x", h)
        gaps.append(abs(fd.value - pathwise))
        assert abs(fd.value - ref) <= 3 * fd.std_error
    assert gaps[0] > gaps[1] > gaps[2]


def test_fd_param_must_be_known():
    with pytest.raises(ConfigurationError):
        fd_greek(preset("black_scholes"), CALL, TimeGrid(1.0, 4), 200, 0, "theta")


def test_parity_oracle():
    r = parity_check(preset("heston_like", r=0.03), TimeGrid(1.0, 16), 40000, 2, 95.0)
    assert r.passed


def test_duality_gate():
    lhs, rhs = duality_check(100_000, 12)
    assert lhs.passed and rhs.passed
    assert lhs.oracle == 1.0


def test_duality_degenerate_cases():
    lhs, rhs = duality_check(1000, 0, u=0.0)
    assert (lhs.estimate, rhs.estimate) == (0.0, 0.0)
    assert lhs.passed and rhs.passed


def test_tangent_oracles_black_scholes_trivial():
    m, g = preset("black_scholes"), TimeGrid(1.0, 16)
    reps = tangent_oracles(simulate_path(m, g, RngStream(0, 0)), m)
    assert all(r.passed for r in reps)
    assert reps[0].estimate == 0.0 and reps[1].estimate == 0.0


@pytest.mark.parametrize("n", [32, 64])
def test_tangent_oracles_alpha_hypergeometric(n):
    m, g = preset("alpha_hypergeometric"), TimeGrid(1.0, n)
    reps = tangent_oracles(simulate_path(m, g, RngStream(42, 0)), m)
    assert all(r.passed for r in reps), [(r.name, r.rel_diff) for r in reps if not r.passed]


def test_continuous_exponential_formula_converges_at_first_order():
    m = preset("alpha_hypergeometric")
    gaps = []
    for n in (32, 64, 128, 256):
        g = TimeGrid(1.0, n)
        p = simulate_path(m, g, RngStream(7, 0))
        D = first_order_DY(p, m)
        gaps.append(np.max(np.abs(exp_quadrature_form(p, m) - D)) / np.max(np.abs(D)))
    ratios = np.array(gaps[:-1]) / np.array(gaps[1:])
    assert np.all(ratios > 1.4), gaps
    assert gaps[0] > 1e-4  # far outside 1e-10 on any practical grid


def test_closed_form_oracles_need_constant_beta():
    m, g = preset("heston_like"), TimeGrid(1.0, 8)
    p = simulate_path(m, g, RngStream(0, 0))
    with pytest.raises(ThirdOrderDisabledError):
        first_order_closed_form(p, m)
