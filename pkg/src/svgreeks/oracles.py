"""Ground truth for the estimators and tangent fields.

Nothing here reuses the estimator code paths: Black-Scholes values come from
normal CDF/PDF formulas, finite differences from re-simulating bumped models
on common random numbers, and the tangent oracles from closed forms of the
discrete linear recursions or from re-simulating paths with perturbed noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import ConfigurationError, ContractViolation
from .estimators import GreekEstimate, Payoff, mc_reduce
from .models import ModelSpec, tangent_coefficients
from .paths import BLOCK_SIZE, GridCurves, PathBundle, TimeGrid, increments, quad_sum, simulate_block
from .tangents import iter_second_order, tangent_bundle

N_SIGMA = 3.0

BS_QUANTITIES = (
    "price", "put_price", "delta", "gamma", "rho", "vega", "digital_price", "digital_delta",
)


@dataclass(frozen=True)
class OracleReport:
    """One oracle comparison.

    Statistical rows (``tolerance is None``) pass when
    ``|estimate - oracle| <= 3 std_error``; deterministic rows pass when the
    relative difference is at most ``tolerance``.
    """

    name: str
    oracle: float
    estimate: float
    std_error: float = 0.0
    tolerance: float | None = None

    @property
    def diff(self) -> float:
        return abs(self.estimate - self.oracle)

    @property
    def rel_diff(self) -> float:
        return self.diff / abs(self.oracle) if self.oracle != 0 else self.diff

    @property
    def passed(self) -> bool:
        if self.tolerance is None:
            return bool(self.diff <= N_SIGMA * self.std_error)
        return bool(self.rel_diff <= self.tolerance)


# Black-Scholes ----------------------------------------------------------------


def bs_closed_form(x, K, r, sigma, T, quantity):
    """Black-Scholes value of ``quantity`` for a European call (or put/digital).

    Vega is reported under the scale convention, ``d C / d eps`` for
    ``sigma -> (1 + eps) sigma``, which is ``sigma x phi(d1) sqrt(T)``.

    >>> round(bs_closed_form(100, 100, 0.05, 0.2, 1.0, "delta"), 6)
    0.636831
    """
    if quantity not in BS_QUANTITIES:
        raise ConfigurationError(f"unknown closed-form quantity {quantity!r}; valid: {', '.join(BS_QUANTITIES)}")
    if not (sigma > 0 and T > 0 and x > 0 and K > 0):
        raise ConfigurationError(f"closed forms need x, K, sigma, T > 0 (got x={x}, K={K}, sigma={sigma}, T={T})")
    sq = sigma * np.sqrt(T)
    d1 = (np.log(x / K) + (r + 0.5 * sigma**2) * T) / sq
    d2 = d1 - sq
    disc = np.exp(-r * T)
    values = {
        "price": lambda: x * norm.cdf(d1) - K * disc * norm.cdf(d2),
        "put_price": lambda: K * disc * norm.cdf(-d2) - x * norm.cdf(-d1),
        "delta": lambda: norm.cdf(d1),
        "gamma": lambda: norm.pdf(d1) / (x * sq),
        "rho": lambda: K * T * disc * norm.cdf(d2),
        "vega": lambda: sigma * x * norm.pdf(d1) * np.sqrt(T),
        "digital_price": lambda: disc * norm.cdf(d2),
        "digital_delta": lambda: disc * norm.pdf(d2) / (x * sq),
    }
    return float(values[quantity]())


def bs_reference(model: ModelSpec, payoff: Payoff, T: float, greek: str) -> float | None:
    """Closed-form value of ``greek`` for a Black-Scholes model, or ``None`` if there is none."""
    sig0 = float(model.sigma.eval(model.y0))
    if not (model.r.is_constant and model.sigma.d1(model.y0) == 0 and model.beta == 0 and model.beta_fn is None):
        return None
    r = model.r.constant_value
    args = (model.x0, payoff.strike, r, sig0, T)
    if payoff.kind == "call":
        return bs_closed_form(*args, greek)
    if payoff.kind == "digital_call" and greek in ("price", "delta"):
        return bs_closed_form(*args, "digital_" + greek)
    if payoff.kind == "put" and greek == "price":
        return bs_closed_form(*args, "put_price")
    if payoff.kind == "put" and greek == "delta":
        return bs_closed_form(*args, "delta") - 1.0
    return None


# finite differences -------------------------------------------------------------


def _terminal_blocks(models, grid: TimeGrid, n_paths: int, seed: int):
    """Yield ``X_T`` arrays of each model on identical increments, block by block."""
    for start in range(0, n_paths, BLOCK_SIZE):
        stop = min(start + BLOCK_SIZE, n_paths)
        dw, dwp = increments(seed, start, stop, grid)
        yield [simulate_block(m, grid, dw, dwp).X[:, -1] for m in models]


def _discount(model: ModelSpec, grid: TimeGrid) -> float:
    return float(np.exp(-quad_sum(GridCurves.of(model, grid).r, grid)))


def default_bump(model: ModelSpec, param: str) -> float:
    """0.5% of the parameter scale for first derivatives, 1% for the second."""
    if param == "x":
        return 0.005 * model.x0
    if param == "xx":
        return 0.01 * model.x0
    if param == "rho":
        return 0.005 * max(abs(model.r.constant_value or 0.0), 0.01)
    if param == "vega":
        return 0.005
    raise ConfigurationError(f"unknown finite-difference parameter {param!r}; valid: x, xx, rho, vega")


def fd_greek(
    model: ModelSpec,
    payoff: Payoff,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    param: str,
    bump: float | None = None,
    discounting: bool = True,
) -> GreekEstimate:
    """Central finite difference on common random numbers.

    ``param`` is ``x`` (Delta), ``xx`` (Gamma, second central difference),
    ``rho`` (parallel shift of the short rate, ``mu`` held fixed) or ``vega``
    (scale perturbation of ``sigma``).  The standard error is computed from the
    per-path differenced values.
    """
    h = default_bump(model, param) if bump is None else float(bump)
    if not h > 0:
        raise ContractViolation(f"finite-difference bump must be positive, got {bump!r}")
    if param in ("x", "xx"):
        if h >= model.x0:
            raise ContractViolation("x bump must be smaller than x0")
        up, dn = model.with_x0(model.x0 + h), model.with_x0(model.x0 - h)
        greek = "delta" if param == "x" else "gamma"
    elif param == "rho":
        if not model.r.is_constant:
            raise ConfigurationError("rho finite difference needs a constant short-rate curve")
        up, dn = model.with_rate_shift(h), model.with_rate_shift(-h)
        greek = "rho"
    elif param == "vega":
        up, dn = model.with_sigma_scale(1.0 + h), model.with_sigma_scale(1.0 - h)
        greek = "vega"
    else:
        raise ConfigurationError(f"unknown finite-difference parameter {param!r}; valid: x, xx, rho, vega")
    models = [up, dn, model] if param == "xx" else [up, dn]
    discs = [(_discount(m, grid) if discounting else 1.0) for m in models]
    parts = []
    for xs in _terminal_blocks(models, grid, n_paths, seed):
        vals = [d * payoff(x) for d, x in zip(discs, xs)]
        if param == "xx":
            parts.append((vals[0] - 2.0 * vals[2] + vals[1]) / (h * h))
        else:
            parts.append((vals[0] - vals[1]) / (2.0 * h))
    mean, se = mc_reduce(np.concatenate(parts))
    return GreekEstimate(greek, "fd", mean, se, n_paths, 0, discounting)


def parity_check(model: ModelSpec, grid: TimeGrid, n_paths: int, seed: int, strike: float) -> OracleReport:
    """``E[disc (call - put)] = x - K disc``, with the per-path difference as the sample."""
    disc = _discount(model, grid)
    call, put = Payoff("call", strike), Payoff("put", strike)
    parts = [disc * (call(x) - put(x)) for (x,) in _terminal_blocks([model], grid, n_paths, seed)]
    mean, se = mc_reduce(np.concatenate(parts))
    return OracleReport("put_call_parity", model.x0 - strike * disc, mean, se)


# duality ------------------------------------------------------------------------


def duality_check(n_paths: int, seed: int, T: float = 1.0, u: float = 1.0) -> tuple[OracleReport, OracleReport]:
    """Both sides of ``E[F delta(u)] = E[D_u F]`` for ``F = exp(W_T - T/2)``, constant ``u``.

    ``delta(u) = u W_T`` and ``D_u F = u T F``; the common exact value is ``u T``.
    """
    if not T > 0:
        raise ConfigurationError("T must be positive")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    W = rng.standard_normal(n_paths) * np.sqrt(T)
    F = np.exp(W - 0.5 * T)
    lhs = mc_reduce(F * u * W)
    rhs = mc_reduce(u * T * F)
    exact = u * T
    return (
        OracleReport("duality_F_skorohod", exact, *lhs),
        OracleReport("duality_D_u_F", exact, *rhs),
    )


# tangent oracles ------------------------------------------------------------------


def _rel_field_diff(a, b) -> float:
    """Max absolute difference scaled by the largest reference entry."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = np.max(np.abs(b))
    diff = np.max(np.abs(a - b)) if a.size else 0.0
    return float(diff / scale) if scale > 0 else float(diff)


def _field_report(name, computed, reference, tol) -> OracleReport:
    return OracleReport(name, 0.0, _rel_field_diff(computed, reference), 0.0, tol)


def _coefficients(path: PathBundle, model: ModelSpec):
    t = path.grid.times[:-1]
    k = np.empty(path.grid.n)
    m = np.empty(path.grid.n)
    for i in range(path.grid.n):
        k[i], m[i], _ = tangent_coefficients(model, float(t[i]), float(path.Y[i]))
    return k, m


def first_order_closed_form(path: PathBundle, model: ModelSpec) -> np.ndarray:
    """``beta rho prod_{l=j+1}^{i-1} (1 + k_l dt)``: the explicit-Euler solution of the linear tangent ODE."""
    model.require_constant_beta("the closed-form tangent oracle")
    n, dt = path.grid.n, path.grid.dt
    k, _ = _coefficients(path, model)
    # log of the cumulative propagator; G[i] - G[j+1] = sum_{l=j+1}^{i-1} log(1 + k_l dt)
    G = np.concatenate([[0.0], np.cumsum(np.log1p(k * dt))])
    j = np.arange(n)[:, None]
    i = np.arange(n + 1)[None, :]
    expo = np.where(i > j, G[np.minimum(i, n)] - G[np.minimum(j + 1, n)], 0.0)
    return np.where(i > j, model.beta * model.rho * np.exp(expo), 0.0)


def exp_quadrature_form(path: PathBundle, model: ModelSpec) -> np.ndarray:
    """``beta rho exp(sum_{l=j+1}^{i-1} k_l dt)``: the continuous-time formula on the grid.

    It differs from the explicit-Euler field by ``O(dt)``.
    """
    model.require_constant_beta("the closed-form tangent oracle")
    n, dt = path.grid.n, path.grid.dt
    k, _ = _coefficients(path, model)
    G = np.concatenate([[0.0], np.cumsum(k * dt)])
    j = np.arange(n)[:, None]
    i = np.arange(n + 1)[None, :]
    expo = np.where(i > j, G[np.minimum(i, n)] - G[np.minimum(j + 1, n)], 0.0)
    return np.where(i > j, model.beta * model.rho * np.exp(expo), 0.0)


def second_order_closed_form(path: PathBundle, model: ModelSpec, DY: np.ndarray) -> np.ndarray:
    """Variation of constants for ``D_s D_t Y_T``, all ``(s, t)`` at once.

    ``sum_l [prod_{q=l+1}^{n-1} (1 + k_q dt)] m_l dt DY[s, l] DY[t, l]``.
    """
    model.require_constant_beta("the closed-form tangent oracle")
    n, dt = path.grid.n, path.grid.dt
    k, m = _coefficients(path, model)
    tail = np.exp(np.concatenate([np.cumsum(np.log1p(k * dt)[::-1])[::-1][1:], [0.0]]))
    w = tail * m * dt
    Y = DY[:, :n]
    return (Y * w[None, :]) @ Y.T


def _bumped_log_xt(model, path, dW):
    return float(np.log(simulate_block(model, path.grid, dW[None, :], path.dWp[None, :]).X[0, -1]))


def tangent_oracles(path: PathBundle, model: ModelSpec, u=None, steps=None) -> list[OracleReport]:
    """Closed-form and bumped-path checks of the tangent fields on one path.

    ``steps`` selects the increments used for the single-increment bump
    check of ``D_j X_T = X_T L[j]`` (default: four spread over the grid).
    """
    model.require_constant_beta("tangent_oracles")
    grid = path.grid
    n = grid.n
    tb = tangent_bundle(path, model, u=u, order=2)
    reports = [_field_report("tangent_first_order_closed_form", tb.DY, first_order_closed_form(path, model), 1e-10)]

    DDY_T = None
    for i, Q in iter_second_order(path, tb.DY, model):
        if i == n:
            DDY_T = Q
    reports.append(
        _field_report("tangent_second_order_variation_of_constants", DDY_T, second_order_closed_form(path, model, tb.DY), 1e-8)
    )

    X_T = float(path.X[-1])
    base = np.asarray(path.dW, dtype=float)
    if steps is None:
        steps = sorted({0, n // 3, (2 * n) // 3, n - 1})
    h = 1e-5
    for j in steps:
        e = np.zeros(n)
        e[j] = h
        fd = (np.exp(_bumped_log_xt(model, path, base + e)) - np.exp(_bumped_log_xt(model, path, base - e))) / (2 * h)
        reports.append(OracleReport(f"bumped_D_{j}_X_T", fd, X_T * float(tb.L[j]), 0.0, 5e-3))

    from .tangents import u_values

    v = u_values(u, grid) * grid.dt
    x_up = np.exp(_bumped_log_xt(model, path, base + h * v))
    x_dn = np.exp(_bumped_log_xt(model, path, base - h * v))
    DuX, DuDuX, _ = tb.directional_derivatives(X_T)
    reports.append(OracleReport("bumped_D_u_X_T", (x_up - x_dn) / (2 * h), DuX, 0.0, 5e-3))
    h2 = 1e-4
    x_up = np.exp(_bumped_log_xt(model, path, base + h2 * v))
    x_dn = np.exp(_bumped_log_xt(model, path, base - h2 * v))
    reports.append(OracleReport("bumped_D_u_D_u_X_T", (x_up - 2 * X_T + x_dn) / h2**2, DuDuX, 0.0, 1e-2))
    return reports
