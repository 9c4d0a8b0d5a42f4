"""Monte Carlo price and Greek estimators built from Malliavin weights.

Every Greek is ``disc * mean(f(X_T) * weight)``.  With ``I``, ``J``, ``K``
the directional derivatives of ``log X_T`` along ``u`` (see
:mod:`svgreeks.engine`) the corrected weights are

    Delta:  (delta(u)/I + J/I^2) / x
    Gamma:  (H delta(u)/I - D_u H / I + H J / I^2 - H) / x^2,
            H = delta(u)/I + J/I^2,
            D_u H = int u^2 / I - delta(u) J / I^2 + K / I^2 - 2 J^2 / I^3
    Rho, Vega:  F delta(u) - D_u F,   F = (d log X_T / d zeta) / I

The ``paper_verbatim`` variant keeps the extra ``X_T`` factor that appears
inside ``D_u(X_T dX_T / D_u X_T)`` in the published Delta derivation and the
Gamma display built on it.  It is offered for Delta and Gamma only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .engine import PathFunctionals, evaluate
from .errors import (
    ConfigurationError,
    DegenerateDenominatorError,
    EmptySampleError,
    UnsupportedGreekError,
)
from .models import ModelSpec, require_first_order_support
from .paths import PathBundle, TimeGrid
from .tangents import param_partials, step_partials

GREEKS = ("price", "delta", "gamma", "rho", "vega")
VARIANTS = ("corrected", "paper_verbatim")
MAX_GAMMA_STEPS = 512
MAX_REJECTED_FRACTION = 1e-3


@dataclass(frozen=True)
class WeightProcess:
    """Deterministic weight ``u(t)`` on ``[0, T]``; evaluated at left points."""

    func: Callable[[np.ndarray, float], np.ndarray]
    name: str = "constant"

    def values(self, grid: TimeGrid) -> np.ndarray:
        t = grid.times[:-1]
        return np.broadcast_to(np.asarray(self.func(t, grid.T), dtype=float), t.shape).copy()

    @classmethod
    def named(cls, name: str) -> "WeightProcess":
        """``constant`` (u = 1), ``front_loaded`` (u = 2(1 - t/T)), ``back_loaded`` (u = 2t/T)."""
        if name == "constant":
            return cls(lambda t, T: np.ones_like(t), "constant")
        if name == "front_loaded":
            return cls(lambda t, T: 2.0 * (1.0 - t / T), "front_loaded")
        if name == "back_loaded":
            return cls(lambda t, T: 2.0 * t / T, "back_loaded")
        raise ConfigurationError(f"unknown weight process {name!r}; valid: constant, front_loaded, back_loaded")


CONSTANT_U = WeightProcess.named("constant")


@dataclass(frozen=True)
class Payoff:
    kind: str
    strike: float

    def __post_init__(self):
        if self.kind not in ("call", "put", "digital_call"):
            raise ConfigurationError(f"unknown payoff kind {self.kind!r}; valid: call, put, digital_call")
        if not self.strike > 0:
            raise ConfigurationError(f"strike must be positive, got {self.strike!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "call":
            return np.maximum(x - self.strike, 0.0)
        if self.kind == "put":
            return np.maximum(self.strike - x, 0.0)
        return (x > self.strike).astype(float)


@dataclass(frozen=True)
class GreekEstimate:
    greek: str
    variant: str
    value: float
    std_error: float
    n_paths: int
    n_rejected: int
    discounting: bool = True


def mc_reduce(values, rejected=None) -> tuple[float, float]:
    """Mean and standard error of the accepted per-path values.

    ``values`` must be in ascending path-index order; the reduction is a
    plain numpy sum over that array, so the result is reproducible bit for
    bit.
    """
    values = np.asarray(values, dtype=float)
    if rejected is not None:
        values = values[~np.asarray(rejected, dtype=bool)]
    if values.size == 0:
        raise EmptySampleError("every path was rejected; nothing to average")
    if not np.all(np.isfinite(values)):
        raise EmptySampleError("non-finite per-path value in Monte Carlo reduction")
    mean = float(np.mean(values))
    if values.size == 1:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / np.sqrt(values.size))


def default_eps_den(model: ModelSpec, T: float) -> float:
    return 1e-8 * abs(float(model.sigma.eval(model.y0))) * T


# per-path weights -----------------------------------------------------------


def delta_weights(F: PathFunctionals, variant: str = "corrected") -> np.ndarray:
    I, J, d = F.I, F.J, F.skorohod_u
    if variant == "corrected":
        return (d / I + J / I**2) / F.x0
    if variant == "paper_verbatim":
        return (d / I - F.X_T * (1.0 - J / I**2)) / F.x0
    raise ConfigurationError(f"unknown estimator variant {variant!r}")


def gamma_weights(F: PathFunctionals, variant: str = "corrected") -> np.ndarray:
    I, J, K, d, x = F.I, F.J, F.K, F.skorohod_u, F.x0
    du_delta = F.u_square_integral
    if variant == "corrected":
        H = d / I + J / I**2
        DuH = du_delta / I - d * J / I**2 + K / I**2 - 2.0 * J**2 / I**3
        return (H * d / I - DuH / I + H * J / I**2 - H) / x**2
    if variant == "paper_verbatim":
        X = F.X_T
        H = d / I - X * (1.0 - J / I**2)
        DuH = du_delta / I - J / I**2 * d - X * (I - J / I - K / I**2 + 2.0 * J**2 / I**3)
        dxH = -(X / x) * (1.0 - J / I**2)
        DuX = X * I
        DuDuX = X * (I**2 + J)
        return (
            H * X / (x * DuX) * d
            - (H * DuX**2 + X * DuX * DuH + H * X * DuDuX) / (x * DuX**2)
            + dxH
        ) / x
    raise ConfigurationError(f"unknown estimator variant {variant!r}")


def param_weights(F: PathFunctionals, which: str) -> np.ndarray:
    """``F delta(u) - D_u F`` with ``F = lz / I`` and ``D_u F = lez / I - lz J / I^2``."""
    lz, lez = F.log_tangent[which], F.log_tangent_du[which]
    I, J = F.I, F.J
    return lz * F.skorohod_u / I - lez / I + lz * J / I**2


# estimators on precomputed functionals --------------------------------------


def _rejections(F: PathFunctionals, eps_den: float) -> np.ndarray:
    rejected = np.abs(F.I) < eps_den
    n_rej = int(rejected.sum())
    if n_rej > MAX_REJECTED_FRACTION * F.n_paths:
        raise DegenerateDenominatorError(
            f"{n_rej} of {F.n_paths} paths have |int u L dt| < {eps_den:g}; "
            f"limit is {MAX_REJECTED_FRACTION:.1%}"
        )
    return rejected


def estimate_from(
    F: PathFunctionals,
    payoff: Payoff,
    greek: str,
    variant: str = "corrected",
    discounting: bool = True,
    eps_den: float = 0.0,
) -> GreekEstimate:
    disc = F.discount if discounting else 1.0
    fx = payoff(F.X_T)
    if greek == "price":
        mean, se = mc_reduce(disc * fx)
        return GreekEstimate("price", variant, mean, se, F.n_paths, 0, discounting)
    if greek not in GREEKS:
        raise ConfigurationError(f"unknown greek {greek!r}")
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown estimator variant {variant!r}")
    rejected = _rejections(F, eps_den)
    with np.errstate(divide="ignore", invalid="ignore"):
        if greek == "delta":
            samples = disc * fx * delta_weights(F, variant)
        elif greek == "gamma":
            samples = disc * fx * gamma_weights(F, variant)
        else:
            if variant != "corrected":
                raise UnsupportedGreekError(f"{greek} is only available in the corrected variant")
            which = "rho_rate" if greek == "rho" else "vega_scale"
            w = param_weights(F, which)
            if greek == "rho" and discounting:
                w = w - F.T
            samples = disc * fx * w
    mean, se = mc_reduce(samples, rejected)
    return GreekEstimate(greek, variant, mean, se, F.n_paths, int(rejected.sum()), discounting)


def required_order(greeks) -> int:
    return 3 if "gamma" in greeks else 2


def required_params(greeks) -> tuple:
    return tuple(z for g, z in (("rho", "rho_rate"), ("vega", "vega_scale")) if g in greeks)


def check_request(model: ModelSpec, grid: TimeGrid, greeks) -> None:
    for g in greeks:
        if g not in GREEKS:
            raise ConfigurationError(f"unknown greek {g!r}; valid: {', '.join(GREEKS)}")
        require_first_order_support(model, g)
    if "gamma" in greeks and grid.n > MAX_GAMMA_STEPS:
        raise ConfigurationError(f"gamma needs n <= {MAX_GAMMA_STEPS}, got n={grid.n}")
    if "rho" in greeks and not model.r.is_constant:
        raise ConfigurationError("rho needs a constant short-rate curve")


# one-shot estimators ----------------------------------------------------------


def _run(model, payoff, grid, n_paths, seed, greek, u, variant, discounting, eps_den, workers):
    check_request(model, grid, [greek])
    F = evaluate(
        model, grid, n_paths, seed, u=u,
        order=required_order([greek]) if greek != "price" else 1,
        params=required_params([greek]), workers=workers,
    )
    eps = default_eps_den(model, grid.T) if eps_den is None else eps_den
    return estimate_from(F, payoff, greek, variant, discounting, eps)


def price(model, payoff, grid, n_paths, seed, discounting=True, workers=1) -> GreekEstimate:
    return _run(model, payoff, grid, n_paths, seed, "price", None, "corrected", discounting, None, workers)


def delta(model, payoff, grid, n_paths, seed, u=None, variant="corrected", discounting=True, eps_den=None, workers=1):
    return _run(model, payoff, grid, n_paths, seed, "delta", u, variant, discounting, eps_den, workers)


def gamma(model, payoff, grid, n_paths, seed, u=None, variant="corrected", discounting=True, eps_den=None, workers=1):
    return _run(model, payoff, grid, n_paths, seed, "gamma", u, variant, discounting, eps_den, workers)


def rho(model, payoff, grid, n_paths, seed, u=None, discounting=True, eps_den=None, workers=1):
    return _run(model, payoff, grid, n_paths, seed, "rho", u, "corrected", discounting, eps_den, workers)


def vega(model, payoff, grid, n_paths, seed, u=None, discounting=True, eps_den=None, workers=1):
    """Sensitivity to the scale perturbation ``sigma -> (1 + eps) sigma`` at ``eps = 0``."""
    return _run(model, payoff, grid, n_paths, seed, "vega", u, "corrected", discounting, eps_den, workers)


def param_tangent(model: ModelSpec, path: PathBundle, which: str):
    """Pathwise tangents ``(Z_X, Z_Y)`` of one path for ``rho_rate`` or ``vega_scale``.

    ``Z_X[i] = dX_i/dzeta`` and ``Z_Y[i] = dY_i/dzeta`` for ``i = 0..n``,
    both zero at ``i = 0``.
    """
    if which == "rho_rate" and not model.r.is_constant:
        raise ConfigurationError("rho_rate tangent needs a constant short-rate curve")
    if which not in ("rho_rate", "vega_scale"):
        raise ConfigurationError(f"unknown parameter tangent {which!r}")
    P = step_partials(path, model)
    phz, _, _, Fz, _ = param_partials(path, model, which)
    n = path.grid.n
    zy = np.zeros(n + 1)
    zl = np.zeros(n + 1)
    for i in range(n):
        zl[i + 1] = zl[i] + P.A[i] * zy[i] + phz[i]
        zy[i + 1] = P.Fy[i] * zy[i] + Fz[i]
    return path.X * zl, zy
