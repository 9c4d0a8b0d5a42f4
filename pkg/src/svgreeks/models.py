"""Stochastic-volatility market description and named presets.

Under the pricing measure the market is

    dX_t = r_t X_t dt + sigma(Y_t) X_t dW_t
    dY_t = h(t, Y_t) dt + beta [rho dW_t + sqrt(1 - rho^2) dW'_t]

with drift ``h = g(y) + beta rho a_t + beta sqrt(1 - rho^2) b_t`` and market
price of risk ``a_t = -(mu_t - r_t) / sigma(Y_t)``.  ``b`` is a deterministic
curve, so ``h`` depends on ``(t, y)`` only.

A model may replace the constant ``beta`` by a state-dependent ``beta_fn``;
such models support first-order Greeks only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .errors import (
    ConfigurationError,
    SingularVolatilityError,
    UnsupportedGreekError,
)

__all__ = [
    "SmoothFunction1D",
    "DeterministicCurve",
    "ModelSpec",
    "PRESETS",
    "preset",
    "a_process",
    "h_drift",
    "tangent_coefficients",
    "drift_derivatives",
    "parameter_drift_derivatives",
]


@dataclass(frozen=True)
class SmoothFunction1D:
    """A scalar function of the volatility state with three analytic derivatives.

    All four callables accept floats or numpy arrays.
    """

    f: Callable
    d1: Callable
    d2: Callable
    d3: Callable
    label: str = ""

    def eval(self, y):
        return self.f(y)

    def deriv1(self, y):
        return self.d1(y)

    def deriv2(self, y):
        return self.d2(y)

    def deriv3(self, y):
        return self.d3(y)

    def derivs(self, y):
        """Return ``(f, f', f'', f''')`` at ``y``."""
        return self.f(y), self.d1(y), self.d2(y), self.d3(y)

    @classmethod
    def constant(cls, c: float) -> "SmoothFunction1D":
        c = float(c)

        def value(y):
            return np.full_like(np.asarray(y, dtype=float), c)[()]

        def zero(y):
            return np.zeros_like(np.asarray(y, dtype=float))[()]

        return cls(value, zero, zero, zero, label=f"const({c!r})")

    @classmethod
    def affine(cls, intercept: float, slope: float) -> "SmoothFunction1D":
        """``intercept + slope * y``."""
        c0, c1 = float(intercept), float(slope)

        def zero(y):
            return np.zeros_like(np.asarray(y, dtype=float))[()]

        return cls(
            lambda y: c0 + c1 * np.asarray(y, dtype=float)[()],
            lambda y: np.full_like(np.asarray(y, dtype=float), c1)[()],
            zero,
            zero,
            label=f"affine({c0!r}, {c1!r})",
        )

    @classmethod
    def exp_affine(cls, shift: float, scale: float, rate: float) -> "SmoothFunction1D":
        """``shift + scale * exp(rate * y)``."""
        c, s, a = float(shift), float(scale), float(rate)

        def e(y):
            return np.exp(a * np.asarray(y, dtype=float))[()]

        return cls(
            lambda y: c + s * e(y),
            lambda y: s * a * e(y),
            lambda y: s * a * a * e(y),
            lambda y: s * a * a * a * e(y),
            label=f"exp_affine({c!r}, {s!r}, {a!r})",
        )

    @classmethod
    def sqrt_clamped(cls, scale: float = 1.0, floor: float = 1e-8) -> "SmoothFunction1D":
        """``scale * sqrt(max(y, floor))``; derivatives vanish below ``floor``.

        The clamp keeps the volatility of CIR-type states away from zero when
        an Euler step overshoots below the boundary.
        """
        s, lo = float(scale), float(floor)

        def yc(y):
            return np.maximum(np.asarray(y, dtype=float), lo)

        def live(y):
            return np.asarray(y, dtype=float) > lo

        return cls(
            lambda y: (s * np.sqrt(yc(y)))[()],
            lambda y: np.where(live(y), 0.5 * s * yc(y) ** -0.5, 0.0)[()],
            lambda y: np.where(live(y), -0.25 * s * yc(y) ** -1.5, 0.0)[()],
            lambda y: np.where(live(y), 0.375 * s * yc(y) ** -2.5, 0.0)[()],
            label=f"sqrt_clamped({s!r}, {lo!r})",
        )


@dataclass(frozen=True)
class DeterministicCurve:
    """A deterministic function of time on ``[0, T]``."""

    func: Callable[[float], float]
    constant_value: float | None = None

    def eval(self, t):
        return self.func(t)

    def on_grid(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if self.constant_value is not None:
            return np.full(times.shape, self.constant_value)
        out = np.array([float(self.func(float(t))) for t in times.ravel()]).reshape(times.shape)
        if not np.all(np.isfinite(out)):
            raise ConfigurationError("deterministic curve is not finite on the grid")
        return out

    @property
    def is_constant(self) -> bool:
        return self.constant_value is not None

    @classmethod
    def constant(cls, c: float) -> "DeterministicCurve":
        c = float(c)
        return cls(lambda t: c, constant_value=c)

    def shifted(self, dc: float) -> "DeterministicCurve":
        if self.constant_value is not None:
            return DeterministicCurve.constant(self.constant_value + dc)
        f = self.func
        return DeterministicCurve(lambda t: f(t) + dc)


@dataclass(frozen=True)
class ModelSpec:
    x0: float
    y0: float
    mu: DeterministicCurve
    r: DeterministicCurve
    sigma: SmoothFunction1D
    g: SmoothFunction1D
    beta: float
    rho: float
    b: DeterministicCurve = field(default_factory=lambda: DeterministicCurve.constant(0.0))
    beta_fn: SmoothFunction1D | None = None
    name: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.x0 > 0 and math.isfinite(self.x0)):
            raise ConfigurationError(f"x0 must be positive and finite, got {self.x0!r}")
        if not math.isfinite(self.y0):
            raise ConfigurationError(f"y0 must be finite, got {self.y0!r}")
        if not (-1.0 <= self.rho <= 1.0):
            raise ConfigurationError(f"|rho| <= 1 required, got {self.rho!r}")
        if not math.isfinite(self.beta):
            raise ConfigurationError(f"beta must be finite, got {self.beta!r}")

    @property
    def first_order_only(self) -> bool:
        return self.beta_fn is not None

    @property
    def rho_bar(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.rho * self.rho))

    def require_constant_beta(self, what: str = "this operation") -> None:
        if self.beta_fn is not None:
            from .errors import ThirdOrderDisabledError

            raise ThirdOrderDisabledError(
                f"{what} needs constant vol-of-vol; model {self.name!r} has a "
                "state-dependent beta_fn (first-order Greeks only)"
            )

    def vol_of_vol(self, y):
        """Return ``(beta, beta', beta'', beta''')`` at ``y``."""
        if self.beta_fn is None:
            z = np.zeros_like(np.asarray(y, dtype=float))
            return z + self.beta, z, z, z
        return self.beta_fn.derivs(y)

    def with_x0(self, x0: float) -> "ModelSpec":
        return replace(self, x0=float(x0))

    def with_rate_shift(self, dr: float) -> "ModelSpec":
        """Shift the short rate by ``dr``; the physical drift ``mu`` is unchanged."""
        return replace(self, r=self.r.shifted(dr))

    def with_sigma_scale(self, scale: float) -> "ModelSpec":
        s = self.sigma
        scale = float(scale)
        scaled = SmoothFunction1D(
            lambda y: scale * s.f(y),
            lambda y: scale * s.d1(y),
            lambda y: scale * s.d2(y),
            lambda y: scale * s.d3(y),
            label=f"{scale!r}*{s.label}",
        )
        return replace(self, sigma=scaled)


def _sigma_checked(model: ModelSpec, t, y):
    s = model.sigma.derivs(y)
    if np.any(np.asarray(s[0]) == 0):
        bad = np.asarray(y)[np.asarray(s[0]) == 0] if np.ndim(y) else y
        raise SingularVolatilityError(t, np.ravel(bad)[0] if np.ndim(bad) else bad)
    return s


def a_process(model: ModelSpec, t: float, y):
    """Market price of risk ``-(mu_t - r_t) / sigma(y)``."""
    s0 = _sigma_checked(model, t, y)[0]
    return -(model.mu.eval(t) - model.r.eval(t)) / s0


def h_drift(model: ModelSpec, t: float, y):
    """Drift of the volatility state under the pricing measure."""
    a = a_process(model, t, y)
    bt = model.b.eval(t)
    beta = model.vol_of_vol(y)[0]
    return model.g.eval(y) + beta * model.rho * a + beta * model.rho_bar * bt


def _inv_sigma_derivs(s0, s1, s2, s3):
    """Derivatives of ``1/sigma`` up to third order."""
    c0 = 1.0 / s0
    c1 = -s1 * c0**2
    c2 = -s2 * c0**2 + 2.0 * s1**2 * c0**3
    c3 = -s3 * c0**2 + 6.0 * s1 * s2 * c0**3 - 6.0 * s1**3 * c0**4
    return c0, c1, c2, c3


def drift_derivatives(model: ModelSpec, t: float, y, mu_t=None, r_t=None, b_t=None, sig=None):
    """``(h, h_y, h_yy, h_yyy)`` at ``(t, y)``, including state-dependent beta.

    ``mu_t``, ``r_t``, ``b_t`` and the sigma derivatives may be passed in to
    avoid re-evaluating curves inside simulation loops.
    """
    mu_t = model.mu.eval(t) if mu_t is None else mu_t
    r_t = model.r.eval(t) if r_t is None else r_t
    b_t = model.b.eval(t) if b_t is None else b_t
    if sig is None:
        sig = _sigma_checked(model, t, y)
    q = mu_t - r_t
    c0, c1, c2, c3 = _inv_sigma_derivs(*sig)
    a0, a1, a2, a3 = -q * c0, -q * c1, -q * c2, -q * c3
    g0, g1, g2, g3 = model.g.derivs(y)
    rho, rb = model.rho, model.rho_bar
    if model.beta_fn is None:
        br = model.beta * rho
        return (
            g0 + br * a0 + model.beta * rb * b_t,
            g1 + br * a1,
            g2 + br * a2,
            g3 + br * a3,
        )
    B0, B1, B2, B3 = model.beta_fn.derivs(y)
    return (
        g0 + rho * B0 * a0 + rb * B0 * b_t,
        g1 + rho * (B1 * a0 + B0 * a1) + rb * B1 * b_t,
        g2 + rho * (B2 * a0 + 2 * B1 * a1 + B0 * a2) + rb * B2 * b_t,
        g3 + rho * (B3 * a0 + 3 * B2 * a1 + 3 * B1 * a2 + B0 * a3) + rb * B3 * b_t,
    )


def tangent_coefficients(model: ModelSpec, t: float, y):
    """``(k, m, p)``: first three y-derivatives of the drift ``h``.

    For constant beta,
    ``k = g' + beta rho (mu - r) sigma' / sigma^2`` and ``m``, ``p`` are its
    first and second y-derivatives.
    """
    _, k, m, p = drift_derivatives(model, t, y)
    return k, m, p


def parameter_drift_derivatives(model: ModelSpec, which: str, t: float, y, mu_t=None, r_t=None, sig=None):
    """``(dh/dzeta, d2h/dy dzeta)`` for a parameter perturbation at zero.

    ``rho_rate``: ``r -> r + zeta`` with ``mu`` held fixed.
    ``vega_scale``: ``sigma -> (1 + zeta) sigma``.
    """
    mu_t = model.mu.eval(t) if mu_t is None else mu_t
    r_t = model.r.eval(t) if r_t is None else r_t
    if sig is None:
        sig = _sigma_checked(model, t, y)
    q = mu_t - r_t
    c0, c1, _, _ = _inv_sigma_derivs(*sig)
    B0, B1, _, _ = model.vol_of_vol(y)
    rho = model.rho
    if which == "rho_rate":
        # a = -(mu - r - zeta) / sigma
        return rho * B0 * c0, rho * (B1 * c0 + B0 * c1)
    if which == "vega_scale":
        # a = -(mu - r) / ((1 + zeta) sigma); d/dzeta a = -a
        a0, a1 = -q * c0, -q * c1
        return -rho * B0 * a0, -rho * (B1 * a0 + B0 * a1)
    raise ConfigurationError(f"unknown parameter tangent {which!r}")


# presets -------------------------------------------------------------------


def _rates(params):
    r = params.pop("r")
    mu = params.pop("mu")
    mu = r if mu is None else mu
    mpr_b = params.pop("mpr_b")
    return DeterministicCurve.constant(mu), DeterministicCurve.constant(r), DeterministicCurve.constant(mpr_b)


def _black_scholes(p):
    mu, r, b = _rates(p)
    return ModelSpec(
        x0=p["x0"], y0=p["y0"], mu=mu, r=r,
        sigma=SmoothFunction1D.constant(p["sigma0"]),
        g=SmoothFunction1D.constant(0.0),
        beta=0.0, rho=0.0, b=b,
    )


def _alpha_hypergeometric(p):
    mu, r, b = _rates(p)
    return ModelSpec(
        x0=p["x0"], y0=p["y0"], mu=mu, r=r,
        sigma=SmoothFunction1D.exp_affine(0.0, 1.0, 1.0),
        g=SmoothFunction1D.exp_affine(p["a"], -p["b"], p["alpha"]),
        beta=p["beta"], rho=p["rho"], b=b,
    )


def _linear_sv(p):
    mu, r, b = _rates(p)
    return ModelSpec(
        x0=p["x0"], y0=p["y0"], mu=mu, r=r,
        sigma=SmoothFunction1D.affine(0.0, 1.0),
        g=SmoothFunction1D.affine(p["kappa"] * p["theta"], -p["kappa"]),
        beta=p["vol_of_vol"], rho=p["rho"], b=b,
        beta_fn=SmoothFunction1D.affine(0.0, p["vol_of_vol"]),
    )


def _hull_white_like(p):
    mu, r, b = _rates(p)
    return ModelSpec(
        x0=p["x0"], y0=p["y0"], mu=mu, r=r,
        sigma=SmoothFunction1D.sqrt_clamped(1.0),
        g=SmoothFunction1D.affine(0.0, p["kappa"]),
        beta=p["vol_of_vol"], rho=0.0, b=b,
        beta_fn=SmoothFunction1D.affine(0.0, p["vol_of_vol"]),
    )


def _heston_like(p):
    mu, r, b = _rates(p)
    return ModelSpec(
        x0=p["x0"], y0=p["y0"], mu=mu, r=r,
        sigma=SmoothFunction1D.sqrt_clamped(1.0),
        g=SmoothFunction1D.affine(p["kappa"] * p["theta"], -p["kappa"]),
        beta=p["vol_of_vol"], rho=p["rho"], b=b,
        beta_fn=SmoothFunction1D.sqrt_clamped(p["vol_of_vol"]),
    )


_COMMON = {"x0": 100.0, "r": 0.0, "mu": None, "mpr_b": 0.0}

#: name -> (builder, default parameters).  Every numeric parameter a preset
#: accepts appears in its defaults.
PRESETS: dict[str, tuple[Callable, dict]] = {
    # sigma(y) = sigma0, beta = 0
    "black_scholes": (_black_scholes, {**_COMMON, "r": 0.05, "y0": 0.0, "sigma0": 0.2}),
    # sigma(y) = e^y, g(y) = a - b e^{alpha y}
    "alpha_hypergeometric": (
        _alpha_hypergeometric,
        {**_COMMON, "y0": 0.0, "a": 1.0, "b": 1.0, "alpha": 1.0, "beta": 0.3, "rho": -0.5},
    ),
    # sigma(y) = y, g(y) = kappa (theta - y), beta_fn(y) = vol_of_vol * y
    "linear_sv": (
        _linear_sv,
        {**_COMMON, "y0": 0.2, "kappa": 1.0, "theta": 0.2, "vol_of_vol": 0.3, "rho": -0.5},
    ),
    # Y lognormal (variance), sigma(y) = sqrt(y), rho = 0
    "hull_white_like": (
        _hull_white_like,
        {**_COMMON, "y0": 0.04, "kappa": 0.0, "vol_of_vol": 0.3},
    ),
    # Y CIR (variance), sigma(y) = sqrt(y), beta_fn(y) = vol_of_vol sqrt(y)
    "heston_like": (
        _heston_like,
        {**_COMMON, "y0": 0.04, "kappa": 2.0, "theta": 0.04, "vol_of_vol": 0.3, "rho": -0.7},
    ),
}


def preset(name: str, **params) -> ModelSpec:
    """Build a named model; unspecified parameters take the preset defaults.

    Unknown names and parameters the preset does not take raise
    ``ConfigurationError``.
    """
    if name not in PRESETS:
        raise ConfigurationError(f"unknown model preset {name!r}; valid presets: {', '.join(PRESETS)}")
    builder, defaults = PRESETS[name]
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigurationError(
            f"preset {name!r} does not take parameter(s) {sorted(unknown)}; accepted: {sorted(defaults)}"
        )
    resolved = {**defaults, **{k: (None if v is None else float(v)) for k, v in params.items()}}
    model = builder(dict(resolved))
    return replace(model, name=name, params=resolved)


def require_first_order_support(model: ModelSpec, greek: str) -> None:
    if greek == "gamma" and model.beta_fn is not None:
        raise UnsupportedGreekError(
            f"gamma is unavailable for {model.name!r}: state-dependent vol-of-vol supports first-order Greeks only"
        )
