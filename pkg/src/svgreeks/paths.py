"""Path simulation under the pricing measure on a uniform grid.

Randomness
----------
Paths are grouped in blocks of ``BLOCK_SIZE`` consecutive path indices.
Block ``b`` of a job with seed ``s`` draws one array of standard normals of
shape ``(BLOCK_SIZE, 2, n)`` from ``PCG64(SeedSequence(s, spawn_key=(b,)))``.
Path ``p = b * BLOCK_SIZE + q`` uses row ``q``: channel 0 scaled by
``sqrt(dt)`` gives the ``W`` increments, channel 1 the ``W'`` increments.
The increments of a path are therefore a pure function of
``(seed, path_index, n)`` and do not depend on how paths are distributed
across workers.

Scheme
------
``Y`` advances by explicit Euler and ``X`` by log-Euler, both with left-point
coefficients::

    Y[i+1] = Y[i] + h(t_i, Y[i]) dt + beta(Y[i]) (rho dW[i] + sqrt(1 - rho^2) dW'[i])
    X[i+1] = X[i] exp((r(t_i) - sigma(Y[i])^2 / 2) dt + sigma(Y[i]) dW[i])
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, ContractViolation, NumericOverflowError, SingularVolatilityError
from .models import ModelSpec, drift_derivatives

BLOCK_SIZE = 4096


@dataclass(frozen=True)
class TimeGrid:
    T: float
    n: int

    def __post_init__(self):
        if not (self.T > 0 and np.isfinite(self.T)):
            raise ConfigurationError(f"maturity T must be positive, got {self.T!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigurationError(f"number of steps n must be a positive integer, got {self.n!r}")

    @property
    def dt(self) -> float:
        return self.T / self.n

    @cached_property
    def times(self) -> np.ndarray:
        """``t_i = i T / n`` for ``i = 0..n``; ``t_n`` is exactly ``T``."""
        t = np.arange(self.n + 1) * (self.T / self.n)
        t[-1] = self.T
        return t


def _block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def block_increments(seed: int, block: int, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """Brownian increments ``(dW, dWp)`` of every path in ``block``, shape ``(BLOCK_SIZE, n)``."""
    if seed < 0:
        raise ConfigurationError(f"seed must be non-negative, got {seed!r}")
    z = _block_generator(seed, block).standard_normal((BLOCK_SIZE, 2, grid.n))
    sq = np.sqrt(grid.dt)
    return z[:, 0, :] * sq, z[:, 1, :] * sq


def increments(seed: int, start: int, stop: int, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """Increments for path indices ``start <= p < stop``, shape ``(stop - start, n)``."""
    dws, dwps = [], []
    for block in range(start // BLOCK_SIZE, (stop - 1) // BLOCK_SIZE + 1):
        lo = max(start, block * BLOCK_SIZE) - block * BLOCK_SIZE
        hi = min(stop, (block + 1) * BLOCK_SIZE) - block * BLOCK_SIZE
        dw, dwp = block_increments(seed, block, grid)
        dws.append(dw[lo:hi])
        dwps.append(dwp[lo:hi])
    return np.concatenate(dws), np.concatenate(dwps)


@dataclass(frozen=True)
class RngStream:
    seed: int
    path_index: int

    def increments(self, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
        dw, dwp = increments(self.seed, self.path_index, self.path_index + 1, grid)
        return dw[0], dwp[0]


@dataclass(frozen=True)
class PathBundle:
    """One trajectory (1-d arrays) or a batch of them (2-d, paths along axis 0)."""

    X: np.ndarray
    Y: np.ndarray
    dW: np.ndarray
    dWp: np.ndarray
    grid: TimeGrid


@dataclass(frozen=True)
class GridCurves:
    """Deterministic curves sampled at the left points ``t_0..t_{n-1}``."""

    mu: np.ndarray
    r: np.ndarray
    b: np.ndarray

    @classmethod
    def of(cls, model: ModelSpec, grid: TimeGrid) -> "GridCurves":
        t = grid.times[:-1]
        return cls(model.mu.on_grid(t), model.r.on_grid(t), model.b.on_grid(t))


def sigma_at(model: ModelSpec, grid: TimeGrid, i: int, y):
    """Sigma and its derivatives at step ``i``; raises on a zero volatility."""
    sig = model.sigma.derivs(y)
    zero = np.asarray(sig[0]) == 0
    if np.any(zero):
        raise SingularVolatilityError(float(grid.times[i]), float(np.asarray(y)[zero].ravel()[0]), step=i)
    return sig


def simulate_block(model: ModelSpec, grid: TimeGrid, dW: np.ndarray, dWp: np.ndarray) -> PathBundle:
    """Simulate every row of the increment arrays ``dW``, ``dWp`` (shape ``(B, n)``)."""
    dW = np.atleast_2d(np.asarray(dW, dtype=float))
    dWp = np.atleast_2d(np.asarray(dWp, dtype=float))
    if dW.shape != dWp.shape or dW.shape[1] != grid.n:
        raise ContractViolation(f"increment arrays must both have shape (B, {grid.n})")
    n_paths, n = dW.shape
    dt = grid.dt
    curves = GridCurves.of(model, grid)
    rho, rb = model.rho, model.rho_bar
    X = np.empty((n_paths, n + 1))
    Y = np.empty((n_paths, n + 1))
    X[:, 0] = model.x0
    Y[:, 0] = model.y0
    for i in range(n):
        y = Y[:, i]
        sig = sigma_at(model, grid, i, y)
        h = drift_derivatives(model, grid.times[i], y, curves.mu[i], curves.r[i], curves.b[i], sig)[0]
        beta = model.vol_of_vol(y)[0]
        s0 = sig[0]
        Y[:, i + 1] = y + h * dt + beta * (rho * dW[:, i] + rb * dWp[:, i])
        X[:, i + 1] = X[:, i] * np.exp((curves.r[i] - 0.5 * s0 * s0) * dt + s0 * dW[:, i])
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        bad = np.argwhere(~(np.isfinite(X) & np.isfinite(Y)))[0]
        raise NumericOverflowError(f"non-finite state on path row {bad[0]} at step {bad[1]}")
    return PathBundle(X=X, Y=Y, dW=dW, dWp=dWp, grid=grid)


def simulate_path(model: ModelSpec, grid: TimeGrid, rng: RngStream) -> PathBundle:
    """Simulate the single path addressed by ``rng``."""
    dw, dwp = rng.increments(grid)
    batch = simulate_block(model, grid, dw[None, :], dwp[None, :])
    return PathBundle(X=batch.X[0], Y=batch.Y[0], dW=dw, dWp=dwp, grid=grid)


def simulate_paths(model: ModelSpec, grid: TimeGrid, seed: int, start: int, stop: int) -> PathBundle:
    dw, dwp = increments(seed, start, stop, grid)
    return simulate_block(model, grid, dw, dwp)


def ito_sum(values, dW) -> float:
    """Left-point Ito sum ``sum_i values[i] dW[i]`` over the last axis."""
    values = np.asarray(values, dtype=float)
    dW = np.asarray(dW, dtype=float)
    if values.shape[-1] != dW.shape[-1]:
        raise ContractViolation(f"length mismatch: {values.shape[-1]} integrand values vs {dW.shape[-1]} increments")
    return np.sum(values * dW, axis=-1)


def quad_sum(values, grid: TimeGrid) -> float:
    """Left-point rectangle rule ``sum_i values[i] dt`` over the last axis."""
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ContractViolation("quad_sum needs finite integrand values")
    return np.sum(values, axis=-1) * grid.dt
