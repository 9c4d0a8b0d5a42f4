"""Batch evaluation of per-path weight ingredients.

For every path this computes the directional Malliavin derivatives of
``log X_T`` along ``u``,

    I = D_u log X_T,   J = D_u D_u log X_T,   K = D_u D_u D_u log X_T,

together with ``delta(u)`` and, on request, the parameter tangent
``d log X_T / d zeta`` and its directional derivative ``D_u`` of it.  These are
the same quantities :func:`svgreeks.tangents.weight_functionals` assembles
from the full ``DsL`` / ``DrDsL`` fields, but propagated forward along the path
as Taylor coefficients in the perturbation ``dW -> dW + eps u dt``: O(n) per
path instead of O(n^3) / O(n^4).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .models import ModelSpec
from .paths import BLOCK_SIZE, GridCurves, PathBundle, TimeGrid, increments, ito_sum, quad_sum, simulate_block
from .tangents import param_partials, step_partials, u_values

PARAMS = ("rho_rate", "vega_scale")


@dataclass
class PathFunctionals:
    """Per-path arrays (ascending path index) shared by all estimators of a job."""

    X_T: np.ndarray
    I: np.ndarray
    skorohod_u: np.ndarray
    J: np.ndarray | None = None
    K: np.ndarray | None = None
    log_tangent: dict = field(default_factory=dict)
    log_tangent_du: dict = field(default_factory=dict)
    discount: float = 1.0
    u_square_integral: float = 0.0
    x0: float = 1.0
    T: float = 1.0

    @property
    def n_paths(self) -> int:
        return self.X_T.shape[0]


def block_functionals(model: ModelSpec, paths: PathBundle, u, order: int = 2, params=()) -> dict:
    """Forward jets for a batch of simulated paths (2-d arrays)."""
    grid = paths.grid
    n = grid.n
    uv = u_values(u, grid)
    v = uv * grid.dt
    P = step_partials(paths, model)
    shape = paths.X.shape[:1]
    y1 = np.zeros(shape)
    y2 = np.zeros(shape)
    y3 = np.zeros(shape)
    l1 = np.zeros(shape)
    l2 = np.zeros(shape)
    l3 = np.zeros(shape)
    pp = {z: param_partials(paths, model, z) for z in params}
    yz = {z: np.zeros(shape) for z in params}
    yez = {z: np.zeros(shape) for z in params}
    lz = {z: np.zeros(shape) for z in params}
    lez = {z: np.zeros(shape) for z in params}
    for i in range(n):
        vi = v[i]
        A, B, C = P.A[:, i], P.B[:, i], P.C[:, i]
        s1, s2 = P.s1[:, i], P.s2[:, i]
        Fy, Fyy, Fyyy = P.Fy[:, i], P.Fyy[:, i], P.Fyyy[:, i]
        Fw, Fyw, Fyyw = P.Fw[:, i], P.Fyw[:, i], P.Fyyw[:, i]
        # log-price increments use the state derivatives at the left point
        l1 += A * y1
        if order >= 2:
            l2 += B * y1 * y1 + A * y2 + 2.0 * s1 * y1 * vi
        if order >= 3:
            l3 += C * y1**3 + 3.0 * B * y1 * y2 + A * y3 + 3.0 * s2 * y1 * y1 * vi + 3.0 * s1 * y2 * vi
        for z in params:
            phz, phyz, phwz, Fz, Fyz = (a[:, i] for a in pp[z])
            lz[z] += A * yz[z] + phz
            lez[z] += B * y1 * yz[z] + A * yez[z] + s1 * vi * yz[z] + phyz * y1 + phwz * vi
            yez[z] = Fyy * y1 * yz[z] + Fy * yez[z] + Fyw * vi * yz[z] + Fyz * y1
            yz[z] = Fy * yz[z] + Fz
        if order >= 3:
            y3 = Fy * y3 + Fyyy * y1**3 + 3.0 * Fyyw * y1 * y1 * vi + 3.0 * Fyy * y1 * y2 + 3.0 * Fyw * y2 * vi
        if order >= 2:
            y2 = Fy * y2 + Fyy * y1 * y1 + 2.0 * Fyw * y1 * vi
        y1 = Fy * y1 + Fw * vi
    out = {
        "X_T": paths.X[:, -1].copy(),
        # sigma part as a left-point quadrature, tangent part accumulated above
        "I": quad_sum(uv * P.s0, grid) + l1,
        "skorohod_u": ito_sum(uv, paths.dW),
    }
    if order >= 2:
        out["J"] = l2
    if order >= 3:
        out["K"] = l3
    for z in params:
        out["lz_" + z] = lz[z]
        out["lez_" + z] = lez[z]
    return out


def _evaluate_block(args):
    model, grid, seed, start, stop, u, order, params = args
    dw, dwp = increments(seed, start, stop, grid)
    paths = simulate_block(model, grid, dw, dwp)
    return block_functionals(model, paths, u, order, params)


def evaluate(
    model: ModelSpec,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    u=None,
    order: int = 2,
    params=(),
    workers: int = 1,
) -> PathFunctionals:
    """Simulate ``n_paths`` paths and return their weight ingredients.

    Work is split on ``BLOCK_SIZE`` boundaries, so the per-path numbers and the
    order in which they are concatenated do not depend on ``workers``.
    """
    if n_paths < 1:
        raise ConfigurationError("n_paths must be positive")
    for z in params:
        if z not in PARAMS:
            raise ConfigurationError(f"unknown parameter tangent {z!r}")
        if z == "rho_rate" and not model.r.is_constant:
            raise ConfigurationError("rho needs a constant short-rate curve")
    if order >= 3:
        model.require_constant_beta("third-order directional derivatives (gamma)")
    jobs = [
        (model, grid, seed, s, min(s + BLOCK_SIZE, n_paths), u, order, tuple(params))
        for s in range(0, n_paths, BLOCK_SIZE)
    ]
    if workers <= 1 or len(jobs) == 1:
        parts = [_evaluate_block(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_evaluate_block, jobs))
    cat = {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}
    uv = u_values(u, grid)
    r_grid = GridCurves.of(model, grid).r
    return PathFunctionals(
        X_T=cat["X_T"],
        I=cat["I"],
        skorohod_u=cat["skorohod_u"],
        J=cat.get("J"),
        K=cat.get("K"),
        log_tangent={z: cat["lz_" + z] for z in params},
        log_tangent_du={z: cat["lez_" + z] for z in params},
        discount=float(np.exp(-quad_sum(r_grid, grid))),
        u_square_integral=float(quad_sum(uv * uv, grid)),
        x0=model.x0,
        T=grid.T,
    )
