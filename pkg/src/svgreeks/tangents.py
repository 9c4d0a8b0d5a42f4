"""Malliavin derivative fields of a simulated path.

The Malliavin derivative in the direction of ``W`` is taken on the discretised
path: ``D_j F`` is the partial derivative of ``F`` with respect to the
increment ``dW[j]`` (the noise on ``[t_j, t_{j+1})``) and, for a deterministic
weight ``u``,

    D_u F = sum_j u_j dt D_j F,        delta(u) = sum_j u_j dW[j].

With these definitions Gaussian integration by parts
``E[F delta(u)] = E[D_u F]`` and ``delta(uF) = F delta(u) - D_u F`` hold
exactly for the simulated scheme, so the weights built from them are unbiased
for the discretised model.

Field layout (single path, ``n`` steps):

``DY[j, i]``
    ``D_j Y_i``, shape ``(n, n + 1)``.  Zero for ``i <= j``;
    ``DY[j, j + 1] = beta(Y_j) rho``; afterwards the explicit-Euler tangent
    recursion ``DY[j, i + 1] = (1 + k_i dt + beta'(Y_i) xi_i) DY[j, i]``.
``L[j]``
    ``D_j log X_T``, so ``D_j X_T = X_T L[j]``.
``DsL[s, t]``, ``DrDsL[r, s, t]``
    second and third derivatives ``D_s D_t log X_T`` and
    ``D_r D_s D_t log X_T``.  Both are symmetric in their indices.

The second- and third-order state derivatives ``D_s D_t Y_i`` and
``D_r D_s D_t Y_i`` are produced slice by slice in ``i`` by
:func:`iter_second_order` and :func:`iter_third_order`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .models import ModelSpec, drift_derivatives, parameter_drift_derivatives
from .paths import GridCurves, PathBundle, TimeGrid, ito_sum, quad_sum, sigma_at

__all__ = [
    "StepPartials",
    "step_partials",
    "first_order_DY",
    "L_process",
    "iter_second_order",
    "second_order_DDY",
    "DsL",
    "DsL_matrix",
    "iter_third_order",
    "third_order_DDDY",
    "DrDsL",
    "DrDsL_tensor",
    "weight_functionals",
    "TangentBundle",
    "tangent_bundle",
    "param_partials",
]


def u_values(u, grid: TimeGrid) -> np.ndarray:
    """Weight process sampled at the left points ``t_0..t_{n-1}``."""
    if hasattr(u, "values"):
        vals = np.asarray(u.values(grid), dtype=float)
    elif u is None:
        vals = np.ones(grid.n)
    else:
        vals = np.broadcast_to(np.asarray(u, dtype=float), (grid.n,)).copy()
    if vals.shape != (grid.n,):
        raise ContractViolation(f"weight process must have {grid.n} left-point values")
    return vals


@dataclass(frozen=True)
class StepPartials:
    """Partial derivatives of one Euler step, evaluated at the left points.

    For the log-price step ``phi_i = (r_i - sigma^2/2) dt + sigma dW_i``:
    ``A = dphi/dy``, ``B = d2phi/dy2``, ``C = d3phi/dy3``; the w-derivatives
    are ``sigma``, ``sigma'``, ``sigma''``.
    For the state step ``F_i = y + h dt + beta(y) xi_i`` with
    ``xi = rho dW + sqrt(1 - rho^2) dW'``: ``Fy, Fyy, Fyyy`` (y-derivatives)
    and ``Fw, Fyw, Fyyw`` (derivatives involving ``dW_i``).
    """

    s0: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    k: np.ndarray
    m: np.ndarray
    p: np.ndarray
    Fy: np.ndarray
    Fyy: np.ndarray
    Fyyy: np.ndarray
    Fw: np.ndarray
    Fyw: np.ndarray
    Fyyw: np.ndarray
    dt: float


def _sigma_on_path(model: ModelSpec, path: PathBundle):
    y = path.Y[..., :-1]
    sig = model.sigma.derivs(y)
    zero = np.asarray(sig[0]) == 0
    if np.any(zero):
        step = int(np.argwhere(zero)[0][-1])
        sigma_at(model, path.grid, step, y[..., step])
    return tuple(np.broadcast_to(s, y.shape) for s in sig)


def step_partials(path: PathBundle, model: ModelSpec) -> StepPartials:
    grid = path.grid
    dt = grid.dt
    y = path.Y[..., :-1]
    dW, dWp = path.dW, path.dWp
    curves = GridCurves.of(model, grid)
    s0, s1, s2, s3 = _sigma_on_path(model, path)
    _, k, m, p = drift_derivatives(model, grid.times[:-1], y, curves.mu, curves.r, curves.b, (s0, s1, s2, s3))
    B0, B1, B2, B3 = (np.broadcast_to(b, y.shape) for b in model.vol_of_vol(y))
    xi = model.rho * dW + model.rho_bar * dWp
    k, m, p = (np.broadcast_to(a, y.shape) for a in (k, m, p))
    return StepPartials(
        s0=s0, s1=s1, s2=s2, s3=s3,
        A=-s0 * s1 * dt + s1 * dW,
        B=-(s1 * s1 + s0 * s2) * dt + s2 * dW,
        C=-(3.0 * s1 * s2 + s0 * s3) * dt + s3 * dW,
        k=k, m=m, p=p,
        Fy=1.0 + k * dt + B1 * xi,
        Fyy=m * dt + B2 * xi,
        Fyyy=p * dt + B3 * xi,
        Fw=B0 * model.rho,
        Fyw=B1 * model.rho,
        Fyyw=B2 * model.rho,
        dt=dt,
    )


def param_partials(path: PathBundle, model: ModelSpec, which: str):
    """Per-step partials in a model parameter at zero perturbation.

    Returns ``(phi_z, phi_yz, phi_wz, F_z, F_yz)``; see :class:`StepPartials`.
    """
    grid = path.grid
    dt = grid.dt
    y = path.Y[..., :-1]
    curves = GridCurves.of(model, grid)
    sig = _sigma_on_path(model, path)
    hz, hyz = parameter_drift_derivatives(model, which, grid.times[:-1], y, curves.mu, curves.r, sig)
    hz, hyz = np.broadcast_to(hz, y.shape), np.broadcast_to(hyz, y.shape)
    s0, s1 = sig[0], sig[1]
    if which == "rho_rate":
        zero = np.zeros(y.shape)
        return np.full(y.shape, dt), zero, zero, hz * dt, hyz * dt
    # vega_scale: phi = (r - (1+z)^2 sigma^2 / 2) dt + (1+z) sigma dW
    return (
        -s0 * s0 * dt + s0 * path.dW,
        -2.0 * s0 * s1 * dt + s1 * path.dW,
        s0,
        hz * dt,
        hyz * dt,
    )


def _check_single(path: PathBundle):
    if np.ndim(path.Y) != 1:
        raise ContractViolation("per-path fields need a single path (1-d arrays)")


def first_order_DY(path: PathBundle, model: ModelSpec, partials: StepPartials | None = None) -> np.ndarray:
    """First-order field ``DY[j, i] = D_j Y_i``, shape ``(n, n + 1)``."""
    _check_single(path)
    P = step_partials(path, model) if partials is None else partials
    n = path.grid.n
    DY = np.zeros((n, n + 1))
    for i in range(n):
        DY[:, i + 1] = P.Fy[i] * DY[:, i]
        DY[i, i + 1] += P.Fw[i]
    return DY


def L_process(path: PathBundle, DY: np.ndarray, model: ModelSpec, partials: StepPartials | None = None) -> np.ndarray:
    """``L[j] = sigma(Y_j) - sum_{i>j} sigma' sigma DY dt + sum_{i>j} sigma' DY dW_i``."""
    P = step_partials(path, model) if partials is None else partials
    D = DY[:, :-1]  # zero on and below the diagonal
    return P.s0 - quad_sum(P.s0 * P.s1 * D, path.grid) + ito_sum(P.s1 * D, path.dW)


def iter_second_order(path: PathBundle, DY: np.ndarray, model: ModelSpec, partials: StepPartials | None = None):
    """Yield ``(i, Q_i)`` with ``Q_i[s, t] = D_s D_t Y_i`` for ``i = 0..n``.

    Each slice is propagated from the previous one,
    ``Q_{i+1} = (1 + k_i dt) Q_i + m_i dt DY[:, i] DY[:, i]^T``,
    so at most two ``n x n`` slices are alive at a time.
    """
    _check_single(path)
    model.require_constant_beta("the second-order Malliavin field")
    P = step_partials(path, model) if partials is None else partials
    n = path.grid.n
    Q = np.zeros((n, n))
    for i in range(n):
        yield i, Q
        y = DY[:, i]
        Q = P.Fy[i] * Q + P.Fyy[i] * np.multiply.outer(y, y)
    yield n, Q


def second_order_DDY(path, DY, model, s: int, t: int, partials=None) -> np.ndarray:
    """``D_s D_t Y_i`` for ``i = 0..n`` along one path (one ``(s, t)`` pair)."""
    _check_single(path)
    model.require_constant_beta("the second-order Malliavin field")
    P = step_partials(path, model) if partials is None else partials
    n = path.grid.n
    q = np.zeros(n + 1)
    for i in range(max(s, t), n):
        q[i + 1] = P.Fy[i] * q[i] + P.Fyy[i] * DY[s, i] * DY[t, i]
    return q


def DsL(path, DY, model, s: int, t: int, partials=None) -> float:
    """``D_s L_t``: the second Malliavin derivative of ``log X_T`` at ``(s, t)``.

    Boundary term ``sigma'(Y_max) DY[min, max]`` from the chain rule and the
    Ito-integral derivative, then Lebesgue and Ito sums over ``i > max(s, t)``
    of ``(sigma'' sigma + sigma'^2) DY DY + sigma' sigma DDY`` (with ``dt``)
    and ``sigma'' DY DY + sigma' DDY`` (with ``dW``).
    """
    P = step_partials(path, model) if partials is None else partials
    lo, hi = min(s, t), max(s, t)
    q = second_order_DDY(path, DY, model, s, t, P)
    sl = slice(hi + 1, path.grid.n)
    boundary = P.s1[hi] * DY[lo, hi]
    dd = DY[s, sl] * DY[t, sl]
    lebesgue = np.sum(((P.s2 * P.s0 + P.s1**2)[sl] * dd + (P.s1 * P.s0)[sl] * q[sl])) * P.dt
    ito = np.sum((P.s2[sl] * dd + P.s1[sl] * q[sl]) * path.dW[sl])
    return float(boundary - lebesgue + ito)


def DsL_matrix(path, DY, model, partials=None) -> np.ndarray:
    """All ``D_s L_t`` at once, shape ``(n, n)``; O(n^3) time, O(n^2) memory."""
    P = step_partials(path, model) if partials is None else partials
    n = path.grid.n
    out = np.zeros((n, n))
    for i, Q in iter_second_order(path, DY, model, P):
        if i == n:
            break
        y = DY[:, i]
        out += P.B[i] * np.multiply.outer(y, y) + P.A[i] * Q
        out[:, i] += P.s1[i] * y
        out[i, :] += P.s1[i] * y
    return out


def _sym3_outer(Q, y):
    """``Q[a,b] y[c] + Q[a,c] y[b] + Q[b,c] y[a]``."""
    return Q[:, :, None] * y[None, None, :] + Q[:, None, :] * y[None, :, None] + Q[None, :, :] * y[:, None, None]


def iter_third_order(path: PathBundle, DY: np.ndarray, model: ModelSpec, partials: StepPartials | None = None):
    """Yield ``(i, Q_i, R_i)`` with ``R_i[r, s, t] = D_r D_s D_t Y_i``.

    ``R_{i+1} = (1 + k dt) R_i + m dt (Q_rs DY_t + Q_rt DY_s + Q_st DY_r)
    + p dt DY_r DY_s DY_t``, all at step ``i``.
    """
    model.require_constant_beta("the third-order Malliavin field")
    P = step_partials(path, model) if partials is None else partials
    n = path.grid.n
    R = np.zeros((n, n, n))
    for i, Q in iter_second_order(path, DY, model, P):
        yield i, Q, R
        if i == n:
            break
        y = DY[:, i]
        R = P.Fy[i] * R + P.Fyy[i] * _sym3_outer(Q, y) + P.Fyyy[i] * np.multiply.outer(np.multiply.outer(y, y), y)


def third_order_DDDY(path, DY, model, r: int, s: int, t: int, partials=None) -> np.ndarray:
    """``D_r D_s D_t Y_i`` for ``i = 0..n`` along one path."""
    model.require_constant_beta("the third-order Malliavin field")
    P = step_partials(path, model) if partials is None else partials
    n = path.grid.n
    qrs = second_order_DDY(path, DY, model, r, s, P)
    qrt = second_order_DDY(path, DY, model, r, t, P)
    qst = second_order_DDY(path, DY, model, s, t, P)
    R = np.zeros(n + 1)
    for i in range(max(r, s, t), n):
        R[i + 1] = (
            P.Fy[i] * R[i]
            + P.Fyy[i] * (qrs[i] * DY[t, i] + qrt[i] * DY[s, i] + qst[i] * DY[r, i])
            + P.Fyyy[i] * DY[r, i] * DY[s, i] * DY[t, i]
        )
    return R


def DrDsL(path, DY, model, r: int, s: int, t: int, partials=None) -> float:
    """``D_r D_s L_t`` at one index triple, O(n) work.

    Differentiates every term of :func:`DsL` once more: boundary terms pick up
    ``sigma'' DY DY + sigma' DDY`` corrections at the two larger indices, and
    the sums over ``i > max(r, s, t)`` carry ``sigma'''``, ``sigma''`` and
    ``sigma'`` against ``DY DY DY``, the three ``DY DDY`` pairings and
    ``DDDY``.
    """
    P = step_partials(path, model) if partials is None else partials
    n = path.grid.n
    idx = (r, s, t)
    q = {
        (a, b): second_order_DDY(path, DY, model, idx[a], idx[b], P)
        for a, b in ((0, 1), (0, 2), (1, 2))
    }
    R = third_order_DDDY(path, DY, model, r, s, t, P)
    total = 0.0
    for i in range(n):
        Y = [DY[r, i], DY[s, i], DY[t, i]]
        hit = [r == i, s == i, t == i]
        Qi = {key: val[i] for key, val in q.items()}
        term = P.C[i] * Y[0] * Y[1] * Y[2]
        term += P.B[i] * (Qi[(0, 1)] * Y[2] + Qi[(0, 2)] * Y[1] + Qi[(1, 2)] * Y[0])
        term += P.A[i] * R[i]
        term += P.s2[i] * (Y[0] * Y[1] * hit[2] + Y[0] * Y[2] * hit[1] + Y[1] * Y[2] * hit[0])
        term += P.s1[i] * (Qi[(0, 1)] * hit[2] + Qi[(0, 2)] * hit[1] + Qi[(1, 2)] * hit[0])
        total += term
    return float(total)


def DrDsL_tensor(path, DY, model, partials=None) -> np.ndarray:
    """All ``D_r D_s L_t``, shape ``(n, n, n)``.  O(n^4) time: small grids only."""
    P = step_partials(path, model) if partials is None else partials
    n = path.grid.n
    out = np.zeros((n, n, n))
    for i, Q, R in iter_third_order(path, DY, model, P):
        if i == n:
            break
        y = DY[:, i]
        out += P.C[i] * np.multiply.outer(np.multiply.outer(y, y), y)
        out += P.B[i] * _sym3_outer(Q, y) + P.A[i] * R
        yy = P.s2[i] * np.multiply.outer(y, y)
        out[:, :, i] += yy
        out[:, i, :] += yy
        out[i, :, :] += yy
        sq = P.s1[i] * Q
        out[:, :, i] += sq
        out[:, i, :] += sq
        out[i, :, :] += sq
    return out


def weight_functionals(path: PathBundle, L, DsL_full=None, DrDsL_full=None, u=None):
    """``(I, J, K3, delta(u))`` assembled from the per-path fields.

    ``I = sum_t u_t L_t dt``; ``J`` and ``K3`` integrate ``u u D_s L_t`` and
    ``u u u D_r D_s L_t`` over the full square and cube, so that

        D_u X_T         = X_T I
        D_u D_u X_T     = X_T (I^2 + J)
        D_u D_u D_u X_T = X_T (I^3 + 3 I J + K3).

    ``J`` / ``K3`` are ``None`` when the corresponding field is not supplied.
    """
    grid = path.grid
    uv = u_values(u, grid)
    v = uv * grid.dt
    I = quad_sum(uv * L, grid)
    J = None if DsL_full is None else float(v @ DsL_full @ v)
    K3 = None if DrDsL_full is None else float(np.einsum("abc,a,b,c->", DrDsL_full, v, v, v))
    return float(I), J, K3, float(ito_sum(uv, path.dW))


@dataclass(frozen=True)
class TangentBundle:
    DY: np.ndarray
    L: np.ndarray
    I: float
    J: float | None
    K3: float | None
    skorohod_u: float
    DsL: np.ndarray | None = None
    DrDsL: np.ndarray | None = None

    def directional_derivatives(self, X_T: float):
        """``(D_u X_T, D_u D_u X_T, D_u D_u D_u X_T)`` by composition."""
        I, J, K = self.I, self.J, self.K3
        d2 = None if J is None else X_T * (I * I + J)
        d3 = None if K is None else X_T * (I**3 + 3 * I * J + K)
        return X_T * I, d2, d3


def tangent_bundle(path: PathBundle, model: ModelSpec, u=None, order: int = 2) -> TangentBundle:
    """Compute the fields up to ``order`` (1, 2 or 3) and their weight functionals."""
    _check_single(path)
    P = step_partials(path, model)
    DY = first_order_DY(path, model, P)
    L = L_process(path, DY, model, P)
    M = DsL_matrix(path, DY, model, P) if order >= 2 else None
    T3 = DrDsL_tensor(path, DY, model, P) if order >= 3 else None
    I, J, K3, sk = weight_functionals(path, L, M, T3, u)
    return TangentBundle(DY=DY, L=L, I=I, J=J, K3=K3, skorohod_u=sk, DsL=M, DrDsL=T3)
