"""Abelian Poisson extension to the half-space s >= 0 and helicity flows.

The finite-action solution of a'' = curl curl a with a(0) = A is
a(s) = A_long + exp(-s|C|) A_trans; every quantity here is evaluated in
closed form mode by mode.  Duality sign convention: ``sign=+1`` tests
self-duality a' = curl a, ``sign=-1`` anti-self-duality a' = -curl a.
"""
from __future__ import annotations

from typing import Callable

import numpy as np
from scipy import integrate

from .helicity import _check_sign, sobolev_norm_sq
from .lattice import (
    TorusGrid,
    _cross_k,
    curl,
    from_spectral,
    l2_inner,
    l2_norm,
    to_spectral,
)


def _split_coeffs(A: np.ndarray, grid: TorusGrid):
    c = to_spectral(A)
    kh = grid.khat
    cl = kh * np.sum(kh * c, axis=-4, keepdims=True)
    ct = np.where(grid.null_mask, 0.0, c - cl)
    return c - ct, ct


def longitudinal_split(A: np.ndarray, grid: TorusGrid) -> tuple[np.ndarray, np.ndarray]:
    """(A_long, A_trans); A_long carries the gradient and mean content."""
    cl, ct = _split_coeffs(A, grid)
    return from_spectral(cl), from_spectral(ct)


def default_s_samples(grid: TorusGrid, count: int = 41, S: float | None = None) -> np.ndarray:
    """s = 0 followed by a geometric sequence up to S = 30/|k_min|."""
    S = 30.0 / grid.k_min if S is None else S
    return np.concatenate([[0.0], np.geomspace(1e-3 / grid.k_min, S, count - 1)])


def poisson_extend_abelian(A: np.ndarray, s, grid: TorusGrid, derivative: int = 0):
    """a(s) (or its s-derivative of given order) for scalar s or an array of s."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s_arr < 0):
        raise ValueError("extension parameter s must be nonnegative")
    cl, ct = _split_coeffs(A, grid)
    k = grid.kmag
    layers = []
    for sj in s_arr:
        c = ((-k) ** derivative) * np.exp(-sj * k) * ct
        if derivative == 0:
            c = c + cl
        layers.append(from_spectral(c))
    out = np.stack(layers)
    return out[0] if np.ndim(s) == 0 else out


def poisson_action_abelian(A: np.ndarray, grid: TorusGrid) -> float:
    """P(A) = <|C| A_trans, A_trans>."""
    return sobolev_norm_sq(A, 0.5, grid)


def action_integrand_abelian(A: np.ndarray, s: float, grid: TorusGrid) -> float:
    """||a'(s)||^2 + ||d a(s)||^2 from position-space fields."""
    a = poisson_extend_abelian(A, s, grid)
    da = poisson_extend_abelian(A, s, grid, derivative=1)
    b = curl(a, grid)
    return l2_inner(da, da, grid) + l2_inner(b, b, grid)


def action_quadrature_abelian(
    A: np.ndarray, grid: TorusGrid, S: float | None = None, rtol: float = 1e-8
) -> tuple[float, float]:
    """Adaptive Gauss-Kronrod quadrature of the action on [0, S].

    Returns (value, tail bound) where the tail bound majorizes the
    neglected integral over [S, inf).
    """
    S = 30.0 / grid.k_min if S is None else S
    kA = sobolev_norm_sq(A, 1.0, grid)
    # integrand <= 2 ||C A||^2 exp(-2 s k_min); split points help the adaptive rule
    brk = np.concatenate([[0.0], np.geomspace(0.01 / grid.k_min, S, 12)])
    total = 0.0
    for lo, hi in zip(brk[:-1], brk[1:]):
        val, _ = integrate.quad(
            lambda s: action_integrand_abelian(A, s, grid), lo, hi, epsrel=rtol, epsabs=0.0, limit=200
        )
        total += val
    tail = kA * np.exp(-2.0 * S * grid.k_min) / grid.k_min
    return total, tail


def path_action(
    path: Callable[[float], np.ndarray],
    dpath: Callable[[float], np.ndarray],
    grid: TorusGrid,
    S: float,
    rtol: float = 1e-10,
) -> float:
    """Action of an arbitrary extension path s -> a(s) with derivative dpath."""

    def f(s):
        a, da = path(s), dpath(s)
        b = curl(a, grid)
        return l2_inner(da, da, grid) + l2_inner(b, b, grid)

    brk = np.concatenate([[0.0], np.geomspace(0.01 / grid.k_min, S, 12)])
    return sum(
        integrate.quad(f, lo, hi, epsrel=rtol, epsabs=0.0, limit=200)[0]
        for lo, hi in zip(brk[:-1], brk[1:])
    )


def duality_residual_abelian(
    A: np.ndarray, sign, grid: TorusGrid, s_samples=None
) -> float:
    """sup_s ||a'(s) - sign curl a(s)|| / ||A|| over the sampled s."""
    sign = _check_sign(sign)
    s_samples = default_s_samples(grid) if s_samples is None else s_samples
    nA = l2_norm(A, grid)
    if nA == 0:
        return 0.0
    a = poisson_extend_abelian(A, s_samples, grid)
    da = poisson_extend_abelian(A, s_samples, grid, derivative=1)
    r = da - sign * curl(a, grid)
    return max(l2_norm(rj, grid) for rj in r) / nA


def h_field_abelian(A: np.ndarray, sign, grid: TorusGrid) -> np.ndarray:
    """h_sign(A) = (-|C| + sign C) A."""
    sign = _check_sign(sign)
    _, ct = _split_coeffs(A, grid)
    return from_spectral(-grid.kmag * ct + sign * 1j * _cross_k(grid.k, ct))


def helicity_flow_abelian(A: np.ndarray, t: float, sign, grid: TorusGrid) -> np.ndarray:
    """exp(t(-|C| + sign C)) A: the opposite-helicity part decays as exp(-2 t |k|)."""
    sign = _check_sign(sign)
    if t < 0:
        raise ValueError("flow time must be nonnegative")
    c = to_spectral(A)
    kh = grid.khat
    ct = np.where(grid.null_mask, 0.0, c - kh * np.sum(kh * c, axis=-4, keepdims=True))
    other = 0.5 * (ct - sign * 1j * _cross_k(kh, ct))
    return from_spectral(c - other + np.exp(-2.0 * t * grid.kmag) * other)


def decay_rate(t: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of -log(values) against t."""
    slope = np.polyfit(np.asarray(t), np.log(np.asarray(values)), 1)[0]
    return float(-slope)
