"""Poisson action and diagnostics of half-space stacks."""
from __future__ import annotations

import numpy as np

from ..helicity import _check_sign
from ..lattice import TorusGrid
from .algebra import covariant_d_star, curvature3
from .sgrid import HalfSpaceField


def _norms(f: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Per-layer L^2 norms of a stack."""
    axes = tuple(range(1, f.ndim))
    return np.sqrt(np.sum(f * f, axis=axes) * grid.cell_volume)


def layer_curvature(a: HalfSpaceField, dealias: bool = True) -> np.ndarray:
    return curvature3(a.layers, a.grid, dealias)


def stack_scale(a: HalfSpaceField, dealias: bool = True) -> float:
    """Field scale: largest per-layer norm of a' or b (1 for the zero stack)."""
    s = max(_norms(a.ds, a.grid).max(), _norms(layer_curvature(a, dealias), a.grid).max())
    return float(s) if s > 0 else 1.0


def ym_poisson_action(a: HalfSpaceField, dealias: bool = True) -> float:
    """Quadrature of ||a'(s)||^2 + ||b(s)||^2 with the stack's s-rule."""
    if a.sgrid.M < 2:
        raise ValueError("action needs at least 3 layers")
    g = a.grid
    dens = _norms(a.ds, g) ** 2 + _norms(layer_curvature(a, dealias), g) ** 2
    return a.sgrid.integrate(dens)


def ym_poisson_residual_field(a: HalfSpaceField, dealias: bool = True) -> np.ndarray:
    """a'' - d_a* b at interior layers, shape (M-1, 3, 3, n, n, n)."""
    if a.sgrid.M < 2:
        raise ValueError("residual needs at least 3 layers")
    inner = a.layers[1:-1]
    b = curvature3(inner, a.grid, dealias)
    return a.dss[1:-1] - covariant_d_star(inner, b, 2, a.grid, dealias)


def ym_poisson_residual(a: HalfSpaceField, dealias: bool = True, scale: float | None = None) -> float:
    """max over interior layers of ||a'' - d_a* b|| / scale.

    The default scale is the largest interior norm of a'' or d_a* b, so a
    stack that does not solve the equation scores O(1).
    """
    r = ym_poisson_residual_field(a, dealias)
    if scale is None:
        inner = a.layers[1:-1]
        rhs = covariant_d_star(inner, curvature3(inner, a.grid, dealias), 2, a.grid, dealias)
        scale = max(_norms(a.dss[1:-1], a.grid).max(), _norms(rhs, a.grid).max())
        scale = scale if scale > 0 else 1.0
    return float(_norms(r, a.grid).max() / scale)


def duality_residual_ym(a: HalfSpaceField, sign, dealias: bool = True, scale: float | None = None) -> float:
    """max over layers of ||a'(s) - sign *b(s)|| / scale; sign=+1 is self-dual."""
    sign = _check_sign(sign)
    if a.sgrid.M < 1:
        raise ValueError("duality residual needs at least 2 layers")
    b = layer_curvature(a, dealias)
    scale = stack_scale(a, dealias) if scale is None else scale
    return float(_norms(a.ds - sign * b, a.grid).max() / scale)


def energy_balance(a: HalfSpaceField, dealias: bool = True) -> np.ndarray:
    """Per-layer ||a'||^2 - ||b||^2."""
    return _norms(a.ds, a.grid) ** 2 - _norms(layer_curvature(a, dealias), a.grid) ** 2


def horizontality(a: HalfSpaceField, dealias: bool = True) -> np.ndarray:
    """Per-layer ||d_{a(s)}* a'(s)||."""
    return _norms(covariant_d_star(a.layers, a.ds, 1, a.grid, dealias), a.grid)


def layer_norms(f: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return _norms(f, grid)
