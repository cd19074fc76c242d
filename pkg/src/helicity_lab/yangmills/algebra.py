"""su(2)-valued differential forms on the torus.

Lie algebra: basis T_a = sigma_a / (2i) with [T_a, T_b] = eps_abc T_c and
inner product <X, Y> = -2 tr(XY), for which T_a is orthonormal.  In
coefficients the bracket is the cross product.

Storage (Lie axis is always -4, spatial component axis -5):

    degree 0   (..., 3, n, n, n)         lambda
    degree 1   (..., 3, 3, n, n, n)      u = sum_i u_i dx^i
    degree 2   (..., 3, 3, n, n, n)      Hodge dual: w_i is the dx^j ^ dx^k coefficient, (i, j, k) cyclic
    degree 3   (..., 3, n, n, n)         coefficient of dx^1 ^ dx^2 ^ dx^3

With this storage d is grad, curl, div on degrees 0, 1, 2 and the flat
L^2 pairing of stored arrays is the form inner product.
"""
from __future__ import annotations

import numpy as np

from ..lattice import TorusGrid, from_spectral, random_field, to_spectral

PAULI = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex
)
T_BASIS = PAULI / 2j


def to_matrix(c: np.ndarray, axis: int = -4) -> np.ndarray:
    """Coefficients along ``axis`` -> 2x2 matrices on two new trailing axes."""
    c = np.moveaxis(c, axis, -1)
    return np.einsum("...a,aij->...ij", c, T_BASIS)


def from_matrix(X: np.ndarray, axis: int = -4) -> np.ndarray:
    """Inverse of ``to_matrix``: c_a = -2 tr(T_a X)."""
    c = -2.0 * np.real(np.einsum("aji,...ij->...a", T_BASIS, X))
    return np.moveaxis(c, -1, axis)


def lie_cross(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Coefficient form of the bracket [x, y] along axis -4."""
    x0, x1, x2 = x[..., 0, :, :, :], x[..., 1, :, :, :], x[..., 2, :, :, :]
    y0, y1, y2 = y[..., 0, :, :, :], y[..., 1, :, :, :], y[..., 2, :, :, :]
    return np.stack([x1 * y2 - x2 * y1, x2 * y0 - x0 * y2, x0 * y1 - x1 * y0], axis=-4)


def _spatial(w: np.ndarray, i: int) -> np.ndarray:
    return w[..., i, :, :, :, :]


def _as_form1(comps) -> np.ndarray:
    return np.stack(comps, axis=-5)


def _check_degree(p: int) -> None:
    if p not in (0, 1, 2, 3):
        raise ValueError(f"form degree must be 0..3, got {p}")


def _lift0(lam: np.ndarray) -> np.ndarray:
    """Broadcast a 0/3-form against the spatial axis of a 1/2-form."""
    return lam[..., None, :, :, :, :]


# pointwise products -------------------------------------------------------

def _wedge_raw(u, p, v, q):
    if p + q > 3:
        raise ValueError(f"wedge of degrees {p} and {q} exceeds 3")
    if p == 0:
        return lie_cross(_lift0(u), v) if q in (1, 2) else lie_cross(u, v)
    if q == 0:
        return lie_cross(u, _lift0(v)) if p in (1, 2) else lie_cross(u, v)
    if p == 1 and q == 1:
        return _as_form1(
            [lie_cross(_spatial(u, j), _spatial(v, k)) - lie_cross(_spatial(u, k), _spatial(v, j))
             for j, k in ((1, 2), (2, 0), (0, 1))]
        )
    # (1, 2) or (2, 1): sum_i [u_i, v_i]
    return sum(lie_cross(_spatial(u, i), _spatial(v, i)) for i in range(3))


def _hook_raw(u, p, v, r):
    if r < p:
        raise ValueError(f"hook of degree {p} into degree {r} is undefined")
    if p == 0:
        return lie_cross(v, _lift0(u)) if r in (1, 2) else lie_cross(v, u)
    if p == 1 and r == 1:
        return sum(lie_cross(_spatial(v, i), _spatial(u, i)) for i in range(3))
    if p == 1 and r == 2:
        return _as_form1(
            [lie_cross(_spatial(v, i), _spatial(u, j)) - lie_cross(_spatial(v, j), _spatial(u, i))
             for i, j in ((1, 2), (2, 0), (0, 1))]
        )
    if p == 2 and r == 2:
        return sum(lie_cross(_spatial(v, i), _spatial(u, i)) for i in range(3))
    if r == 3 and p in (1, 2):
        return lie_cross(_lift0(v), u)
    # p == 3, r == 3
    return lie_cross(v, u)


def _project(f: np.ndarray, grid: TorusGrid | None) -> np.ndarray:
    if grid is None:
        return f
    return from_spectral(to_spectral(f) * grid.dealias_mask)


def bracket_wedge(u, p: int, v, q: int, dealias: TorusGrid | None = None) -> np.ndarray:
    """[u ^ v] of degree p + q; with ``dealias`` the product is truncated by the 2/3 rule."""
    _check_degree(p)
    _check_degree(q)
    return _project(_wedge_raw(u, p, v, q), dealias)


def bracket_hook(u, p: int, v, r: int, dealias: TorusGrid | None = None) -> np.ndarray:
    """[u _| v] of degree r - p, the pointwise adjoint of w -> [u ^ w].

    With ``dealias`` the input v is truncated first, which makes this the
    exact adjoint of the dealiased wedge.
    """
    _check_degree(p)
    _check_degree(r)
    return _hook_raw(u, p, _project(v, dealias), r)


# exterior calculus ---------------------------------------------------------

def _k_axis(grid: TorusGrid, i: int) -> np.ndarray:
    return grid.k[i]


def ext_d(w: np.ndarray, p: int, grid: TorusGrid) -> np.ndarray:
    _check_degree(p)
    if p == 3:
        return np.zeros_like(w)
    c = to_spectral(w)
    if p == 0:
        return from_spectral(np.stack([1j * _k_axis(grid, i) * c for i in range(3)], axis=-5))
    if p == 1:
        k = grid.k
        return from_spectral(
            1j * np.stack(
                [k[j] * _spatial(c, l) - k[l] * _spatial(c, j) for j, l in ((1, 2), (2, 0), (0, 1))],
                axis=-5,
            )
        )
    return from_spectral(1j * sum(_k_axis(grid, i) * _spatial(c, i) for i in range(3)))


def ext_d_star(w: np.ndarray, p: int, grid: TorusGrid) -> np.ndarray:
    """Lattice adjoint of ``ext_d`` mapping degree p to p - 1."""
    _check_degree(p)
    if p == 0:
        return np.zeros_like(w)
    if p == 1:
        return -ext_d(w, 2, grid)
    if p == 2:
        return ext_d(w, 1, grid)
    return -ext_d(w, 0, grid)


def covariant_d(A, w, p: int, grid: TorusGrid, dealias: bool = True) -> np.ndarray:
    """d_A w = dw + [A ^ w]."""
    return ext_d(w, p, grid) + bracket_wedge(A, 1, w, p, grid if dealias else None)


def covariant_d_star(A, w, p: int, grid: TorusGrid, dealias: bool = True) -> np.ndarray:
    """Exact lattice adjoint of ``covariant_d``: d* w + [A _| w]."""
    return ext_d_star(w, p, grid) + bracket_hook(A, 1, w, p, grid if dealias else None)


def curvature3(a: np.ndarray, grid: TorusGrid, dealias: bool = True) -> np.ndarray:
    """b = da + (1/2)[a ^ a], stored as its Hodge dual *b."""
    return ext_d(a, 1, grid) + 0.5 * bracket_wedge(a, 1, a, 1, grid if dealias else None)


def covariant_laplacian(A, lam, grid: TorusGrid, dealias: bool = True) -> np.ndarray:
    """-Delta_A on 0-forms as d_A* d_A."""
    return covariant_d_star(A, covariant_d(A, lam, 0, grid, dealias), 1, grid, dealias)


def lie_norm_sq(w: np.ndarray, grid: TorusGrid) -> float:
    return float(np.sum(w * w) * grid.cell_volume)


def embed_abelian(A: np.ndarray, direction=(0.0, 0.0, 1.0)) -> np.ndarray:
    """u(1) embedding: vector field (3, n, n, n) -> 1-form valued along one Lie direction."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    return A[..., :, None, :, :, :] * d[:, None, None, None]


def random_lie_form(
    grid: TorusGrid, rng: np.random.Generator, degree: int = 1, kmax: int | None = None
) -> np.ndarray:
    shape = (3, 3) if degree in (1, 2) else (3,)
    return random_field(grid, rng, components=shape, kmax=kmax)
