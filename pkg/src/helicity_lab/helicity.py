"""Curl eigenbasis, helicity projections and the associated Sobolev norms.

For a wavevector k the operator C_k u = i k x u is Hermitian on the
plane orthogonal to k with eigenvalues +|k| and -|k|.  On the torus
curl acts on the Fourier coefficient at k as C_k, so the positive and
negative spectral subspaces of curl are assembled mode by mode.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .lattice import (
    TorusGrid,
    _cross_k,
    from_spectral,
    l2_norm,
    to_spectral,
)

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class HelicityBasis:
    """Right-handed frame (khat, e1, e2) and the curl eigenvectors at k."""

    k: np.ndarray
    khat: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    @property
    def e_plus(self) -> np.ndarray:
        return (self.e1 + 1j * self.e2) / SQRT2

    @property
    def e_minus(self) -> np.ndarray:
        return (self.e1 - 1j * self.e2) / SQRT2

    def eigenvector(self, sign: int) -> np.ndarray:
        return self.e_plus if _check_sign(sign) > 0 else self.e_minus


def _check_sign(sign) -> int:
    if sign in (1, "+", "plus", "positive"):
        return 1
    if sign in (-1, "-", "minus", "negative"):
        return -1
    raise ValueError(f"sign must be +1 or -1, got {sign!r}")


def helicity_basis(k) -> HelicityBasis:
    """Deterministic basis: e1 comes from the coordinate axis least aligned with k."""
    k = np.asarray(k, dtype=float)
    norm = np.linalg.norm(k)
    if norm == 0:
        raise ValueError("helicity basis undefined at k = 0")
    khat = k / norm
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(khat)))] = 1.0
    e1 = axis - (axis @ khat) * khat
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(khat, e1)
    return HelicityBasis(k=k, khat=khat, e1=e1, e2=e2)


def grid_basis(grid: TorusGrid) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (e1, e2) over the grid, each (3, n, n, n); zero on the null set.

    Because the axis choice depends only on |khat|, e1(-k) = e1(k) and
    e2(-k) = -e2(k), hence e_plus(-k) = conj(e_plus(k)).
    """
    kh = grid.khat
    idx = np.argmin(np.abs(kh), axis=0)
    axis = np.stack([(idx == i).astype(float) for i in range(3)])
    e1 = axis - np.sum(axis * kh, axis=0) * kh
    e1 /= np.where(grid.null_mask, 1.0, np.sqrt(np.sum(e1**2, axis=0)))
    e1[:, grid.null_mask] = 0.0
    e2 = np.cross(kh, e1, axis=0)
    return e1, e2


def ck_apply(k, u) -> np.ndarray:
    """C_k u = i k x u for a single wavevector and complex 3-vector."""
    return 1j * np.cross(np.asarray(k, dtype=float), np.asarray(u, dtype=complex))


# spectral projections ----------------------------------------------------

def _helicity_coeffs(c: np.ndarray, sign: int, grid: TorusGrid) -> np.ndarray:
    kh = grid.khat
    ct = np.where(grid.null_mask, 0.0, c - kh * np.sum(kh * c, axis=-4, keepdims=True))
    return 0.5 * (ct + sign * 1j * _cross_k(kh, ct))


def helicity_project(v: np.ndarray, sign, grid: TorusGrid) -> np.ndarray:
    """Orthogonal projection onto the sign-helicity part of the transverse field."""
    sign = _check_sign(sign)
    return from_spectral(_helicity_coeffs(to_spectral(v), sign, grid))


def helicity_split(v: np.ndarray, grid: TorusGrid) -> tuple[np.ndarray, np.ndarray]:
    c = to_spectral(v)
    return (
        from_spectral(_helicity_coeffs(c, 1, grid)),
        from_spectral(_helicity_coeffs(c, -1, grid)),
    )


def sign_curl(v: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """C/|C| on the transverse part (P+ - P-)."""
    c = to_spectral(v)
    return from_spectral(1j * _cross_k(grid.khat, c))


def fractional_curl_power(
    v: np.ndarray, exponent: float, grid: TorusGrid, tol: float = 1e-12
) -> np.ndarray:
    """|C|^exponent applied to the transverse part of v.

    Longitudinal content is outside the domain and is dropped.  Mean
    (null-set) content is rejected for negative exponents.
    """
    c = to_spectral(v)
    if exponent < 0:
        mean = np.sqrt(np.sum(np.abs(c[..., grid.null_mask]) ** 2))
        total = np.sqrt(np.sum(np.abs(c) ** 2))
        if mean > tol * max(total, 1e-300):
            raise ValueError("negative power of |C| applied to field with mean content")
    kh = grid.khat
    ct = c - kh * np.sum(kh * c, axis=-4, keepdims=True)
    mult = np.where(grid.null_mask, 0.0, grid.kmag_safe**exponent)
    return from_spectral(ct * mult)


def sobolev_norm_sq(v: np.ndarray, exponent: float, grid: TorusGrid) -> float:
    """||v||^2 in H_exponent: L^3 sum |k|^(2 exponent) |c_T(k)|^2 over nonzero modes."""
    c = to_spectral(v)
    kh = grid.khat
    ct = c - kh * np.sum(kh * c, axis=-4, keepdims=True)
    w = np.where(grid.null_mask, 0.0, grid.kmag_safe ** (2 * exponent))
    return float(grid.volume * np.sum(w * np.sum(np.abs(ct) ** 2, axis=-4)))


def transverse_defect(v: np.ndarray, grid: TorusGrid) -> float:
    """Relative size of the longitudinal plus mean content of v."""
    c = to_spectral(v)
    kh = grid.khat
    cl = kh * np.sum(kh * c, axis=-4, keepdims=True)
    bad = np.sum(np.abs(cl) ** 2) + np.sum(np.abs(c[..., grid.null_mask]) ** 2)
    tot = np.sum(np.abs(c) ** 2)
    return float(np.sqrt(bad / tot)) if tot > 0 else 0.0


def bw_norm(B: np.ndarray, E: np.ndarray, grid: TorusGrid, tol: float = 1e-8) -> float:
    """Squared Bargmann-Wigner norm ||B||^2_{H-1/2} + ||E||^2_{H-1/2}."""
    for name, f in (("B", B), ("E", E)):
        grid.check_field(f, 3)
        if transverse_defect(f, grid) > tol:
            raise ValueError(f"{name} is not transverse and zero-mean")
    return sobolev_norm_sq(B, -0.5, grid) + sobolev_norm_sq(E, -0.5, grid)


# integral (position-space) form ------------------------------------------

CONTINUUM_INTEGRAL_CONSTANT = 1.0 / (2.0 * np.pi**2)
INTEGRAL_GRID_CAP = 24


@lru_cache(maxsize=1)
def unit_cube_integral() -> float:
    """int over [-1, 1]^3 of d^3u / |u|^2.

    div(u / |u|^2) = 1 / |u|^2 in three dimensions, so the volume integral
    is a flux through the six faces: 24 int_0^1 int_0^1 dx dy / (1 + x^2 + y^2).
    """
    def inner(x):
        r = np.sqrt(1.0 + x * x)
        return np.arctan(1.0 / r) / r

    return 24.0 * integrate.quad(inner, 0.0, 1.0, epsabs=0.0, epsrel=1e-13)[0]


def lattice_kernel(grid: TorusGrid, self_cell: bool = True) -> np.ndarray:
    """1/|r|^2 at minimum-image offsets r, indexed like an FFT array.

    The singular r = 0 entry is either dropped (``self_cell=False``) or set
    so that the lattice sum h^3 sum_r K(r) equals the integral of 1/|r|^2
    over the periodic cell [-L/2, L/2]^3.  That self-cell weight removes an
    O(h) error that is the same at every wavevector, so the remaining
    discrepancy is the truncation of the kernel to one cell.
    """
    m = np.arange(grid.n)
    m = np.minimum(m, grid.n - m) * grid.h
    r2 = m[:, None, None] ** 2 + m[None, :, None] ** 2 + m[None, None, :] ** 2
    r2[0, 0, 0] = np.inf
    K = 1.0 / r2
    if self_cell:
        cell = 0.5 * grid.L * unit_cube_integral()
        K[0, 0, 0] = (cell - grid.cell_volume * K.sum()) / grid.cell_volume
    return K


def integral_quadrature(
    B: np.ndarray,
    E: np.ndarray,
    grid: TorusGrid,
    max_n: int = INTEGRAL_GRID_CAP,
    self_cell: bool = True,
) -> float:
    """Double sum h^6 sum_{x, y} (B(x).B(y) + E(x).E(y)) K(y - x).

    K is ``lattice_kernel``.  The sum is organized by lattice offset r = y - x
    with the minimum-image distance; every pair of points is visited once
    per offset.
    """
    if grid.n > max_n:
        raise ValueError(f"direct double sum capped at n={max_n}, got n={grid.n}")
    K = lattice_kernel(grid, self_cell)
    F = np.concatenate([B, E], axis=0)
    total = 0.0
    n = grid.n
    for i in range(n):
        Fi = np.roll(F, -i, axis=1)
        for j in range(n):
            Fij = np.roll(Fi, -j, axis=2)
            # remaining axis handled in one shot
            corr = np.stack([np.sum(F * np.roll(Fij, -l, axis=3)) for l in range(n)])
            total += float(np.sum(K[i, j, :] * corr))
    return total * grid.cell_volume**2


def bw_norm_integral(
    B: np.ndarray,
    E: np.ndarray,
    grid: TorusGrid,
    constant: float = CONTINUUM_INTEGRAL_CONSTANT,
    max_n: int = INTEGRAL_GRID_CAP,
    self_cell: bool = True,
) -> float:
    """Position-space form of the squared Bargmann-Wigner norm."""
    return constant * integral_quadrature(B, E, grid, max_n=max_n, self_cell=self_cell)


def calibrate_integral_constant(pairs, grid: TorusGrid, self_cell: bool = True) -> tuple[float, float]:
    """Least-squares constant c with c * quadrature ~ bw_norm over (B, E) pairs.

    Returns (c, max relative misfit).
    """
    q = np.array([integral_quadrature(B, E, grid, self_cell=self_cell) for B, E in pairs])
    y = np.array([bw_norm(B, E, grid) for B, E in pairs])
    c = float(q @ y / (q @ q))
    misfit = float(np.max(np.abs(c * q - y) / np.abs(y)))
    return c, misfit


def unit_mode(grid: TorusGrid, m, a, phase: float = 0.0) -> np.ndarray:
    """Real field 2 Re(a exp(i k.x + i phase)) for integer mode m."""
    k = np.asarray(m, dtype=float) * grid.k_min
    kx = np.tensordot(k, grid.x, axes=(0, 0))
    a = np.asarray(a, dtype=complex)
    return 2.0 * np.real(a[:, None, None, None] * np.exp(1j * (kx + phase)))


def relative_norm(f: np.ndarray, ref: np.ndarray, grid: TorusGrid) -> float:
    nr = l2_norm(ref, grid)
    return l2_norm(f, grid) / nr if nr > 0 else l2_norm(f, grid)
