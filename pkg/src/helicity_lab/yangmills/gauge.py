"""SU(2) gauge functions acting on su(2)-valued forms.

A^g = g^-1 A g + g^-1 dg.  Matrices are stored as (n, n, n, 2, 2)
complex arrays; the Maurer-Cartan term uses the spectral derivative of
each matrix entry.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lattice import TorusGrid, random_field
from .algebra import PAULI, T_BASIS, from_matrix


def _cfft_derivative(g: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Spectral gradient of a complex (n, n, n, ...) array -> (3, n, n, n, ...)."""
    c = np.fft.fftn(g, axes=(0, 1, 2))
    tail = (None,) * (g.ndim - 3)
    out = []
    for i in range(3):
        ki = grid.k[i][(...,) + tail]
        out.append(np.fft.ifftn(1j * ki * c, axes=(0, 1, 2)))
    return np.stack(out)


@dataclass(frozen=True)
class GaugeFunction:
    g: np.ndarray
    grid: TorusGrid

    def __post_init__(self):
        if self.g.shape != self.grid.shape + (2, 2):
            raise ValueError(f"gauge array shape {self.g.shape} does not match grid")

    def defect(self) -> float:
        """max over points of |g^H g - I| and |det g - 1|."""
        gh = np.conj(np.swapaxes(self.g, -1, -2))
        unit = np.max(np.abs(gh @ self.g - np.eye(2)))
        det = np.max(np.abs(np.linalg.det(self.g) - 1.0))
        return float(max(unit, det))

    def validate(self, tol: float = 1e-12) -> None:
        d = self.defect()
        if d > tol:
            raise ValueError(f"gauge function is not SU(2)-valued (defect {d:.3g})")

    @property
    def inverse(self) -> "GaugeFunction":
        return GaugeFunction(np.conj(np.swapaxes(self.g, -1, -2)), self.grid)

    def adjoint_matrix(self) -> np.ndarray:
        """R with (g^-1 X g)_a = R_ab x_b, shape (3, 3, n, n, n)."""
        gi = np.conj(np.swapaxes(self.g, -1, -2))
        R = np.empty((3, 3) + self.grid.shape)
        for b in range(3):
            R[:, b] = from_matrix(gi @ T_BASIS[b] @ self.g, axis=0)
        return R

    def maurer_cartan(self) -> np.ndarray:
        """g^-1 dg as a 1-form (3, 3, n, n, n)."""
        gi = np.conj(np.swapaxes(self.g, -1, -2))
        dg = _cfft_derivative(self.g, self.grid)
        return np.stack([from_matrix(gi @ dg[j], axis=0) for j in range(3)])


def identity_gauge(grid: TorusGrid) -> GaugeFunction:
    return GaugeFunction(np.broadcast_to(np.eye(2, dtype=complex), grid.shape + (2, 2)).copy(), grid)


def exp_lie(lam: np.ndarray) -> np.ndarray:
    """exp(lambda^a T_a) for a 0-form (3, ...) -> (..., 2, 2)."""
    theta = np.sqrt(np.sum(lam**2, axis=0))
    half = 0.5 * theta
    sinc = np.where(theta > 0, np.sin(half) / np.where(theta > 0, theta, 1.0), 0.5)
    sig = np.einsum("a...,aij->...ij", lam, PAULI)
    return np.cos(half)[..., None, None] * np.eye(2) - 1j * sinc[..., None, None] * sig


def gauge_from_lie(lam: np.ndarray, grid: TorusGrid) -> GaugeFunction:
    return GaugeFunction(exp_lie(lam), grid)


def random_gauge(
    grid: TorusGrid, rng: np.random.Generator, amplitude: float = 0.5, kmax: int = 1
) -> GaugeFunction:
    """exp of a smooth random 0-form with sup-norm ``amplitude``."""
    lam = random_field(grid, rng, components=3, kmax=kmax)
    lam *= amplitude / np.max(np.abs(lam))
    return gauge_from_lie(lam, grid)


def conjugate(w: np.ndarray, g: GaugeFunction, R: np.ndarray | None = None) -> np.ndarray:
    """g^-1 w g on any form (Lie axis -4), stacks included."""
    R = g.adjoint_matrix() if R is None else R
    return np.einsum("abxyz,...bxyz->...axyz", R, w)


def gauge_transform(A: np.ndarray, g: GaugeFunction, tol: float = 1e-10) -> np.ndarray:
    """A^g for a 1-form or a stack of 1-forms (..., 3, 3, n, n, n)."""
    g.validate(tol)
    return conjugate(A, g) + g.maurer_cartan()
