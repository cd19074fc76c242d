"""Discretization of the Euclidean-time axis s in [0, S].

Two rules are available, both on nodes s = S expm1(beta xi) / expm1(beta)
for xi in [0, 1], which cluster points near s = 0 where fields vary
fastest:

``spectral``
    Legendre-Gauss-Lobatto nodes in xi with the collocation derivative
    and quadrature weights pulled back through the map.  Used by the
    solver; errors decay exponentially in M.
``fd``
    Uniform xi.  Derivatives by three-point differences on the
    nonuniform nodes (second order, one-sided at the ends) and trapezoid
    weights.  Doubling M nests the grids, which is what refinement
    studies need.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre

from ..lattice import TorusGrid


def lgl_nodes(M: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes, weights and differentiation matrix of the (M+1)-point LGL rule on [-1, 1]."""
    c = np.zeros(M + 1)
    c[-1] = 1.0
    x = np.concatenate(([-1.0], np.sort(legendre.legroots(legendre.legder(c))), [1.0]))
    PM = legendre.legval(x, c)
    w = 2.0 / (M * (M + 1) * PM**2)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (PM[:, None] / PM[None, :]) / diff
    np.fill_diagonal(D, 0.0)
    D[0, 0] = -M * (M + 1) / 4.0
    D[M, M] = M * (M + 1) / 4.0
    return x, w, D


def _fd_first_derivative(s: np.ndarray) -> np.ndarray:
    M = len(s) - 1
    D = np.zeros((M + 1, M + 1))
    for j in range(1, M):
        h0, h1 = s[j] - s[j - 1], s[j + 1] - s[j]
        D[j, j - 1] = -h1 / (h0 * (h0 + h1))
        D[j, j] = (h1 - h0) / (h0 * h1)
        D[j, j + 1] = h0 / (h1 * (h0 + h1))
    for j, (a, b) in ((0, (1, 2)), (M, (M - 1, M - 2))):
        # quadratic through s_j, s_a, s_b differentiated at s_j
        ha, hb = s[a] - s[j], s[b] - s[j]
        D[j, a] = hb / (ha * (hb - ha))
        D[j, b] = -ha / (hb * (hb - ha))
        D[j, j] = -(D[j, a] + D[j, b])
    return D


def _fd_second_derivative(s: np.ndarray) -> np.ndarray:
    M = len(s) - 1
    D2 = np.zeros((M + 1, M + 1))
    for j in range(1, M):
        h0, h1 = s[j] - s[j - 1], s[j + 1] - s[j]
        D2[j, j - 1] = 2.0 / (h0 * (h0 + h1))
        D2[j, j] = -2.0 / (h0 * h1)
        D2[j, j + 1] = 2.0 / (h1 * (h0 + h1))
    return D2


@dataclass(frozen=True)
class SGrid:
    s: np.ndarray
    rule: str
    D: np.ndarray
    weights: np.ndarray
    D2: np.ndarray
    beta: float = 0.0

    @property
    def M(self) -> int:
        return len(self.s) - 1

    @property
    def S(self) -> float:
        return float(self.s[-1])

    @staticmethod
    def _map(xi: np.ndarray, S: float, beta: float):
        if beta == 0:
            return S * xi, np.full_like(xi, S)
        e = np.expm1(beta)
        return S * np.expm1(beta * xi) / e, S * beta * np.exp(beta * xi) / e

    @classmethod
    def spectral(cls, M: int = 64, S: float = 30.0, beta: float = 4.0) -> "SGrid":
        if M < 2 or S <= 0:
            raise ValueError("need M >= 2 and S > 0")
        x, w, D = lgl_nodes(M)
        xi = 0.5 * (x + 1.0)
        s, ds = cls._map(xi, S, beta)
        ds = 0.5 * ds  # d s / d x with x in [-1, 1]
        s[0] = 0.0
        Ds = D / ds[:, None]
        return cls(s=s, rule="spectral", D=Ds, weights=w * ds, D2=Ds @ Ds, beta=beta)

    @classmethod
    def fd(cls, M: int = 64, S: float = 30.0, beta: float = 4.0) -> "SGrid":
        if M < 2 or S <= 0:
            raise ValueError("need M >= 2 and S > 0")
        xi = np.linspace(0.0, 1.0, M + 1)
        s, _ = cls._map(xi, S, beta)
        s[0] = 0.0
        h = np.diff(s)
        w = np.zeros(M + 1)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
        return cls(s=s, rule="fd", D=_fd_first_derivative(s), weights=w, D2=_fd_second_derivative(s), beta=beta)

    def derivative(self, layers: np.ndarray, order: int = 1) -> np.ndarray:
        op = self.D if order == 1 else self.D2
        return np.tensordot(op, layers, axes=(1, 0))

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weights @ values)


def default_sgrid(grid: TorusGrid, M: int = 64, beta: float = 4.0, rule: str = "spectral") -> SGrid:
    """S = 30 / |k_min| on the requested rule."""
    S = 30.0 / grid.k_min
    return SGrid.spectral(M, S, beta) if rule == "spectral" else SGrid.fd(M, S, beta)


@dataclass
class HalfSpaceField:
    """Stack of 1-forms a(s_j), shape (M+1, 3, 3, n, n, n)."""

    layers: np.ndarray
    sgrid: SGrid
    grid: TorusGrid
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = (self.sgrid.M + 1, 3, 3) + self.grid.shape
        if self.layers.shape != expected:
            raise ValueError(f"stack shape {self.layers.shape} != {expected}")
        if not np.all(np.isfinite(self.layers)):
            raise ValueError("stack contains non-finite values")

    @property
    def boundary(self) -> np.ndarray:
        return self.layers[0]

    @cached_property
    def ds(self) -> np.ndarray:
        return self.sgrid.derivative(self.layers)

    @cached_property
    def dss(self) -> np.ndarray:
        return self.sgrid.derivative(self.layers, order=2)
