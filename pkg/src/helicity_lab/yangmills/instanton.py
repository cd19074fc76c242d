"""BPST instanton in temporal gauge as a ground-truth half-space stack.

Regular-gauge potential on R^4 with x^4 = s:

    A_mu = 2 sigma_{mu nu} x^nu / D,   D = |x|^2 + s^2 + rho^2,
    sigma_{mu nu} = eta^a_{mu nu} T_a    ('t Hooft symbols),

whose curvature is F_{mu nu} = -4 sigma_{mu nu} rho^2 / D^2.  The gauge
function g = exp(theta(x, s) u / R) with u = 2 sigma_{4j} x^j,
R^2 = |x|^2 + rho^2 and theta = pi/2 - arctan(s / R) removes the
s-component.  Everything below is closed form and analytic in the
coordinates, so complex-step differentiation is exact to rounding.

The transformed field satisfies a' = -*b: it is anti-self-dual in the
duality sign convention used throughout (sign = -1).
"""
from __future__ import annotations

import numpy as np

from ..lattice import TorusGrid
from .sgrid import HalfSpaceField, SGrid

ORIENTATION = -1
HALF_SPACE_ACTION = 8.0 * np.pi**2

_EPS = np.zeros((3, 3, 3))
for _a, _b, _c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _EPS[_a, _b, _c] = 1.0
    _EPS[_a, _c, _b] = -1.0


def thooft_eta() -> np.ndarray:
    """eta[a, mu, nu] with index 3 the s direction."""
    eta = np.zeros((3, 4, 4))
    eta[:, :3, :3] = _EPS
    for a in range(3):
        eta[a, a, 3] = 1.0
        eta[a, 3, a] = -1.0
    return eta


def _cross(x, y):
    return np.stack(
        [x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2], x[0] * y[1] - x[1] * y[0]]
    )


def _trig_coeffs(t2):
    """sin t / t, (1 - cos t)/t^2, (t - sin t)/t^3 as analytic functions of t^2."""
    small = np.abs(t2) < 1e-4
    t2s = np.where(small, 1.0, t2)
    t = np.sqrt(t2s)
    c1 = np.where(small, 1 - t2 / 6 + t2**2 / 120, np.sin(t) / t)
    c2 = np.where(small, 0.5 - t2 / 24 + t2**2 / 720, (1 - np.cos(t)) / t2s)
    c3 = np.where(small, 1.0 / 6 - t2 / 120 + t2**2 / 5040, (t - np.sin(t)) / (t2s * t))
    return c1, c2, c3


def regular_potential(X: np.ndarray, rho: float) -> np.ndarray:
    """A[mu, a, ...] for points X of shape (4, ...)."""
    D = np.sum(X * X, axis=0) + rho**2
    return 2.0 * np.einsum("amn,n...->ma...", thooft_eta(), X) / D


def closed_form_curvature(X: np.ndarray, rho: float) -> np.ndarray:
    """F[mu, nu, a, ...] = -4 eta^a_{mu nu} rho^2 / D^2 in regular gauge."""
    D = np.sum(X * X, axis=0) + rho**2
    eta = np.moveaxis(thooft_eta(), 0, 2)
    return -4.0 * rho**2 * eta[(...,) + (None,) * (X.ndim - 1)] / D**2


def _gauge_exponent(X: np.ndarray, rho: float):
    """y (Lie coefficients of log g) and dy[mu] for mu = 0..3."""
    x, s = X[:3], X[3]
    R2 = np.sum(x * x, axis=0) + rho**2
    R = np.sqrt(R2)
    theta = 0.5 * np.pi - np.arctan(s / R)
    c = -2.0 * theta / R
    y = c * x
    dtheta_dR = s / (R2 + s**2)
    dtheta_ds = -R / (R2 + s**2)
    dy = []
    for mu in range(4):
        if mu < 3:
            dR = x[mu] / R
            dc = -2.0 * (dtheta_dR * dR / R - theta * dR / R2)
            d = dc * x
            d = d + np.stack([c * (1.0 if a == mu else 0.0) * np.ones_like(s) for a in range(3)])
        else:
            d = (-2.0 * dtheta_ds / R) * x
        dy.append(d)
    return y, dy


def temporal_potential(X: np.ndarray, rho: float) -> np.ndarray:
    """(A^g)[mu, a, ...] for mu = 0..3; component 3 vanishes identically."""
    y, dy = _gauge_exponent(X, rho)
    c1, c2, c3 = _trig_coeffs(np.sum(y * y, axis=0))
    A = regular_potential(X, rho)
    out = []
    for mu in range(4):
        Am = A[mu]
        yA = _cross(y, Am)
        ad = Am - c1 * yA + c2 * _cross(y, yA)
        yd = _cross(y, dy[mu])
        mc = dy[mu] - c2 * yd + c3 * _cross(y, yd)
        out.append(ad + mc)
    return np.stack(out)


def adjoint_inverse(X: np.ndarray, rho: float, w: np.ndarray) -> np.ndarray:
    """g^-1 w g for Lie coefficients w of shape (3, ...)."""
    y, _ = _gauge_exponent(X, rho)
    c1, c2, _ = _trig_coeffs(np.sum(y * y, axis=0))
    yw = _cross(y, w)
    return w - c1 * yw + c2 * _cross(y, yw)


def temporal_curvature(X: np.ndarray, rho: float, h: float = 1e-30) -> np.ndarray:
    """F[mu, nu, a, ...] of the temporal-gauge potential by complex-step derivatives."""
    X = np.asarray(X, dtype=float)
    a = temporal_potential(X, rho)
    da = []
    for mu in range(4):
        Xc = X.astype(complex)
        Xc[mu] += 1j * h
        da.append(np.imag(temporal_potential(Xc, rho)) / h)
    F = np.zeros((4, 4) + a.shape[1:])
    for mu in range(4):
        for nu in range(4):
            if mu != nu:
                F[mu, nu] = da[mu][nu] - da[nu][mu] + _cross(a[mu], a[nu])
    return F


def _positions(grid: TorusGrid, center) -> np.ndarray:
    c = np.full(3, grid.L / 2) if center is None else np.asarray(center, dtype=float)
    d = grid.x - c[:, None, None, None]
    return (d + grid.L / 2) % grid.L - grid.L / 2


def instanton_fixture(
    rho: float, grid: TorusGrid, sgrid: SGrid, center=None
) -> HalfSpaceField:
    """Sample (A^g)_j(x - center, s_j) on the grid and s-grid (minimum-image x)."""
    if not np.isfinite(rho) or rho <= 0:
        raise ValueError(f"instanton scale must be positive, got {rho}")
    x = _positions(grid, center)
    layers = np.empty((sgrid.M + 1, 3, 3) + grid.shape)
    for j, s in enumerate(sgrid.s):
        X = np.concatenate([x, np.full((1,) + grid.shape, s)])
        layers[j] = temporal_potential(X, rho)[:3]
    out = HalfSpaceField(layers, sgrid, grid)
    out.info = {"rho": rho, "periodic_mismatch": periodic_mismatch(layers[0], grid)}
    return out


def periodic_mismatch(A: np.ndarray, grid: TorusGrid) -> float:
    """Largest jump across the periodic seam relative to max |A|."""
    jumps = [
        np.max(np.abs(np.take(A, 0, axis=ax) - np.take(A, -1, axis=ax)))
        for ax in (-3, -2, -1)
    ]
    return float(max(jumps) / np.max(np.abs(A)))
