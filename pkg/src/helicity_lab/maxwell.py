"""Exact spectral Maxwell evolution on the torus.

A state is a pair (A, E) of transverse zero-mean fields in Coulomb gauge
with B = curl A and E = -dA/dt.  The complex amplitude a(k) packs both
fields:

    A(k) = (a(k) + conj(a(-k))) / |k|,    E(k) = i (a(k) - conj(a(-k))),

so that a(k) = (|k| A(k) - i E(k)) / 2 and free evolution is the phase
a(k) -> a(k) exp(-i |k| t).  Coefficients are in the ``to_spectral``
normalization.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .helicity import (
    _check_sign,
    fractional_curl_power,
    grid_basis,
    helicity_project,
    sobolev_norm_sq,
    transverse_defect,
)
from .lattice import (
    TorusGrid,
    _cross_k,
    curl,
    divergence,
    from_spectral,
    l2_inner,
    l2_norm,
    to_spectral,
)


@dataclass(frozen=True)
class MaxwellState:
    A: np.ndarray
    E: np.ndarray
    grid: TorusGrid
    t: float = 0.0

    def validate(self, tol: float = 1e-8) -> None:
        for name, f in (("A", self.A), ("E", self.E)):
            self.grid.check_field(f, 3)
            if transverse_defect(f, self.grid) > tol:
                raise ValueError(f"{name} is not transverse and zero-mean")

    @property
    def B(self) -> np.ndarray:
        return curl(self.A, self.grid)

    def energy(self) -> float:
        return l2_inner(self.E, self.E, self.grid) + l2_inner(self.B, self.B, self.grid)

    def bw(self) -> float:
        return sobolev_norm_sq(self.B, -0.5, self.grid) + sobolev_norm_sq(self.E, -0.5, self.grid)


# amplitudes --------------------------------------------------------------

def _reflect(c: np.ndarray) -> np.ndarray:
    """c(-k) in FFT ordering."""
    return np.roll(np.flip(c, axis=(-3, -2, -1)), 1, axis=(-3, -2, -1))


def from_amplitudes(a: np.ndarray, grid: TorusGrid, t: float = 0.0) -> MaxwellState:
    """Synthesize (A, E) from helicity-free amplitudes a(k) in k-perp."""
    a = np.where(grid.null_mask, 0.0, a)
    ac = np.conj(_reflect(a))
    A = from_spectral((a + ac) / grid.kmag_safe)
    E = from_spectral(1j * (a - ac))
    return MaxwellState(A, E, grid, t)


def to_amplitudes(state: MaxwellState) -> np.ndarray:
    g = state.grid
    a = 0.5 * (g.kmag * to_spectral(state.A) - 1j * to_spectral(state.E))
    return np.where(g.null_mask, 0.0, a)


def random_amplitudes(
    grid: TorusGrid,
    rng: np.random.Generator,
    helicity: int | None = None,
    kmax: int | None = None,
) -> np.ndarray:
    """Complex Gaussian a(k) on the transverse plane, band-limited to |m_i| <= kmax.

    With ``helicity`` set, a(k) is proportional to e_sign(k).
    """
    if kmax is None:
        kmax = (grid.n - 1) // 2
    band = np.all(np.abs(grid.mode_index) <= kmax, axis=0) & ~grid.null_mask
    e1, e2 = grid_basis(grid)
    z = rng.standard_normal((2, 2) + grid.shape)
    alpha = (z[0, 0] + 1j * z[0, 1]) * band / np.sqrt(2)
    beta = (z[1, 0] + 1j * z[1, 1]) * band / np.sqrt(2)
    ep = (e1 + 1j * e2) / np.sqrt(2)
    em = (e1 - 1j * e2) / np.sqrt(2)
    if helicity is None:
        return alpha * ep + beta * em
    return alpha * (ep if _check_sign(helicity) > 0 else em)


def mode_sum_bw(a: np.ndarray, grid: TorusGrid) -> float:
    """Squared Bargmann-Wigner norm from amplitudes: 4 L^3 sum |a(k)|^2 / |k|."""
    w = np.where(grid.null_mask, 0.0, 1.0 / grid.kmag_safe)
    return float(4.0 * grid.volume * np.sum(w * np.sum(np.abs(a) ** 2, axis=0)))


# dynamics ----------------------------------------------------------------

def plane_wave(grid: TorusGrid, m, a, t: float = 0.0, tol: float = 1e-12) -> np.ndarray:
    """A_k(x, t) = a exp(i(k.x - |k| t)) + c.c. for integer mode m."""
    k = np.asarray(m, dtype=float) * grid.k_min
    a = np.asarray(a, dtype=complex)
    if abs(a @ k) > tol * max(np.linalg.norm(a) * np.linalg.norm(k), 1e-300):
        raise ValueError("plane-wave amplitude must be orthogonal to k")
    phase = np.tensordot(k, grid.x, axes=(0, 0)) - np.linalg.norm(k) * t
    return 2.0 * np.real(a[:, None, None, None] * np.exp(1j * phase))


def maxwell_evolve(state: MaxwellState, dt: float) -> MaxwellState:
    if dt == 0:
        return state
    a = to_amplitudes(state) * np.exp(-1j * state.grid.kmag * dt)
    out = from_amplitudes(a, state.grid, state.t + dt)
    return out


def time_derivatives(state: MaxwellState) -> tuple[np.ndarray, np.ndarray]:
    """(dA/dt, dE/dt) from the amplitude phases, independent of curl."""
    g = state.grid
    a = to_amplitudes(state)
    ac = np.conj(_reflect(a))
    w = g.kmag
    adot = -1j * w * a
    acdot = 1j * w * ac
    dA = from_spectral((adot + acdot) / g.kmag_safe)
    dE = from_spectral(1j * (adot - acdot))
    return dA, dE


def maxwell_residuals(state: MaxwellState) -> tuple[float, float]:
    """L^2 norms of dB/dt + curl E and dE/dt - curl B."""
    g = state.grid
    dA, dE = time_derivatives(state)
    dB = curl(dA, g)
    r1 = l2_norm(dB + curl(state.E, g), g)
    r2 = l2_norm(dE - curl(state.B, g), g)
    return r1, r2


# classification ----------------------------------------------------------

@dataclass(frozen=True)
class ClassificationRecord:
    cls: str
    residual_plus: float
    residual_minus: float
    t: float
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "class": self.cls,
                "residual_plus": self.residual_plus,
                "residual_minus": self.residual_minus,
                "t": self.t,
            }
        )


def _relative(part: np.ndarray, whole: np.ndarray, grid: TorusGrid) -> float:
    nw = l2_norm(whole, grid)
    return l2_norm(part, grid) / nw if nw > 0 else 0.0


def helicity_classify(state: MaxwellState, tol: float = 1e-10) -> ClassificationRecord:
    """Pure helicity requires both A and E in the same spectral subspace.

    ``residual_plus`` measures distance from the positive class (relative
    negative-helicity content of A and E, whichever is larger), and
    ``residual_minus`` the converse.
    """
    g = state.grid
    res = {}
    for name, f in (("A", state.A), ("E", state.E)):
        res[f"{name}_minus_content"] = _relative(helicity_project(f, -1, g), f, g)
        res[f"{name}_plus_content"] = _relative(helicity_project(f, 1, g), f, g)
    rp = max(res["A_minus_content"], res["E_minus_content"])
    rm = max(res["A_plus_content"], res["E_plus_content"])
    if rp <= tol and rm <= tol:
        cls = "degenerate"
    elif rp <= tol:
        cls = "positive"
    elif rm <= tol:
        cls = "negative"
    else:
        cls = "mixed"
    return ClassificationRecord(cls, rp, rm, state.t, res)


def mode_helicity_residual(a: np.ndarray, sign, grid: TorusGrid) -> float:
    """Relative content of a(k) outside k-perp_sign, over all modes."""
    sign = _check_sign(sign)
    e1, e2 = grid_basis(grid)
    other = (e1 - sign * 1j * e2) / np.sqrt(2)
    # component along the opposite eigenvector: <other, a> with conj on other
    proj = np.sum(np.conj(other) * a, axis=0)
    tot = np.sum(np.abs(a) ** 2)
    return float(np.sqrt(np.sum(np.abs(proj) ** 2) / tot)) if tot > 0 else 0.0


# phase-space structure ---------------------------------------------------

def complex_structure(state: MaxwellState) -> MaxwellState:
    """j(A, E) = (|C|^-1 E, -|C| A)."""
    g = state.grid
    return MaxwellState(
        fractional_curl_power(state.E, -1.0, g),
        -fractional_curl_power(state.A, 1.0, g),
        g,
        state.t,
    )


def symplectic_form(X1, X2, grid: TorusGrid) -> float:
    """omega(X1, X2) = <u1, v2> - <u2, v1> for pairs X = (u, v)."""
    (u1, v1), (u2, v2) = X1, X2
    for f in (u1, v1, u2, v2):
        grid.check_field(f, 3)
    return l2_inner(u1, v2, grid) - l2_inner(u2, v1, grid)


def divergence_norm(f: np.ndarray, grid: TorusGrid) -> float:
    return l2_norm(divergence(f, grid), grid)


def helicity_eigen_residual(f: np.ndarray, sign, grid: TorusGrid) -> float:
    """||curl f - sign |C| f|| / ||curl f||: zero iff f lies in C_sign."""
    sign = _check_sign(sign)
    c = to_spectral(f)
    r = from_spectral(1j * _cross_k(grid.k, c) - sign * grid.kmag * c)
    return _relative(r, curl(f, grid), grid)
