"""Periodic cubic lattice with spectral differential operators.

Fields live on an n^3 grid of a torus of side L.  Scalars have shape
(n, n, n); vector fields have a leading axis of length 3.  Any extra
leading axes are treated as batch dimensions by every operator here.

Fourier convention: ``to_spectral`` carries the 1/n^3 factor so that
``f(x) = sum_k c_k exp(i k.x)`` and Parseval reads
``int |f|^2 dx = L^3 sum_k |c_k|^2``.

At even n the Nyquist wavevector component is set to zero in every
derivative multiplier.  This keeps all operators real and mutually
consistent (curl of a gradient vanishes identically, projections are
exact and self-adjoint).  Modes whose wavevector is zero after that
replacement form the *null set*; they are treated like the mean mode.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft as _fft

_AXES = (-3, -2, -1)


@dataclass(frozen=True)
class TorusGrid:
    """n^3 periodic grid on [0, L)^3."""

    n: int
    L: float = 2 * np.pi

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4:
            raise ValueError(f"grid size must be an integer >= 4, got {self.n}")
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"box length must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.h**3

    @property
    def volume(self) -> float:
        return self.L**3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def k_min(self) -> float:
        return 2 * np.pi / self.L

    @cached_property
    def mode_index(self) -> np.ndarray:
        """Integer mode numbers (3, n, n, n) in FFT ordering."""
        m = np.fft.fftfreq(self.n, 1.0 / self.n)
        return np.array(np.meshgrid(m, m, m, indexing="ij"))

    @cached_property
    def nyquist(self) -> np.ndarray:
        """Boolean (3, n, n, n): component sits at the Nyquist index."""
        if self.n % 2:
            return np.zeros((3,) + self.shape, dtype=bool)
        return np.abs(self.mode_index) == self.n // 2

    @cached_property
    def k(self) -> np.ndarray:
        """Wavevectors (3, n, n, n), Nyquist components zeroed."""
        k = self.mode_index * self.k_min
        k[self.nyquist] = 0.0
        return k

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(np.sum(self.k**2, axis=0))

    @cached_property
    def null_mask(self) -> np.ndarray:
        """Modes with zero effective wavevector."""
        return self.kmag == 0.0

    @cached_property
    def khat(self) -> np.ndarray:
        kmag = np.where(self.null_mask, 1.0, self.kmag)
        return np.where(self.null_mask, 0.0, self.k / kmag)

    @cached_property
    def kmag_safe(self) -> np.ndarray:
        """|k| with the null set replaced by 1 (for divisions)."""
        return np.where(self.null_mask, 1.0, self.kmag)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Two-thirds rule: keep modes with every |m_i| < n/3."""
        return np.all(np.abs(self.mode_index) < self.n / 3.0, axis=0)

    @cached_property
    def x(self) -> np.ndarray:
        """Grid coordinates (3, n, n, n)."""
        c = np.arange(self.n) * self.h
        return np.array(np.meshgrid(c, c, c, indexing="ij"))

    def check_field(self, f: np.ndarray, components: int | None = None) -> None:
        """Raise ValueError on wrong trailing shape or non-finite data."""
        f = np.asarray(f)
        if f.shape[-3:] != self.shape:
            raise ValueError(f"field shape {f.shape} does not match grid n={self.n}")
        if components is not None and (f.ndim < 4 or f.shape[-4] != components):
            raise ValueError(f"expected {components} components, got shape {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("field contains non-finite values")


def to_spectral(f: np.ndarray) -> np.ndarray:
    n3 = np.prod(np.shape(f)[-3:])
    return _fft.fftn(f, axes=_AXES) / n3


def from_spectral(c: np.ndarray) -> np.ndarray:
    n3 = np.prod(np.shape(c)[-3:])
    return np.real(_fft.ifftn(c, axes=_AXES)) * n3


def spectral_multiply(f: np.ndarray, mult: np.ndarray) -> np.ndarray:
    """Apply a real, even Fourier multiplier to a real field."""
    return from_spectral(to_spectral(f) * mult)


def dealias(f: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return spectral_multiply(f, grid.dealias_mask)


# differential operators -------------------------------------------------

def _cross_k(kv: np.ndarray, c: np.ndarray) -> np.ndarray:
    """k x c with k of shape (3, ...) broadcasting against c (..., 3, n, n, n)."""
    c0, c1, c2 = c[..., 0, :, :, :], c[..., 1, :, :, :], c[..., 2, :, :, :]
    return np.stack(
        [kv[1] * c2 - kv[2] * c1, kv[2] * c0 - kv[0] * c2, kv[0] * c1 - kv[1] * c0],
        axis=-4,
    )


def gradient(f: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Gradient of (..., n, n, n) -> (..., 3, n, n, n)."""
    c = to_spectral(f)[..., None, :, :, :]
    return from_spectral(1j * grid.k * c)


def divergence(v: np.ndarray, grid: TorusGrid) -> np.ndarray:
    c = to_spectral(v)
    return from_spectral(1j * np.sum(grid.k * c, axis=-4))


def curl(v: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return from_spectral(1j * _cross_k(grid.k, to_spectral(v)))


def laplacian(f: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return spectral_multiply(f, -grid.kmag**2)


# projections -------------------------------------------------------------

def mean_part(v: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Component on the null set (constants plus Nyquist-only modes)."""
    return spectral_multiply(v, grid.null_mask)


def longitudinal_part(v: np.ndarray, grid: TorusGrid) -> np.ndarray:
    c = to_spectral(v)
    kh = grid.khat
    return from_spectral(kh * np.sum(kh * c, axis=-4, keepdims=True))


def transverse_part(v: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Divergence-free part with the null-set component removed."""
    c = to_spectral(v)
    kh = grid.khat
    ct = c - kh * np.sum(kh * c, axis=-4, keepdims=True)
    return from_spectral(np.where(grid.null_mask, 0.0, ct))


# inner products ----------------------------------------------------------

def l2_inner(f: np.ndarray, g: np.ndarray, grid: TorusGrid) -> float:
    """Riemann-sum L^2 inner product summed over all components."""
    return float(np.sum(f * g) * grid.cell_volume)


def l2_norm(f: np.ndarray, grid: TorusGrid) -> float:
    return float(np.sqrt(max(l2_inner(f, f, grid), 0.0)))


# sampling ----------------------------------------------------------------

def random_field(
    grid: TorusGrid,
    rng: np.random.Generator,
    components: int | tuple[int, ...] = 3,
    kmax: float | None = None,
    zero_mean: bool = True,
) -> np.ndarray:
    """Smooth random real field band-limited to |m_i| <= kmax.

    The default band excludes the Nyquist index so that all derivative
    operators act exactly on the result.
    """
    if isinstance(components, int):
        components = (components,)
    if kmax is None:
        kmax = (grid.n - 1) // 2
    noise = rng.standard_normal(components + grid.shape)
    band = np.all(np.abs(grid.mode_index) <= kmax, axis=0)
    if zero_mean:
        band = band & ~grid.null_mask
    c = to_spectral(noise) * band
    # soften high modes a little so fields look smooth
    c *= np.exp(-0.25 * (grid.mode_index**2).sum(axis=0) / max(kmax, 1) ** 2)
    return from_spectral(c)
