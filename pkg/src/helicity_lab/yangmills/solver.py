"""Minimization of the discrete Poisson action and the linearized problem.

The unknowns are the layers j >= 1 of a stack whose layer 0 is clamped to
A; the end s = S carries the natural (Neumann) condition.  The action is

    S_h(a) = sum_j w_j (||(D a)_j||^2 + ||b_j||^2).

Iterations run in preconditioned coordinates a = a_init + T z where T is
the symmetric inverse square root of the Hessian at a = 0, diagonal in
spatial Fourier modes: per mode it is the s-matrix D^T W D + |k|^2 W on
the transverse part and D^T W D on the longitudinal part.  In these
coordinates the Hessian is the identity for weak fields, so quasi-Newton
iterations converge in a handful of steps.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize
from scipy.sparse.linalg import LinearOperator, cg

from ..lattice import TorusGrid, from_spectral, to_spectral
from ..poisson import poisson_extend_abelian
from .action import layer_norms, ym_poisson_residual_field
from .algebra import bracket_hook, covariant_d, covariant_d_star, curvature3
from .sgrid import HalfSpaceField, SGrid

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Raised when an iteration fails; carries the best iterate and history."""

    def __init__(self, message: str, best: HalfSpaceField | None = None, history=None):
        super().__init__(message)
        self.best = best
        self.history = history or []


@dataclass(frozen=True)
class SolverParams:
    M: int = 64
    S: float | None = None  # defaults to 30 / k_min
    beta: float = 4.0
    rule: str = "spectral"
    max_iter: int = 500
    gtol: float = 1e-11
    ftol: float = 0.0
    maxcor: int = 30
    maxls: int = 40
    euler_tol: float = 1e-6
    cg_tol: float = 1e-12
    cg_max_iter: int = 2000
    dealias: bool = True

    def __post_init__(self):
        for name in ("gtol", "euler_tol", "cg_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.rule not in ("spectral", "fd"):
            raise ValueError(f"unknown s-rule {self.rule!r}")

    def sgrid(self, grid: TorusGrid) -> SGrid:
        S = 30.0 / grid.k_min if self.S is None else self.S
        maker = SGrid.spectral if self.rule == "spectral" else SGrid.fd
        return maker(self.M, S, self.beta)

    def to_dict(self) -> dict:
        return asdict(self)


class ModeOperator:
    """Functions of the weak-field Hessian, applied mode by mode."""

    def __init__(self, grid: TorusGrid, sgrid: SGrid, interior: np.ndarray):
        self.grid = grid
        W = sgrid.weights
        kin = (sgrid.D.T * W) @ sgrid.D
        idx = np.asarray(interior)
        self.kin = kin[np.ix_(idx, idx)]
        self.W = W[idx]
        k2 = np.round(grid.kmag.ravel() ** 2 / grid.k_min**2, 8)
        self.k2, inv = np.unique(k2, return_inverse=True)
        self.groups = [np.flatnonzero(inv == u) for u in range(len(self.k2))]
        self._eig = {}
        self._cache = {}

    def _decomp(self, k2: float):
        if k2 not in self._eig:
            K = self.kin + np.diag(k2 * self.grid.k_min**2 * self.W)
            self._eig[k2] = np.linalg.eigh(K)
        return self._eig[k2]

    def _matrix(self, k2: float, power: float) -> np.ndarray:
        key = (k2, power)
        if key not in self._cache:
            lam, V = self._decomp(k2)
            self._cache[key] = (V * lam**power) @ V.T
        return self._cache[key]

    def apply(self, f: np.ndarray, power: float) -> np.ndarray:
        """f has shape (m, 3, 3, n, n, n) with m interior layers."""
        c = to_spectral(f)
        kh = self.grid.khat[:, None]
        cl = kh * np.sum(kh * c, axis=-5, keepdims=True)
        ct = (c - cl).reshape(c.shape[0], 9, -1)
        m0 = self._matrix(0.0, power)
        out_l = np.tensordot(m0, cl, axes=(1, 0))
        out_t = np.empty_like(ct)
        for k2, idx in zip(self.k2, self.groups):
            out_t[:, :, idx] = np.tensordot(self._matrix(k2, power), ct[:, :, idx], axes=(1, 0))
        return from_spectral(out_l + out_t.reshape(c.shape))


def abelian_initial_stack(A: np.ndarray, grid: TorusGrid, sgrid: SGrid) -> np.ndarray:
    """exp(-s|C|) applied to each Lie component of A, sampled on the s-grid."""
    layers = np.empty((sgrid.M + 1,) + A.shape)
    for a in range(3):
        layers[:, :, a] = poisson_extend_abelian(A[:, a], sgrid.s, grid)
    layers[0] = A
    return layers


def _action_and_gradient(layers, sgrid: SGrid, grid: TorusGrid, dealias: bool):
    h3 = grid.cell_volume
    w = sgrid.weights
    da = sgrid.derivative(layers)
    b = curvature3(layers, grid, dealias)
    dens = layer_norms(da, grid) ** 2 + layer_norms(b, grid) ** 2
    S = float(w @ dens)
    wshape = (-1,) + (1,) * (layers.ndim - 1)
    grad = np.tensordot(sgrid.D.T, w.reshape(wshape) * da, axes=(1, 0))
    grad += w.reshape(wshape) * covariant_d_star(layers, b, 2, grid, dealias)
    return S, 2.0 * h3 * grad


def ym_poisson_solve(
    A: np.ndarray,
    grid: TorusGrid,
    params: SolverParams = SolverParams(),
    init: np.ndarray | None = None,
    log_stream=None,
) -> HalfSpaceField:
    """Minimize the discrete action with layer 0 clamped to A.

    ``init`` optionally replaces the abelian closed-form starting stack
    (its layer 0 is overwritten by A).  Solver statistics end up in the
    returned field's ``info``; JSON lines go to ``log_stream`` if given.
    """
    grid.check_field(A)
    if A.shape != (3, 3) + grid.shape:
        raise ValueError(f"expected a 1-form of shape (3, 3, n, n, n), got {A.shape}")
    sg = params.sgrid(grid)
    M = sg.M
    a0 = abelian_initial_stack(A, grid, sg) if init is None else np.array(init, dtype=float)
    a0[0] = A
    h3 = grid.cell_volume
    S0, _ = _action_and_gradient(a0, sg, grid, params.dealias)
    ref = S0 if S0 > 0 else 1.0
    pre = ModeOperator(grid, sg, np.arange(1, M + 1))
    c = np.sqrt(ref / (2.0 * h3))
    zshape = (M,) + A.shape

    def T(z):
        return c * pre.apply(z, -0.5)

    history = []

    def fun(zflat):
        a = a0.copy()
        a[1:] += T(zflat.reshape(zshape))
        S, g = _action_and_gradient(a, sg, grid, params.dealias)
        gz = T(g[1:]) / ref
        fun.last = (a, S, gz)
        return S / ref, gz.ravel()

    def callback(intermediate_result):
        a, S, gz = fun.last
        rec = {"iteration": len(history) + 1, "action": S, "gradient_norm": float(np.linalg.norm(gz))}
        if log_stream is not None:
            # the collocation residual costs about one more evaluation
            rec["euler_residual"] = euler_residual(HalfSpaceField(a, sg, grid), params.dealias)
            log_stream.write(json.dumps(rec) + "\n")
        history.append(rec)

    z0 = np.zeros(int(np.prod(zshape)))
    if S0 == 0.0:
        # zero field: the initial stack is already the minimizer
        out = HalfSpaceField(a0, sg, grid)
        out.info = {"iterations": 0, "action": 0.0, "euler_residual": 0.0, "history": []}
        return out
    res = optimize.minimize(
        fun,
        z0,
        jac=True,
        method="L-BFGS-B",
        callback=callback,
        options={
            "maxiter": params.max_iter,
            "maxcor": params.maxcor,
            "gtol": params.gtol,
            "ftol": params.ftol,
            "maxls": params.maxls,
        },
    )
    a = a0.copy()
    a[1:] += T(res.x.reshape(zshape))
    S, g = _action_and_gradient(a, sg, grid, params.dealias)
    out = HalfSpaceField(a, sg, grid)
    euler = euler_residual(out, params.dealias)
    gnorm = float(np.linalg.norm(T(g[1:]) / ref))
    out.info = {
        "iterations": int(res.nit),
        "evaluations": int(res.nfev),
        "action": S,
        "gradient_norm": gnorm,
        "euler_residual": euler,
        "message": str(res.message),
        "history": history,
    }
    log.info("Poisson solve: %d iterations, action %.10g, Euler residual %.3g", res.nit, S, euler)
    if log_stream is not None:
        log_stream.write(json.dumps({k: v for k, v in out.info.items() if k != "history"}) + "\n")
    if not np.isfinite(S) or euler > params.euler_tol:
        raise SolverError(
            f"Poisson solve did not converge: Euler residual {euler:.3g} after {res.nit} iterations ({res.message})",
            best=out,
            history=history,
        )
    return out


def euler_residual(a: HalfSpaceField, dealias: bool = True) -> float:
    """Interior collocation residual of a'' = d_a* b relative to ||a'(0)||."""
    r = layer_norms(ym_poisson_residual_field(a, dealias), a.grid).max()
    ref = layer_norms(a.ds[:1], a.grid)[0]
    return float(r / ref) if ref > 0 else float(r)


# linearized problem ---------------------------------------------------------

def _second_variation(a: HalfSpaceField, b: np.ndarray, u: np.ndarray, dealias: bool):
    """Unscaled Hessian of the action applied to a full stack u."""
    g = a.grid
    sg = a.sgrid
    w = sg.weights.reshape((-1,) + (1,) * (u.ndim - 1))
    du = sg.derivative(u)
    kin = np.tensordot(sg.D.T, w * du, axes=(1, 0))
    dau = covariant_d(a.layers, u, 1, g, dealias)
    pot = covariant_d_star(a.layers, dau, 2, g, dealias)
    pot += bracket_hook(u, 1, b, 2, g if dealias else None)
    return kin + w * pot


def variational_solve(
    a: HalfSpaceField, u0: np.ndarray, params: SolverParams = SolverParams()
) -> HalfSpaceField:
    """Solve u'' = d_a* d_a u + [u _| b] with u(0) = u0 and u(S) = 0.

    The discrete problem minimizes the second variation of the action
    over interior layers; conjugate gradients with the weak-field
    Hessian as preconditioner.
    """
    g = a.grid
    M = a.sgrid.M
    b = curvature3(a.layers, g, params.dealias)
    interior = np.arange(1, M)
    shape = (M - 1, 3, 3) + g.shape
    lift = np.zeros_like(a.layers)
    lift[0] = u0
    rhs = -_second_variation(a, b, lift, params.dealias)[1:M].ravel()
    if not np.any(u0):
        return HalfSpaceField(np.zeros_like(a.layers), a.sgrid, g, {"cg_iterations": 0})

    def matvec(x):
        full = np.zeros_like(a.layers)
        full[1:M] = x.reshape(shape)
        return _second_variation(a, b, full, params.dealias)[1:M].ravel()

    pre = ModeOperator(g, a.sgrid, interior)
    n = rhs.size
    op = LinearOperator((n, n), matvec=matvec, dtype=float)
    prec = LinearOperator((n, n), matvec=lambda x: pre.apply(x.reshape(shape), -1.0).ravel(), dtype=float)
    counter = {"it": 0}

    def cb(xk):
        counter["it"] += 1

    x, info = cg(op, rhs, rtol=params.cg_tol, atol=0.0, maxiter=params.cg_max_iter, M=prec, callback=cb)
    if info != 0:
        raise SolverError(f"conjugate gradient failed (info={info})")
    layers = lift.copy()
    layers[1:M] = x.reshape(shape)
    return HalfSpaceField(layers, a.sgrid, g, {"cg_iterations": counter["it"]})
