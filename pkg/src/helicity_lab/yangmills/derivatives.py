"""Derivatives of the Poisson action, the h-fields and their flows.

Conventions: ``a'(0)`` is the collocation derivative of the solved stack
at s = 0; the Hessian quadratic form is half the second derivative of
the action, whose boundary form is -<u, v'(0)> for the variational
extension v of v(0).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.sparse.linalg import LinearOperator, cg

from ..helicity import _check_sign
from ..lattice import TorusGrid, l2_inner, l2_norm, spectral_multiply
from .action import layer_norms
from .algebra import (
    bracket_wedge,
    covariant_d,
    covariant_d_star,
    covariant_laplacian,
    curvature3,
)
from .sgrid import HalfSpaceField
from .solver import SolverError, SolverParams, variational_solve, ym_poisson_solve


def boundary_derivative(sol: HalfSpaceField) -> np.ndarray:
    return sol.ds[0]


def action_gradient(sol: HalfSpaceField, u: np.ndarray) -> float:
    """Directional derivative -2 <u, a'(0)> from a solved extension."""
    return -2.0 * l2_inner(u, boundary_derivative(sol), sol.grid)


@dataclass(frozen=True)
class HessianReport:
    integral: float
    boundary_uv: float  # -<u, v'(0)>
    boundary_vu: float  # -<v, u'(0)>

    @property
    def symmetry_error(self) -> float:
        s = max(abs(self.boundary_uv), abs(self.boundary_vu), 1e-300)
        return abs(self.boundary_uv - self.boundary_vu) / s

    @property
    def agreement_error(self) -> float:
        s = max(abs(self.integral), 1e-300)
        return max(abs(self.integral - self.boundary_uv), abs(self.integral - self.boundary_vu)) / s


def hessian_integral(sol: HalfSpaceField, U: HalfSpaceField, V: HalfSpaceField, dealias: bool = True) -> float:
    """sum_j w_j (<u', v'> + <d_a u, d_a v> + <[u ^ v], b>)."""
    g = sol.grid
    a = sol.layers
    b = curvature3(a, g, dealias)
    dU = covariant_d(a, U.layers, 1, g, dealias)
    dV = covariant_d(a, V.layers, 1, g, dealias)
    uv = bracket_wedge(U.layers, 1, V.layers, 1, g if dealias else None)
    axes = tuple(range(1, a.ndim))
    dens = (
        np.sum(U.ds * V.ds, axis=axes)
        + np.sum(dU * dV, axis=axes)
        + np.sum(uv * b, axis=axes)
    ) * g.cell_volume
    return sol.sgrid.integrate(dens)


def action_hessian_form(
    sol: HalfSpaceField, u: np.ndarray, v: np.ndarray, params: SolverParams = SolverParams()
) -> HessianReport:
    """Both forms of (1/2) d_v d_u P at the boundary value of ``sol``."""
    U = variational_solve(sol, u, params)
    V = variational_solve(sol, v, params)
    g = sol.grid
    return HessianReport(
        integral=hessian_integral(sol, U, V, params.dealias),
        boundary_uv=-l2_inner(u, V.ds[0], g),
        boundary_vu=-l2_inner(v, U.ds[0], g),
    )


def h_field(
    A: np.ndarray,
    sign,
    grid: TorusGrid,
    params: SolverParams = SolverParams(),
    sol: HalfSpaceField | None = None,
) -> np.ndarray:
    """h_sign(A) = a'(0) + sign *B with B the curvature of A."""
    sign = _check_sign(sign)
    sol = ym_poisson_solve(A, grid, params) if sol is None else sol
    return boundary_derivative(sol) + sign * curvature3(A, grid, params.dealias)


@dataclass
class HFlowResult:
    times: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    h_norms: list = field(default_factory=list)
    converged: bool = False
    limit: np.ndarray | None = None
    limit_solution: HalfSpaceField | None = None
    states: list = field(default_factory=list)
    message: str = ""

    @property
    def max_action_increase(self) -> float:
        P = np.asarray(self.actions)
        return float(np.max(np.diff(P), initial=0.0))


RK23_STABILITY = 2.51  # real-axis stability interval of the Bogacki-Shampine pair
STABLE_STEP_FRACTION = 0.9


def h_flow(
    A: np.ndarray,
    sign,
    grid: TorusGrid,
    t_end: float,
    params: SolverParams = SolverParams(),
    h_tol: float = 1e-4,
    rtol: float = 1e-5,
    keep_states: bool = False,
    max_steps: int = 500,
    max_step: float | None = None,
) -> HFlowResult:
    """Integrate dA/dt = h_sign(A) with an embedded Runge-Kutta 2(3) pair.

    Each right-hand side is a Poisson solve warm-started from the previous
    one.  Stops once ||h|| < h_tol * ||h(A(0))|| or at t_end; P(A(t)) and
    ||h|| are recorded at every accepted step.

    The linear part of h damps opposite-helicity modes at rate 2|k|, up to
    2|k|_max on the lattice.  Left to the error controller alone, the
    explicit pair drifts to its stability edge there and parks a noise
    floor near atol in the top shell, so the step is capped by default.
    """
    sign = _check_sign(sign)
    shape = A.shape
    cache = {"init": None, "last": None}

    def rhs(t, y):
        Ay = y.reshape(shape)
        sol = ym_poisson_solve(Ay, grid, params, init=cache["init"])
        cache["init"] = sol.layers
        h = boundary_derivative(sol) + sign * curvature3(Ay, grid, params.dealias)
        cache["last"] = (Ay, sol, h)
        return h.ravel()

    out = HFlowResult()
    h0 = rhs(0.0, A.ravel())
    _, sol0, _ = cache["last"]
    h_ref = l2_norm(h0, grid)
    out.times.append(0.0)
    out.actions.append(sol0.info["action"])
    out.h_norms.append(h_ref)
    if keep_states:
        out.states.append(A.copy())
    if h_ref == 0.0:
        out.converged, out.limit, out.limit_solution = True, A.copy(), sol0
        out.message = "initial point is stationary"
        return out
    scale = np.sqrt(np.mean(A**2)) + 1e-300
    if max_step is None:
        max_step = STABLE_STEP_FRACTION * RK23_STABILITY / (2.0 * float(grid.kmag.max()))
    rk = integrate.RK23(rhs, 0.0, A.ravel(), t_end, rtol=rtol, atol=rtol * scale, max_step=max_step)
    steps = 0
    while rk.status == "running" and steps < max_steps:
        msg = rk.step()
        steps += 1
        if rk.status == "failed":
            out.message = f"integrator failed: {msg}"
            break
        Ay, sol, h = cache["last"]
        out.times.append(rk.t)
        out.actions.append(sol.info["action"])
        hn = l2_norm(h, grid)
        out.h_norms.append(hn)
        if keep_states:
            out.states.append(Ay.copy())
        if hn < h_tol * h_ref:
            out.converged = True
            out.message = f"||h|| below {h_tol:g} of its initial value at t={rk.t:.4g}"
            break
    Ay, sol, _ = cache["last"]
    out.limit, out.limit_solution = Ay.copy(), sol
    if not out.converged and not out.message:
        out.message = f"not converged by t={rk.t:.4g} ({steps} steps)"
    return out


# gauge directions -----------------------------------------------------------

def horizontal_vertical_split(
    A: np.ndarray,
    w: np.ndarray,
    grid: TorusGrid,
    dealias: bool = True,
    tol: float = 1e-12,
    max_iter: int = 1000,
) -> tuple[np.ndarray, np.ndarray]:
    """w = u + v with d_A* u = 0 and v = d_A lambda (lambda from CG)."""
    shape = (3,) + grid.shape
    rhs = covariant_d_star(A, w, 1, grid, dealias).ravel()
    if not np.any(rhs):
        return w.copy(), np.zeros_like(w)
    n = rhs.size
    op = LinearOperator(
        (n, n), matvec=lambda x: covariant_laplacian(A, x.reshape(shape), grid, dealias).ravel(), dtype=float
    )
    # constants are only weakly lifted by A; keep them in the Krylov space
    k2 = np.where(grid.null_mask, 1.0 / grid.k_min**2, 1.0 / grid.kmag_safe**2)
    prec = LinearOperator((n, n), matvec=lambda x: spectral_multiply(x.reshape(shape), k2).ravel(), dtype=float)
    lam, info = cg(op, rhs, rtol=tol, atol=0.0, maxiter=max_iter, M=prec)
    if info != 0:
        raise SolverError(f"vertical projection CG did not converge (info={info}); connection may be reducible")
    v = covariant_d(A, lam.reshape(shape), 0, grid, dealias)
    return w - v, v


DENSE_EIG_CAP = 8


def covariant_laplacian_matrix(A: np.ndarray, grid: TorusGrid, dealias: bool = True) -> np.ndarray:
    """Dense matrix of -Delta_A on Lie 0-forms in the flat array basis."""
    N = 3 * grid.n**3
    eye = np.eye(N).reshape((N, 3) + grid.shape)
    L = covariant_laplacian(A, eye, grid, dealias).reshape(N, N).T
    return 0.5 * (L + L.T)


def riemannian_norm(
    A: np.ndarray,
    w: np.ndarray,
    grid: TorusGrid,
    params: SolverParams = SolverParams(),
    max_n: int = DENSE_EIG_CAP,
    sol: HalfSpaceField | None = None,
) -> tuple[float, dict]:
    """||w||_A^2 = horizontal Poisson energy of u + ||(-Delta_A)^(1/4) v||^2.

    Returns the squared norm and its two parts.
    """
    if grid.n > max_n:
        raise ValueError(f"dense eigensolve capped at n={max_n}, got n={grid.n}")
    u, v = horizontal_vertical_split(A, w, grid, params.dealias)
    sol = ym_poisson_solve(A, grid, params) if sol is None else sol
    horiz = 0.0
    if np.any(u):
        U = variational_solve(sol, u, params)
        dU = covariant_d(sol.layers, U.layers, 1, grid, params.dealias)
        dens = layer_norms(U.ds, grid) ** 2 + layer_norms(dU, grid) ** 2
        horiz = sol.sgrid.integrate(dens)
    lam, V = np.linalg.eigh(covariant_laplacian_matrix(A, grid, params.dealias))
    root = V @ np.diag(np.sqrt(np.clip(lam, 0.0, None))) @ V.T
    vf = v.reshape(3, -1)
    vert = float(np.einsum("ip,pq,iq->", vf, root, vf) * grid.cell_volume)
    return horiz + vert, {"horizontal": horiz, "vertical": vert}


# curl_A on the strata ----------------------------------------------------------

def curl_A(A: np.ndarray, u: np.ndarray, grid: TorusGrid, dealias: bool = True) -> np.ndarray:
    """Symmetrized *d_A on 1-forms (exactly self-adjoint with dealiasing)."""
    dA = covariant_d(A, u, 1, grid, dealias)
    return 0.5 * (dA + covariant_d_star(A, u, 2, grid, dealias))


def h_linearization(sol: HalfSpaceField, u: np.ndarray, sign: int, params: SolverParams) -> np.ndarray:
    """J u = d/de h_sign(A + e u) = u'(0) + sign curl_A u."""
    U = variational_solve(sol, u, params)
    return U.ds[0] + sign * curl_A(sol.boundary, u, sol.grid, params.dealias)


def tangential_projection(
    sol: HalfSpaceField,
    u: np.ndarray,
    sign,
    params: SolverParams = SolverParams(),
    tol: float = 1e-8,
    max_iter: int = 200,
) -> np.ndarray:
    """Component of u in the kernel of the linearized h_sign.

    The linearization J is symmetric and nonpositive near A = 0, so
    u - J^+ J u is the orthogonal projection onto ker J, the tangent space
    of the stratum; J^+ J u comes from conjugate gradients on -J.
    """
    sign = _check_sign(sign)
    shape = u.shape
    n = u.size

    def negJ(x):
        return -h_linearization(sol, x.reshape(shape), sign, params).ravel()

    rhs = negJ(u.ravel())
    if not np.any(rhs):
        return u.copy()
    op = LinearOperator((n, n), matvec=negJ, dtype=float)
    x, info = cg(op, rhs, rtol=tol, atol=0.0, maxiter=max_iter)
    if info != 0:
        raise SolverError(f"tangential projection CG did not converge (info={info})")
    return u - x.reshape(shape)


def curl_a_quadratic_form(
    A: np.ndarray,
    u: np.ndarray,
    grid: TorusGrid,
    sign,
    params: SolverParams = SolverParams(),
    certify_tol: float = 1e-4,
    project: bool = True,
    sol: HalfSpaceField | None = None,
) -> tuple[float, np.ndarray]:
    """<u_T, curl_A u_T> for A on the sign stratum.

    A is certified by ||h_sign(A)|| <= certify_tol * ||a'(0)|| (always for
    A = 0).  Returns the value and the projected direction used.
    """
    sign = _check_sign(sign)
    sol = ym_poisson_solve(A, grid, params) if sol is None else sol
    h = h_field(A, sign, grid, params, sol=sol)
    ref = l2_norm(boundary_derivative(sol), grid)
    if l2_norm(h, grid) > certify_tol * max(ref, 1e-300) and np.any(A):
        raise ValueError("A is not certified on the requested stratum")
    uT = tangential_projection(sol, u, sign, params) if project else u
    return l2_inner(uT, curl_A(A, uT, grid, params.dealias), grid), uT
