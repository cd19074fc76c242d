import numpy as np
import pytest

from helicity_lab.helicity import helicity_project, sobolev_norm_sq
from helicity_lab.lattice import TorusGrid, l2_inner, l2_norm, random_field, spectral_multiply, transverse_part
from helicity_lab.poisson import helicity_flow_abelian
from helicity_lab.yangmills import (
    SolverParams,
    action_gradient,
    action_hessian_form,
    covariant_d_star,
    curl_a_quadratic_form,
    embed_abelian,
    h_field,
    h_flow,
    horizontal_vertical_split,
    riemannian_norm,
    ym_poisson_solve,
)
from helicity_lab.yangmills.action import stack_scale
from helicity_lab.yangmills.derivatives import curl_A

P32 = SolverParams(M=32)


@pytest.fixture(scope="module")
def g():
    return TorusGrid(8, 2 * np.pi)


@pytest.fixture(scope="module")
def zero(g):
    return ym_poisson_solve(np.zeros((3, 3) + g.shape), g, P32)


def lie_field(g, seed, amp=None, transverse=False):
    rng = np.random.default_rng(seed)
    comps = [random_field(g, rng, kmax=2) for _ in range(3)]
    if transverse:
        comps = [transverse_part(c, g) for c in comps]
    A = np.stack(comps, axis=1)
    return A if amp is None else A * (amp / np.abs(A).max())


def transverse_quadratic(u, g):
    return sum(sobolev_norm_sq(u[:, a], 0.5, g) for a in range(3))


class TestGradientHessian:
    def test_gradient_vanishes_at_zero(self, g, zero):
        assert action_gradient(zero, lie_field(g, 1)) == 0.0

    def test_gradient_matches_difference_quotient(self, g):
        A = lie_field(g, 2, amp=0.05)
        u = lie_field(g, 3, amp=0.05)
        sol = ym_poisson_solve(A, g, P32)
        eps = 1e-3
        plus = ym_poisson_solve(A + eps * u, g, P32, init=sol.layers).info["action"]
        minus = ym_poisson_solve(A - eps * u, g, P32, init=sol.layers).info["action"]
        fd = (plus - minus) / (2 * eps)
        assert action_gradient(sol, u) == pytest.approx(fd, rel=1e-5)

    def test_hessian_at_zero(self, g, zero):
        u = lie_field(g, 4, transverse=True)
        rep = action_hessian_form(zero, u, u, P32)
        q = transverse_quadratic(u, g)
        for val in (rep.integral, rep.boundary_uv, rep.boundary_vu):
            assert val == pytest.approx(q, rel=1e-6)
        assert rep.symmetry_error < 1e-12

    def test_hessian_symmetric(self, g):
        sol = ym_poisson_solve(lie_field(g, 5, amp=0.05), g, P32)
        rep = action_hessian_form(sol, lie_field(g, 6), lie_field(g, 7), P32)
        assert rep.symmetry_error < 1e-7
        assert rep.agreement_error < 1e-6


class TestSplit:
    def test_decomposition(self, g):
        A = lie_field(g, 8, amp=0.3)
        w = lie_field(g, 9)
        u, v = horizontal_vertical_split(A, w, g)
        np.testing.assert_allclose(u + v, w, atol=1e-13)
        assert l2_norm(covariant_d_star(A, u, 1, g), g) < 1e-9 * l2_norm(w, g)
        assert abs(l2_inner(u, v, g)) < 1e-9 * l2_norm(w, g) ** 2

    def test_horizontal_input_untouched(self, g):
        w = lie_field(g, 10, transverse=True)
        u, v = horizontal_vertical_split(np.zeros_like(w), w, g)
        assert np.abs(v).max() < 1e-14 * np.abs(w).max()
        np.testing.assert_allclose(u, w, atol=1e-14 * np.abs(w).max())

    def test_riemannian_norm_at_zero(self, g, zero):
        # horizontal Poisson energy plus vertical H^(1/2): the full |k| weight
        w = lie_field(g, 11)
        val, parts = riemannian_norm(np.zeros_like(w), w, g, P32, sol=zero)
        full = sum(l2_inner(spectral_multiply(w[:, a], g.kmag), w[:, a], g) for a in range(3))
        assert val == pytest.approx(full, rel=1e-6)
        assert parts["vertical"] > 0 and parts["horizontal"] > 0

    def test_cauchy_schwarz_bound(self, g):
        # |dP(A)[u]| <= 2 sqrt(P(A)) ||u||_A for horizontal u
        A = lie_field(g, 20, amp=0.05)
        sol = ym_poisson_solve(A, g, P32)
        for seed in (21, 22):
            u, _ = horizontal_vertical_split(A, lie_field(g, seed), g)
            norm_sq, _ = riemannian_norm(A, u, g, P32, sol=sol)
            lhs = abs(action_gradient(sol, u))
            assert lhs <= 2 * np.sqrt(sol.info["action"] * norm_sq) * (1 + 1e-9)
        # equality along the gradient direction a'(0) itself
        u, _ = horizontal_vertical_split(A, sol.ds[0], g)
        norm_sq, _ = riemannian_norm(A, u, g, P32, sol=sol)
        ratio = abs(action_gradient(sol, u)) / (2 * np.sqrt(sol.info["action"] * norm_sq))
        assert 0.9 < ratio <= 1 + 1e-9

    def test_riemannian_norm_cap(self):
        g = TorusGrid(10)
        w = np.zeros((3, 3) + g.shape)
        with pytest.raises(ValueError, match="capped"):
            riemannian_norm(w, w, g)


class TestHField:
    def test_abelian_helicity_kernel(self, g):
        a0 = transverse_part(random_field(g, np.random.default_rng(12), kmax=2), g)
        pos = embed_abelian(helicity_project(a0, 1, g))
        neg = embed_abelian(helicity_project(a0, -1, g))
        assert l2_norm(h_field(pos, 1, g, P32), g) < 1e-6 * l2_norm(pos, g)
        assert l2_norm(h_field(neg, -1, g, P32), g) < 1e-6 * l2_norm(neg, g)
        # the opposite field is -2|C| A
        h = h_field(neg, 1, g, P32)
        expected = spectral_multiply(neg, -2 * g.kmag)
        assert l2_norm(h - expected, g) < 1e-6 * l2_norm(expected, g)

    def test_sign_checked(self, g, zero):
        with pytest.raises(ValueError):
            h_field(zero.boundary, 0, g, P32, sol=zero)

    def test_curl_a_self_adjoint(self, g):
        A = lie_field(g, 13, amp=0.3)
        u, v = lie_field(g, 14), lie_field(g, 15)
        lhs = l2_inner(curl_A(A, u, g), v, g)
        rhs = l2_inner(u, curl_A(A, v, g), g)
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestHFlow:
    def test_stationary_at_zero(self, g):
        fl = h_flow(np.zeros((3, 3) + g.shape), 1, g, 1.0, P32)
        assert fl.converged and fl.times == [0.0]
        assert "stationary" in fl.message

    def test_abelian_closed_form(self):
        g = TorusGrid(4, 2 * np.pi)
        a0 = transverse_part(random_field(g, np.random.default_rng(16), kmax=1), g)
        fl = h_flow(embed_abelian(a0), 1, g, 0.5, SolverParams(M=32), h_tol=1e-12, rtol=1e-7)
        ref = embed_abelian(helicity_flow_abelian(a0, fl.times[-1], 1, g))
        assert np.abs(fl.limit - ref).max() < 1e-5 * np.abs(ref).max()
        assert fl.max_action_increase <= 1e-12 * fl.actions[0]

    def test_step_cap(self):
        g = TorusGrid(4, 2 * np.pi)
        a0 = transverse_part(random_field(g, np.random.default_rng(17), kmax=1), g)
        fl = h_flow(embed_abelian(a0), 1, g, 1.0, SolverParams(M=16, euler_tol=1e-4), rtol=1e-2)
        dt = np.diff(fl.times)
        assert dt.max() <= 0.9 * 2.51 / (2 * g.kmag.max()) + 1e-12


class TestCurlQuadraticForm:
    def test_at_zero(self, g, zero):
        u = lie_field(g, 18)
        val, uT = curl_a_quadratic_form(np.zeros_like(u), u, g, 1, P32, sol=zero)
        up = np.stack([helicity_project(u[:, a], 1, g) for a in range(3)], axis=1)
        assert val == pytest.approx(transverse_quadratic(up, g), rel=1e-6)
        assert l2_norm(uT - up, g) < 1e-5 * l2_norm(up, g)
        assert val > 0

    def test_opposite_helicity_is_negative(self, g, zero):
        u = lie_field(g, 23)
        um = np.stack([helicity_project(u[:, a], -1, g) for a in range(3)], axis=1)
        val, _ = curl_a_quadratic_form(np.zeros_like(u), um, g, 1, P32, project=False, sol=zero)
        assert val == pytest.approx(-transverse_quadratic(um, g), rel=1e-10)
        # the tangential projection removes it entirely
        _, uT = curl_a_quadratic_form(np.zeros_like(u), um, g, 1, P32, sol=zero)
        assert l2_norm(uT, g) < 1e-5 * l2_norm(um, g)

    @pytest.mark.slow
    def test_nonnegative_on_flowed_point(self):
        # without truncation the n=6 flow reaches the stratum cleanly
        g = TorusGrid(6, 2 * np.pi)
        params = SolverParams(M=32, dealias=False)
        A = random_field(g, np.random.default_rng(21), components=(3, 3), kmax=1)
        A *= 0.03 / np.abs(A).max()
        fl = h_flow(A, 1, g, 10.0, params, h_tol=2e-5, rtol=1e-5)
        assert fl.converged
        sol = fl.limit_solution
        scale = stack_scale(sol, False)
        u = random_field(g, np.random.default_rng(22), components=(3, 3), kmax=1)
        val, uT = curl_a_quadratic_form(fl.limit, u, g, 1, params, sol=sol)
        assert val >= -1e-6 * scale
        assert 0 < l2_norm(uT, g) < l2_norm(u, g)

    def test_uncertified_point(self, g):
        A = lie_field(g, 19, amp=0.05)
        with pytest.raises(ValueError, match="certified"):
            curl_a_quadratic_form(A, A, g, 1, P32)
