import io
import json

import numpy as np
import pytest

from helicity_lab.helicity import sobolev_norm_sq
from helicity_lab.lattice import TorusGrid, l2_inner, random_field, spectral_multiply, transverse_part
from helicity_lab.yangmills import (
    SolverError,
    SolverParams,
    duality_residual_ym,
    embed_abelian,
    gauge_transform,
    random_gauge,
    variational_solve,
    ym_poisson_residual,
    ym_poisson_solve,
)
from helicity_lab.yangmills.solver import euler_residual

P32 = SolverParams(M=32)


@pytest.fixture(scope="module")
def g():
    return TorusGrid(8, 2 * np.pi)


def small_field(g, seed, amp=0.05):
    A = random_field(g, np.random.default_rng(seed), components=(3, 3), kmax=1)
    return A * (amp / np.abs(A).max())


def poisson_quadratic(A, g):
    return sum(sobolev_norm_sq(A[:, a], 0.5, g) for a in range(3))


def full_quadratic(A, g):
    # counts longitudinal content too, which the action does not see
    return sum(l2_inner(spectral_multiply(A[:, a], g.kmag), A[:, a], g) for a in range(3))


class TestParams:
    @pytest.mark.parametrize("bad", [{"gtol": 0.0}, {"euler_tol": -1.0}, {"rule": "simpson"}])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            SolverParams(**bad)

    def test_default_depth(self, g):
        sg = SolverParams(M=16).sgrid(g)
        assert sg.s[-1] == pytest.approx(30.0 / g.k_min)

    def test_shape_checked(self, g):
        with pytest.raises(ValueError, match="1-form"):
            ym_poisson_solve(np.zeros((3,) + g.shape), g, P32)


class TestSolve:
    def test_zero_field(self, g):
        sol = ym_poisson_solve(np.zeros((3, 3) + g.shape), g, P32)
        assert sol.info["iterations"] == 0 and sol.info["action"] == 0.0
        assert not np.any(sol.layers)

    def test_abelian_oracle(self, g, rng):
        a0 = transverse_part(random_field(g, rng, kmax=2), g)
        A = embed_abelian(a0)
        sol = ym_poisson_solve(A, g, P32)
        exact = sobolev_norm_sq(a0, 0.5, g)
        assert sol.info["action"] == pytest.approx(exact, rel=1e-8)
        assert np.allclose(sol.ds[0], embed_abelian(spectral_multiply(a0, -g.kmag)), atol=1e-6 * np.abs(a0).max())

    def test_small_nonabelian(self, g):
        A = small_field(g, 11)
        sol = ym_poisson_solve(A, g, P32)
        assert sol.info["euler_residual"] < P32.euler_tol
        assert ym_poisson_residual(sol) < 1e-5
        # cubic correction to the quadratic action is O(amplitude)
        q = poisson_quadratic(A, g)
        assert abs(sol.info["action"] / q - 1) < 0.1
        assert np.array_equal(sol.layers[0], A)

    def test_warm_start_agrees(self, g):
        A = small_field(g, 12)
        cold = ym_poisson_solve(A, g, P32)
        warm = ym_poisson_solve(A, g, P32, init=cold.layers)
        assert warm.info["iterations"] <= 2
        assert warm.info["action"] == pytest.approx(cold.info["action"], rel=1e-10)

    def test_log_stream(self, g):
        buf = io.StringIO()
        ym_poisson_solve(small_field(g, 13), g, P32, log_stream=buf)
        recs = [json.loads(line) for line in buf.getvalue().splitlines()]
        assert len(recs) >= 2
        assert all("euler_residual" in r for r in recs)
        assert recs[0]["iteration"] == 1

    def test_failure_carries_best(self, g):
        with pytest.raises(SolverError) as err:
            ym_poisson_solve(small_field(g, 14, amp=0.5), g, SolverParams(M=32, max_iter=1))
        assert err.value.best is not None
        assert err.value.best.info["iterations"] == 1
        assert euler_residual(err.value.best) > P32.euler_tol


class TestGauge:
    def test_action_is_gauge_invariant(self, g, rng):
        A = small_field(g, 15)
        G = random_gauge(g, rng, amplitude=0.05, kmax=1)
        p1 = ym_poisson_solve(A, g, P32).info["action"]
        p2 = ym_poisson_solve(gauge_transform(A, G), g, P32).info["action"]
        assert p1 == pytest.approx(p2, rel=1e-6)

    def test_residuals_are_gauge_invariant(self, g, rng):
        A = small_field(g, 16)
        G = random_gauge(g, rng, amplitude=0.3, kmax=1)
        s1 = ym_poisson_solve(A, g, P32)
        s2 = ym_poisson_solve(gauge_transform(A, G), g, P32)
        for sign in (1, -1):
            d1, d2 = duality_residual_ym(s1, sign), duality_residual_ym(s2, sign)
            assert d1 == pytest.approx(d2, rel=1e-4)
        assert max(ym_poisson_residual(s1), ym_poisson_residual(s2)) < 1e-5

    def test_pure_gauge_costs_nothing(self, g, rng):
        G = random_gauge(g, rng, amplitude=0.05, kmax=1)
        pure = gauge_transform(np.zeros((3, 3) + g.shape), G)
        sol = ym_poisson_solve(pure, g, P32)
        assert sol.info["action"] < 1e-4 * full_quadratic(pure, g)


class TestVariational:
    def test_free_extension(self, g, rng):
        Z = ym_poisson_solve(np.zeros((3, 3) + g.shape), g, P32)
        u = np.stack([transverse_part(random_field(g, rng, kmax=2), g) for _ in range(3)], axis=1)
        U = variational_solve(Z, u, P32)
        assert np.array_equal(U.layers[0], u)
        assert not np.any(U.layers[-1])
        expected = spectral_multiply(u, -g.kmag)
        assert np.abs(U.ds[0] - expected).max() < 1e-6 * np.abs(expected).max()

    def test_zero_boundary(self, g):
        Z = ym_poisson_solve(np.zeros((3, 3) + g.shape), g, P32)
        U = variational_solve(Z, np.zeros((3, 3) + g.shape), P32)
        assert not np.any(U.layers) and U.info["cg_iterations"] == 0
