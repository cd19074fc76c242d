import numpy as np
import pytest

from helicity_lab.lattice import TorusGrid, random_field, transverse_part
from helicity_lab.poisson import poisson_action_abelian, poisson_extend_abelian
from helicity_lab.helicity import helicity_project
from helicity_lab.yangmills import action as act
from helicity_lab.yangmills.algebra import embed_abelian
from helicity_lab.yangmills.sgrid import HalfSpaceField, SGrid, default_sgrid, lgl_nodes


class TestLGL:
    def test_quadrature_exact_for_polynomials(self):
        x, w, _ = lgl_nodes(10)
        for p in range(0, 19):
            exact = (1 - (-1) ** (p + 1)) / (p + 1)
            assert w @ x**p == pytest.approx(exact, abs=1e-13)

    def test_differentiation_exact_for_polynomials(self):
        x, _, D = lgl_nodes(12)
        np.testing.assert_allclose(D @ x**7, 7 * x**6, atol=1e-11)
        np.testing.assert_allclose(D @ np.ones_like(x), 0.0, atol=1e-12)


class TestSGrid:
    @pytest.mark.parametrize("rule", ["spectral", "fd"])
    def test_nodes(self, rule):
        sg = getattr(SGrid, rule)(32, 10.0, 3.0)
        assert sg.s[0] == 0.0 and sg.S == pytest.approx(10.0)
        assert np.all(np.diff(sg.s) > 0)
        assert sg.M == 32 and sg.rule == rule
        # clustering near s = 0
        assert sg.s[1] - sg.s[0] < sg.s[-1] - sg.s[-2]

    def test_spectral_accuracy(self):
        sg = SGrid.spectral(64, 30.0, 4.0)
        f = np.exp(-sg.s)
        np.testing.assert_allclose(sg.D @ f, -f, atol=1e-9)
        assert sg.integrate(f) == pytest.approx(1 - np.exp(-30.0), rel=1e-12)

    def test_fd_second_order(self):
        errs = []
        for M in (32, 64, 128):
            sg = SGrid.fd(M, 6.0, 2.0)
            f = np.exp(-sg.s) * np.cos(sg.s)
            df = -np.exp(-sg.s) * (np.cos(sg.s) + np.sin(sg.s))
            d2f = 2 * np.exp(-sg.s) * np.sin(sg.s)
            errs.append((np.max(np.abs(sg.D @ f - df)), np.max(np.abs((sg.D2 @ f - d2f)[1:-1]))))
        errs = np.array(errs)
        orders = np.log2(errs[:-1] / errs[1:])
        assert np.all(orders > 1.8)

    def test_fd_grids_nest(self):
        coarse, fine = SGrid.fd(16, 6.0, 2.0), SGrid.fd(32, 6.0, 2.0)
        np.testing.assert_allclose(fine.s[::2], coarse.s, rtol=1e-14)

    def test_uniform_map(self):
        sg = SGrid.fd(4, 2.0, 0.0)
        np.testing.assert_allclose(sg.s, [0, 0.5, 1.0, 1.5, 2.0])

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            SGrid.spectral(1, 1.0)
        with pytest.raises(ValueError):
            SGrid.fd(8, -1.0)

    def test_default_extent(self):
        g = TorusGrid(8, 4 * np.pi)
        assert default_sgrid(g).S == pytest.approx(30.0 / g.k_min)
        assert default_sgrid(g, rule="fd").rule == "fd"


@pytest.fixture
def abelian_stack(grid8, rng):
    """exp(-s|C|)A embedded in su(2), on the default spectral s-grid."""
    A = transverse_part(random_field(grid8, rng, kmax=2), grid8)
    sg = default_sgrid(grid8)
    layers = embed_abelian(poisson_extend_abelian(A, sg.s, grid8))
    return A, HalfSpaceField(layers, sg, grid8)


class TestHalfSpaceField:
    def test_shape_validation(self, grid8):
        sg = SGrid.fd(4, 1.0)
        with pytest.raises(ValueError):
            HalfSpaceField(np.zeros((4, 3, 3) + grid8.shape), sg, grid8)
        bad = np.zeros((5, 3, 3) + grid8.shape)
        bad[2, 0, 0, 0, 0, 0] = np.inf
        with pytest.raises(ValueError):
            HalfSpaceField(bad, sg, grid8)

    def test_action_of_abelian_stack(self, abelian_stack, grid8):
        A, st = abelian_stack
        assert act.ym_poisson_action(st) == pytest.approx(poisson_action_abelian(A, grid8), rel=1e-9)

    def test_identities_on_abelian_stack(self, abelian_stack):
        _, st = abelian_stack
        sc = act.stack_scale(st)
        assert act.ym_poisson_residual(st) < 1e-7
        assert np.max(np.abs(act.energy_balance(st))) < 1e-8 * sc**2
        assert np.max(act.horizontality(st)) < 1e-10 * sc

    def test_duality_of_embedded_helicity_parts(self, abelian_stack, grid8):
        A, st = abelian_stack
        sg = st.sgrid
        for sign in (1, -1):
            part = helicity_project(A, sign, grid8)
            stack = HalfSpaceField(embed_abelian(poisson_extend_abelian(part, sg.s, grid8)), sg, grid8)
            # C+ has an anti-self-dual extension and C- a self-dual one
            assert act.duality_residual_ym(stack, -sign) < 1e-8
            assert act.duality_residual_ym(stack, sign) > 0.5

    def test_zero_stack(self, grid8):
        st = HalfSpaceField(np.zeros((5, 3, 3) + grid8.shape), SGrid.fd(4, 1.0), grid8)
        assert act.stack_scale(st) == 1.0
        assert act.ym_poisson_action(st) == 0.0
        assert act.ym_poisson_residual(st) == 0.0

    def test_too_few_layers(self, grid8):
        sg = SGrid(np.array([0.0, 1.0]), "fd", np.eye(2), np.ones(2), np.eye(2))
        st2 = HalfSpaceField(np.zeros((2, 3, 3) + grid8.shape), sg, grid8)
        with pytest.raises(ValueError):
            act.ym_poisson_action(st2)
        with pytest.raises(ValueError):
            act.ym_poisson_residual_field(st2)
