import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import gaussian_state, localized
from gengxue.models import (
    Family,
    Formulation,
    ModelParams,
    StatePair,
    bfam_rhs,
    gx_rhs,
    mn_rhs,
    mn_rhs_as_uv,
    model_rhs,
    reduction_check,
)
from gengxue.spectral import NonFiniteFieldError, make_grid


def _oracle_rhs(u_fn, v_fn, b, L=50.0, N=4096):
    """Pointwise products on a fine grid; aliasing is negligible for smooth data."""
    x = -L + np.arange(N) * (2 * L / N)
    k = np.fft.fftfreq(N, d=1.0 / N) * np.pi / L

    def d(f, n):
        return np.real(np.fft.ifft((1j * k) ** n * np.fft.fft(f)))

    def pinv(f):
        return np.real(np.fft.ifft(np.fft.fft(f) / (1 + k**2)))

    u, v = u_fn(x), v_fn(x)
    u1, u2, v1, v2 = d(u, 1), d(u, 2), d(v, 1), d(v, 2)
    Fu = b * u * v * u1 + (3 - b) * u1 * v * u2 + 2 * u * v1 * u2 + 2 * u1**2 * v1 + u * v2 * u1
    Fv = b * v * u * v1 + (3 - b) * v1 * u * v2 + 2 * v * u1 * v2 + 2 * v1**2 * u1 + v * u2 * v1
    return x, -u * v * u1 - pinv(Fu), -u * v * v1 - pinv(Fv)


class TestParams:
    def test_geng_xue_forces_b3(self):
        assert ModelParams(Family.GENG_XUE, b=2.0).b == 3.0

    def test_r_range(self):
        with pytest.raises(ValueError):
            ModelParams(r=1.5)

    def test_thm14_requirement(self):
        ModelParams(Family.B_FAMILY, b=2.0, r=2.0).require_thm14()
        with pytest.raises(ValueError, match=r"b = 1 \+ 2/r"):
            ModelParams(Family.B_FAMILY, b=3.0, r=2.0).require_thm14()


class TestRhs:
    @pytest.mark.parametrize("b", [3.0, 2.0, 1.5])
    def test_against_fine_grid_oracle(self, b):
        u_fn = lambda x: 0.8 * np.exp(-0.5 * x**2) * (1 + 0.2 * np.sin(x))  # noqa: E731
        v_fn = lambda x: 0.6 * np.exp(-0.5 * ((x - 1) / 1.5) ** 2)  # noqa: E731
        g = make_grid(50.0, 512)
        s = StatePair.from_arrays(g, u_fn(g.x), v_fn(g.x))
        t = bfam_rhs(s, b)
        x, du, dv = _oracle_rhs(u_fn, v_fn, b)
        assert np.allclose(x[::8], g.x)
        assert np.max(np.abs(t.du.values - du[::8])) < 1e-11
        assert np.max(np.abs(t.dv.values - dv[::8])) < 1e-11

    def test_zero_state(self, grid512):
        z = StatePair.from_arrays(grid512, np.zeros(512), np.zeros(512))
        t = gx_rhs(z)
        assert not t.du.values.any() and not t.dv.values.any()

    def test_swap_symmetry(self, grid512, rng):
        s = StatePair.from_arrays(grid512, localized(grid512, rng), localized(grid512, rng))
        t = bfam_rhs(s, 2.5)
        ts = bfam_rhs(s.swapped(), 2.5)
        assert np.max(np.abs(t.du.values - ts.dv.values)) < 1e-15
        assert np.max(np.abs(t.dv.values - ts.du.values)) < 1e-15

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(1.0, 4.0))
    def test_formulations_agree(self, seed, b):
        # the two forms are equal up to spectral truncation of resolved data
        g = make_grid(50.0, 512)
        r = np.random.default_rng(seed)
        s = StatePair.from_arrays(g, localized(g, r), localized(g, r))
        a = bfam_rhs(s, b)
        m = mn_rhs_as_uv(s, b)
        scale = max(1.0, np.max(np.abs(a.du.values)), np.max(np.abs(a.dv.values)))
        assert np.max(np.abs(a.du.values - m.du.values)) < 1e-10 * scale
        assert np.max(np.abs(a.dv.values - m.dv.values)) < 1e-10 * scale

    def test_model_rhs_dispatch(self, grid512):
        s = gaussian_state(grid512)
        p = ModelParams(formulation=Formulation.MN_TRANSPORT)
        assert np.allclose(model_rhs(s, p).du.values, bfam_rhs(s, 3.0).du.values, atol=1e-15)
        assert mn_rhs(s, 3.0).dm.grid == grid512

    def test_nonfinite_rejected(self, grid512):
        with pytest.raises(NonFiniteFieldError):
            StatePair.from_arrays(grid512, np.full(512, np.inf), np.zeros(512))


class TestReductions:
    def test_b3_matches_geng_xue(self, grid512, rng):
        for _ in range(5):
            s = StatePair.from_arrays(grid512, localized(grid512, rng), localized(grid512, rng))
            assert reduction_check("b3", s).max_discrepancy <= 1e-14

    def test_novikov(self, grid512, rng):
        u = localized(grid512, rng)
        rep = reduction_check("novikov", StatePair.from_arrays(grid512, u, u))
        assert rep.discrepancies["du_minus_dv"] == 0.0
        assert rep.max_discrepancy < 1e-13

    def test_dp(self, grid512, rng):
        u = localized(grid512, rng)
        rep = reduction_check("dp", StatePair.from_arrays(grid512, u, np.ones(512)))
        assert rep.discrepancies["dv"] < 1e-15
        assert rep.max_discrepancy < 1e-13

    def test_hypothesis_violations(self, grid512, rng):
        u = localized(grid512, rng)
        with pytest.raises(ValueError):
            reduction_check("novikov", StatePair.from_arrays(grid512, u, u + 1e-3))
        with pytest.raises(ValueError):
            reduction_check("dp", StatePair.from_arrays(grid512, u, u))
        with pytest.raises(ValueError):
            reduction_check("kdv", StatePair.from_arrays(grid512, u, u))
