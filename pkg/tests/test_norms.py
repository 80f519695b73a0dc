import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from conftest import localized
from gengxue.models import StatePair
from gengxue.norms import (
    bernstein_check,
    besov_norm,
    chi,
    hs_norm,
    lp_decompose,
    lp_norm,
    max_block,
    norm_report,
    paraproduct_T,
    phi,
    remainder_R,
    w1inf_norm,
    w1r_norm,
)
from gengxue.spectral import StateField, dealiased_product, make_grid


class TestCutoffs:
    def test_chi_support(self):
        assert np.all(chi(np.linspace(0, 1, 50)) == 1.0)
        assert np.all(chi(np.linspace(4 / 3, 10, 50)) == 0.0)
        mid = chi(np.linspace(1.01, 1.32, 30))
        assert np.all((mid > 0) & (mid < 1)) and np.all(np.diff(mid) < 0)

    def test_phi_annulus(self):
        xi = np.linspace(0, 4, 2001)
        p = phi(xi)
        assert np.all(p[(xi < 1.0) | (xi > 8 / 3)] == 0.0)
        assert np.all(p >= 0)

    def test_partition_of_unity(self):
        xi = np.linspace(0, 500, 10001)
        total = chi(xi) + sum(phi(xi / 2.0**j) for j in range(10))
        assert np.max(np.abs(total - 1.0)) < 1e-15

    def test_max_block(self):
        g = make_grid(50.0, 512)  # k_max = 16.08
        assert max_block(g) == 4
        assert max_block(make_grid(16.0, 16)) == 0  # k_max = pi/2


class TestLittlewoodPaley:
    def test_reconstruction(self, grid512, rng):
        for _ in range(20):
            u = localized(grid512, rng, 5.0)
            rec = lp_decompose(StateField(grid512, u)).reconstruct()
            assert np.max(np.abs(rec - u)) <= 1e-10 * np.max(np.abs(u))

    def test_block_spectral_support(self, grid512, rng):
        d = lp_decompose(StateField(grid512, localized(grid512, rng)))
        for j in d.indices:
            if j < 0:
                continue
            fh = np.fft.rfft(d.block(j).values)
            k = grid512.kr
            outside = (k < 2.0**j * 0.999) | (k > 2.0**j * 8 / 3 * 1.001)
            assert np.max(np.abs(fh[outside])) < 1e-10
        assert not d.block(99).values.any()

    def test_bony_identity(self, rng):
        g = make_grid(50.0, 256)
        for _ in range(25):
            a = StateField(g, localized(g, rng, 5.0))
            f = StateField(g, localized(g, rng, 5.0))
            prod = dealiased_product([a, f]).values
            bony = paraproduct_T(a, f).values + paraproduct_T(f, a).values + remainder_R(a, f).values
            scale = np.max(np.abs(a.values)) * np.max(np.abs(f.values))
            assert np.max(np.abs(prod - bony)) <= 1e-10 * scale

    @pytest.mark.parametrize("j", [2, 3, 4, 5, 6])
    @pytest.mark.parametrize("k", [1, 2])
    def test_bernstein(self, j, k):
        assert bernstein_check(j, k, samples=100, seed=j + 7 * k).ok


class TestNorms:
    def test_lp_against_quadrature(self):
        g = make_grid(50.0, 512)
        fn = lambda x: np.exp(-(x**2)) * (1 + 0.5 * np.sin(3 * x))  # noqa: E731
        f = StateField.from_function(g, fn)
        for p in (1, 2, 3.5):
            exact = quad(lambda x: abs(fn(x)) ** p, -50, 50, points=[0], limit=400)[0] ** (1 / p)
            assert lp_norm(f, p) == pytest.approx(exact, rel=1e-8 if p != 1 else 1e-4)

    def test_h1_against_quadrature(self):
        g = make_grid(50.0, 512)
        f = StateField.from_function(g, lambda x: np.exp(-(x**2)))
        # ||f||^2 + ||f'||^2 = sqrt(pi/2) + sqrt(pi/2)
        assert hs_norm(f, 1.0) == pytest.approx(math.sqrt(2 * math.sqrt(math.pi / 2)), rel=1e-12)

    def test_w1inf(self):
        g = make_grid(math.pi, 64)
        f = StateField.from_function(g, lambda x: 0.5 * np.sin(3 * x))
        assert w1inf_norm(f) == pytest.approx(1.5, rel=1e-6)

    def test_rejects_small_exponents(self, grid512):
        f = StateField.constant(grid512, 1.0)
        with pytest.raises(ValueError):
            lp_norm(f, 0.5)
        with pytest.raises(ValueError):
            w1r_norm(f, 0.9)
        with pytest.raises(ValueError):
            besov_norm(f, 1.0, 0.5, 1.0)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.sampled_from([1, 2, 3, 5]), st.floats(0.05, 20.0))
    def test_sup_controlled_by_w1r(self, seed, r, scale):
        g = make_grid(50.0, 512)
        f = StateField(g, localized(g, np.random.default_rng(seed), scale))
        sup = lp_norm(f, math.inf)
        assert 2 * sup**r <= r * w1r_norm(f, r) ** r * (1 + 1e-12)

    def test_besov_monotone_in_s(self, grid512, rng):
        f = StateField(grid512, localized(grid512, rng))
        assert besov_norm(f, 1.0, 2, 1) <= besov_norm(f, 2.0, 2, 1)
        assert besov_norm(f, 1.0, 2, math.inf) <= besov_norm(f, 1.0, 2, 1)

    def test_report_fields(self, grid512):
        x = grid512.x
        s = StatePair.from_arrays(grid512, 0.3 * np.exp(-0.5 * x**2), np.exp(-0.5 * x**2))
        rep = norm_report(s, r=2)
        assert rep.sup_u == pytest.approx(0.3, rel=1e-9)
        assert rep.criterion_integrand == pytest.approx(rep.w1inf_u * rep.w1inf_v)
        assert rep.w1r_u_pow_r == pytest.approx(rep.w1r_u**2)
        assert rep.int_m == pytest.approx(0.3 * math.sqrt(2 * math.pi), rel=1e-10)
        assert set(rep.as_dict()) >= {"t", "sup_n", "besov221_u"}
        assert math.isnan(norm_report(s, besov=False).besov221_u)
