import math

import numpy as np
import pytest
from scipy.integrate import quad

from gengxue.certificates import certify_blowup
from gengxue.initial import (
    BracketError,
    InitialSpec,
    build_initial,
    gaussian_pair,
    mollified_peakon,
    read_samples,
    smoothed_peakon_pair,
    steep_certified,
    write_samples,
)
from gengxue.models import Family, ModelParams
from gengxue.spectral import make_grid


def test_zero_amplitudes(grid512):
    s, prov = gaussian_pair(grid512, amp_u=0.0, amp_v=0.0)
    assert not s.u.values.any() and not s.v.values.any()
    assert prov["boundary_decay"] == 0.0


def test_noise_is_seeded(grid512):
    a, _ = gaussian_pair(grid512, noise=0.1, seed=3)
    b, _ = gaussian_pair(grid512, noise=0.1, seed=3)
    c, _ = gaussian_pair(grid512, noise=0.1, seed=4)
    assert np.array_equal(a.u.values, b.u.values)
    assert not np.array_equal(a.u.values, c.u.values)


def test_boundary_violation():
    with pytest.raises(ValueError, match="decay at the boundary"):
        gaussian_pair(make_grid(5.0, 64), width_u=2.0)


@pytest.mark.parametrize("eps", [0.05, 0.5, 2.0])
def test_peakon_against_quadrature(eps):
    def direct(y):
        k = lambda s: math.exp(-abs(y - s) - 0.5 * (s / eps) ** 2) / (math.sqrt(2 * math.pi) * eps)  # noqa: E731
        cuts = sorted({-60.0, min(y, 0.0), max(y, 0.0), 60.0})
        return sum(quad(k, a, b, epsabs=0.0, epsrel=1e-12, limit=200)[0] for a, b in zip(cuts, cuts[1:]))

    for y in (-30.0, -2.0, 0.0, 0.3, 5.0, 40.0):
        assert mollified_peakon(np.array([y]), eps)[0] == pytest.approx(direct(y), rel=1e-9, abs=1e-300)


def test_peakon_limits():
    y = np.linspace(-5, 5, 11)
    assert np.array_equal(mollified_peakon(y, 0.0), np.exp(-np.abs(y)))
    assert np.all(np.isfinite(mollified_peakon(np.array([-800.0, 800.0]), 0.1)))


def test_smoothed_peakon_pair(grid512):
    s, _ = smoothed_peakon_pair(grid512, amp_u=2.0, mollify=0.5)
    assert s.u.values.max() == pytest.approx(2.0 * mollified_peakon(np.array([0.0]), 0.5)[0])


def test_samples_round_trip(tmp_path, grid512):
    s, _ = gaussian_pair(grid512, amp_u=0.3)
    path = tmp_path / "s.csv"
    write_samples(path, s)
    back = read_samples(path, grid512)
    assert np.array_equal(back.u.values, s.u.values) and np.array_equal(back.v.values, s.v.values)
    with pytest.raises(ValueError, match="N=256"):
        read_samples(path, make_grid(50.0, 256))
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="u,v"):
        read_samples(bad, grid512)


class TestSteep:
    def test_geng_xue(self):
        params = ModelParams()
        s, prov = steep_certified(make_grid(4e-4, 512), params, width=1e-5)
        assert abs(prov["residual"]) < 1e-8 and prov["theorem"] == "thm13"
        cert = certify_blowup(s, params, 0.0)
        assert cert.hypotheses_met == {"v0_positive": True, "slope_below_threshold": True}
        assert cert.u0x_at_x0 / cert.slope_threshold == pytest.approx(2.0, rel=1e-8)
        assert cert.v0_at_x0 == pytest.approx(1.0)
        # the flat momentum already contributes 1, so the sum sits just above it
        assert 1.0 < cert.norm_sum < 1.05

    def test_gaussian_v_is_infeasible_on_small_tori(self):
        # a bump that decays inside the torus has sup|n0| ~ 1/v_width^2, far above any reachable slope
        with pytest.raises(BracketError):
            steep_certified(make_grid(4e-4, 512), ModelParams(), width=1e-5, v_shape="gaussian", v_width=4e-5)

    def test_wide_profile_fails_to_bracket(self):
        params = ModelParams(Family.B_FAMILY, b=2.0, r=2.0)
        with pytest.raises(BracketError, match="width"):
            steep_certified(make_grid(4e-3, 512), params, width=1e-4)

    def test_bad_arguments(self, grid512):
        with pytest.raises(ValueError):
            steep_certified(grid512, ModelParams(), v0=0.0)
        with pytest.raises(ValueError):
            steep_certified(grid512, ModelParams(), v_shape="cone")
        with pytest.raises(ValueError, match=r"1 \+ 2/r"):
            steep_certified(grid512, ModelParams(Family.B_FAMILY, b=2.5, r=2.0))


def test_build_initial(tmp_path, grid512):
    s, _ = gaussian_pair(grid512, amp_u=0.2)
    write_samples(tmp_path / "d.csv", s)
    built, prov = build_initial(InitialSpec("samples_file", {"path": "d.csv"}), grid512, ModelParams(), tmp_path)
    assert np.array_equal(built.u.values, s.u.values) and prov["kind"] == "samples_file"
    with pytest.raises(ValueError):
        InitialSpec("triangle")
