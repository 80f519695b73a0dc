"""Release-gate property suites, runnable without pytest (``gengxue selftest``)."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .models import ModelParams, StatePair, reduction_check
from .norms import (
    _w1r_array,
    bernstein_check,
    lp_decompose,
    paraproduct_T,
    remainder_R,
)
from .riccati import riccati_bound, riccati_integrate
from .spectral import (
    StateField,
    dealiased_product,
    deriv_array,
    helmholtz_apply_array,
    helmholtz_inv_array,
    make_grid,
    oversampled_sup_array,
)
from .timestepping import StepPolicy, run


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _localized(grid, rng, scale=5.0, modes=5):
    x = grid.x
    c = rng.uniform(-10, 10)
    w = rng.uniform(1.0, 3.0)
    y = (x - c) / w
    coef = rng.standard_normal((modes, 2))
    wave = sum(a * np.cos(j * y) + b * np.sin(j * y) for j, (a, b) in enumerate(coef))
    return scale * rng.uniform(0.1, 1.0) * wave * np.exp(-0.5 * y**2)


def check_bony(pairs=100, seed=0):
    g = make_grid(50.0, 256)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        a = StateField(g, _localized(g, rng))
        f = StateField(g, _localized(g, rng))
        prod = dealiased_product([a, f]).values
        bony = paraproduct_T(a, f).values + paraproduct_T(f, a).values + remainder_R(a, f).values
        # relative to the size of the factors: the product itself may nearly vanish
        scale = np.max(np.abs(a.values)) * np.max(np.abs(f.values))
        worst = max(worst, np.max(np.abs(prod - bony)) / scale)
    return worst <= 1e-10, f"max relative residual {worst:.2e} (tol 1e-10)"


def check_lp_reconstruction(samples=20, seed=1):
    g = make_grid(50.0, 512)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        u = _localized(g, rng)
        rec = lp_decompose(StateField(g, u)).reconstruct()
        worst = max(worst, np.max(np.abs(rec - u)) / np.max(np.abs(u)))
    return worst <= 1e-10, f"max relative error {worst:.2e} (tol 1e-10)"


def check_bernstein():
    lo, hi = math.inf, 0.0
    ok = True
    for j in range(2, 7):
        for k in (1, 2):
            rep = bernstein_check(j, k, samples=100, seed=j * 10 + k)
            lo, hi = min(lo, rep.min_ratio), max(hi, rep.max_ratio)
            ok &= rep.ok
    return ok, f"ratios in [{lo:.3f}, {hi:.3f}] (bracket [1/8, 8])"


def check_sup_w1r(fields=200, seed=2):
    g = make_grid(50.0, 512)
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(fields):
        u = _localized(g, rng)
        sup = oversampled_sup_array(u, g, 4)
        for r in (1, 2, 3, 5):
            if 2 * sup**r > r * _w1r_array(u, g, r) ** r * (1 + 1e-12):
                bad += 1
    return bad == 0, f"{bad} violations over {fields} fields x r in (1,2,3,5)"


def check_helmholtz(fields=100, seed=3):
    g = make_grid(50.0, 512)
    rng = np.random.default_rng(seed)
    worst_id, worst_sup = 0.0, -math.inf
    for _ in range(fields):
        u = _localized(g, rng)
        back = helmholtz_inv_array(helmholtz_apply_array(u, g), g)
        worst_id = max(worst_id, np.max(np.abs(back - u)) / np.max(np.abs(u)))
        m = oversampled_sup_array(helmholtz_apply_array(u, g), g, 4)
        ux = deriv_array(u, g, 1)
        uxx = deriv_array(u, g, 2)
        for val, fac in ((u, 1.0), (ux, 1.0), (uxx, 2.0)):
            worst_sup = max(worst_sup, (oversampled_sup_array(val, g, 4) - fac * m) / max(m, 1.0))
    ok = worst_id <= 1e-12 and worst_sup <= 1e-10
    return ok, f"inverse error {worst_id:.1e}; worst sup excess over m bound {worst_sup:.1e}"


def check_reductions(seed=4):
    g = make_grid(50.0, 512)
    rng = np.random.default_rng(seed)
    u = _localized(g, rng, 1.0)
    v = _localized(g, rng, 1.0)
    b3 = reduction_check("b3", StatePair.from_arrays(g, u, v)).max_discrepancy
    nov = reduction_check("novikov", StatePair.from_arrays(g, u, u)).max_discrepancy
    dp = reduction_check("dp", StatePair.from_arrays(g, u, np.ones(g.N))).max_discrepancy
    ok = b3 <= 1e-14 and nov <= 1e-12 and dp <= 1e-12
    return ok, f"b=3 {b3:.1e}, Novikov {nov:.1e}, DP {dp:.1e}"


def check_riccati(seed=5):
    rng = np.random.default_rng(seed)
    triples = [(1.0, 1.0, -2.0)]
    for _ in range(3):
        a, b = rng.uniform(0.2, 5.0, 2)
        triples.append((a, b, -math.sqrt(b / a) * rng.uniform(1.2, 4.0)))
    worst = max(abs(riccati_integrate(*t) - riccati_bound(*t)) for t in triples)
    exact = abs(riccati_bound(1, 1, -2) - 0.5 * math.log(3))
    return worst <= 1e-6 and exact <= 1e-12, f"max |numeric - bound| {worst:.1e}"


def check_conservation(N=256, t_end=1.0):
    g = make_grid(50.0, N)
    x = g.x
    u0 = 0.3 * np.exp(-0.5 * x**2)
    pol = StepPolicy(dt_init=0.01, t_end=t_end, output_stride=50)
    dp = run(StatePair.from_arrays(g, u0, np.ones(N)), ModelParams(), pol, besov=False)
    drift_m = abs(dp.norm_reports[-1].int_m / dp.norm_reports[0].int_m - 1)
    nov = run(StatePair.from_arrays(g, u0, u0), ModelParams(), pol, besov=False)
    drift_um = abs(nov.norm_reports[-1].int_um / nov.norm_reports[0].int_um - 1)
    gap = float(np.max(np.abs(nov.final_state.u.values - nov.final_state.v.values)))
    ok = drift_m <= 1e-8 and drift_um <= 1e-8 and gap <= 1e-10
    return ok, f"int m drift {drift_m:.1e}, int um drift {drift_um:.1e}, |u-v| {gap:.1e}"


SUITES: dict[str, Callable[[], tuple]] = {
    "bony": check_bony,
    "lp_reconstruction": check_lp_reconstruction,
    "bernstein": check_bernstein,
    "sup_w1r_inequality": check_sup_w1r,
    "helmholtz": check_helmholtz,
    "reductions": check_reductions,
    "riccati": check_riccati,
    "conservation": check_conservation,
}


def run_selftest(names=None) -> list[CheckResult]:
    out = []
    for name in names or SUITES:
        t0 = time.perf_counter()
        try:
            ok, detail = SUITES[name]()
        except Exception as exc:  # a crashing suite is a failure, not an abort
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'suite':<{width}}  result  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.detail} [{r.seconds:.1f}s]")
    return "\n".join(lines)
