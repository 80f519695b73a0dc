"""Initial-data library.

Every builder returns ``(StatePair, provenance)``; the provenance dict records
the resolved parameters (for ``steep_certified`` the solved amplitude and the
bisection history) so that a run record can be replayed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import erfc, erfcx

from .certificates import initial_norms, slope_threshold
from .models import ModelParams, StatePair
from .spectral import Grid, boundary_decay, deriv_array, trig_interp_array

BOUNDARY_TOL = 1e-14
BISECT_TOL = 1e-10

KINDS = ("gaussian_pair", "smoothed_peakon_pair", "steep_certified", "samples_file")


class BracketError(ValueError):
    """The steep_certified amplitude search never changed sign."""


@dataclass
class InitialSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown initial kind {self.kind!r}; expected one of {KINDS}")


def _gaussian(x, amp, center, width):
    return amp * np.exp(-0.5 * ((x - center) / width) ** 2)


def mollified_peakon(y, eps: float):
    """``exp(-|y|)`` convolved with a centred Gaussian of standard deviation ``eps``.

    Written through ``erfcx`` so that neither branch overflows for large ``|y|``.
    """
    y = np.asarray(y, dtype=float)
    if eps <= 0:
        return np.exp(-np.abs(y))
    s2 = math.sqrt(2.0) * eps
    out = np.empty_like(y)
    for sign in (-1.0, 1.0):
        z = (eps**2 + sign * y) / s2
        # exp(eps^2/2 + sign*y) erfc(z), split by the sign of z
        pos = z >= 0
        term = np.empty_like(y)
        term[pos] = erfcx(z[pos]) * np.exp(-0.5 * (y[pos] / eps) ** 2)
        term[~pos] = np.exp(0.5 * eps**2 + sign * y[~pos]) * erfc(z[~pos])
        if sign < 0:
            out = 0.5 * term
        else:
            out = out + 0.5 * term
    return out


def _check_boundary(grid: Grid, *arrays):
    decay = max(boundary_decay(a) for a in arrays)
    scale = max(max(np.max(np.abs(a)) for a in arrays), 1.0)
    if decay > BOUNDARY_TOL * scale:
        raise ValueError(
            f"initial data does not decay at the boundary: {decay:.3e} > {BOUNDARY_TOL:g}; "
            f"enlarge L (currently {grid.L}) or narrow the profiles"
        )
    return decay


def _smooth_noise(x, center, width, rng, modes=6):
    """Random trigonometric polynomial in ``(x - center)/width`` under a Gaussian window."""
    y = (x - center) / width
    coef = rng.standard_normal((modes, 2)) / np.arange(1, modes + 1)[:, None] ** 2
    wave = sum(c * np.cos(j * y) + s * np.sin(j * y) for j, (c, s) in enumerate(coef, 1))
    return wave * np.exp(-0.5 * y**2)


def gaussian_pair(
    grid: Grid, amp_u=1.0, amp_v=1.0, center_u=0.0, center_v=0.0, width_u=1.0, width_v=1.0,
    noise=0.0, seed=0,
):
    """Gaussian bumps; ``noise > 0`` adds a seeded smooth perturbation of that size."""
    x = grid.x
    u = _gaussian(x, amp_u, center_u, width_u)
    v = _gaussian(x, amp_v, center_v, width_v)
    if noise:
        rng = np.random.default_rng(seed)
        u = u + noise * _smooth_noise(x, center_u, width_u, rng)
        v = v + noise * _smooth_noise(x, center_v, width_v, rng)
    return StatePair.from_arrays(grid, u, v), {"boundary_decay": _check_boundary(grid, u, v)}


def smoothed_peakon_pair(grid: Grid, amp_u=1.0, amp_v=1.0, center_u=0.0, center_v=0.0, mollify=0.5):
    x = grid.x
    u = amp_u * mollified_peakon(x - center_u, mollify)
    v = amp_v * mollified_peakon(x - center_v, mollify)
    return StatePair.from_arrays(grid, u, v), {"boundary_decay": _check_boundary(grid, u, v)}


def read_samples(path, grid: Grid) -> StatePair:
    """CSV with a ``u,v`` header and one row per grid point starting at ``x = -L``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"u", "v"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected a header with columns u,v")
        rows = [(float(r["u"]), float(r["v"])) for r in reader]
    if len(rows) != grid.N:
        raise ValueError(f"{path}: {len(rows)} samples but the grid has N={grid.N}")
    arr = np.array(rows)
    return StatePair.from_arrays(grid, arr[:, 0], arr[:, 1])


def write_samples(path, state: StatePair) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "v"])
        for a, b in zip(state.u.values, state.v.values):
            w.writerow([repr(float(a)), repr(float(b))])


def _steep_profile(x, x0, width):
    """Odd profile with slope ``-1`` at ``x0`` and its steepest descent there."""
    y = x - x0
    return -y * np.exp(-0.5 * (y / width) ** 2)


def _threshold_for(state: StatePair, params: ModelParams, theorem: str, x0: float):
    """Slope threshold and ``u0_x(x0)`` evaluated from grid norms."""
    g = state.grid
    v0 = float(trig_interp_array(state.v.values, g, x0)[0])
    u0x = float(trig_interp_array(deriv_array(state.u.values, g, 1), g, x0)[0])
    if theorem == "thm13":
        nm = initial_norms(state, 1.0)
        total = nm["w11_u0"] + nm["sup_n0"]
        T = v0 / (80.0 * total**3)
        coeff = 4.0 / v0 * total**4 + 14.0 * total**3
    else:
        from .certificates import compute_c2, compute_T5

        r = params.r
        nm = initial_norms(state, r)
        T = compute_T5(v0, nm["w1r_u0_pow_r"], nm["sup_n0"], r)
        coeff = compute_c2(v0, nm["w1r_u0_pow_r"], nm["sup_n0"], r)
    return slope_threshold(v0, coeff, T), u0x


def steep_certified(
    grid: Grid,
    params: ModelParams,
    x0: float = 0.0,
    v0: float = 1.0,
    width: float = 1e-4,
    multiplier: float = 2.0,
    theorem: Optional[str] = None,
    v_shape: str = "flat",
    v_width: float = 1.0,
    amp_start: float = 1e-3,
    amp_growth: float = 1.5,
    max_amp: float = 1e12,
):
    """Data satisfying the slope hypothesis with ``u0_x(x0) = multiplier * threshold``.

    ``v0`` is either the constant ``v0`` (``v_shape='flat'``) or a Gaussian bump
    with peak ``v0`` at ``x0``; ``u0 = A g(x - x0)``.  The threshold depends on
    norms of ``u0`` and therefore on ``A``, so ``A`` is found by bisection on
    ``u0_x(x0) / threshold(A) - multiplier``, recomputing the threshold at each
    iterate.  The root taken is the smallest positive one.
    """
    if v0 <= 0:
        raise ValueError(f"steep_certified needs v0 > 0, got {v0}")
    if multiplier <= 0:
        raise ValueError(f"multiplier must be positive, got {multiplier}")
    theorem = theorem or ("thm13" if params.b == 3.0 else "thm14")
    if theorem == "thm14":
        params.require_thm14()
    x = grid.x
    if v_shape == "flat":
        v = np.full(grid.N, float(v0))
    elif v_shape == "gaussian":
        v = _gaussian(x, v0, x0, v_width)
    else:
        raise ValueError(f"unknown v_shape {v_shape!r}")
    g_prof = _steep_profile(x, x0, width)

    def residual(amp):
        st = StatePair.from_arrays(grid, amp * g_prof, v)
        thr, u0x = _threshold_for(st, params, theorem, x0)
        return u0x / thr - multiplier

    lo, f_lo = 0.0, -multiplier
    hi = amp_start
    history = []
    while True:
        f_hi = residual(hi)
        history.append((hi, f_hi))
        if f_hi > 0:
            break
        if f_hi < f_lo and lo > 0:
            raise BracketError(
                f"residual peaked below zero between A={lo:.6g} and A={hi:.6g} "
                f"(attempted range [{amp_start:g}, {hi:g}]); the profile is too wide "
                f"for multiplier {multiplier} (width={width:g})"
            )
        lo, f_lo = hi, f_hi
        hi *= amp_growth
        if hi > max_amp:
            raise BracketError(f"no sign change for A in [{amp_start:g}, {max_amp:g}]")
    while (hi - lo) > BISECT_TOL * hi:
        mid = 0.5 * (lo + hi)
        f_mid = residual(mid)
        if f_mid > 0:
            hi = mid
        else:
            lo = mid
    amp = hi
    u = amp * g_prof
    state = StatePair.from_arrays(grid, u, v)
    checks = [u] if v_shape == "flat" else [u, v]
    decay = _check_boundary(grid, *checks)
    return state, {
        "amplitude": amp,
        "residual": residual(amp),
        "theorem": theorem,
        "bracket_steps": len(history),
        "boundary_decay": decay,
    }


def build_initial(
    spec: InitialSpec, grid: Grid, params: ModelParams, base_dir: Optional[Path] = None, seed: int = 0
):
    """Construct the initial ``StatePair`` for ``spec`` and a provenance block."""
    p = dict(spec.params)
    if spec.kind == "gaussian_pair":
        state, prov = gaussian_pair(grid, seed=seed, **p)
    elif spec.kind == "smoothed_peakon_pair":
        state, prov = smoothed_peakon_pair(grid, **p)
    elif spec.kind == "steep_certified":
        state, prov = steep_certified(grid, params, **p)
    else:
        path = Path(p.pop("path"))
        if p:
            raise ValueError(f"samples_file takes only 'path', got extra {sorted(p)}")
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        state = read_samples(path, grid)
        prov = {"path": str(path)}
    prov["kind"] = spec.kind
    return state, prov
