"""Norms and Littlewood-Paley machinery on the periodic grid.

Frequencies are the physical wavenumbers ``k = m pi / L`` of the grid, so a
given field has the same dyadic blocks on any grid that resolves it.

The cutoffs are one concrete admissible pair: ``chi = 1`` on ``|xi| <= 1``,
``chi = 0`` for ``|xi| >= 4/3`` with an ``exp(-1/t)`` smooth step in between,
and ``phi(xi) = chi(xi/2) - chi(xi)``, supported in ``1 <= |xi| <= 8/3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .spectral import (
    Grid,
    ProductBuffer,
    StateField,
    deriv_array,
    derivs_array,
    helmholtz_apply_array,
    oversampled_sup_array,
)

SUP_FACTOR = 4


def _smooth_h(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def chi(xi):
    """Low-frequency cutoff: 1 on ``|xi| <= 1``, 0 for ``|xi| >= 4/3``."""
    s = (4.0 / 3.0 - np.abs(np.asarray(xi, dtype=float))) * 3.0
    a = _smooth_h(s)
    return a / (a + _smooth_h(1.0 - s))


def phi(xi):
    xi = np.asarray(xi, dtype=float)
    return chi(xi / 2.0) - chi(xi)


def max_block(grid: Grid) -> int:
    """Highest block index needed for exact reconstruction on ``grid``.

    The partial sum up to block ``J`` equals ``chi(2^{-J-1} xi)``, which is
    identically one on the grid once ``2^{J+1} >= k_max``.
    """
    kmax = grid.k_max
    if kmax <= 1.0:
        return -1
    return max(-1, math.ceil(math.log2(kmax)) - 1)


@lru_cache(maxsize=64)
def _block_multipliers(grid: Grid) -> tuple[np.ndarray, ...]:
    kr = grid.kr
    mults = [chi(kr)]
    for j in range(0, max_block(grid) + 1):
        mults.append(phi(kr / 2.0**j))
    for m in mults:
        m.setflags(write=False)
    return tuple(mults)


@dataclass(frozen=True, eq=False)
class LPDecomposition:
    """Dyadic blocks ``Delta_j f`` for ``j = -1 .. J_max``."""

    grid: Grid
    blocks: dict = field(repr=False)

    @property
    def indices(self) -> list[int]:
        return sorted(self.blocks)

    def block(self, j: int) -> StateField:
        if j in self.blocks:
            return StateField(self.grid, self.blocks[j])
        return StateField(self.grid, np.zeros(self.grid.N))

    def low_pass(self, j: int) -> np.ndarray:
        """``S_j f = sum_{j' <= j-1} Delta_{j'} f``."""
        out = np.zeros(self.grid.N)
        for jj, b in self.blocks.items():
            if jj <= j - 1:
                out = out + b
        return out

    def reconstruct(self) -> np.ndarray:
        return sum(self.blocks.values(), np.zeros(self.grid.N))

    @property
    def cutoffs(self) -> tuple[np.ndarray, ...]:
        return _block_multipliers(self.grid)


def lp_decompose(f: StateField) -> LPDecomposition:
    return LPDecomposition(f.grid, _decompose_array(f.values, f.grid))


def _decompose_array(values: np.ndarray, grid: Grid) -> dict:
    fh = np.fft.rfft(values)
    blocks = {}
    for j, mult in enumerate(_block_multipliers(grid), start=-1):
        blocks[j] = np.fft.irfft(fh * mult, n=grid.N)
    return blocks


def _lp_array(values: np.ndarray, grid: Grid, p: float) -> float:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if math.isinf(p):
        return oversampled_sup_array(values, grid, SUP_FACTOR)
    a = np.abs(values)
    if p == 1:
        return float(grid.dx * a.sum())
    if p == 2:
        return float(math.sqrt(grid.dx * np.dot(a, a)))
    return float((grid.dx * np.sum(a**p)) ** (1.0 / p))


def lp_norm(f: StateField, p: float) -> float:
    """Discrete ``L^p`` norm; rectangle rule on the periodic grid (exact trapezoid)."""
    return _lp_array(f.values, f.grid, p)


def w1r_norm(f: StateField, r: float) -> float:
    """``(||f||_r^r + ||f_x||_r^r)^(1/r)``; for ``r = 1`` this is ``||f||_1 + ||f_x||_1``."""
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    return _w1r_array(f.values, f.grid, r)


def _w1r_array(values, grid, r):
    fx = deriv_array(values, grid, 1)
    if math.isinf(r):
        return max(_lp_array(values, grid, r), _lp_array(fx, grid, r))
    return (_lp_array(values, grid, r) ** r + _lp_array(fx, grid, r) ** r) ** (1.0 / r)


def w1inf_norm(f: StateField) -> float:
    return _w1r_array(f.values, f.grid, math.inf)


def hs_norm(f: StateField, s: float) -> float:
    return _hs_array(f.values, f.grid, s)


def _hs_array(values, grid, s):
    fh = np.fft.rfft(values)
    w = np.full(grid.N // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    weight = (1.0 + grid.kr**2) ** s
    total = np.sum(w * weight * np.abs(fh) ** 2)
    return float(math.sqrt(total * grid.length) / grid.N)


def _besov_array(values, grid, s, p, r):
    if p < 1 or r < 1:
        raise ValueError(f"Besov exponents need p, r >= 1, got p={p}, r={r}")
    terms = []
    for j, blk in _decompose_array(values, grid).items():
        terms.append(2.0 ** (j * s) * _lp_array(blk, grid, p))
    terms = np.array(terms)
    if math.isinf(r):
        return float(terms.max())
    return float(np.sum(terms**r) ** (1.0 / r))


def besov_norm(f: StateField, s: float, p: float, r: float) -> float:
    """``|| (2^{js} ||Delta_j f||_p)_j ||_{l^r}`` over the grid's blocks."""
    return _besov_array(f.values, f.grid, s, p, r)


def _check_pair(a: StateField, f: StateField) -> Grid:
    if a.grid != f.grid:
        raise ValueError("fields live on different grids")
    return a.grid


def paraproduct_T(a: StateField, f: StateField) -> StateField:
    """``T_a f = sum_j S_{j-1} a . Delta_j f`` with de-aliased products."""
    grid = _check_pair(a, f)
    da = _decompose_array(a.values, grid)
    df = _decompose_array(f.values, grid)
    buf = ProductBuffer(grid)
    total = None
    low = np.zeros(grid.N)
    for j in sorted(df):
        # S_{j-1} a collects blocks up to j-2
        if j - 2 in da:
            low = low + da[j - 2]
        if j < 1:
            continue
        buf.add("s", low)
        buf.add("d", df[j])
        term = buf.fine_product(("s", "d"))
        total = term if total is None else total + term
    if total is None:
        return StateField(grid, np.zeros(grid.N))
    return StateField(grid, np.fft.irfft(buf.project_rfft(total), n=grid.N))


def remainder_R(a: StateField, f: StateField) -> StateField:
    """``R(a, f) = sum_{|k-j| <= 1} Delta_k a . Delta_j f``."""
    grid = _check_pair(a, f)
    da = _decompose_array(a.values, grid)
    df = _decompose_array(f.values, grid)
    buf = ProductBuffer(grid)
    total = None
    for j in sorted(df):
        near = sum((da[k] for k in (j - 1, j, j + 1) if k in da), np.zeros(grid.N))
        buf.add("a", near)
        buf.add("f", df[j])
        term = buf.fine_product(("a", "f"))
        total = term if total is None else total + term
    return StateField(grid, np.fft.irfft(buf.project_rfft(total), n=grid.N))


@dataclass(frozen=True)
class BernsteinReport:
    j: int
    k: int
    p: float
    q: float
    ratios: np.ndarray = field(repr=False)
    bracket: float = 8.0

    @property
    def min_ratio(self) -> float:
        return float(self.ratios.min())

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max())

    @property
    def ok(self) -> bool:
        return 1.0 / self.bracket <= self.min_ratio and self.max_ratio <= self.bracket


def annulus_field(grid: Grid, j: int, rng: np.random.Generator) -> np.ndarray:
    """Random real field with spectrum inside ``2^j [3/4, 8/3]``."""
    kr = grid.kr
    band = (kr >= 0.75 * 2.0**j) & (kr <= 8.0 / 3.0 * 2.0**j)
    band[-1] = False
    if not band.any():
        raise ValueError(f"grid has no modes in block {j}")
    fh = np.zeros(grid.N // 2 + 1, dtype=complex)
    nb = int(band.sum())
    fh[band] = rng.standard_normal(nb) + 1j * rng.standard_normal(nb)
    return np.fft.irfft(fh, n=grid.N)


def bernstein_check(
    j: int,
    k: int,
    p: float = 2.0,
    q: Optional[float] = None,
    samples: int = 100,
    seed: int = 0,
    grid: Optional[Grid] = None,
    bracket: float = 8.0,
) -> BernsteinReport:
    """Ratios ``||D^k u||_q / (2^{j(k + 1/p - 1/q)} ||u||_p)`` over random annulus fields."""
    q = p if q is None else q
    if grid is None:
        n = 16
        while n // 2 < 4 * 2**j:
            n *= 2
        grid = Grid(math.pi, n)
    rng = np.random.default_rng(seed)
    expo = k + (0.0 if math.isinf(p) else 1.0 / p) - (0.0 if math.isinf(q) else 1.0 / q)
    ratios = np.empty(samples)
    for i in range(samples):
        u = annulus_field(grid, j, rng)
        du = u if k == 0 else derivs_array(u, grid, k)[k]
        ratios[i] = _lp_array(du, grid, q) / (2.0 ** (j * expo) * _lp_array(u, grid, p))
    return BernsteinReport(j, k, p, q, ratios, bracket)


# --- per-sample report -----------------------------------------------------


@dataclass(frozen=True)
class NormReport:
    t: float
    sup_u: float
    sup_ux: float
    sup_v: float
    sup_vx: float
    w11_u: float
    w1r_u: float
    r: float
    w1inf_u: float
    w1inf_v: float
    hs_u: float
    hs_v: float
    s: float
    besov221_u: float
    besov221_v: float
    sup_n: float
    int_m: float
    int_um: float
    criterion_integrand: float
    sup_m: float
    sup_uxx: float
    min_ux: float

    @property
    def w1r_u_pow_r(self) -> float:
        return self.w1r_u**self.r

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def norm_report(state, r: float = 2.0, s: float = 3.0, besov: bool = True) -> NormReport:
    """All monitored quantities of a :class:`~gengxue.models.StatePair`."""
    grid = state.u.grid
    u = state.u.values
    v = state.v.values
    u0, ux, uxx = derivs_array(u, grid, 2)
    v0, vx = derivs_array(v, grid, 1)
    m = helmholtz_apply_array(u, grid)
    n = helmholtz_apply_array(v, grid)
    sup = lambda a: oversampled_sup_array(a, grid, SUP_FACTOR)  # noqa: E731
    sup_u, sup_ux, sup_v, sup_vx = sup(u), sup(ux), sup(v), sup(vx)
    w1inf_u = max(sup_u, sup_ux)
    w1inf_v = max(sup_v, sup_vx)
    l1 = lambda a: _lp_array(a, grid, 1)  # noqa: E731
    if besov:
        b_u = _besov_array(u, grid, 2.0, 2.0, 1.0)
        b_v = _besov_array(v, grid, 2.0, 2.0, 1.0)
    else:
        b_u = b_v = float("nan")
    return NormReport(
        t=float(state.t),
        sup_u=sup_u,
        sup_ux=sup_ux,
        sup_v=sup_v,
        sup_vx=sup_vx,
        w11_u=l1(u) + l1(ux),
        w1r_u=_w1r_array(u, grid, r),
        r=float(r),
        w1inf_u=w1inf_u,
        w1inf_v=w1inf_v,
        hs_u=_hs_array(u, grid, s),
        hs_v=_hs_array(v, grid, s),
        s=float(s),
        besov221_u=b_u,
        besov221_v=b_v,
        sup_n=sup(n),
        int_m=float(grid.dx * m.sum()),
        int_um=float(grid.dx * np.dot(u, m)),
        criterion_integrand=w1inf_u * w1inf_v,
        sup_m=sup(m),
        sup_uxx=sup(uxx),
        min_ux=float(ux.min()),
    )
