"""Right-hand sides of the Geng-Xue system and its cubic b-family.

Two equivalent formulations are provided:

* nonlocal ``(u, v)`` form: ``u_t + u v u_x + p * F_b(u, v) = 0`` where
  ``p * g = (1 - d^2)^{-1} g`` and
  ``F_b = b u v u_x + (3-b) u_x v u_xx + 2 u v_x u_xx + 2 u_x^2 v_x + u v_xx u_x``;
  the ``v`` equation is the mirror image under ``u <-> v``.
* transport ``(m, n)`` form: ``m_t + u v m_x + b v u_x m = 0`` with
  ``m = u - u_xx`` and the mirrored ``n`` equation.

Geng-Xue is the member ``b = 3``.  Every cubic product goes through the
padded de-aliasing of :mod:`gengxue.spectral`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .spectral import (
    Grid,
    NonFiniteFieldError,
    ProductBuffer,
    StateField,
    derivs_array,
    helmholtz_apply_array,
    helmholtz_inv_array,
)

B_TOL = 1e-12


class Family(str, enum.Enum):
    GENG_XUE = "geng_xue"
    B_FAMILY = "b_family"


class Formulation(str, enum.Enum):
    UV_NONLOCAL = "uv_nonlocal"
    MN_TRANSPORT = "mn_transport"


@dataclass(frozen=True)
class ModelParams:
    family: Family = Family.GENG_XUE
    b: float = 3.0
    r: float = 2.0
    formulation: Formulation = Formulation.UV_NONLOCAL

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "formulation", Formulation(self.formulation))
        if self.family is Family.GENG_XUE:
            object.__setattr__(self, "b", 3.0)
        if not (self.r == 1 or self.r >= 2):
            raise ValueError(f"r must be 1 or >= 2, got {self.r}")

    @property
    def b_matches_r(self) -> bool:
        return abs(self.b - (1.0 + 2.0 / self.r)) <= B_TOL

    def require_thm14(self) -> None:
        if self.r < 2:
            raise ValueError(f"b-family blow-up certificates need r >= 2, got r={self.r}")
        if not self.b_matches_r:
            raise ValueError(
                f"b-family certificates need b = 1 + 2/r exactly; got b={self.b}, "
                f"r={self.r} (1 + 2/r = {1 + 2 / self.r})"
            )

    def with_formulation(self, formulation) -> "ModelParams":
        return replace(self, formulation=Formulation(formulation))


@dataclass(frozen=True)
class StatePair:
    u: StateField
    v: StateField
    t: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise ValueError("u and v live on different grids")

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def from_arrays(cls, grid: Grid, u, v, t: float = 0.0) -> "StatePair":
        return cls(StateField(grid, u), StateField(grid, v), t)

    def swapped(self) -> "StatePair":
        return StatePair(self.v, self.u, self.t)

    def momenta(self) -> tuple[StateField, StateField]:
        g = self.grid
        return (
            StateField(g, helmholtz_apply_array(self.u.values, g)),
            StateField(g, helmholtz_apply_array(self.v.values, g)),
        )


@dataclass(frozen=True)
class Tendency:
    du: StateField
    dv: StateField


@dataclass(frozen=True)
class MomentumTendency:
    dm: StateField
    dn: StateField


def _require_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteFieldError("non-finite input state")


# --- array kernels ---------------------------------------------------------


def _uv_component(buf: ProductBuffer, a: str, c: str, b: float) -> np.ndarray:
    """rfft of the ``a``-tendency in the nonlocal form; ``c`` is the partner field.

    Keys follow ``a, a1, a2`` for the field and its first two derivatives.
    """
    a1, a2, c1, c2 = a + "1", a + "2", c + "1", c + "2"
    local = buf.fine_product((a, c, a1))
    nonlocal_ = b * local
    if b != 3.0:
        nonlocal_ = nonlocal_ + (3.0 - b) * buf.fine_product((a1, c, a2))
    nonlocal_ = (
        nonlocal_
        + 2.0 * buf.fine_product((a, c1, a2))
        + 2.0 * buf.fine_product((a1, a1, c1))
        + buf.fine_product((a, c2, a1))
    )
    grid = buf.grid
    return -buf.project_rfft(local) - buf.project_rfft(nonlocal_) / (1.0 + grid.kr**2)


def uv_tendency_arrays(u: np.ndarray, v: np.ndarray, grid: Grid, b: float):
    du_hat, dv_hat = uv_tendency_rfft(u, v, grid, b)
    return np.fft.irfft(du_hat, n=grid.N), np.fft.irfft(dv_hat, n=grid.N)


def uv_tendency_rfft(u: np.ndarray, v: np.ndarray, grid: Grid, b: float):
    buf = ProductBuffer(grid)
    for name, arr in (("u", u), ("v", v)):
        f0, f1, f2 = derivs_array(arr, grid, 2)
        buf.add(name, f0)
        buf.add(name + "1", f1)
        buf.add(name + "2", f2)
    return _uv_component(buf, "u", "v", b), _uv_component(buf, "v", "u", b)


def mn_tendency_rfft(u: np.ndarray, v: np.ndarray, grid: Grid, b: float):
    """rfft of ``(dm, dn)`` for the transport form, given ``u`` and ``v``."""
    buf = ProductBuffer(grid)
    for name, arr in (("u", u), ("v", v)):
        f0, f1 = derivs_array(arr, grid, 1)
        mom = helmholtz_apply_array(arr, grid)
        _, mom1 = derivs_array(mom, grid, 1)
        buf.add(name, f0)
        buf.add(name + "1", f1)
        buf.add(name + "m", mom)
        buf.add(name + "m1", mom1)
    dm = -buf.project_rfft(
        buf.fine_product(("u", "v", "um1")) + b * buf.fine_product(("v", "u1", "um"))
    )
    dn = -buf.project_rfft(
        buf.fine_product(("v", "u", "vm1")) + b * buf.fine_product(("u", "v1", "vm"))
    )
    return dm, dn


# --- public surface --------------------------------------------------------


def bfam_rhs(s: StatePair, b: float) -> Tendency:
    g = s.grid
    _require_finite(s.u.values, s.v.values)
    du, dv = uv_tendency_arrays(s.u.values, s.v.values, g, float(b))
    return Tendency(StateField(g, du), StateField(g, dv))


def gx_rhs(s: StatePair) -> Tendency:
    """Geng-Xue tendency from its momentum form ``m_t + u v m_x + 3 v u_x m = 0``.

    Deliberately computed through the transport path so that comparing it with
    ``bfam_rhs(s, 3)`` (nonlocal path) is a genuine consistency check.
    """
    _require_finite(s.u.values, s.v.values)
    return mn_rhs_as_uv(s, 3.0)


def mn_rhs(s: StatePair, b: float) -> MomentumTendency:
    """Time derivatives of the momenta ``m = u - u_xx`` and ``n = v - v_xx``.

    The caller evolves ``(m, n)`` and recovers ``(u, v)`` with ``helmholtz_inv``.
    """
    g = s.grid
    _require_finite(s.u.values, s.v.values)
    dm_hat, dn_hat = mn_tendency_rfft(s.u.values, s.v.values, g, float(b))
    return MomentumTendency(
        StateField(g, np.fft.irfft(dm_hat, n=g.N)), StateField(g, np.fft.irfft(dn_hat, n=g.N))
    )


def mn_rhs_as_uv(s: StatePair, b: float) -> Tendency:
    """Transport-form tendency mapped back through ``(1 - d^2)^{-1}``."""
    g = s.grid
    dm_hat, dn_hat = mn_tendency_rfft(s.u.values, s.v.values, g, float(b))
    h = 1.0 + g.kr**2
    return Tendency(
        StateField(g, np.fft.irfft(dm_hat / h, n=g.N)),
        StateField(g, np.fft.irfft(dn_hat / h, n=g.N)),
    )


def model_rhs(s: StatePair, params: ModelParams) -> Tendency:
    """``(du, dv)`` of the configured model, in whichever formulation is selected."""
    if params.formulation is Formulation.MN_TRANSPORT:
        return mn_rhs_as_uv(s, params.b)
    return bfam_rhs(s, params.b)


@dataclass(frozen=True)
class ReductionReport:
    kind: str
    discrepancies: dict

    @property
    def max_discrepancy(self) -> float:
        return max(self.discrepancies.values()) if self.discrepancies else 0.0


def _sup(a) -> float:
    return float(np.max(np.abs(a)))


def reduction_check(kind: str, s: StatePair, b: float = 3.0, tol: float = 1e-12) -> ReductionReport:
    """Compare the reductions of the two-component system.

    ``b3``: b-family at ``b = 3`` against Geng-Xue.
    ``novikov``: ``u == v`` input; the two components must agree, and match
    the scalar Novikov tendency ``m_t = -(u^2 m_x + 3 u u_x m)``.
    ``dp``: ``v == 1`` input; the ``u`` tendency must match the
    Degasperis-Procesi law ``m_t = -(u m_x + 3 u_x m)`` and ``v`` stays put.
    """
    g = s.grid
    u, v = s.u.values, s.v.values
    if kind == "b3":
        t3 = bfam_rhs(s, 3.0)
        tg = gx_rhs(s)
        return ReductionReport(
            kind,
            {"du": _sup(t3.du.values - tg.du.values), "dv": _sup(t3.dv.values - tg.dv.values)},
        )
    if kind == "novikov":
        scale = max(_sup(u), 1.0)
        if _sup(u - v) > tol * scale:
            raise ValueError("novikov reduction needs u == v")
        t = bfam_rhs(s, b)
        buf = ProductBuffer(g)
        u0, u1 = derivs_array(u, g, 1)
        m = helmholtz_apply_array(u, g)
        _, m1 = derivs_array(m, g, 1)
        for key, arr in (("u", u0), ("u1", u1), ("m", m), ("m1", m1)):
            buf.add(key, arr)
        dm = -buf.project_rfft(
            buf.fine_product(("u", "u", "m1")) + b * buf.fine_product(("u", "u1", "m"))
        )
        du_ref = np.fft.irfft(dm / (1.0 + g.kr**2), n=g.N)
        return ReductionReport(
            kind,
            {"du_minus_dv": _sup(t.du.values - t.dv.values), "du_vs_novikov": _sup(t.du.values - du_ref)},
        )
    if kind == "dp":
        if _sup(v - 1.0) > tol:
            raise ValueError("dp reduction needs v == 1")
        t = bfam_rhs(s, b)
        buf = ProductBuffer(g)
        u0, u1 = derivs_array(u, g, 1)
        m = helmholtz_apply_array(u, g)
        _, m1 = derivs_array(m, g, 1)
        # with v == 1 the products collapse to quadratic ones
        for key, arr in (("u", u0), ("u1", u1), ("m", m), ("m1", m1)):
            buf.add(key, arr)
        dm = -buf.project_rfft(buf.fine_product(("u", "m1")) + b * buf.fine_product(("u1", "m")))
        du_ref = np.fft.irfft(dm / (1.0 + g.kr**2), n=g.N)
        return ReductionReport(
            kind, {"du_vs_dp": _sup(t.du.values - du_ref), "dv": _sup(t.dv.values)}
        )
    raise ValueError(f"unknown reduction kind {kind!r}")
