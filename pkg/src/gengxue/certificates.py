"""Explicit blow-up constants with their slope thresholds, plus a-priori bound monitors.

Geng-Xue (``thm13``) certificates are built from
``S = ||u0||_{W^{1,1}} + ||n0||_inf``; b-family (``thm14``, ``b = 1 + 2/r``)
certificates from ``S = ||u0||_{W^{1,r}}^r + ||n0||_inf``.  In both cases the
tracked slope ``f = u_x(t, q(t, x0))`` satisfies a Riccati inequality whose
blow-up time is bounded by :func:`gengxue.riccati.riccati_bound`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .models import Family, ModelParams, StatePair
from .norms import NormReport, _lp_array, _w1r_array, SUP_FACTOR
from .riccati import RiccatiHypothesisError, riccati_bound
from .spectral import (
    deriv_array,
    helmholtz_apply_array,
    oversampled_sup_array,
    trig_interp_array,
)

DEFAULT_SLACK = 1e-6


def _positive(**kw):
    for name, val in kw.items():
        if not (val > 0 and math.isfinite(val)):
            raise ValueError(f"{name} must be positive and finite, got {val}")


# --- Geng-Xue constants ----------------------------------------------------


def compute_T1(w11_u0: float, sup_n0: float) -> float:
    _positive(w11_u0=w11_u0, sup_n0=sup_n0)
    return 1.0 / (80.0 * (w11_u0 + sup_n0) ** 2)


def compute_T2(v0_at_x0: float, w11_u0: float, sup_n0: float) -> float:
    _positive(v0_at_x0=v0_at_x0, w11_u0=w11_u0, sup_n0=sup_n0)
    return v0_at_x0 / (80.0 * (w11_u0 + sup_n0) ** 3)


def compute_b1(v0_at_x0: float, w11_u0: float, sup_n0: float) -> float:
    _positive(v0_at_x0=v0_at_x0)
    s = w11_u0 + sup_n0
    return 4.0 / v0_at_x0 * s**4 + 14.0 * s**3


def slope_threshold(v0_at_x0: float, coeff: float, T: float) -> float:
    """``((1 + X) / (1 - X)) sqrt(coeff / v0)`` with ``X = exp(sqrt(coeff v0) T)``.

    Shared by both certificates: ``coeff = b1, T = T2`` or ``coeff = c2, T = T5``.
    """
    _positive(v0_at_x0=v0_at_x0, coeff=coeff, T=T)
    e = math.expm1(math.sqrt(coeff * v0_at_x0) * T)
    if e == 0.0:
        raise ZeroDivisionError("exp(sqrt(coeff v0) T) rounds to 1")
    return -((2.0 + e) / e) * math.sqrt(coeff / v0_at_x0)


def slope_threshold_13(v0_at_x0: float, b1: float, T2: float) -> float:
    return slope_threshold(v0_at_x0, b1, T2)


# --- b-family constants ----------------------------------------------------


def _check_r(r: float) -> None:
    if not r >= 2:
        raise ValueError(f"r must be >= 2, got {r}")


def t4_prefactor(r: float) -> float:
    """``r^{(1+r)/r} + r^{1/r} + r^{(1-r)/r} + 7 r^{1/r} (r-1)^{(r-1)/r}``."""
    _check_r(r)
    return r ** ((1 + r) / r) + r ** (1 / r) + r ** ((1 - r) / r) + 7 * r ** (1 / r) * (r - 1) ** ((r - 1) / r)


def compute_T4(w1r_u0_pow_r: float, sup_n0: float, r: float) -> float:
    _check_r(r)
    _positive(w1r_u0_pow_r=w1r_u0_pow_r, sup_n0=sup_n0)
    s = w1r_u0_pow_r + sup_n0
    return 1.0 / (8.0 * t4_prefactor(r) * s ** ((r + 1) / r))


def compute_T5(v0_at_x0: float, w1r_u0_pow_r: float, sup_n0: float, r: float) -> float:
    _check_r(r)
    _positive(v0_at_x0=v0_at_x0, w1r_u0_pow_r=w1r_u0_pow_r, sup_n0=sup_n0)
    s = w1r_u0_pow_r + sup_n0
    return v0_at_x0 / (8.0 * t4_prefactor(r) * s ** ((2 * r + 1) / r))


def compute_c2(v0_at_x0: float, w1r_u0_pow_r: float, sup_n0: float, r: float) -> float:
    _check_r(r)
    _positive(v0_at_x0=v0_at_x0)
    s = sup_n0 + w1r_u0_pow_r
    return (
        4.0 / v0_at_x0 * r ** (2 / r) * s ** ((2 * r + 2) / r)
        + 14.0 * (r**2 / 2) ** (1 / r) * ((r - 1) / r) ** ((r - 1) / r) * s ** ((r + 2) / r)
    )


def slope_threshold_14(v0_at_x0: float, c2: float, T5: float) -> float:
    return slope_threshold(v0_at_x0, c2, T5)


def statement_bound(v0_at_x0: float, coeff: float, f0: float) -> Optional[float]:
    """Blow-up time bound with the Riccati coefficient taken as ``a = v0``,
    ``ln((sqrt(v0) f0 - sqrt(c)) / (sqrt(v0) f0 + sqrt(c))) / sqrt(c v0)``.

    About half of the ``a = v0/4`` bound; reported for comparison only.
    """
    num = math.sqrt(v0_at_x0) * f0 - math.sqrt(coeff)
    den = math.sqrt(v0_at_x0) * f0 + math.sqrt(coeff)
    if den >= 0:
        return None
    return math.log(num / den) / math.sqrt(coeff * v0_at_x0)


# --- certificate -----------------------------------------------------------


@dataclass
class BlowupCertificate:
    theorem: str
    x0: float
    v0_at_x0: float
    u0x_at_x0: float
    norms0: dict
    norm_sum: float
    constants: dict
    slope_threshold: Optional[float]
    predicted_bound: Optional[float]
    riccati_bound: Optional[float]
    statement_bound: Optional[float]
    hypotheses_met: dict
    regime_ok: Optional[bool]
    notes: list = field(default_factory=list)
    observed_breaking_time: Optional[float] = None
    swap_roles: bool = False
    numerically_confirmed: Optional[bool] = None
    refinement: Optional[dict] = None

    @property
    def certified(self) -> bool:
        return all(v is True for v in self.hypotheses_met.values())

    @property
    def ceiling(self) -> Optional[float]:
        return self.constants.get("T2", self.constants.get("T5"))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["certified"] = self.certified
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BlowupCertificate":
        d = dict(d)
        d.pop("certified", None)
        return cls(**d)


def _theorem_for(params: ModelParams) -> str:
    return "thm13" if params.family is Family.GENG_XUE or params.b == 3.0 else "thm14"


def initial_norms(s0: StatePair, r: float = 1.0) -> dict:
    g = s0.grid
    u = s0.u.values
    ux = deriv_array(u, g, 1)
    n0 = helmholtz_apply_array(s0.v.values, g)
    out = {
        "w11_u0": _lp_array(u, g, 1) + _lp_array(ux, g, 1),
        "sup_n0": oversampled_sup_array(n0, g, SUP_FACTOR),
    }
    if r != 1:
        out["w1r_u0_pow_r"] = _w1r_array(u, g, r) ** r
        out["r"] = r
    return out


def certify_blowup(
    s0: StatePair,
    params: ModelParams,
    x0: float,
    theorem: Optional[str] = None,
) -> BlowupCertificate:
    """Evaluate the blow-up hypotheses at ``x0`` and the resulting time bounds.

    ``predicted_bound`` is the Riccati bound with ``a = v0(x0)/4`` (``thm13``) or
    ``a = v0(x0)/(4r)`` (``thm14``), capped by ``T2`` (resp. ``T5``).  The
    ``a = v0`` variant is kept alongside as ``statement_bound``.
    """
    g = s0.grid
    if not (-g.L <= x0 < g.L):
        raise ValueError(f"x0={x0} outside the domain [{-g.L}, {g.L})")
    theorem = theorem or _theorem_for(params)
    if theorem == "thm14":
        params.require_thm14()
    elif theorem != "thm13":
        raise ValueError(f"unknown theorem {theorem!r}")

    r = params.r if theorem == "thm14" else 1.0
    norms0 = initial_norms(s0, r)
    v0x0 = float(trig_interp_array(s0.v.values, g, x0)[0])
    u0x = float(trig_interp_array(deriv_array(s0.u.values, g, 1), g, x0)[0])
    notes = [
        "strict positivity v0(x0) > 0 is required: the allowed case v0(x0) = 0 makes "
        "the constants divide by zero",
        "predicted_bound uses the Riccati lemma with a = v0(x0)/4 (v0(x0)/(4r) for the "
        "b-family); statement_bound takes a = v0(x0) and comes out about half as long",
    ]
    constants: dict = {}
    if theorem == "thm13":
        total = norms0["w11_u0"] + norms0["sup_n0"]
        if total > 0:
            constants["T1"] = 1.0 / (80.0 * total**2)
    else:
        total = norms0["w1r_u0_pow_r"] + norms0["sup_n0"]
        if total > 0:
            constants["T4"] = compute_T4(norms0["w1r_u0_pow_r"], norms0["sup_n0"], r)

    hyp = {"v0_positive": v0x0 > 0, "slope_below_threshold": None}
    cert = BlowupCertificate(
        theorem=theorem,
        x0=float(x0),
        v0_at_x0=v0x0,
        u0x_at_x0=u0x,
        norms0=norms0,
        norm_sum=total,
        constants=constants,
        slope_threshold=None,
        predicted_bound=None,
        riccati_bound=None,
        statement_bound=None,
        hypotheses_met=hyp,
        regime_ok=None,
        notes=notes,
    )
    if v0x0 <= 0:
        notes.append("v0(x0) <= 0: the constants divide by v0(x0); no bound claimed")
        return cert
    if total <= 0:
        notes.append("zero data: norm sum vanishes")
        return cert

    if theorem == "thm13":
        T2 = v0x0 / (80.0 * total**3)
        coeff = 4.0 / v0x0 * total**4 + 14.0 * total**3
        constants.update(T2=T2, b1=coeff)
        a = v0x0 / 4.0
        ceiling, ceiling_name, first = T2, "T2", "T1"
    else:
        T5 = compute_T5(v0x0, norms0["w1r_u0_pow_r"], norms0["sup_n0"], r)
        coeff = compute_c2(v0x0, norms0["w1r_u0_pow_r"], norms0["sup_n0"], r)
        constants.update(T5=T5, c2=coeff)
        a = v0x0 / (4.0 * r)
        ceiling, ceiling_name, first = T5, "T5", "T4"
    constants["a"] = a
    cert.regime_ok = ceiling <= constants[first]
    if not cert.regime_ok:
        notes.append(f"v0(x0) exceeds the norm sum: {ceiling_name} > {first}")
    thr = slope_threshold(v0x0, coeff, ceiling)
    cert.slope_threshold = thr
    hyp["slope_below_threshold"] = u0x <= thr
    cert.statement_bound = statement_bound(v0x0, coeff, u0x)
    try:
        cert.riccati_bound = riccati_bound(a, coeff, u0x)
    except RiccatiHypothesisError as exc:
        notes.append(f"Riccati lemma not applicable: {exc}")
    if cert.certified and cert.riccati_bound is not None:
        cert.predicted_bound = min(cert.riccati_bound, ceiling)
    return cert


# --- characteristics and monitors -----------------------------------------


@dataclass
class CharTrace:
    x0: float
    times: list = field(default_factory=list)
    q: list = field(default_factory=list)
    u_at_q: list = field(default_factory=list)
    ux_at_q: list = field(default_factory=list)
    v_at_q: list = field(default_factory=list)
    n_at_q: list = field(default_factory=list)

    def append(self, t, q, u, ux, v, n):
        self.times.append(float(t))
        self.q.append(float(q))
        self.u_at_q.append(float(u))
        self.ux_at_q.append(float(ux))
        self.v_at_q.append(float(v))
        self.n_at_q.append(float(n))

    def to_dict(self) -> dict:
        return asdict(self)


def sample_trace_values(state: StatePair, q: np.ndarray):
    """``u, u_x, v, n`` interpolated at the positions ``q``."""
    g = state.grid
    u = state.u.values
    v = state.v.values
    return (
        trig_interp_array(u, g, q),
        trig_interp_array(deriv_array(u, g, 1), g, q),
        trig_interp_array(v, g, q),
        trig_interp_array(helmholtz_apply_array(v, g), g, q),
    )


def track_characteristic(s0: StatePair, params: ModelParams, policy, x0: float) -> CharTrace:
    """Run the PDE from ``s0`` and return the trajectory of ``q(t, x0)``."""
    from .timestepping import run

    res = run(s0, params, policy, track_x0=[x0], besov=False)
    return res.char_traces[0]


@dataclass
class MonitorResult:
    name: str
    passed: bool
    margin: float
    samples_checked: int
    window: float
    covered_until: float
    slack: float
    worst_t: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def _bound_monitor(name, times, values, bound, window, slack):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    sel = times <= window * (1 + 1e-12)
    if not sel.any():
        return MonitorResult(name, True, float("inf"), 0, window, float("nan"), slack)
    vals = values[sel]
    ok = bool(np.all(vals <= bound + slack * abs(bound)))
    if bound > 0:
        rel = (bound - vals) / bound
    else:
        rel = np.where(vals <= 0, 0.0, -np.inf)
    worst = int(np.argmin(rel))
    return MonitorResult(
        name, ok, float(rel[worst]), int(sel.sum()), window, float(times[sel][-1]), slack,
        float(times[sel][worst]),
    )


def monitor_prop41(reports: Sequence[NormReport], T1: float, slack: float = DEFAULT_SLACK) -> MonitorResult:
    """``||n||_inf + ||u||_{W^{1,1}} <= 2 (||n0||_inf + ||u0||_{W^{1,1}})`` for ``t <= T1``."""
    times = [rep.t for rep in reports]
    vals = [rep.sup_n + rep.w11_u for rep in reports]
    return _bound_monitor("prop41", times, vals, 2.0 * vals[0], T1, slack)


def monitor_prop42(trace: CharTrace, v0_at_x0: float, T2: float, slack: float = DEFAULT_SLACK) -> MonitorResult:
    """``v(t, q(t, x0)) >= v0(x0)/2`` for ``t <= T2``."""
    # recast as an upper bound on -v so one helper serves both monitors
    res = _bound_monitor(
        "prop42", trace.times, [-x for x in trace.v_at_q], -0.5 * v0_at_x0, T2, slack
    )
    if v0_at_x0 > 0:
        vals = np.asarray(trace.v_at_q)[np.asarray(trace.times) <= T2 * (1 + 1e-12)]
        if vals.size:
            res.margin = float((vals.min() - 0.5 * v0_at_x0) / (0.5 * v0_at_x0))
    return res


def monitor_bfam(
    reports: Sequence[NormReport],
    trace: CharTrace,
    params: ModelParams,
    T4: float,
    T5: float,
    v0_at_x0: Optional[float] = None,
    slack: float = DEFAULT_SLACK,
) -> tuple[MonitorResult, MonitorResult]:
    """The ``W^{1,r}`` analogue of the two Geng-Xue monitors (``b = 1 + 2/r``)."""
    params.require_thm14()
    r = params.r
    times = [rep.t for rep in reports]
    vals = [rep.sup_n + rep.w1r_u**r for rep in reports]
    if reports and reports[0].r != r:
        raise ValueError(f"norm reports carry r={reports[0].r}, params r={r}")
    first = _bound_monitor("prop51", times, vals, 2.0 * vals[0], T4, slack)
    v0 = trace.v_at_q[0] if v0_at_x0 is None else v0_at_x0
    second = monitor_prop42(trace, v0, T5, slack)
    second.name = "prop52"
    return first, second


def criterion_integral(times: Sequence[float], integrand: Sequence[float]) -> float:
    """Trapezoid integral of ``||u||_{W^{1,inf}} ||v||_{W^{1,inf}}`` over the samples."""
    return float(cumulative_criterion(times, integrand)[-1])


def cumulative_criterion(times, integrand) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    f = np.asarray(integrand, dtype=float)
    if t.size < 1:
        raise ValueError("need at least one sample")
    out = np.zeros_like(t)
    if t.size > 1:
        out[1:] = np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t))
    return out


@dataclass
class GronwallReport:
    sup_c: Optional[float]
    c_series: list
    vacuous: bool
    anomalies: list

    @property
    def passed(self) -> bool:
        return not self.anomalies and (self.vacuous or math.isfinite(self.sup_c))


def gronwall_monitor(reports: Sequence[NormReport]) -> GronwallReport:
    """Fitted exponent ``c(t) = ln(B(t)/B(0)) / I(t)`` with ``B`` the summed B^2_{2,1} norms."""
    times = [rep.t for rep in reports]
    B = np.array([rep.besov221_u + rep.besov221_v for rep in reports])
    I = cumulative_criterion(times, [rep.criterion_integrand for rep in reports])
    if B[0] == 0 or not np.isfinite(B[0]):
        return GronwallReport(None, [], True, [])
    series = []
    anomalies = []
    for t, b, i in zip(times[1:], B[1:], I[1:]):
        growth = math.log(b / B[0]) if b > 0 else -math.inf
        if i == 0:
            if growth > 0:
                anomalies.append(f"B grew with zero criterion integral at t={t}")
            continue
        series.append((t, growth / i))
    if not series:
        return GronwallReport(None, [], True, anomalies)
    sup_c = max(c for _, c in series)
    return GronwallReport(sup_c, series, False, anomalies)
