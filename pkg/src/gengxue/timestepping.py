"""Classical RK4 stepping with CFL/slope step control and blow-up detection.

The characteristic ``dq/dt = (u v)(t, q)`` is advanced with the same four
stages as the fields, so tracked quantities keep the scheme's order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .certificates import CharTrace, sample_trace_values
from .models import Formulation, ModelParams, StatePair, mn_tendency_rfft, uv_tendency_rfft
from .norms import NormReport, norm_report
from .spectral import NonFiniteFieldError, _pad_rfft, trig_interp_array

EPS_SPEED = 1e-8


class NonFiniteStateError(NonFiniteFieldError):
    """A step produced NaN or inf; the caller treats it as a blow-up candidate."""


class Verdict(str, enum.Enum):
    COMPLETED = "completed"
    BLOWUP_DETECTED = "blowup_detected"
    DT_UNDERFLOW = "dt_underflow"


@dataclass(frozen=True)
class StepPolicy:
    dt_init: float
    t_end: float
    dt_min: float = 1e-10
    cfl_factor: float = 0.3
    blowup_slope_cap: float = 1e6
    output_stride: int = 10
    # relative weight of the top fifth of the resolved spectrum of u_x, v_x
    # beyond which the fields count as under-resolved
    resolution_tol: float = 1e-10
    fit_window: int = 6
    # resolution loss only counts as blow-up once the slope has steepened by
    # this factor relative to its initial value
    steepening_factor: float = 1.5
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not self.t_end >= 0 or not math.isfinite(self.t_end):
            raise ValueError(f"t_end must be finite and >= 0, got {self.t_end}")
        if not 0 < self.dt_min < self.dt_init:
            raise ValueError(f"need 0 < dt_min < dt_init, got {self.dt_min}, {self.dt_init}")
        if not 0 < self.cfl_factor <= 1:
            raise ValueError(f"cfl_factor must lie in (0, 1], got {self.cfl_factor}")
        if self.output_stride < 1:
            raise ValueError("output_stride must be >= 1")
        if self.fit_window < 3:
            raise ValueError("fit_window must be >= 3")


@dataclass
class Detection:
    verdict: Verdict
    reason: Optional[str]
    breaking_time: Optional[float]
    fit_time: Optional[float]
    detection_time: Optional[float]


@dataclass
class RunResult:
    times: list
    dts: list
    norm_reports: list
    char_traces: list
    verdict: Verdict
    breaking_time_estimate: Optional[float]
    detection: Detection
    slope_times: np.ndarray
    slope_values: np.ndarray
    final_state: StatePair
    steps: int
    under_resolved_at: Optional[float] = None
    extras: dict = field(default_factory=dict)


# --- step control ----------------------------------------------------------


def sup_transport_speed(s: StatePair, factor: int = 4) -> float:
    """``sup |u v|`` evaluated on a ``factor``-times finer grid."""
    g = s.grid
    m = factor * g.N
    uf = np.fft.irfft(_pad_rfft(np.fft.rfft(s.u.values), g.N, m), n=m)
    vf = np.fft.irfft(_pad_rfft(np.fft.rfft(s.v.values), g.N, m), n=m)
    return float(np.max(np.abs(uf * vf)))


def cfl_dt(s: StatePair, policy: StepPolicy) -> float:
    dt = policy.cfl_factor * s.grid.dx / max(sup_transport_speed(s), EPS_SPEED)
    return float(min(max(dt, policy.dt_min), policy.dt_init))


def min_slope(u: np.ndarray, v: np.ndarray, grid) -> float:
    ik = 1j * grid.kr
    ux = np.fft.irfft(ik * np.fft.rfft(u), n=grid.N)
    vx = np.fft.irfft(ik * np.fft.rfft(v), n=grid.N)
    return float(min(ux.min(), vx.min()))


def spectral_tail(u: np.ndarray, v: np.ndarray, grid) -> float:
    """Share of the ``u_x``, ``v_x`` spectrum carried by indices above ``0.4 N``."""
    tail = 0.0
    for a in (u, v):
        w = np.abs(grid.kr * np.fft.rfft(a)) ** 2
        total = w.sum()
        if total > 0:
            tail = max(tail, math.sqrt(w[(2 * grid.N) // 5 :].sum() / total))
    return tail


# --- RK4 ------------------------------------------------------------------


class _System:
    """Evolution variables and their tendency for one formulation."""

    def __init__(self, params: ModelParams, grid):
        self.params = params
        self.grid = grid
        self.mn = params.formulation is Formulation.MN_TRANSPORT
        self.h = 1.0 + grid.kr**2

    def to_vars(self, u, v):
        if self.mn:
            return np.fft.rfft(u) * self.h, np.fft.rfft(v) * self.h
        return np.fft.rfft(u), np.fft.rfft(v)

    def to_uv(self, a_hat, b_hat):
        n = self.grid.N
        if self.mn:
            return np.fft.irfft(a_hat / self.h, n=n), np.fft.irfft(b_hat / self.h, n=n)
        return np.fft.irfft(a_hat, n=n), np.fft.irfft(b_hat, n=n)

    def tendency(self, u, v):
        if self.mn:
            return mn_tendency_rfft(u, v, self.grid, self.params.b)
        return uv_tendency_rfft(u, v, self.grid, self.params.b)


def _rk4(system: _System, u, v, q, dt):
    """One step on spectral variables; ``q`` may be an empty array."""
    g = system.grid
    y = system.to_vars(u, v)
    ks, kq = [], []
    stage_u, stage_v, stage_q = u, v, q
    for c in (0.5, 0.5, 1.0, None):
        ks.append(system.tendency(stage_u, stage_v))
        kq.append(trig_interp_array(stage_u, g, stage_q) * trig_interp_array(stage_v, g, stage_q))
        if c is None:
            break
        ya = y[0] + c * dt * ks[-1][0]
        yb = y[1] + c * dt * ks[-1][1]
        stage_u, stage_v = system.to_uv(ya, yb)
        stage_q = q + c * dt * kq[-1]
    w = (1.0, 2.0, 2.0, 1.0)
    ya = y[0] + dt / 6.0 * sum(wi * k[0] for wi, k in zip(w, ks))
    yb = y[1] + dt / 6.0 * sum(wi * k[1] for wi, k in zip(w, ks))
    qn = q + dt / 6.0 * sum(wi * k for wi, k in zip(w, kq))
    un, vn = system.to_uv(ya, yb)
    if not (np.all(np.isfinite(un)) and np.all(np.isfinite(vn)) and np.all(np.isfinite(qn))):
        raise NonFiniteStateError("non-finite state after RK4 step")
    return un, vn, qn


def step_rk4_tracked(s: StatePair, dt: float, params: ModelParams, q):
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    q = np.atleast_1d(np.asarray(q, dtype=float))
    with np.errstate(all="ignore"):
        un, vn, qn = _rk4(_System(params, s.grid), s.u.values, s.v.values, q, dt)
    return StatePair.from_arrays(s.grid, un, vn, s.t + dt), qn


def step_rk4(s: StatePair, dt: float, params: ModelParams) -> StatePair:
    """Advance ``s`` by ``dt`` with the formulation selected in ``params``."""
    return step_rk4_tracked(s, dt, params, np.empty(0))[0]


# --- blow-up detection ----------------------------------------------------


def fit_breaking_time(times, slopes) -> Optional[float]:
    """Least-squares fit of ``slope ~ -1/(a (T - t))``; returns ``T`` or None.

    In the reciprocal ``y = -1/slope`` the model is the line ``y = a (T - t)``.
    """
    t = np.asarray(times, dtype=float)
    s = np.asarray(slopes, dtype=float)
    if t.size < 3 or np.any(s >= 0):
        return None
    y = -1.0 / s
    beta, alpha = np.polyfit(t - t[-1], y, 1)
    if not beta < 0:
        return None
    return float(t[-1] - alpha / beta)


def detect_blowup(
    times: Sequence[float],
    slopes: Sequence[float],
    policy: StepPolicy,
    dt_underflow: bool = False,
    non_finite: bool = False,
    resolution_lost: bool = False,
    resolved_until: Optional[float] = None,
) -> Detection:
    """Classify a min-slope history and extrapolate the breaking time.

    Blow-up is declared when the slope cap is crossed, a non-finite state
    appeared, or the step size underflowed / resolution was lost while the
    slope was still decreasing.  The extrapolated time uses the last
    ``fit_window`` samples before the cap crossing, and no samples taken
    after ``resolved_until`` (the first under-resolved time) when given.
    """
    t = np.asarray(times, dtype=float)
    s = np.asarray(slopes, dtype=float)
    if t.size < 3:
        raise ValueError(f"need >= 3 slope samples, got {t.size}")
    crossed = np.nonzero(s < -policy.blowup_slope_cap)[0]
    end = int(crossed[0]) + 1 if crossed.size else t.size
    k = min(policy.fit_window, end)
    decreasing = bool(np.all(np.diff(s[end - k : end]) < 0))
    fit_end = end
    if resolved_until is not None:
        fit_end = min(end, int(np.searchsorted(t, resolved_until, side="left")))
    w = min(policy.fit_window, fit_end)
    seg = s[fit_end - w : fit_end]
    fit = None
    if w >= 3 and np.all(np.diff(seg) < 0):
        fit = fit_breaking_time(t[fit_end - w : fit_end], seg)

    reason = None
    if crossed.size:
        reason = "slope_cap"
    elif non_finite:
        reason = "non_finite"
    elif dt_underflow and decreasing:
        reason = "dt_underflow"
    elif resolution_lost and decreasing:
        reason = "resolution_lost"

    if reason is None:
        verdict = Verdict.DT_UNDERFLOW if dt_underflow else Verdict.COMPLETED
        return Detection(verdict, None, None, fit, None)
    t_detect = float(t[end - 1])
    estimate = t_detect
    if fit is not None and float(t[fit_end - 1]) <= fit <= max(policy.t_end, t_detect):
        estimate = fit
    return Detection(Verdict.BLOWUP_DETECTED, reason, estimate, fit, t_detect)


# --- driver ----------------------------------------------------------------


def _sample_traces(traces, state: StatePair, q):
    if not traces:
        return
    u, ux, v, n = sample_trace_values(state, q)
    for i, tr in enumerate(traces):
        tr.append(state.t, q[i], u[i], ux[i], v[i], n[i])


def run(
    s0: StatePair,
    params: ModelParams,
    policy: StepPolicy,
    monitors: Sequence[Callable[[StatePair], None]] = (),
    track_x0: Sequence[float] = (),
    r: float = 2.0,
    s_hs: float = 3.0,
    besov: bool = True,
) -> RunResult:
    """Integrate from ``s0`` until ``t_end``, blow-up, or step underflow.

    Norm reports, characteristic samples and the ``monitors`` callbacks are
    evaluated every ``output_stride`` steps and at the final state; callbacks
    receive the immutable state and cannot perturb it.
    """
    g = s0.grid
    system = _System(params, g)
    u, v = s0.u.values, s0.v.values
    q = np.asarray(list(track_x0), dtype=float)
    traces = [CharTrace(float(x)) for x in q]
    t = float(s0.t)
    t_end = t + policy.t_end
    state = s0

    times, dts, reports = [], [], []
    slope_t, slope_v = [t], [min_slope(u, v, g)]

    def sample(st, dt_last):
        times.append(st.t)
        dts.append(dt_last)
        reports.append(norm_report(st, r=r, s=s_hs, besov=besov))
        _sample_traces(traces, st, q)
        for mon in monitors:
            mon(st)

    sample(state, 0.0)
    step = 0
    flags = dict(dt_underflow=False, non_finite=False, resolution_lost=False)
    under_resolved_at = None
    dt = 0.0
    last_sampled = True
    while t < t_end and step < policy.max_steps:
        dt = cfl_dt(state, policy)
        slope = slope_v[-1]
        if slope < 0:
            dt = min(dt, policy.cfl_factor / -slope)
        if dt < policy.dt_min:
            flags["dt_underflow"] = True
            break
        dt = min(dt, t_end - t)
        try:
            with np.errstate(all="ignore"):
                un, vn, qn = _rk4(system, u, v, q, dt)
        except NonFiniteStateError:
            flags["non_finite"] = True
            break
        u, v, q = un, vn, qn
        t = t_end if abs(t_end - (t + dt)) <= 1e-14 * max(1.0, abs(t_end)) else t + dt
        step += 1
        state = StatePair.from_arrays(g, u, v, t)
        slope_t.append(t)
        slope_v.append(min_slope(u, v, g))
        last_sampled = step % policy.output_stride == 0
        if last_sampled:
            sample(state, dt)
        if policy.resolution_tol and spectral_tail(u, v, g) > policy.resolution_tol:
            if under_resolved_at is None:
                under_resolved_at = t
            k = min(policy.fit_window, len(slope_v))
            steep = slope_v[-1] < min(policy.steepening_factor * slope_v[0], -1e-300)
            if steep and np.all(np.diff(slope_v[-k:]) < 0):
                flags["resolution_lost"] = True
                break
        if slope_v[-1] < -policy.blowup_slope_cap:
            break
    if not last_sampled:
        sample(state, dt)

    if len(slope_t) >= 3:
        det = detect_blowup(slope_t, slope_v, policy, resolved_until=under_resolved_at, **flags)
    elif any(flags.values()):
        det = Detection(
            Verdict.DT_UNDERFLOW if flags["dt_underflow"] else Verdict.BLOWUP_DETECTED,
            next(k for k, f in flags.items() if f),
            t if not flags["dt_underflow"] else None,
            None,
            t,
        )
    else:
        det = Detection(Verdict.COMPLETED, None, None, None, None)
    extras = {}
    if det.verdict is Verdict.COMPLETED and t < t_end:
        # step budget exhausted before t_end: treated like a step-size collapse
        extras["max_steps_hit"] = True
        det.verdict = Verdict.DT_UNDERFLOW
    return RunResult(
        times=times,
        dts=dts,
        norm_reports=reports,
        char_traces=traces,
        verdict=det.verdict,
        breaking_time_estimate=det.breaking_time,
        detection=det,
        slope_times=np.asarray(slope_t),
        slope_values=np.asarray(slope_v),
        final_state=state,
        steps=step,
        under_resolved_at=under_resolved_at,
        extras=extras,
    )
