"""End-to-end pipeline: config -> initial data -> certificate -> run -> monitors -> record."""

from __future__ import annotations

import math
import platform
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .certificates import (
    BlowupCertificate,
    DEFAULT_SLACK,
    certify_blowup,
    compute_T1,
    compute_T4,
    cumulative_criterion,
    gronwall_monitor,
    initial_norms,
    monitor_bfam,
    monitor_prop41,
    monitor_prop42,
)
from .config import ExperimentConfig, parse_config, serialize_config
from .initial import build_initial
from .models import StatePair
from .records import (
    SCHEMA_VERSION,
    dumps_json,
    norms_csv,
    traces_csv,
    write_record_dir,
)
from .spectral import Grid
from .timestepping import RunResult, Verdict, run

EXIT_OK = 0
EXIT_BLOWUP = 2
EXIT_UNDERFLOW = 3
REFINEMENT_TOL = 0.05
POINTWISE_SLACK = 1e-10


@dataclass
class Outcome:
    config: ExperimentConfig
    state0: StatePair
    provenance: dict
    certificate: Optional[BlowupCertificate]
    result: RunResult
    monitors: dict
    criterion_cum: np.ndarray
    wall_clock: float
    exit_code: int
    extras: dict = field(default_factory=dict)


def certificate_x0(cfg: ExperimentConfig) -> Optional[float]:
    if cfg.cert_x0 is not None:
        return cfg.cert_x0
    if cfg.initial.kind == "steep_certified":
        return float(cfg.initial.params.get("x0", 0.0))
    return None


def prepare(cfg: ExperimentConfig, base_dir: Optional[Path] = None, initial_state: Optional[StatePair] = None):
    """Initial state (roles swapped if requested), provenance, and certificate."""
    grid = Grid(cfg.L, cfg.N)
    if initial_state is None:
        state, prov = build_initial(cfg.initial, grid, cfg.model, base_dir=base_dir, seed=cfg.seed)
    else:
        state, prov = initial_state, {"kind": cfg.initial.kind, "replayed": True}
    if cfg.swap_roles:
        state = state.swapped()
        prov["swap_roles"] = True
    x0 = certificate_x0(cfg)
    cert = None
    if x0 is not None:
        cert = certify_blowup(state, cfg.model, x0, cfg.cert_theorem)
        cert.swap_roles = cfg.swap_roles
        if cfg.swap_roles:
            cert.notes.append("roles swapped: the certificate concerns the v-component")
    return state, prov, cert


def _pointwise_monitor(reports) -> dict:
    worst = -math.inf
    for rep in reports:
        sm = rep.sup_m
        scale = max(sm, 1.0)
        worst = max(worst, (rep.sup_u - sm) / scale, (rep.sup_ux - sm) / scale, (rep.sup_uxx - 2 * sm) / scale)
    return {"name": "pointwise", "passed": bool(worst <= POINTWISE_SLACK), "worst_excess": worst,
            "slack": POINTWISE_SLACK}


def _criterion_check(result: RunResult, cum: np.ndarray) -> dict:
    finite = bool(np.all(np.isfinite(cum)))
    monotone = bool(np.all(np.diff(cum) >= 0))
    if result.verdict is Verdict.BLOWUP_DETECTED:
        passed = finite and monotone
    else:
        passed = finite
    return {"name": "criterion", "passed": passed, "finite": finite, "monotone": monotone,
            "final": float(cum[-1]), "verdict": result.verdict.value}


def evaluate_monitors(cfg: ExperimentConfig, cert, state0: StatePair, result: RunResult, cum) -> dict:
    reports = result.norm_reports
    out: dict = {}
    mon = cfg.monitors
    thm13 = cfg.model.b == 3.0
    x0 = certificate_x0(cfg)
    trace = None
    if x0 is not None:
        trace = next((tr for tr in result.char_traces if tr.x0 == x0), None)
    nm = initial_norms(state0, 1.0)
    if mon.get("prop41") and thm13:
        if nm["w11_u0"] + nm["sup_n0"] == 0:
            out["prop41"] = {"name": "prop41", "passed": True, "margin": math.inf, "vacuous": True}
        else:
            T1 = compute_T1(max(nm["w11_u0"], 1e-300), max(nm["sup_n0"], 1e-300))
            out["prop41"] = monitor_prop41(reports, T1, DEFAULT_SLACK).to_dict()
    if mon.get("prop42") and thm13 and cert is not None and trace is not None and "T2" in cert.constants:
        out["prop42"] = monitor_prop42(trace, cert.v0_at_x0, cert.constants["T2"], DEFAULT_SLACK).to_dict()
    if mon.get("bfam") and cert is not None and trace is not None and "T5" in cert.constants:
        a, b = monitor_bfam(reports, trace, cfg.model, cert.constants["T4"], cert.constants["T5"],
                            cert.v0_at_x0, DEFAULT_SLACK)
        out["prop51"], out["prop52"] = a.to_dict(), b.to_dict()
    elif mon.get("bfam"):
        r = cfg.model.r
        nr = initial_norms(state0, r)
        if nr["w1r_u0_pow_r"] + nr["sup_n0"] > 0:
            from .certificates import _bound_monitor

            T4 = compute_T4(max(nr["w1r_u0_pow_r"], 1e-300), max(nr["sup_n0"], 1e-300), r)
            vals = [rep.sup_n + rep.w1r_u**r for rep in reports]
            out["prop51"] = _bound_monitor("prop51", [rep.t for rep in reports], vals, 2 * vals[0], T4,
                                           DEFAULT_SLACK).to_dict()
    if mon.get("gronwall") and cfg.besov:
        g = gronwall_monitor(reports)
        out["gronwall"] = {"name": "gronwall", "passed": g.passed, "sup_c": g.sup_c, "vacuous": g.vacuous,
                           "anomalies": g.anomalies}
    if mon.get("pointwise"):
        out["pointwise"] = _pointwise_monitor(reports)
    out["criterion"] = _criterion_check(result, cum)
    return out


def exit_code_for(result: RunResult, cert: Optional[BlowupCertificate]) -> int:
    predicted = cert is not None and cert.certified and cert.predicted_bound is not None
    if result.verdict is Verdict.COMPLETED:
        return EXIT_OK
    if result.verdict is Verdict.BLOWUP_DETECTED:
        return EXIT_OK if predicted else EXIT_BLOWUP
    return EXIT_OK if predicted else EXIT_UNDERFLOW


def execute(
    cfg: ExperimentConfig,
    base_dir: Optional[Path] = None,
    initial_state: Optional[StatePair] = None,
    confirm_refinement: bool = False,
) -> Outcome:
    t_wall = time.perf_counter()
    state0, prov, cert = prepare(cfg, base_dir, initial_state)
    track = list(cfg.track_x0)
    x0 = certificate_x0(cfg)
    if x0 is not None and x0 not in track:
        track.append(x0)
    r = cfg.model.r
    result = run(state0, cfg.model, cfg.policy, track_x0=track, r=r, s_hs=cfg.s_for_hs, besov=cfg.besov)
    cum = cumulative_criterion(result.times, [rep.criterion_integrand for rep in result.norm_reports])
    if cert is not None and result.verdict is Verdict.BLOWUP_DETECTED:
        cert.observed_breaking_time = result.breaking_time_estimate
    monitors = evaluate_monitors(cfg, cert, state0, result, cum)
    extras = {}
    if confirm_refinement and cert is not None:
        extras["refinement"] = refinement_check(cfg, result, base_dir)
        cert.refinement = extras["refinement"]
        cert.numerically_confirmed = extras["refinement"]["stable"] and bool(
            cert.certified
            and cert.observed_breaking_time is not None
            and cert.observed_breaking_time <= cert.predicted_bound
        )
    return Outcome(
        config=cfg,
        state0=state0,
        provenance=prov,
        certificate=cert,
        result=result,
        monitors=monitors,
        criterion_cum=cum,
        wall_clock=time.perf_counter() - t_wall,
        exit_code=exit_code_for(result, cert),
        extras=extras,
    )


def refinement_check(cfg: ExperimentConfig, result: RunResult, base_dir=None) -> dict:
    """Rerun at ``2N`` and compare verdicts and breaking times."""
    fine_cfg = replace(cfg, N=2 * cfg.N, monitors={k: False for k in cfg.monitors}, besov=False)
    fine_state, _, _ = prepare(fine_cfg, base_dir)
    fine = run(fine_state, fine_cfg.model, fine_cfg.policy, r=cfg.model.r, s_hs=cfg.s_for_hs, besov=False)
    coarse_t, fine_t = result.breaking_time_estimate, fine.breaking_time_estimate
    shift = None
    if coarse_t is not None and fine_t is not None:
        shift = abs(fine_t - coarse_t) / abs(fine_t)
    stable = fine.verdict is result.verdict and (shift is None or shift <= REFINEMENT_TOL)
    if result.verdict is Verdict.BLOWUP_DETECTED and shift is None:
        stable = False
    return {"N": cfg.N, "N_fine": 2 * cfg.N, "verdict_fine": fine.verdict.value,
            "breaking_time": coarse_t, "breaking_time_fine": fine_t, "relative_shift": shift,
            "tolerance": REFINEMENT_TOL, "stable": stable}


def record_files(out: Outcome) -> dict:
    res = out.result
    cert = out.certificate.to_dict() if out.certificate else None
    rec = {
        "schema_version": SCHEMA_VERSION,
        "tool": "gengxue",
        "tool_version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_clock_seconds": out.wall_clock,
        "platform": {"python": platform.python_version(), "numpy": np.__version__,
                     "machine": platform.machine()},
        "config": serialize_config(out.config),
        "provenance": out.provenance,
        "initial_state": {"u": out.state0.u.values.tolist(), "v": out.state0.v.values.tolist(),
                          "roles_swapped": out.config.swap_roles},
        "verdict": res.verdict.value,
        "breaking_time_estimate": res.breaking_time_estimate,
        "detection": {"reason": res.detection.reason, "fit_time": res.detection.fit_time,
                      "detection_time": res.detection.detection_time,
                      "under_resolved_at": res.under_resolved_at},
        "steps": res.steps,
        "exit_code": out.exit_code,
        "certificate": cert,
        "monitors": out.monitors,
        "norm_reports": [rep.as_dict() for rep in res.norm_reports],
        "char_traces": [tr.to_dict() for tr in res.char_traces],
        "extras": {**res.extras, **out.extras},
    }
    return {
        "norms.csv": norms_csv(res.times, res.dts, res.norm_reports, out.criterion_cum),
        "traces.csv": traces_csv(res.char_traces),
        "certificate.json": dumps_json({"schema_version": SCHEMA_VERSION, "certificate": cert}),
        "record.json": dumps_json(rec),
    }


def write_outcome(out: Outcome, out_dir) -> Path:
    return write_record_dir(out_dir, record_files(out))


def replay(record: dict, confirm_refinement: bool = False) -> Outcome:
    """Rerun a record from its stored config and initial samples."""
    cfg = parse_config(record["config"])
    init = record["initial_state"]
    grid = Grid(cfg.L, cfg.N)
    state = StatePair.from_arrays(grid, init["u"], init["v"])
    if init.get("roles_swapped"):
        # stored after the swap; undo it so prepare() applies it once
        state = state.swapped()
    return execute(cfg, initial_state=state, confirm_refinement=confirm_refinement)
