"""Experiment configuration: flat INI-style sections parsed with configparser.

Example::

    [model]
    family = geng_xue

    [grid]
    N = 512

    [policy]
    t_end = 1.0

    [initial]
    kind = gaussian_pair
    amp_u = 0.5

Unknown sections or keys are rejected with the offending ``section.key``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields
from typing import Optional

from .initial import InitialSpec
from .models import Family, Formulation, ModelParams
from .timestepping import StepPolicy


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the key path."""

    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


INITIAL_KEYS = {
    "gaussian_pair": {
        "amp_u": float, "amp_v": float, "center_u": float, "center_v": float,
        "width_u": float, "width_v": float, "noise": float,
    },
    "smoothed_peakon_pair": {
        "amp_u": float, "amp_v": float, "center_u": float, "center_v": float, "mollify": float,
    },
    "steep_certified": {
        "x0": float, "v0": float, "width": float, "multiplier": float,
        "theorem": str, "v_shape": str, "v_width": float,
    },
    "samples_file": {"path": str},
}

POLICY_KEYS = {
    "t_end": float, "dt_init": float, "dt_min": float, "cfl_factor": float,
    "blowup_slope_cap": float, "output_stride": int, "resolution_tol": float,
    "steepening_factor": float, "fit_window": int, "max_steps": int,
}
POLICY_DEFAULTS = {"dt_init": 0.01}

MONITOR_KEYS = ("prop41", "prop42", "bfam", "gronwall", "pointwise")
MONITOR_DEFAULTS = {"prop41": True, "prop42": True, "bfam": False, "gronwall": True, "pointwise": True}

SECTIONS = ("model", "grid", "policy", "initial", "tracking", "monitors", "certificate", "run")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParams
    L: float
    N: int
    policy: StepPolicy
    initial: InitialSpec
    track_x0: tuple = ()
    s_for_hs: float = 3.0
    monitors: dict = field(default_factory=lambda: dict(MONITOR_DEFAULTS))
    cert_x0: Optional[float] = None
    cert_theorem: Optional[str] = None
    swap_roles: bool = False
    output_dir: Optional[str] = None
    seed: int = 0
    besov: bool = True

    def __eq__(self, other):
        if not isinstance(other, ExperimentConfig):
            return NotImplemented
        return serialize_config(self) == serialize_config(other)

    __hash__ = None


def _conv(section: str, key: str, raw: str, typ):
    path = f"{section}.{key}"
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        val = typ(raw.strip())
    except ValueError:
        raise ConfigError(path, f"expected {typ.__name__}, got {raw!r}") from None
    if typ is float and not math.isfinite(val):
        raise ConfigError(path, f"must be finite, got {raw!r}")
    return val


class _Reader:
    def __init__(self, cp: configparser.ConfigParser):
        self.cp = cp
        self.used: set[tuple[str, str]] = set()

    def get(self, section, key, typ, default=None, required=False):
        if self.cp.has_option(section, key):
            self.used.add((section, key))
            return _conv(section, key, self.cp.get(section, key), typ)
        if required:
            raise ConfigError(f"{section}.{key}", "missing required key")
        return default

    def check_unused(self):
        for sec in self.cp.sections():
            if sec not in SECTIONS:
                raise ConfigError(sec, f"unknown section; expected one of {SECTIONS}")
            for key in self.cp.options(sec):
                if (sec, key) not in self.used:
                    raise ConfigError(f"{sec}.{key}", "unknown key")


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<text>", str(exc)) from None
    rd = _Reader(cp)

    family = rd.get("model", "family", str, required=True)
    try:
        family = Family(family)
    except ValueError:
        raise ConfigError("model.family", f"expected geng_xue or b_family, got {family!r}") from None
    b = rd.get("model", "b", float, 3.0)
    r = rd.get("model", "r", float, 2.0)
    form = rd.get("model", "formulation", str, Formulation.UV_NONLOCAL.value)
    try:
        form = Formulation(form)
    except ValueError:
        raise ConfigError("model.formulation", f"expected uv_nonlocal or mn_transport, got {form!r}") from None
    try:
        model = ModelParams(family, b, r, form)
    except ValueError as exc:
        raise ConfigError("model.r", str(exc)) from None
    if family is Family.GENG_XUE and cp.has_option("model", "b") and b != 3.0:
        raise ConfigError("model.b", "geng_xue fixes b = 3; use family = b_family")

    L = rd.get("grid", "L", float, 50.0)
    N = rd.get("grid", "N", int, 512)

    pol = {}
    for key, typ in POLICY_KEYS.items():
        val = rd.get("policy", key, typ, POLICY_DEFAULTS.get(key), required=(key == "t_end"))
        if val is not None:
            pol[key] = val
    try:
        policy = StepPolicy(**pol)
    except ValueError as exc:
        raise ConfigError("policy", str(exc)) from None

    kind = rd.get("initial", "kind", str, required=True)
    if kind not in INITIAL_KEYS:
        raise ConfigError("initial.kind", f"unknown kind {kind!r}; expected one of {tuple(INITIAL_KEYS)}")
    iparams = {}
    for key, typ in INITIAL_KEYS[kind].items():
        val = rd.get("initial", key, typ)
        if val is not None:
            iparams[key] = val
    if kind == "samples_file" and "path" not in iparams:
        raise ConfigError("initial.path", "missing required key for samples_file")

    track = rd.get("tracking", "x0", str, "")
    try:
        track_x0 = tuple(float(t) for t in track.replace(",", " ").split())
    except ValueError:
        raise ConfigError("tracking.x0", f"expected a list of reals, got {track!r}") from None
    if any(not math.isfinite(t) for t in track_x0):
        raise ConfigError("tracking.x0", "must be finite")

    monitors = {k: rd.get("monitors", k, bool, MONITOR_DEFAULTS[k]) for k in MONITOR_KEYS}
    if monitors["bfam"]:
        if family is not Family.B_FAMILY:
            raise ConfigError("monitors.bfam", "b-family monitors need family = b_family")
        try:
            model.require_thm14()
        except ValueError as exc:
            raise ConfigError("monitors.bfam", str(exc)) from None

    cert_x0 = rd.get("certificate", "x0", float)
    cert_theorem = rd.get("certificate", "theorem", str)
    if cert_theorem not in (None, "thm13", "thm14"):
        raise ConfigError("certificate.theorem", f"expected thm13 or thm14, got {cert_theorem!r}")
    implied = family is Family.B_FAMILY and model.b != 3.0 and cert_x0 is not None
    if cert_theorem == "thm14" or (cert_theorem is None and implied):
        try:
            model.require_thm14()
        except ValueError as exc:
            raise ConfigError("certificate.theorem", str(exc)) from None

    cfg = ExperimentConfig(
        model=model,
        L=L,
        N=N,
        policy=policy,
        initial=InitialSpec(kind, iparams),
        track_x0=track_x0,
        s_for_hs=rd.get("run", "s_for_hs", float, 3.0),
        monitors=monitors,
        cert_x0=cert_x0,
        cert_theorem=cert_theorem,
        swap_roles=rd.get("run", "swap_roles", bool, False),
        output_dir=rd.get("run", "output_dir", str),
        seed=rd.get("run", "seed", int, 0),
        besov=rd.get("run", "besov", bool, True),
    )
    rd.check_unused()
    try:
        from .spectral import Grid

        Grid(L, N)
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from None
    return cfg


def _fmt(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, float):
        return repr(val)
    return str(val)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Render ``cfg`` in the format accepted by :func:`parse_config`, all keys explicit."""
    out = []

    def section(name, items):
        out.append(f"[{name}]")
        for k, v in items:
            if v is not None:
                out.append(f"{k} = {_fmt(v)}")
        out.append("")

    m = cfg.model
    section("model", [("family", m.family.value), ("b", float(m.b)), ("r", float(m.r)),
                      ("formulation", m.formulation.value)])
    section("grid", [("L", float(cfg.L)), ("N", int(cfg.N))])
    section("policy", [(f.name, getattr(cfg.policy, f.name)) for f in fields(StepPolicy)])
    section("initial", [("kind", cfg.initial.kind)] + sorted(cfg.initial.params.items()))
    section("tracking", [("x0", ", ".join(repr(float(x)) for x in cfg.track_x0))])
    section("monitors", [(k, cfg.monitors[k]) for k in MONITOR_KEYS])
    section("certificate", [("x0", cfg.cert_x0), ("theorem", cfg.cert_theorem)])
    section("run", [("s_for_hs", float(cfg.s_for_hs)), ("swap_roles", cfg.swap_roles),
                    ("output_dir", cfg.output_dir), ("seed", int(cfg.seed)), ("besov", cfg.besov)])
    return "\n".join(out)
