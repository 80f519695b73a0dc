"""Command-line interface: ``gengxue {run,certify,riccati,selftest,sweep,report,replay}``.

Exit codes: 0 success (including a blow-up the certificate predicted), 1 bad
input or I/O failure, 2 unpredicted blow-up, 3 step-size underflow without a
certified prediction, 64 command-line usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, parse_config
from .records import atomic_write_text, default_output_root, dumps_json, load_record, SCHEMA_VERSION


EXIT_ERROR = 1
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from None
    return parse_config(text), path


def _output_dir(arg, cfg, cfg_path: Path) -> Path:
    if arg:
        return Path(arg)
    if cfg.output_dir:
        out = Path(cfg.output_dir)
        return out if out.is_absolute() else cfg_path.parent / out
    return default_output_root() / cfg_path.stem


def _summary_line(out) -> str:
    res = out.result
    cert = out.certificate
    parts = [f"verdict={res.verdict.value}", f"steps={res.steps}", f"t={res.final_state.t:.6g}"]
    if res.breaking_time_estimate is not None:
        parts.append(f"breaking_time={res.breaking_time_estimate:.6g}")
    if cert is not None:
        parts.append(f"certified={cert.certified}")
        if cert.predicted_bound is not None:
            parts.append(f"predicted_bound={cert.predicted_bound:.6g}")
    failed = [k for k, m in out.monitors.items() if not m.get("passed", True)]
    parts.append("monitors=" + ("ok" if not failed else "FAIL:" + ",".join(failed)))
    return " ".join(parts)


def cmd_run(args) -> int:
    from .experiment import execute, write_outcome

    cfg, path = _load_config(args.config)
    out = execute(cfg, base_dir=path.parent, confirm_refinement=args.confirm_refinement)
    dest = write_outcome(out, _output_dir(args.output_dir, cfg, path))
    print(_summary_line(out))
    print(f"record={dest}")
    return out.exit_code


def cmd_certify(args) -> int:
    from .experiment import certificate_x0, prepare

    cfg, path = _load_config(args.config)
    if certificate_x0(cfg) is None:
        raise ConfigError("certificate.x0", "certify needs a certificate point")
    _, _, cert = prepare(cfg, base_dir=path.parent)
    dest = _output_dir(args.output_dir, cfg, path)
    dest.mkdir(parents=True, exist_ok=True)
    atomic_write_text(dest / "certificate.json", dumps_json({"schema_version": SCHEMA_VERSION,
                                                             "certificate": cert.to_dict()}))
    bound = "none" if cert.predicted_bound is None else f"{cert.predicted_bound:.6g}"
    print(f"theorem={cert.theorem} certified={cert.certified} slope_threshold={cert.slope_threshold} "
          f"u0x={cert.u0x_at_x0:.6g} predicted_bound={bound}")
    print(f"certificate={dest / 'certificate.json'}")
    return 0


def cmd_riccati(args) -> int:
    from .riccati import RiccatiHypothesisError, riccati_bound, riccati_integrate

    try:
        bound = riccati_bound(args.a, args.b, args.f0)
        numeric = riccati_integrate(args.a, args.b, args.f0, args.slope_cap)
    except RiccatiHypothesisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"bound={bound:.6f} numeric={numeric:.6f}")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import SUITES, format_table, run_selftest

    names = args.only or None
    if names:
        unknown = [n for n in names if n not in SUITES]
        if unknown:
            raise ConfigError("--only", f"unknown suites {unknown}; available {list(SUITES)}")
    results = run_selftest(names)
    print(format_table(results))
    return 0 if all(r.passed for r in results) else EXIT_ERROR


def _parse_param(spec: str):
    key, sep, values = spec.partition("=")
    if not sep or "." not in key or not values:
        raise ConfigError("--param", f"expected section.key=v1,v2,..., got {spec!r}")
    return key.split(".", 1), [v.strip() for v in values.split(",")]


def _apply_overrides(text: str, overrides) -> str:
    import configparser

    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(text)
    for (section, key), value in overrides:
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, value)
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _sweep_point(job):
    from .experiment import execute, write_outcome

    index, text, base_dir, out_dir = job
    cfg = parse_config(text)
    out = execute(cfg, base_dir=Path(base_dir))
    write_outcome(out, out_dir)
    cert = out.certificate
    return {
        "index": index,
        "verdict": out.result.verdict.value,
        "exit_code": out.exit_code,
        "breaking_time_estimate": out.result.breaking_time_estimate,
        "predicted_bound": None if cert is None else cert.predicted_bound,
        "certified": None if cert is None else cert.certified,
        "record": str(out_dir),
    }


def cmd_sweep(args) -> int:
    path = Path(args.config)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from None
    parse_config(text)
    axes = [_parse_param(p) for p in args.param]
    keys = [k for k, _ in axes]
    points = list(itertools.product(*[vals for _, vals in axes])) if axes else [()]
    root = Path(args.output_dir) if args.output_dir else default_output_root() / f"{path.stem}_sweep"
    jobs = []
    for i, combo in enumerate(points):
        point_text = _apply_overrides(text, list(zip(keys, combo)))
        parse_config(point_text)  # fail fast, before any worker starts
        jobs.append((i, point_text, str(path.parent), str(root / f"point_{i:03d}")))
    if args.workers == 1:
        rows = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    buf = io.StringIO()
    names = [".".join(k) for k in keys]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index"] + names + ["verdict", "exit_code", "breaking_time_estimate", "predicted_bound",
                                    "certified", "record"])
    for combo, row in zip(points, rows):
        w.writerow([row["index"], *combo, row["verdict"], row["exit_code"], row["breaking_time_estimate"],
                    row["predicted_bound"], row["certified"], row["record"]])
    root.mkdir(parents=True, exist_ok=True)
    atomic_write_text(root / "summary.csv", buf.getvalue())
    print(f"points={len(rows)} summary={root / 'summary.csv'}")
    return 0


def format_report(rec: dict) -> str:
    lines = [f"record schema {rec['schema_version']}, gengxue {rec['tool_version']}, "
             f"created {rec['created_utc']}, wall clock {rec['wall_clock_seconds']:.2f}s"]
    lines.append(f"verdict: {rec['verdict']} after {rec['steps']} steps (exit code {rec['exit_code']})")
    det = rec["detection"]
    if rec["breaking_time_estimate"] is not None:
        lines.append(f"breaking time estimate: {rec['breaking_time_estimate']:.6g} "
                     f"(reason {det['reason']}, detected at t={det['detection_time']:.6g})")
    cert = rec.get("certificate")
    if cert:
        lines.append(f"certificate {cert['theorem']} at x0={cert['x0']}: certified={cert['certified']}")
        lines.append(f"  v0(x0)={cert['v0_at_x0']:.6g} u0x(x0)={cert['u0x_at_x0']:.6g} "
                     f"threshold={cert['slope_threshold']} norm_sum={cert['norm_sum']:.6g}")
        for k, v in sorted(cert["constants"].items()):
            lines.append(f"  {k} = {v:.6g}")
        for k in ("predicted_bound", "riccati_bound", "statement_bound", "observed_breaking_time"):
            val = cert.get(k)
            lines.append(f"  {k}: {'n/a' if val is None else format(val, '.6g')}")
        if cert.get("refinement"):
            ref = cert["refinement"]
            lines.append(f"  refinement N={ref['N']}->{ref['N_fine']}: shift={ref['relative_shift']} "
                         f"stable={ref['stable']}")
        for note in cert.get("notes", []):
            lines.append(f"  note: {note}")
    lines.append("monitors:")
    for name, m in sorted(rec["monitors"].items()):
        extra = ", ".join(f"{k}={m[k]}" for k in ("margin", "sup_c", "worst_excess", "final") if k in m)
        lines.append(f"  {name}: {'PASS' if m.get('passed') else 'FAIL'} {extra}")
    return "\n".join(lines)


def cmd_report(args) -> int:
    rec = load_record(args.record)
    print(format_report(rec))
    return 0


def cmd_replay(args) -> int:
    from .experiment import replay, write_outcome

    rec = load_record(args.record)
    out = replay(rec)
    dest = write_outcome(out, args.output_dir)
    print(_summary_line(out))
    print(f"record={dest}")
    return out.exit_code


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gengxue", description="Pseudospectral Geng-Xue / b-family simulator and checks")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("run", help="integrate a config and write a record directory")
    s.add_argument("config")
    s.add_argument("--output-dir")
    s.add_argument("--confirm-refinement", action="store_true",
                   help="rerun at 2N and mark the certificate numerically confirmed if stable")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("certify", help="evaluate the blow-up certificate without time stepping")
    s.add_argument("config")
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_certify)

    s = sub.add_parser("riccati", help="closed-form and numeric Riccati blow-up times")
    s.add_argument("--a", type=float, required=True)
    s.add_argument("--b", type=float, required=True)
    s.add_argument("--f0", type=float, required=True)
    s.add_argument("--slope-cap", type=float, default=1e6)
    s.set_defaults(func=cmd_riccati)

    s = sub.add_parser("selftest", help="run the property suites")
    s.add_argument("--only", nargs="*", help="subset of suites")
    s.set_defaults(func=cmd_selftest)

    s = sub.add_parser("sweep", help="run a config over a parameter grid")
    s.add_argument("config")
    s.add_argument("--param", action="append", default=[], metavar="SECTION.KEY=V1,V2")
    s.add_argument("--workers", type=int, default=2)
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("report", help="summarize a record directory")
    s.add_argument("record")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("replay", help="rerun a record from its stored config and data")
    s.add_argument("record")
    s.add_argument("--output-dir", required=True)
    s.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
