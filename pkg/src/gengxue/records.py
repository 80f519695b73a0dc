"""Run records on disk: fixed-schema CSV files plus JSON documents.

A record directory holds ``norms.csv``, ``traces.csv``, ``certificate.json``
and ``record.json``.  Every file is written whole to a temporary sibling and
renamed into place, so concurrent readers never see partial files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

SCHEMA_VERSION = 1
OUTPUT_ROOT_ENV = "GENGXUE_OUTPUT_ROOT"

NORMS_COLUMNS = (
    "t", "dt", "sup_u", "sup_ux", "sup_v", "sup_vx", "w11_u", "w1r_u", "w1inf_u", "w1inf_v",
    "sup_n", "hs_u", "hs_v", "besov221_u", "besov221_v", "int_m", "int_um",
    "criterion_integral_cum", "min_ux",
)
TRACES_COLUMNS = ("t", "x0", "q", "u_at_q", "ux_at_q", "v_at_q", "n_at_q")


def default_output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "gengxue_runs"))


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(x) -> str:
    """Shortest round-trip representation; keeps CSV output bit-reproducible."""
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if hasattr(obj, "value") and not isinstance(obj, (int, float, str, bool)):
        return obj.value
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def norms_csv(times, dts, reports, criterion_cum) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(NORMS_COLUMNS)
    for t, dt, rep, crit in zip(times, dts, reports, criterion_cum):
        d = rep.as_dict()
        row = [t, dt] + [d[c] for c in NORMS_COLUMNS[2:17]] + [crit, d["min_ux"]]
        w.writerow([_num(x) for x in row])
    return buf.getvalue()


def traces_csv(traces) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACES_COLUMNS)
    for tr in traces:
        for i, t in enumerate(tr.times):
            w.writerow([_num(x) for x in (t, tr.x0, tr.q[i], tr.u_at_q[i], tr.ux_at_q[i], tr.v_at_q[i], tr.n_at_q[i])])
    return buf.getvalue()


def read_csv(path) -> dict:
    """Columns of a record CSV as lists of floats, keyed by header name."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: [float(r[i]) for r in body] for i, name in enumerate(header)}


def write_record_dir(out_dir, files: dict) -> Path:
    """Write ``{filename: text}`` atomically into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")
    for name, text in files.items():
        atomic_write_text(out / name, text)
    return out


def load_record(record_dir) -> dict:
    path = Path(record_dir) / "record.json"
    if not path.exists():
        raise FileNotFoundError(f"no record.json in {record_dir}")
    with open(path, encoding="utf-8") as fh:
        rec = json.load(fh)
    if rec.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema_version {rec.get('schema_version')!r}")
    return rec
