"""Report emission: canonical JSON, trace CSV and markdown summary tables."""
import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

from .certify import _jsonable

TRACE_COLUMNS = ("iter", "residual", "ratio", "err_l2", "err_linf")


def canonical_json(obj):
    """Sorted-key, whitespace-free JSON used for hashing."""
    return json.dumps(_jsonable_deep(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg):
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def _jsonable_deep(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable_deep(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable_deep(v) for v in obj]
    return _jsonable(obj)


def _ensure_dir(path):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)


def write_json(path, obj):
    _ensure_dir(path)
    text = json.dumps(_jsonable_deep(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return path


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def write_trace_csv(path, rows):
    _ensure_dir(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _cell(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "(" + ", ".join(_cell(x) for x in v) + ")"
    return str(v)


def md_table(report):
    """Markdown summary of a report dict: constants, verdicts and bounds vs measured errors."""
    lines = [f"# {report.get('task', 'report')}", ""]
    consts = report.get("constants") or {}
    if consts:
        lines += ["| constant | value | provenance |", "|---|---|---|"]
        for name in sorted(consts):
            c = consts[name]
            if isinstance(c, dict) and "value" in c:
                lines.append(f"| {name} | {_cell(c['value'])} | {c.get('provenance', '')} |")
        lines.append("")
    verdicts = report.get("verdicts") or []
    if verdicts:
        lines += ["| condition | result |", "|---|---|"]
        for v in verdicts:
            status = v.get("status")
            if status is None:
                status = "pass" if v.get("passed") else "fail"
            lines.append(f"| {v['condition']} | {status} |")
        lines.append("")
    bounds = report.get("bounds") or {}
    if bounds:
        lines += ["| quantity | measured | bound |", "|---|---|---|"]
        for name in sorted(bounds):
            b = bounds[name]
            lines.append(f"| {name} | {_cell(b.get('measured'))} | {_cell(b.get('bound'))} |")
        lines.append("")
    return "\n".join(lines)


def write_md(path, report):
    _ensure_dir(path)
    with open(path, "w") as fh:
        fh.write(md_table(report))
    return path


@dataclass
class RunManifest:
    tool_version: str
    config_hash: str
    seeds: dict
    timings: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)

    def to_dict(self):
        return {"tool_version": self.tool_version, "config_hash": self.config_hash, "seeds": self.seeds,
                "timings": self.timings, "artifacts": self.artifacts}
