"""Analysis reports: deterministic JSON and a four-section text summary."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

SECTIONS = ("MODEL", "IDENTIFY", "ESTIMATE", "REFUTE")


@dataclass
class Report:
    tool_version: str
    config: dict
    status: str
    model: dict
    identification: dict
    estimate: dict | None = None
    refutations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "status": self.status,
            "config": self.config,
            "model": self.model,
            "identification": self.identification,
            "estimate": self.estimate,
            "refutations": self.refutations,
            "warnings": self.warnings,
        }


def _scalar(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return "null"
        return format(value, ".17g")
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with floats written at 17 significant digits, keys in insertion order."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {dumps(v, indent, _level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    return _scalar(obj)


def _num(x) -> str:
    return "n/a" if x is None else format(x, ".6g")


def _text(d: dict) -> str:
    lines = []
    model = d["model"]
    lines += ["MODEL", "=====",
              f"treatment: {d['config']['treatment']}    outcome: {d['config']['outcome']}",
              f"nodes: {len(model['nodes'])}  edges: {len(model['edges'])}  "
              f"latent: {', '.join(model['latent']) or 'none'}"]
    if model["added_common_causes"]:
        lines.append("assumed common causes (from data): " + ", ".join(model["added_common_causes"]))
    ident = d["identification"]
    lines += ["", "IDENTIFY", "========", f"identified: {'yes' if ident['identified'] else 'no'}"]
    for i, e in enumerate(ident["estimands"], 1):
        lines.append(f"  [{i}] {e['kind']}: {e['expression']}")
    lines += ["", "ESTIMATE", "========"]
    est = d["estimate"]
    if est is None:
        lines.append("not estimated")
    else:
        lines.append(f"method: {est['method']}  (estimand: {est['estimand']['kind']})")
        lines.append(f"effect: {_num(est['value'])}")
        if est["ci"] is not None:
            lines.append(f"{100 * est['ci_level']:g}% CI: [{_num(est['ci'][0])}, {_num(est['ci'][1])}]")
        if est["p_value"] is not None:
            lines.append(f"permutation p-value: {_num(est['p_value'])}")
        for k, v in est["diagnostics"].items():
            lines.append(f"  {k}: {_num(v)}")
    lines += ["", "REFUTE", "======"]
    if not d["refutations"]:
        lines.append("no refuters run")
    for r in d["refutations"]:
        verdict = "PASS" if r["passed"] else "FAIL"
        lines.append(f"  {r['refuter']:<28} new effect {_num(r['new_effect']):>12}  "
                     f"p {_num(r['p_value']):>8}  {verdict}")
    if d["warnings"]:
        lines += ["", "warnings:"] + [f"  - {w}" for w in d["warnings"]]
    return "\n".join(lines) + "\n"


def render_report(report, fmt: str = "json") -> str:
    """Render a Report (or its parsed JSON dict) as ``json`` or ``text``."""
    data = report.to_dict() if isinstance(report, Report) else report
    if fmt == "json":
        return dumps(data) + "\n"
    if fmt == "text":
        return _text(data)
    raise ValueError(f"unknown report format {fmt!r}")
