"""JSON and table-layout CSV rendering for CER and dysarthric-ratio reports.

CER CSV: one row per system/language, columns severity x level (CER in %).
Ratio CSV: one row per augmentation method, columns All / Word / Sent.
Strata with no data render as ``---``.
"""

from __future__ import annotations

import csv
import json
import os

from .asr_eval import STRATA_SEVERITIES, EvalReport
from .classify import REGIMES
from .errors import ValidationError
from .manifest import LEVELS

ABSENT = "---"
LEVEL_TITLES = {"word": "Word", "sentence": "Sent."}
REGIME_TITLES = {"all": "All", "word": "Word", "sentence": "Sent."}
METHOD_TITLES = {
    "none": "None",
    "speed": "Speed",
    "tempo": "Tempo",
    "speaker_only": "Speaker-only VC",
    "speaker_prosody": "Speaker-prosody VC",
}
CER_COLUMNS = tuple((s, lv) for s in STRATA_SEVERITIES for lv in LEVELS)


def cer_column_title(severity, level):
    return f"{severity.capitalize()} {LEVEL_TITLES[level]}"


def _cell(value, scale=1.0):
    return ABSENT if value is None else f"{value * scale:.4f}"


def _parse(cell):
    return None if cell.strip() == ABSENT else float(cell)


def write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    return path


def write_cer_csv(reports, path):
    """``reports``: mapping row label -> EvalReport."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row"] + [cer_column_title(s, lv) for s, lv in CER_COLUMNS])
        for label, rep in reports.items():
            w.writerow([label] + [_cell(rep.cer(s, lv), 100.0) for s, lv in CER_COLUMNS])
    return path


def read_cer_csv(path):
    """row label -> {(severity, level): CER % or None}."""
    titles = {cer_column_title(s, lv): (s, lv) for s, lv in CER_COLUMNS}
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out[row["row"]] = {titles[k]: _parse(v) for k, v in row.items() if k in titles}
    return out


def ratio_report(table, f1_scores=None):
    return {"kind": "ratio", "rows": table, "test_f1": f1_scores or {}}


def write_ratio_csv(table, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method"] + [REGIME_TITLES[r] for r in REGIMES])
        for method, cells in table.items():
            w.writerow([METHOD_TITLES.get(method, method)] + [_cell(cells.get(r)) for r in REGIMES])
    return path


def read_ratio_csv(path):
    inverse = {v: k for k, v in METHOD_TITLES.items()}
    regimes = {v: k for k, v in REGIME_TITLES.items()}
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            method = inverse.get(row["method"], row["method"])
            out[method] = {regimes[k]: _parse(v) for k, v in row.items() if k in regimes}
    return out


def cer_report_dict(report: EvalReport, row_label=""):
    d = report.to_dict()
    d["row"] = row_label
    return d


def emit_report(report, path, fmt=None, row_label=""):
    """Write an EvalReport or a ratio report (dict from ``ratio_report``) as JSON or CSV.

    ``fmt`` defaults to the file extension.
    """
    path = os.fspath(path)
    fmt = fmt or os.path.splitext(path)[1].lstrip(".").lower()
    if fmt not in ("json", "csv"):
        raise ValidationError(f"unknown report format {fmt!r}")
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
        raise ValidationError(f"cannot write report to {path}")

    if isinstance(report, EvalReport):
        if fmt == "json":
            return write_json(cer_report_dict(report, row_label), path)
        return write_cer_csv({row_label: report}, path)
    if isinstance(report, dict) and report.get("kind") == "ratio":
        return write_json(report, path) if fmt == "json" else write_ratio_csv(report["rows"], path)
    if isinstance(report, dict) and report.get("kind") == "cer":
        return emit_report(EvalReport.from_dict(report), path, fmt, row_label or report.get("row", ""))
    raise ValidationError(f"don't know how to render {type(report).__name__}")


def load_report(path):
    """Load a report JSON: returns an EvalReport (CER) or the ratio dict."""
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    kind = d.get("kind")
    if kind == "cer":
        return EvalReport.from_dict(d), d.get("row", "")
    if kind == "ratio":
        return d, ""
    raise ValidationError(f"{path}: unknown report kind {kind!r}")

