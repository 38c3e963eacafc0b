"""Corpus manifests: one validated record per utterance, CSV or JSONL."""

from __future__ import annotations

import csv
import glob
import json
import os
import re
from dataclasses import asdict, dataclass, fields, replace

from .errors import ValidationError

SEVERITIES = ("healthy", "mild", "moderate", "severe")
LEVELS = ("word", "sentence")
GENDERS = ("male", "female", "unknown")
LANGUAGE_RE = re.compile(r"^[A-Za-z]{2,3}(-[A-Za-z0-9]{2,8})*$")


@dataclass(frozen=True)
class UtteranceRecord:
    utt_id: str
    wav_path: str
    speaker_id: str
    gender: str
    severity: str
    level: str
    language: str
    text: str = ""

    @property
    def label(self):
        return "healthy" if self.severity == "healthy" else "dysarthric"

    def validate(self):
        if not self.utt_id:
            raise ValidationError("empty utt_id")
        for name, allowed in (("gender", GENDERS), ("severity", SEVERITIES), ("level", LEVELS)):
            value = getattr(self, name)
            if value not in allowed:
                raise ValidationError(
                    f"{self.utt_id}: {name} {value!r} is not one of: {', '.join(allowed)}")
        if not LANGUAGE_RE.match(self.language):
            raise ValidationError(f"{self.utt_id}: malformed language code {self.language!r}")
        return self


COLUMNS = tuple(f.name for f in fields(UtteranceRecord))
REQUIRED = COLUMNS[:-1]


class Manifest(list):
    """List of records plus the directory relative paths resolve against."""

    def __init__(self, records=(), root="."):
        super().__init__(records)
        self.root = root

    def resolve(self, record):
        return record.wav_path if os.path.isabs(record.wav_path) else os.path.join(self.root, record.wav_path)

    def by_id(self):
        return {r.utt_id: r for r in self}


def _rows(path):
    if path.endswith(".jsonl"):
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                if line.strip():
                    try:
                        yield n, json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise ValidationError(f"{path}:{n}: invalid JSON ({exc})") from exc
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in REQUIRED if c not in (reader.fieldnames or [])]
            if missing:
                raise ValidationError(f"{path}: missing column(s): {', '.join(missing)}")
            for n, row in enumerate(reader, 2):
                yield n, row


def ingest(path) -> Manifest:
    """Load and validate a manifest. Duplicate ids and unknown enum values are errors."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise ValidationError(f"manifest not found: {path}")
    records, seen = [], set()
    for n, row in _rows(path):
        missing = [c for c in REQUIRED if row.get(c) in (None, "")]
        if missing:
            raise ValidationError(f"{path}:{n}: missing value(s) for {', '.join(missing)}")
        rec = UtteranceRecord(**{c: str(row.get(c) or "") for c in COLUMNS}).validate()
        if rec.utt_id in seen:
            raise ValidationError(f"{path}:{n}: duplicate utt_id {rec.utt_id!r}")
        seen.add(rec.utt_id)
        records.append(rec)
    return Manifest(records, root=os.path.dirname(os.path.abspath(path)))


def write_manifest(records, path):
    path = os.fspath(path)
    if path.endswith(".jsonl"):
        with open(path, "w", encoding="utf-8") as fh:
            for r in records:
                fh.write(json.dumps(asdict(r), ensure_ascii=False, sort_keys=True) + "\n")
        return path
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow(asdict(r))
    return path


def _template_regex(pattern):
    out, pos = [], 0
    for m in re.finditer(r"\{(\w+)\}", pattern):
        out.append(re.escape(pattern[pos:m.start()]))
        name = m.group(1)
        if name not in COLUMNS:
            raise ValidationError(f"unknown template field {{{name}}}; allowed: {', '.join(COLUMNS)}")
        out.append(f"(?P<{name}>[^/]+?)")
        pos = m.end()
    out.append(re.escape(pattern[pos:]))
    return re.compile("^" + "".join(out) + "$")


def scan(root, pattern, defaults=None, text_ext=".txt") -> Manifest:
    """Build a manifest from a directory tree and a path template.

    ``pattern`` is relative to ``root`` with ``{field}`` placeholders, e.g.
    ``"{speaker_id}/{severity}/{utt_id}.wav"``. Fields absent from the
    template come from ``defaults``; ``utt_id`` defaults to the file stem
    and ``text`` to a sibling file with ``text_ext`` if one exists.
    """
    regex = _template_regex(pattern)
    glob_pat = re.sub(r"\{\w+\}", "*", pattern)
    defaults = dict(defaults or {})
    records = []
    for full in sorted(glob.glob(os.path.join(root, glob_pat), recursive=True)):
        rel = os.path.relpath(full, root).replace(os.sep, "/")
        m = regex.match(rel)
        if not m:
            continue
        values = {**defaults, **m.groupdict()}
        values.setdefault("utt_id", os.path.splitext(os.path.basename(rel))[0])
        values.setdefault("gender", "unknown")
        if "text" not in values:
            txt = os.path.splitext(full)[0] + text_ext
            values["text"] = open(txt, encoding="utf-8").read().strip() if os.path.exists(txt) else ""
        values["wav_path"] = rel
        missing = [c for c in REQUIRED if not values.get(c)]
        if missing:
            raise ValidationError(f"{rel}: no value for {', '.join(missing)} (add to the template or defaults)")
        records.append(UtteranceRecord(**{c: values[c] for c in COLUMNS}).validate())
    ids = [r.utt_id for r in records]
    dup = {i for i in ids if ids.count(i) > 1}
    if dup:
        raise ValidationError(f"duplicate utt_id(s) from template: {', '.join(sorted(dup))}")
    return Manifest(records, root=os.path.abspath(root))


def with_paths(records, mapping, root):
    """Copy of ``records`` pointing at new wav paths (utt_id -> path)."""
    return Manifest([replace(r, wav_path=mapping[r.utt_id]) for r in records], root=root)
