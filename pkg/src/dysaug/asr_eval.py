"""Character error rate and severity x level stratified aggregation."""

from __future__ import annotations

import csv
import json
import os
import unicodedata
from dataclasses import dataclass, field

from .errors import ValidationError
from .manifest import LEVELS, SEVERITIES

ALL = "all"
STRATA_SEVERITIES = (ALL,) + SEVERITIES
# Table-2-style grid plus one overall cell pooling every pair
STRATA = tuple((s, lv) for s in STRATA_SEVERITIES for lv in LEVELS) + ((ALL, ALL),)


def _is_punct(ch):
    cat = unicodedata.category(ch)
    return cat[0] in "PS"


def normalize_text(text: str, language: str | None = None) -> str:
    """NFC, lowercase, strip punctuation/symbols, collapse whitespace.

    ``language`` is accepted for future per-script rules; the current rules
    are script-agnostic (scripts without case are unaffected by lowering).
    """
    text = unicodedata.normalize("NFC", text).lower()
    text = "".join(" " if _is_punct(ch) else ch for ch in text)
    return unicodedata.normalize("NFC", " ".join(text.split()))


def edit_distance(a, b) -> int:
    """Levenshtein distance over code points, unit costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def _counts(reference, hypothesis, normalize, language):
    if normalize:
        reference = normalize_text(reference, language)
        hypothesis = normalize_text(hypothesis, language)
    if not reference:
        raise ValidationError("reference is empty after normalization")
    return edit_distance(reference, hypothesis), len(reference)


def cer(reference: str, hypothesis: str, normalize=True, language=None) -> float:
    """Edits / reference length. Unbounded above: insertions can push it past 1."""
    edits, n = _counts(reference, hypothesis, normalize, language)
    return edits / n


@dataclass(frozen=True)
class TranscriptPair:
    utt_id: str
    reference: str
    hypothesis: str
    severity: str
    level: str
    language: str = "und"

    def __post_init__(self):
        if self.severity not in SEVERITIES:
            raise ValidationError(f"{self.utt_id}: severity {self.severity!r} not in {SEVERITIES}")
        if self.level not in LEVELS:
            raise ValidationError(f"{self.utt_id}: level {self.level!r} not in {LEVELS}")


@dataclass
class StratumStats:
    n_utts: int = 0
    total_ref_chars: int = 0
    total_edits: int = 0
    cer_sum: float = 0.0  # sum of per-utterance CERs, for the mean variant

    def add(self, edits, n):
        self.n_utts += 1
        self.total_ref_chars += n
        self.total_edits += edits
        self.cer_sum += edits / n


@dataclass
class EvalReport:
    pooling: str = "corpus"
    cells: dict = field(default_factory=dict)  # (severity, level) -> StratumStats

    def cer(self, severity, level):
        """CER for a stratum, or None when the stratum has no utterances."""
        st = self.cells.get((severity, level))
        if st is None or st.n_utts == 0:
            return None
        if self.pooling == "utterance":
            return st.cer_sum / st.n_utts
        return st.total_edits / st.total_ref_chars

    def to_dict(self):
        strata = {}
        for sev, lv in STRATA:
            st = self.cells.get((sev, lv))
            key = f"{sev}/{lv}"
            if st is None or st.n_utts == 0:
                strata[key] = {"absent": True}
            else:
                strata[key] = {"absent": False, "n_utts": st.n_utts, "total_ref_chars": st.total_ref_chars,
                               "total_edits": st.total_edits, "cer_sum": st.cer_sum, "cer": self.cer(sev, lv)}
        return {"kind": "cer", "pooling": self.pooling, "strata": strata}

    @classmethod
    def from_dict(cls, d):
        rep = cls(pooling=d.get("pooling", "corpus"))
        for key, cell in d["strata"].items():
            if cell.get("absent"):
                continue
            sev, lv = key.split("/")
            rep.cells[(sev, lv)] = StratumStats(cell["n_utts"], cell["total_ref_chars"], cell["total_edits"],
                                                cell.get("cer_sum", 0.0))
        return rep


def aggregate(pairs, pooling="corpus", normalize=True) -> EvalReport:
    """Pool edits and reference lengths per stratum (``pooling="corpus"``),
    or average per-utterance CERs (``pooling="utterance"``)."""
    pairs = list(pairs)
    if not pairs:
        raise ValidationError("no transcript pairs to aggregate")
    if pooling not in ("corpus", "utterance"):
        raise ValidationError(f"unknown pooling {pooling!r}")
    report = EvalReport(pooling=pooling)
    for p in pairs:
        edits, n = _counts(p.reference, p.hypothesis, normalize, p.language)
        for key in ((p.severity, p.level), (ALL, p.level), (ALL, ALL)):
            report.cells.setdefault(key, StratumStats()).add(edits, n)
    return report


def read_hypotheses(path):
    """utt_id -> hypothesis, from TSV (optional header) or JSONL."""
    path = os.fspath(path)
    hyps = {}
    if path.endswith(".jsonl"):
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    row = json.loads(line)
                    hyps[str(row["utt_id"])] = row.get("hypothesis", "")
        return hyps
    with open(path, newline="", encoding="utf-8") as fh:
        for n, row in enumerate(csv.reader(fh, delimiter="\t")):
            if not row or (n == 0 and row[0] == "utt_id"):
                continue
            hyps[row[0]] = row[1] if len(row) > 1 else ""
    return hyps


def pairs_from_manifest(manifest, hypotheses) -> list[TranscriptPair]:
    missing = [r.utt_id for r in manifest if r.utt_id not in hypotheses]
    if missing:
        raise ValidationError(f"{len(missing)} utterance(s) lack a hypothesis, e.g. {missing[0]}")
    return [TranscriptPair(r.utt_id, r.text, hypotheses[r.utt_id], r.severity, r.level, r.language)
            for r in manifest]
