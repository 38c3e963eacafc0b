"""Synthetic tone-complex "speech" and a miniature labelled corpus.

Utterances are trains of harmonic-complex syllables. Each pseudo-severity
controls syllable rate, F0 irregularity, loudness irregularity and pause
length, so prosodic features separate the strata the way real recordings
roughly would.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .audio import CANONICAL_RATE, AudioBuffer, write_wav
from .seeding import stream

N_HARMONICS = 6
NOISE_FLOOR = 10 ** (-70 / 20)


def harmonic_tone(f0, duration, sample_rate=CANONICAL_RATE, amplitude=0.3, n_harmonics=N_HARMONICS):
    """Vowel-like harmonic complex; ``f0`` may be a scalar or a per-sample contour."""
    n = int(round(duration * sample_rate))
    f0 = np.broadcast_to(np.asarray(f0, dtype=np.float64), (n,))
    phase = 2 * np.pi * np.cumsum(f0) / sample_rate
    x = np.zeros(n)
    for h in range(1, n_harmonics + 1):
        x += np.sin(h * phase) / h
    return amplitude * x / np.max(np.abs(x))


def vibrato_tone(f0, depth, rate, duration, sample_rate=CANONICAL_RATE, amplitude=0.3):
    t = np.arange(int(round(duration * sample_rate))) / sample_rate
    return harmonic_tone(f0 + depth * np.sin(2 * np.pi * rate * t), duration, sample_rate, amplitude)


def _ramp(x, sample_rate, ramp=0.01):
    m = min(int(ramp * sample_rate), len(x) // 2)
    if m:
        w = 0.5 - 0.5 * np.cos(np.pi * np.arange(m) / m)
        x[:m] *= w
        x[-m:] *= w[::-1]
    return x


def syllable_train(f0s, gains_db, syllable_dur, gap_dur, sample_rate=CANONICAL_RATE,
                   edge=0.1, amplitude=0.3, rng=None):
    """Concatenate tone syllables separated by gaps, with silent edges.

    ``f0s`` are per-syllable (start, end) F0 pairs or scalars; ``gains_db``
    per-syllable level offsets. A -70 dB noise floor is added when ``rng``
    is given.
    """
    pieces = [np.zeros(int(edge * sample_rate))]
    for i, (f0, g) in enumerate(zip(f0s, gains_db)):
        a, b = (f0, f0) if np.isscalar(f0) else f0
        n = int(round(syllable_dur * sample_rate))
        syl = harmonic_tone(np.linspace(a, b, n), syllable_dur, sample_rate, amplitude)
        pieces.append(_ramp(syl, sample_rate) * 10 ** (g / 20))
        if i < len(f0s) - 1:
            pieces.append(np.zeros(int(round(gap_dur * sample_rate))))
    pieces.append(np.zeros(int(edge * sample_rate)))
    x = np.concatenate(pieces)
    if rng is not None:
        x = x + NOISE_FLOOR * rng.standard_normal(len(x))
    return AudioBuffer(x, sample_rate)


@dataclass(frozen=True)
class SeverityStyle:
    rate: float  # syllables per second
    f0_jitter: float  # relative per-syllable F0 scatter
    glide: float  # relative within-syllable F0 drift
    gain_sd: float  # dB
    duty: float  # voiced share of each syllable period


STYLES = {
    "healthy": SeverityStyle(rate=4.0, f0_jitter=0.03, glide=0.02, gain_sd=1.5, duty=0.6),
    "mild": SeverityStyle(rate=3.2, f0_jitter=0.07, glide=0.05, gain_sd=3.5, duty=0.55),
    "moderate": SeverityStyle(rate=2.6, f0_jitter=0.11, glide=0.08, gain_sd=5.5, duty=0.5),
    "severe": SeverityStyle(rate=2.0, f0_jitter=0.16, glide=0.12, gain_sd=8.0, duty=0.45),
}

BASE_F0 = {"male": 120.0, "female": 210.0}

VOCAB = ["casa", "perro", "agua", "luna", "verde", "mesa", "libro", "cielo", "mano", "tierra",
         "fuego", "camino", "ventana", "puerta", "rojo", "nube", "flor", "piedra", "sol", "mar"]


def synth_utterance(severity, gender, n_syllables, rng, sample_rate=CANONICAL_RATE, speaker_f0=None):
    style = STYLES[severity]
    base = speaker_f0 if speaker_f0 is not None else BASE_F0[gender]
    period = 1.0 / style.rate
    syl = period * style.duty
    gap = period - syl
    f0s = []
    for _ in range(n_syllables):
        start = base * (1 + style.f0_jitter * rng.standard_normal())
        end = start * (1 + style.glide * rng.standard_normal())
        f0s.append((float(np.clip(start, 70, 380)), float(np.clip(end, 70, 380))))
    gains = style.gain_sd * rng.standard_normal(n_syllables)
    gains -= gains.max()
    return syllable_train(f0s, gains, syl, gap, sample_rate, rng=rng)


def _text(n_words, rng):
    return " ".join(VOCAB[i] for i in rng.integers(len(VOCAB), size=n_words))


def corrupt_text(text, error_rate, rng):
    """Character-level substitutions/deletions/insertions at ``error_rate``."""
    alphabet = "abcdefghijklmnopqrstuvwxyz "
    out = []
    for ch in text:
        u = rng.random()
        if u < error_rate / 3:
            out.append(alphabet[rng.integers(len(alphabet))])
        elif u < 2 * error_rate / 3:
            continue
        elif u < error_rate:
            out.extend([ch, alphabet[rng.integers(len(alphabet))]])
        else:
            out.append(ch)
    return "".join(out)


ASR_ERROR = {"healthy": 0.08, "mild": 0.2, "moderate": 0.35, "severe": 0.55}

# (severity, gender) per corpus speaker
CORPUS_SPEAKERS = [
    ("healthy", "male"), ("healthy", "female"), ("healthy", "male"), ("healthy", "female"),
    ("mild", "male"), ("mild", "female"),
    ("moderate", "male"), ("moderate", "female"),
    ("severe", "male"), ("severe", "female"),
]


def make_corpus(out_dir, seed=0, words_per_speaker=4, sentences_per_speaker=2, n_sources=12,
                language="es", sample_rate=CANONICAL_RATE):
    """Write a miniature corpus and return the paths of its manifests.

    Produces ``corpus.csv`` (labelled healthy/dysarthric speakers at word and
    sentence level), ``sources.csv`` (healthy sentences to augment),
    ``targets.json`` (one word per dysarthric speaker) and
    ``hypotheses.tsv`` (simulated ASR output, worse with severity).
    """
    from .manifest import UtteranceRecord, write_manifest

    os.makedirs(os.path.join(out_dir, "wav"), exist_ok=True)
    records, hyps, targets = [], [], []

    def emit(utt_id, spk, severity, gender, level, rng):
        n_words = 1 if level == "word" else int(rng.integers(3, 6))
        n_syl = int(rng.integers(1, 3)) if level == "word" else 2 * n_words
        spk_f0 = BASE_F0[gender] * (1 + 0.08 * stream(seed, "speaker", spk).standard_normal())
        buf = synth_utterance(severity, gender, n_syl, rng, sample_rate, speaker_f0=spk_f0)
        rel = os.path.join("wav", f"{utt_id}.wav")
        write_wav(buf, os.path.join(out_dir, rel))
        return UtteranceRecord(utt_id, rel, spk, gender, severity, level, language, _text(n_words, rng))

    for s, (severity, gender) in enumerate(CORPUS_SPEAKERS):
        spk = f"spk{s:02d}"
        for i in range(words_per_speaker + sentences_per_speaker):
            level = "word" if i < words_per_speaker else "sentence"
            utt_id = f"{spk}_{level[0]}{i:02d}"
            rng = stream(seed, "corpus", utt_id)
            rec = emit(utt_id, spk, severity, gender, level, rng)
            records.append(rec)
            hyps.append((utt_id, corrupt_text(rec.text, ASR_ERROR[severity], rng)))
            if severity != "healthy" and i == 0:
                targets.append({"target_id": spk, "gender": gender, "wav_path": rec.wav_path})

    sources = []
    for j in range(n_sources):
        gender = "male" if j % 2 == 0 else "female"
        utt_id = f"src{j:03d}"
        rng = stream(seed, "source", utt_id)
        sources.append(emit(utt_id, f"src_spk{j % 4}", "healthy", gender, "sentence", rng))

    paths = {
        "corpus": os.path.join(out_dir, "corpus.csv"),
        "sources": os.path.join(out_dir, "sources.csv"),
        "targets": os.path.join(out_dir, "targets.json"),
        "hypotheses": os.path.join(out_dir, "hypotheses.tsv"),
    }
    write_manifest(records, paths["corpus"])
    write_manifest(sources, paths["sources"])
    with open(paths["targets"], "w") as fh:
        json.dump(targets, fh, indent=2)
    with open(paths["hypotheses"], "w", encoding="utf-8") as fh:
        fh.write("utt_id\thypothesis\n")
        for utt_id, hyp in hyps:
            fh.write(f"{utt_id}\t{hyp}\n")
    return paths
