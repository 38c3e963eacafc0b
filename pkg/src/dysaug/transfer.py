"""Two-stage, signal-level style transfer toward dysarthric target profiles.

The speaker stage remaps pitch and formants jointly and matches loudness.
The prosody stage then moves rhythm, pitch variability and energy
variability toward the target. Stage order is fixed: prosody conversion
always operates on speaker-converted audio.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .audio import CUTOFF, AudioBuffer, bandlimited_interp
from .augment import speed_perturb, tempo_perturb, wsola, wsola_frame_params
from .errors import ValidationError
from .prosody import (
    FMAX,
    FMIN,
    ProsodyProfile,
    active_frames,
    energy_contour,
    estimate_f0,
    extract_profile,
    frame_centers,
)
from .seeding import derive_seed, stream

log = logging.getLogger(__name__)

SPEAKER_ONLY = "speaker_only"
SPEAKER_PROSODY = "speaker_prosody"
MODES = (SPEAKER_ONLY, SPEAKER_PROSODY)

PITCH_RATIO_LIMITS = (0.5, 2.0)
FACTOR_LIMITS = (0.25, 4.0)
GENDERS = ("male", "female")


def female_upsampling(gender):
    return 2 if gender == "female" else 1


@dataclass(frozen=True)
class TargetEntry:
    target_id: str
    gender: str
    profile: ProsodyProfile
    multiplicity: int = 1


@dataclass(frozen=True)
class TargetPool:
    entries: tuple

    @property
    def effective_size(self):
        return sum(e.multiplicity for e in self.entries)

    def slots(self):
        """Multiplicity-expanded list of entries."""
        return [e for e in self.entries for _ in range(e.multiplicity)]

    def __getitem__(self, target_id):
        for e in self.entries:
            if e.target_id == target_id:
                return e
        raise KeyError(target_id)


@dataclass(frozen=True)
class TransferJob:
    utt_id: str
    target_id: str
    mode: str


def build_target_pool(targets, multiplicity=female_upsampling) -> TargetPool:
    """Profile each (id, gender, buffer) target; female targets count twice by default."""
    targets = list(targets)
    if not targets:
        raise ValidationError("target list is empty")
    entries = []
    seen = set()
    for target_id, gender, buffer in targets:
        if gender not in GENDERS:
            raise ValidationError(f"target {target_id}: gender must be one of {GENDERS}, got {gender!r}")
        if target_id in seen:
            raise ValidationError(f"duplicate target id {target_id}")
        seen.add(target_id)
        try:
            profile = extract_profile(buffer)
        except Exception as exc:
            raise ValidationError(f"cannot profile target {target_id}: {exc}") from exc
        if not profile.has_voicing:
            raise ValidationError(f"target {target_id} has no voiced frames")
        entries.append(TargetEntry(target_id, gender, profile, multiplicity(gender)))
    return TargetPool(tuple(entries))


def pair_sources(manifest, pool: TargetPool, seed: int, mode: str = SPEAKER_PROSODY) -> list[TransferJob]:
    """One job per source utterance, target drawn uniformly over pool slots."""
    ids = [getattr(r, "utt_id", r) for r in manifest]
    if not ids:
        raise ValidationError("source manifest is empty")
    if not pool.entries:
        raise ValidationError("target pool is empty")
    if mode not in MODES:
        raise ValidationError(f"unknown transfer mode {mode!r}")
    slots = pool.slots()
    return [TransferJob(u, slots[int(stream(seed, u).integers(len(slots)))].target_id, mode) for u in ids]


def pairing_seed(global_seed):
    return derive_seed(global_seed, "transfer")


def _clamp(value, limits, what, trace):
    lo, hi = limits
    clamped = float(np.clip(value, lo, hi))
    if clamped != value:
        log.warning("%s %.4g clamped to %.4g", what, value, clamped)
        trace.setdefault("clamped", []).append(what)
    return clamped


def _require_voicing(profile, what="source"):
    if not profile.has_voicing:
        raise ValidationError(f"{what} has no voiced frames; cannot convert")


def _match_rms(x, target_rms):
    rms = np.sqrt(np.mean(x ** 2))
    if rms <= 0 or not np.isfinite(target_rms) or target_rms <= 0:
        return x
    x = x * (target_rms / rms)
    peak = np.max(np.abs(x))
    return x / peak if peak > 1.0 else x


def _speaker_stage(buffer, target, trace):
    source = extract_profile(buffer)
    _require_voicing(source)
    r = _clamp(target.f0_median / source.f0_median, PITCH_RATIO_LIMITS, "pitch ratio", trace)
    trace["r"] = r
    y = buffer
    if r != 1.0:
        y = tempo_perturb(speed_perturb(buffer, r), 1.0 / r)
    return y.with_samples(_match_rms(y.samples, target.rms_global))


def convert_speaker(buffer: AudioBuffer, target: ProsodyProfile, trace=None) -> AudioBuffer:
    """Shift pitch and formants by target/source F0 median, keep duration, match loudness."""
    return _speaker_stage(buffer, target, {} if trace is None else trace)


def shift_pitch_contour(buffer: AudioBuffer, ratio) -> AudioBuffer:
    """Duration-preserving pitch shift by a per-sample ratio.

    Reading the input at a variable rate scales local pitch by ``ratio`` but
    warps time; WSOLA then re-places frames on the original time axis.
    """
    x = buffer.samples
    ratio = np.asarray(ratio, dtype=np.float64)
    # warped position of every input sample
    warp = np.concatenate([[0.0], np.cumsum(1.0 / ratio)])[:len(x)]
    n_warp = int(np.floor(warp[-1])) + 1
    read_at = np.interp(np.arange(n_warp), warp, np.arange(len(x)))
    y = bandlimited_interp(x, read_at, CUTOFF * min(1.0, 1.0 / ratio.max()))

    _, hop, _ = wsola_frame_params(buffer.sample_rate)
    out_times = np.arange(len(x) // hop + 2) * hop
    centers = np.interp(out_times, np.arange(len(x)), warp)
    return buffer.with_samples(wsola(y, buffer.sample_rate, centers, len(x)))


def _rhythm_stage(buffer, source, target, trace):
    if not target.speaking_rate > 0 or not source.speaking_rate > 0:
        log.warning("speaking rate is zero; rhythm stage skipped")
        trace["tempo_ratio"] = None
        return buffer
    rt = _clamp(target.speaking_rate / source.speaking_rate, FACTOR_LIMITS, "tempo ratio", trace)
    trace["tempo_ratio"] = rt
    return buffer if abs(rt - 1.0) < 1e-9 else tempo_perturb(buffer, rt)


def _pitch_spread_stage(buffer, target, trace):
    track = estimate_f0(buffer)
    if not track.voiced.any():
        trace["f0_spread_factor"] = None
        return buffer
    f0v = track.voiced_f0
    src_std = float(np.std(f0v))
    if not np.isfinite(target.f0_std) or src_std < 1e-3:
        trace["f0_spread_factor"] = None
        return buffer
    k = _clamp(target.f0_std / src_std, FACTOR_LIMITS, "f0 spread factor", trace)
    trace["f0_spread_factor"] = k
    if abs(k - 1.0) < 1e-9:
        return buffer

    median = float(np.median(f0v))
    frame_ratio = np.ones(len(track))
    v = track.voiced
    new_f0 = np.clip(median + k * (track.f0[v] - median), FMIN, FMAX)
    frame_ratio[v] = np.clip(new_f0 / track.f0[v], *PITCH_RATIO_LIMITS)
    # linear interpolation between frame centres = 10 ms crossfade at segment joins
    centers = frame_centers(len(track), buffer.sample_rate)
    ratio = np.interp(np.arange(len(buffer)), centers, frame_ratio)
    return shift_pitch_contour(buffer, ratio)


def _energy_spread_stage(buffer, target, trace, iterations=3):
    trace["energy_spread_factor"] = None
    if not np.isfinite(target.energy_std) or target.energy_std <= 0:
        return buffer
    x = buffer.samples
    total = 1.0
    for _ in range(iterations):
        e = energy_contour(buffer.with_samples(x))
        active = active_frames(e)
        if active.sum() < 2:
            break
        cur = float(e[active].std())
        if cur < 1e-6 or abs(cur - target.energy_std) <= 0.05 * target.energy_std:
            break
        k = float(np.clip(target.energy_std / cur, *FACTOR_LIMITS))
        total *= k
        mean = float(e[active].mean())
        gain_db = np.where(active, (k - 1.0) * (e - mean), 0.0)
        centers = frame_centers(len(e), buffer.sample_rate)
        gain = 10.0 ** (np.interp(np.arange(len(x)), centers, gain_db) / 20.0)
        x = x * gain
    peak = np.max(np.abs(x))
    if peak > 1.0:
        x = x / peak
    trace["energy_spread_factor"] = total
    return buffer.with_samples(x)


def convert_prosody(buffer: AudioBuffer, target: ProsodyProfile, trace=None) -> AudioBuffer:
    """Move rhythm, F0 spread and energy spread toward ``target``.

    Rhythm: global WSOLA time-stretch so the voiced-segment rate matches.
    Pitch: each voiced frame's deviation from the utterance median F0 is
    scaled by target/source F0 std. Energy: frame gains scale the dB
    contour's spread to the target's.
    """
    trace = {} if trace is None else trace
    source = extract_profile(buffer)
    _require_voicing(source)
    y = _rhythm_stage(buffer, source, target, trace)
    y = _pitch_spread_stage(y, target, trace)
    return _energy_spread_stage(y, target, trace)


def convert(buffer: AudioBuffer, target: ProsodyProfile, mode: str, trace=None) -> AudioBuffer:
    """Speaker-only or speaker-then-prosody conversion.

    If ``trace`` is a list, one dict per executed stage is appended to it.
    """
    if mode not in MODES:
        raise ValidationError(f"unknown transfer mode {mode!r}; allowed: {', '.join(MODES)}")
    stages = [] if trace is None else trace
    info = {"stage": "speaker"}
    y = convert_speaker(buffer, target, info)
    stages.append(info)
    if mode == SPEAKER_PROSODY:
        info = {"stage": "prosody"}
        y = convert_prosody(y, target, info)
        stages.append(info)
    return y
