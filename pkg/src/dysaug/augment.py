"""Speed (resampling) and tempo (WSOLA) perturbation over a fixed ratio grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio import CUTOFF, AudioBuffer, bandlimited_interp
from .errors import AudioError, ValidationError
from .seeding import derive_seed, stream

METHODS = ("speed", "tempo")

WSOLA_FRAME = 0.030
WSOLA_TOLERANCE = 0.0075


def ratio_grid() -> list[float]:
    """0.75 .. 1.25 in steps of 0.05, without 1.0."""
    return [round(0.75 + 0.05 * i, 2) for i in range(11) if i != 5]


def speed_perturb(buffer: AudioBuffer, rs: float) -> AudioBuffer:
    """Play the buffer ``rs`` times faster at the same sample rate.

    Pitch and tempo both scale by ``rs``; duration becomes ``duration / rs``.
    """
    if rs <= 0:
        raise ValidationError(f"speed ratio must be positive, got {rs}")
    if rs == 1.0:
        return AudioBuffer(buffer.samples.copy(), buffer.sample_rate)
    n_out = int(round(len(buffer) / rs))
    positions = np.arange(n_out) * rs
    y = bandlimited_interp(buffer.samples, positions, CUTOFF * min(1.0, 1.0 / rs))
    return buffer.with_samples(y)


def _hann(n):
    # periodic Hann: overlaps to a constant at 50% hop
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)


def wsola_frame_params(sample_rate):
    frame = int(round(WSOLA_FRAME * sample_rate))
    frame += frame % 2
    return frame, frame // 2, int(round(WSOLA_TOLERANCE * sample_rate))


def wsola(x, sample_rate, centers, n_out):
    """Overlap-add ``x`` onto an output grid, following a time map.

    ``centers[k]`` is the nominal input position (in samples) whose
    neighbourhood should land at output position ``k * hop``. Each frame is
    shifted within the search tolerance to best continue the previous frame
    (normalized cross-correlation).
    """
    frame, hop, tol = wsola_frame_params(sample_rate)
    half = frame // 2
    win = _hann(frame)
    pad = frame + tol + 1
    xp = np.concatenate([np.zeros(pad), np.asarray(x, dtype=np.float64), np.zeros(pad + frame)])
    hi = len(xp) - frame - tol - 1

    n_frames = len(centers)
    out = np.zeros(n_frames * hop + frame)
    wsum = np.zeros_like(out)
    prev = None
    for k, c in enumerate(centers):
        nominal = int(np.clip(round(c) - half + pad, tol, hi))
        pos = nominal
        if prev is not None:
            template = xp[prev + hop:prev + hop + frame]
            t_energy = float(template @ template)
            if t_energy > 1e-12:
                region = xp[nominal - tol:nominal + tol + frame]
                cc = np.correlate(region, template, mode="valid")
                c2 = np.concatenate([[0.0], np.cumsum(region ** 2)])
                energy = c2[frame:] - c2[:-frame]
                score = cc / np.sqrt(np.maximum(energy, 1e-12))
                pos = nominal - tol + int(np.argmax(score))
        out[k * hop:k * hop + frame] += win * xp[pos:pos + frame]
        wsum[k * hop:k * hop + frame] += win
        prev = pos

    y = np.where(wsum > 1e-6, out / np.maximum(wsum, 1e-6), 0.0)
    # output sample j sits at time j - half
    return y[half:half + n_out]


def tempo_perturb(buffer: AudioBuffer, rt: float) -> AudioBuffer:
    """Change duration by ``1 / rt`` while keeping pitch (WSOLA)."""
    if rt <= 0:
        raise ValidationError(f"tempo ratio must be positive, got {rt}")
    frame, hop, _ = wsola_frame_params(buffer.sample_rate)
    if len(buffer) < frame:
        raise AudioError(f"buffer of {len(buffer)} samples is shorter than one WSOLA window ({frame})")
    n_out = int(round(len(buffer) / rt))
    n_frames = n_out // hop + 2
    centers = np.arange(n_frames) * hop * rt
    y = wsola(buffer.samples, buffer.sample_rate, centers, n_out)
    return buffer.with_samples(y)


PERTURB = {"speed": speed_perturb, "tempo": tempo_perturb}


@dataclass(frozen=True)
class AugmentSpec:
    utt_id: str
    method: str
    ratio: float

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}; allowed: {', '.join(METHODS)}")
        if self.ratio not in ratio_grid():
            raise ValidationError(f"ratio {self.ratio} not in the perturbation grid")

    def apply(self, buffer: AudioBuffer) -> AudioBuffer:
        return PERTURB[self.method](buffer, self.ratio)


@dataclass
class AugmentPlan:
    seed: int
    method: str
    specs: dict[str, AugmentSpec] = field(default_factory=dict)

    def __len__(self):
        return len(self.specs)


def _utt_ids(manifest):
    return [getattr(r, "utt_id", r) for r in manifest]


def build_plan(manifest, method: str, seed: int) -> AugmentPlan:
    """Assign every utterance one grid ratio, drawn from its own RNG stream.

    The stream is keyed on (seed, utt_id), so assignments do not depend on
    manifest order or on how the work is later scheduled.
    """
    ids = _utt_ids(manifest)
    if not ids:
        raise ValidationError("cannot build an augmentation plan for an empty manifest")
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; allowed: {', '.join(METHODS)}")
    grid = ratio_grid()
    plan = AugmentPlan(seed=seed, method=method)
    for utt in ids:
        choice = int(stream(seed, utt).integers(len(grid)))
        plan.specs[utt] = AugmentSpec(utt, method, grid[choice])
    return plan


def plan_seed(global_seed, method):
    return derive_seed(global_seed, "augment", method)
