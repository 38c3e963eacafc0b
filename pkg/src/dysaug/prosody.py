"""F0, energy and rhythm analysis.

All contours share one framing: 25 ms frames every 10 ms, frame ``i``
covering samples ``[i*hop, i*hop + frame)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import median_filter

from .audio import AudioBuffer
from .errors import AudioError

FRAME = 0.025
HOP = 0.010
FMIN = 60.0
FMAX = 400.0
YIN_THRESHOLD = 0.15
PAUSE_DB = -40.0
MIN_SEGMENT_FRAMES = 3
SILENCE_RMS = 1e-6
DB_FLOOR_EPS = 1e-10
OCTAVE_TOL = 0.2


def framing(sample_rate):
    return int(round(FRAME * sample_rate)), int(round(HOP * sample_rate))


def n_frames(n_samples, sample_rate):
    frame, hop = framing(sample_rate)
    if n_samples < frame:
        raise AudioError(f"buffer of {n_samples} samples is shorter than one analysis frame ({frame})")
    return 1 + (n_samples - frame) // hop


def frame_centers(n, sample_rate):
    """Sample index of each frame's centre."""
    frame, hop = framing(sample_rate)
    return np.arange(n) * hop + frame / 2.0


@dataclass(frozen=True, eq=False)
class F0Track:
    hop: float
    voiced: np.ndarray
    f0: np.ndarray  # Hz, NaN where unvoiced

    def __len__(self):
        return len(self.voiced)

    @property
    def times(self):
        return np.arange(len(self.voiced)) * self.hop

    @property
    def voiced_f0(self):
        return self.f0[self.voiced]


def voiced_runs(mask):
    """(start, stop) of every maximal run of True in ``mask``."""
    m = np.concatenate([[False], np.asarray(mask, dtype=bool), [False]])
    edges = np.flatnonzero(np.diff(m.astype(np.int8)))
    return list(zip(edges[::2].tolist(), edges[1::2].tolist()))


def _smooth_voicing(voiced):
    v = voiced.copy()
    if len(v) >= 3:
        # width-3 median on booleans is a majority vote
        mid = voiced[:-2].astype(int) + voiced[1:-1] + voiced[2:]
        v[1:-1] = mid >= 2
    for a, b in voiced_runs(v):
        if b - a < MIN_SEGMENT_FRAMES:
            v[a:b] = False
    return v


def _cmnd(x, sample_rate, n):
    frame, hop = framing(sample_rate)
    tau_max = int(math.floor(sample_rate / FMIN))
    span = frame + tau_max
    xp = np.concatenate([x, np.zeros(tau_max + hop)])
    segs = sliding_window_view(xp, span)[::hop][:n]

    nfft = 1 << int(math.ceil(math.log2(span + frame)))
    head = np.fft.rfft(segs[:, :frame], nfft)
    full = np.fft.rfft(segs, nfft)
    r = np.fft.irfft(np.conj(head) * full, nfft)[:, :tau_max + 1]

    c = np.concatenate([np.zeros((n, 1)), np.cumsum(segs ** 2, axis=1)], axis=1)
    lags = np.arange(tau_max + 1)
    e_lag = c[:, lags + frame] - c[:, lags]
    d = np.maximum(c[:, frame:frame + 1] + e_lag - 2 * r, 0.0)
    d[:, 0] = 0.0

    cum = np.cumsum(d[:, 1:], axis=1)
    cmnd = np.ones_like(d)
    with np.errstate(divide="ignore", invalid="ignore"):
        cmnd[:, 1:] = np.where(cum > 0, d[:, 1:] * lags[1:] / cum, 1.0)
    return cmnd, np.sqrt(c[:, frame] / frame)


def _pick_lags(cmnd, tau_min, tau_max):
    """Per frame: first dip below threshold, followed down to its local minimum.

    Frames with no dip fall back to the global minimum and are unvoiced.
    Returns parabolically refined lags and the voicing decision.
    """
    n = len(cmnd)
    band = cmnd[:, tau_min:tau_max + 1]
    below = band < YIN_THRESHOLD
    voiced = below.any(axis=1)
    first = np.where(voiced, np.argmax(below, axis=1), np.argmin(band, axis=1))
    # descend to the bottom of the dip: first rising step at or after `first`
    rising = np.concatenate([band[:, 1:] >= band[:, :-1], np.ones((n, 1), dtype=bool)], axis=1)
    cols = np.arange(band.shape[1])
    after = rising & (cols[None, :] >= first[:, None])
    tau = tau_min + np.where(voiced, np.argmax(after, axis=1), first)

    rows = np.arange(n)
    inner = (tau > tau_min) & (tau < tau_max)
    t = np.clip(tau, 1, cmnd.shape[1] - 2)
    a, b, c = cmnd[rows, t - 1], cmnd[rows, t], cmnd[rows, t + 1]
    denom = a - 2 * b + c
    with np.errstate(divide="ignore", invalid="ignore"):
        shift = np.where(inner & (denom > 0), 0.5 * (a - c) / denom, 0.0)
    return tau + np.clip(shift, -0.5, 0.5), voiced


def estimate_f0(buffer: AudioBuffer) -> F0Track:
    """YIN-style F0 track: cumulative-mean-normalized difference, threshold 0.15."""
    sr = buffer.sample_rate
    n = n_frames(len(buffer), sr)
    cmnd, frame_rms = _cmnd(buffer.samples, sr, n)
    tau, voiced = _pick_lags(cmnd, int(math.ceil(sr / FMAX)), int(math.floor(sr / FMIN)))
    audible = frame_rms >= SILENCE_RMS
    voiced = _smooth_voicing(voiced & audible)
    f0 = np.where(voiced, np.clip(sr / tau, FMIN, FMAX), np.nan)
    for a, b in voiced_runs(voiced):
        f0[a:b] = _fix_octaves(f0[a:b])
    return F0Track(hop=framing(sr)[1] / sr, voiced=voiced, f0=f0)


def _fix_octaves(run):
    """Fold frames near half or double the run median back by an octave, then median-3."""
    rel = run / np.median(run)
    run = np.where(np.abs(rel - 0.5) < OCTAVE_TOL / 2, run * 2, run)
    run = np.where(np.abs(rel - 2.0) < OCTAVE_TOL * 2, run / 2, run)
    return np.clip(median_filter(run, size=3, mode="mirror"), FMIN, FMAX)


def energy_contour(buffer: AudioBuffer) -> np.ndarray:
    """Frame energy in dB re full scale; digital silence sits at -200 dB."""
    frame, hop = framing(buffer.sample_rate)
    n = n_frames(len(buffer), buffer.sample_rate)
    segs = sliding_window_view(buffer.samples, frame)[::hop][:n]
    rms = np.sqrt(np.mean(segs ** 2, axis=1))
    return 20.0 * np.log10(rms + DB_FLOOR_EPS)


def active_frames(energy):
    """Frames within 40 dB of the loudest frame."""
    return energy >= energy.max() + PAUSE_DB


@dataclass(frozen=True)
class ProsodyProfile:
    f0_median: float
    f0_std: float
    f0_range: float
    f0_slope: float
    jitter_proxy: float
    voiced_fraction: float
    energy_mean: float
    energy_std: float
    shimmer_proxy: float
    pause_ratio: float
    speaking_rate: float
    mean_voiced_seg: float
    max_voiced_seg: float
    rms_global: float

    @property
    def has_voicing(self):
        return self.voiced_fraction > 0

    def feature_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=np.float64)

    def to_dict(self):
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: (math.nan if d[k] is None else float(d[k])) for k in FEATURE_NAMES})


FEATURE_NAMES = tuple(f.name for f in fields(ProsodyProfile))


def _mean_abs_step(values, pair_mask):
    steps = np.abs(np.diff(values))[pair_mask]
    return float(steps.mean()) if steps.size else math.nan


def extract_profile(buffer: AudioBuffer, track: F0Track | None = None) -> ProsodyProfile:
    if track is None:
        track = estimate_f0(buffer)
    energy = energy_contour(buffer)
    v = track.voiced
    nan = math.nan

    if v.any():
        f0v = track.f0[v]
        p5, p95 = np.percentile(f0v, [5, 95])
        slope = float(np.polyfit(track.times[v], f0v, 1)[0]) if f0v.size >= 2 else nan
        runs = voiced_runs(v)
        seg_len = np.array([b - a for a, b in runs]) * track.hop
        f0_stats = dict(
            f0_median=float(np.median(f0v)),
            f0_std=float(np.std(f0v)),
            f0_range=float(p95 - p5),
            f0_slope=slope,
            jitter_proxy=_mean_abs_step(track.f0, v[1:] & v[:-1]),
            mean_voiced_seg=float(seg_len.mean()),
            max_voiced_seg=float(seg_len.max()),
        )
        n_segments = len(runs)
    else:
        f0_stats = dict.fromkeys(
            ["f0_median", "f0_std", "f0_range", "f0_slope", "jitter_proxy", "mean_voiced_seg", "max_voiced_seg"], nan)
        n_segments = 0

    active = active_frames(energy)
    ea = energy[active]
    return ProsodyProfile(
        voiced_fraction=float(v.mean()),
        energy_mean=float(ea.mean()),
        energy_std=float(ea.std()),
        shimmer_proxy=_mean_abs_step(energy, active[1:] & active[:-1]),
        pause_ratio=float(1.0 - active.mean()),
        speaking_rate=n_segments / buffer.duration,
        rms_global=buffer.rms,
        **f0_stats,
    )
