"""Mono audio buffers, WAV I/O and band-limited interpolation."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile
from scipy.special import i0

from .errors import AudioError

log = logging.getLogger(__name__)

CANONICAL_RATE = 16000

# windowed-sinc kernel: 32 taps at the lower of the two rates
KAISER_BETA = 8.6
HALF_TAPS = 16
CUTOFF = 0.95


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise AudioError(f"mono buffer expected, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise AudioError("buffer contains non-finite samples")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise AudioError(f"invalid sample rate {self.sample_rate}")
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples))) if len(self.samples) else 0.0

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples ** 2))) if len(self.samples) else 0.0

    def with_samples(self, samples) -> "AudioBuffer":
        return AudioBuffer(samples, self.sample_rate)


@dataclass(frozen=True)
class WriteInfo:
    path: str
    n_samples: int
    clipped: int


def read_wav(path) -> AudioBuffer:
    """Read a PCM (8/16/24/32-bit int) or float WAV as a mono buffer in [-1, 1].

    Multi-channel files are downmixed by averaging channels.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise AudioError(f"no such file: {path}")
    try:
        rate, data = wavfile.read(path)
    except (ValueError, EOFError, OSError) as exc:
        raise AudioError(f"cannot read WAV {path}: {exc}") from exc

    if data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        # scipy left-justifies 24-bit samples into int32
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(np.float64)
    else:
        raise AudioError(f"unsupported WAV sample type {data.dtype} in {path}")

    if x.ndim == 2:
        x = x.mean(axis=1)
    if x.size == 0:
        raise AudioError(f"zero-length audio: {path}")
    return AudioBuffer(x, rate)


def write_wav(buffer: AudioBuffer, path) -> WriteInfo:
    """Write 16-bit PCM mono. Out-of-range samples are clipped and counted."""
    if len(buffer) == 0:
        raise AudioError("refusing to write a zero-length buffer")
    x = buffer.samples
    over = np.abs(x) > 1.0
    clipped = int(over.sum())
    if clipped:
        log.warning("clipping %d samples while writing %s", clipped, path)
        x = np.clip(x, -1.0, 1.0)
    # same 2^15 scale as read_wav, so a round trip is exact to half an LSB
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    path = os.fspath(path)
    try:
        wavfile.write(path, buffer.sample_rate, pcm)
    except OSError as exc:
        raise AudioError(f"cannot write {path}: {exc}") from exc
    return WriteInfo(path, len(pcm), clipped)


TABLE_OVERSAMPLE = 512


def _kaiser(u):
    arg = np.clip(1.0 - u * u, 0.0, None)
    return np.where(arg > 0, i0(KAISER_BETA * np.sqrt(arg)) / i0(KAISER_BETA), 0.0)


def _kernel_table(cutoff, half):
    d = np.arange(-(half + 1) * TABLE_OVERSAMPLE, (half + 1) * TABLE_OVERSAMPLE + 2) / TABLE_OVERSAMPLE
    return cutoff * np.sinc(cutoff * d) * _kaiser(d / (half + 1))


def bandlimited_interp(x, positions, cutoff, chunk=8192):
    """Evaluate the band-limited reconstruction of ``x`` at fractional ``positions``.

    ``cutoff`` is the lowpass edge as a fraction of the input Nyquist. The
    Kaiser-windowed sinc is stretched by 1/cutoff so it always spans 32 taps
    at the lower rate; it is tabulated at 1/512-sample resolution and
    linearly interpolated. Samples outside the signal count as zero.
    """
    x = np.asarray(x, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.float64)
    half = int(np.ceil(HALF_TAPS / cutoff))
    table = _kernel_table(cutoff, half)
    offsets = np.arange(-half + 1, half + 1)
    xp = np.concatenate([np.zeros(half), x, np.zeros(half + 1)])
    out = np.empty(len(positions))
    for start in range(0, len(positions), chunk):
        pos = positions[start:start + chunk]
        base = np.floor(pos)
        frac = pos - base
        # table coordinate of d = frac - offset
        t = (frac[:, None] - offsets[None, :] + half + 1) * TABLE_OVERSAMPLE
        ti = t.astype(np.int64)
        tf = t - ti
        h = table[ti] * (1.0 - tf) + table[ti + 1] * tf
        idx = np.clip(base.astype(np.int64)[:, None] + offsets[None, :] + half, 0, len(xp) - 1)
        out[start:start + chunk] = np.einsum("ij,ij->i", h, xp[idx])
    return out


def resample(buffer: AudioBuffer, new_rate: int) -> AudioBuffer:
    if new_rate <= 0:
        raise AudioError(f"new_rate must be positive, got {new_rate}")
    old_rate = buffer.sample_rate
    if new_rate == old_rate:
        return AudioBuffer(buffer.samples.copy(), old_rate)
    n_out = int(round(len(buffer) * new_rate / old_rate))
    positions = np.arange(n_out) * (old_rate / new_rate)
    cutoff = CUTOFF * min(1.0, new_rate / old_rate)
    return AudioBuffer(bandlimited_interp(buffer.samples, positions, cutoff), new_rate)


def to_canonical(buffer: AudioBuffer, rate: int = CANONICAL_RATE) -> AudioBuffer:
    return buffer if buffer.sample_rate == rate else resample(buffer, rate)


def load(path, rate: int = CANONICAL_RATE) -> AudioBuffer:
    return to_canonical(read_wav(path), rate)
