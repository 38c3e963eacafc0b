"""Independent oracles used across the test modules."""

import struct
import wave

import numpy as np

SR = 16000


def sine(freq, duration, sr=SR, amp=0.5, phase=0.0):
    t = np.arange(int(round(duration * sr))) / sr
    return amp * np.sin(2 * np.pi * freq * t + phase)


def fft_peak(x, sr):
    """Dominant frequency: Hann-windowed, 8x zero-padded FFT, parabolic peak refinement."""
    n = 8 * len(x)
    mag = np.abs(np.fft.rfft(x * np.hanning(len(x)), n))
    k = int(np.argmax(mag[1:-1])) + 1
    a, b, c = np.log(mag[k - 1:k + 2] + 1e-300)
    k = k + 0.5 * (a - c) / (a - 2 * b + c)
    return k * sr / n


def fft_bin(n, sr):
    return sr / n


def levenshtein_table(a, b):
    """Full (len(a)+1) x (len(b)+1) dynamic-programming table; returns the distance."""
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        d[i][0] = i
    for j in range(len(b) + 1):
        d[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return d[len(a)][len(b)]


def write_pcm16(path, channels, sr):
    """Write int16 PCM with the stdlib ``wave`` module. ``channels``: list of float arrays."""
    data = np.stack(channels, axis=1)
    pcm = np.round(np.clip(data, -1, 1) * 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(len(channels))
        w.setsampwidth(2)
        w.setframerate(sr)
        w.writeframes(pcm.tobytes())
    return pcm


def read_pcm16(path):
    with wave.open(str(path), "rb") as w:
        assert w.getsampwidth() == 2
        raw = w.readframes(w.getnframes())
        return w.getframerate(), w.getnchannels(), np.frombuffer(raw, dtype="<i2")


def write_float32(path, x, sr):
    """Hand-rolled IEEE-float WAV (format tag 3)."""
    body = np.asarray(x, dtype="<f4").tobytes()
    fmt = struct.pack("<HHIIHH", 3, 1, sr, sr * 4, 4, 32)
    chunks = b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(body)) + body
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks)


def write_pcm24(path, x, sr):
    ints = np.round(np.clip(x, -1, 1) * (2 ** 23 - 1)).astype(np.int64)
    body = b"".join(int(v).to_bytes(3, "little", signed=True) for v in ints)
    fmt = struct.pack("<HHIIHH", 1, 1, sr, sr * 3, 3, 24)
    chunks = b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(body)) + body
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks)


def write_pcm8(path, x, sr):
    u8 = np.round(np.clip(x, -1, 1) * 127 + 128).astype(np.uint8)
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(1)
        w.setframerate(sr)
        w.writeframes(u8.tobytes())


ACCEPTANCE = {}


def record(n, description, ok, detail=""):
    """Log one acceptance criterion's outcome and fail the test if it did not hold."""
    ACCEPTANCE[n] = (bool(ok), description, detail)
    assert ok, f"criterion {n} ({description}) failed: {detail}"
