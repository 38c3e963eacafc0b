"""Measure pitch and duration of a pure tone after speed and tempo perturbation at every grid ratio."""

import argparse

import numpy as np

from dysaug.audio import AudioBuffer
from dysaug.augment import ratio_grid, speed_perturb, tempo_perturb


def fft_peak(x, sr):
    n = 8 * len(x)
    mag = np.abs(np.fft.rfft(x * np.hanning(len(x)), n))
    k = int(np.argmax(mag[1:-1])) + 1
    a, b, c = np.log(mag[k - 1:k + 2])
    return (k + 0.5 * (a - c) / (a - 2 * b + c)) * sr / n


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--freq", type=float, default=440.0)
    ap.add_argument("--duration", type=float, default=2.0)
    ap.add_argument("--rate", type=int, default=16000)
    args = ap.parse_args()

    t = np.arange(int(args.duration * args.rate)) / args.rate
    tone = AudioBuffer(0.5 * np.sin(2 * np.pi * args.freq * t), args.rate)
    print(f"{'method':>6} {'R':>5} {'peak Hz':>9} {'expect':>8} {'dur s':>7} {'expect':>7}")
    for name, fn, pitch_scales in (("speed", speed_perturb, True), ("tempo", tempo_perturb, False)):
        for r in ratio_grid():
            y = fn(tone, r)
            f_exp = args.freq * r if pitch_scales else args.freq
            print(f"{name:>6} {r:5.2f} {fft_peak(y.samples, args.rate):9.2f} {f_exp:8.2f} "
                  f"{y.duration:7.4f} {args.duration / r:7.4f}")


if __name__ == "__main__":
    main()
