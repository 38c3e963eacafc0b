"""Pair each synthetic source with a dysarthric target and report how far conversion moves its prosody."""

import argparse
import tempfile

from dysaug import pipeline as pl
from dysaug import transfer as tr
from dysaug.audio import load
from dysaug.manifest import ingest
from dysaug.prosody import extract_profile
from dysaug.synth import make_corpus

FEATURES = ("f0_median", "f0_std", "energy_std", "speaking_rate")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sources", type=int, default=12)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        paths = make_corpus(tmp, seed=args.seed, n_sources=args.sources)
        man = ingest(paths["sources"])
        pool = tr.build_target_pool(pl.load_targets(paths["targets"]))
        jobs = tr.pair_sources(man, pool, tr.pairing_seed(args.seed))
        print("utt     target  " + "  ".join(f"{f:>26}" for f in FEATURES))
        print(" " * 16 + "  ".join(f"{'src -> spk -> pros (tgt)':>26}" for _ in FEATURES))
        for rec, job in zip(man, jobs):
            x = load(man.resolve(rec))
            target = pool[job.target_id].profile
            stages = [extract_profile(x), extract_profile(tr.convert(x, target, tr.SPEAKER_ONLY)),
                      extract_profile(tr.convert(x, target, tr.SPEAKER_PROSODY))]
            cells = []
            for f in FEATURES:
                a, b, c = (getattr(p, f) for p in stages)
                cells.append(f"{a:6.1f}>{b:6.1f}>{c:6.1f} ({getattr(target, f):5.1f})")
            print(f"{rec.utt_id:<7} {job.target_id:<7} " + "  ".join(f"{c:>26}" for c in cells))


if __name__ == "__main__":
    main()
