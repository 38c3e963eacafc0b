"""Write the synthetic miniature corpus plus a run.toml pointing at it."""

import argparse
import json
import os

from dysaug.synth import make_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="synthetic")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sources", type=int, default=12)
    args = ap.parse_args()

    paths = make_corpus(args.out, seed=args.seed, n_sources=args.sources)
    with open(os.path.join(args.out, "run.toml"), "w") as fh:
        fh.write('out_dir = "run"\n')
        for key, path in paths.items():
            fh.write(f"{key} = {json.dumps(os.path.basename(path))}\n")
        fh.write(f"seed = {args.seed}\n")
    print(json.dumps(paths, indent=2))


if __name__ == "__main__":
    main()
