"""
Write a synthetic crisis corpus (manifest + PNG images) for running the pipeline without
CrisisMMD.

  python tools/synth_corpus.py                          CrisisMMD class counts -> data/synthetic
  python tools/synth_corpus.py --per-class 20 --splits train dev test --out data/tiny
  python tools/synth_corpus.py --strength 0 --out data/null    class-independent corpus

The same arguments always produce a byte-identical corpus.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
from errors import BenchError                     # noqa: E402
from dataset.schema import Split                  # noqa: E402
from dataset.synthetic import SynthSpec, generate  # noqa: E402


def main():
    p = argparse.ArgumentParser(description="Generate a deterministic synthetic multimodal corpus.")
    p.add_argument("--out", default="data/synthetic", help="output directory")
    p.add_argument("--per-class", type=int, help="samples per class and split (default: CrisisMMD counts)")
    p.add_argument("--splits", nargs="+", choices=[s.value for s in Split], default=["train", "dev", "test"])
    p.add_argument("--strength", type=float, default=1.0, help="class signal strength in [0, 1]")
    p.add_argument("--image-size", type=int, default=32)
    p.add_argument("--vocab-size", type=int, default=200)
    p.add_argument("--format", dest="fmt", choices=["tsv", "jsonl"], default="tsv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-images", action="store_true", help="write the manifest only")
    args = p.parse_args()

    common = dict(signal_strength=args.strength, image_size=args.image_size,
                  vocab_size=args.vocab_size, seed=args.seed)
    try:
        if args.per_class is None:
            spec = SynthSpec.crisismmd(**common)
        else:
            spec = SynthSpec.uniform(args.per_class, splits=[Split(s) for s in args.splits], **common)
        manifest = generate(spec, args.out, args.fmt, write_images=not args.no_images)
    except BenchError as e:
        print(f"FAIL -- synth_corpus: {e}", file=sys.stderr)
        sys.exit(e.exit_code)
    n = sum(sum(per.values()) for per in spec.counts.values())
    print(f"PASS -- wrote {manifest} ({n} samples)")


if __name__ == "__main__":
    main()
