"""End-to-end command-line workflow on the bundled toy corpus.

Builds Katz bigram and trigram models, prunes the bigram topology by
expected counts, approximates the trigram onto the pruned topology (exactly
and by sampling) and evaluates everything on held-out text.  Each step is one
``sfst`` invocation; outputs land in OUTDIR (default ./tutorial_out).

    python3 demos/tutorial.py [OUTDIR]

The files written here are the frozen golden outputs under tests/golden.
"""

import io
import sys
from pathlib import Path

from sfst.cli import run

DATA = Path(__file__).resolve().parent / "data"
TRAIN = str(DATA / "toy_train.txt")
TEST = str(DATA / "toy_test.txt")

STEPS = [
    # (output file, argv)
    ("bigram.counts", ["ngram-count", "--order=2", TRAIN]),
    ("trigram.counts", ["ngram-count", "--order=3", TRAIN]),
    ("katz2.fst", ["ngram-make", "--write-symbols", "{out}/words.syms", "{out}/bigram.counts"]),
    ("katz3.fst", ["ngram-make", "{out}/trigram.counts"]),
    ("katz2.cnt.fst", ["count", "--symbols={out}/words.syms", "{out}/katz2.fst",
                       "{out}/katz2.fst"]),
    ("pruned.fst", ["ngram-prune", "--symbols={out}/words.syms", "--theta=0.02",
                    "{out}/katz2.fst", "{out}/katz2.cnt.fst"]),
    ("greedy.fst", ["ngram-prune", "--symbols={out}/words.syms", "--theta=0.02",
                    "--renormalize", "{out}/katz2.fst", "{out}/katz2.cnt.fst"]),
    ("approx.fst", ["approx", "--symbols={out}/words.syms", "{out}/katz3.fst",
                    "{out}/pruned.fst"]),
    ("approx.cnt.fst", ["count", "--symbols={out}/words.syms", "{out}/katz3.fst",
                        "{out}/pruned.fst"]),
    ("approx2.fst", ["normalize", "--symbols={out}/words.syms", "--method=kl_min",
                     "{out}/approx.cnt.fst"]),
    ("approx_sampled.fst", ["approx", "--symbols={out}/words.syms", "--samples=2000",
                            "--seed=3", "{out}/katz3.fst", "{out}/pruned.fst"]),
    ("katz3.ppl", ["perplexity", "--symbols={out}/words.syms", "--unk=<unk>",
                   "{out}/katz3.fst", TEST]),
    ("greedy.ppl", ["perplexity", "--symbols={out}/words.syms", "--unk=<unk>",
                    "{out}/greedy.fst", TEST]),
    ("approx.ppl", ["perplexity", "--symbols={out}/words.syms", "--unk=<unk>",
                    "{out}/approx.fst", TEST]),
    ("bound.ppl", ["perplexity", "--symbols={out}/words.syms", "--unk=<unk>",
                   "--lower-bound", "{out}/pruned.fst", TEST]),
    ("samples.txt", ["randgen", "--symbols={out}/words.syms", "--n=5", "--seed=1",
                     "{out}/approx.fst"]),
]


def main(outdir="tutorial_out"):
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, argv in STEPS:
        argv = [a.replace("{out}", str(out)) for a in argv]
        buf = io.StringIO()
        code = run(argv, buf)
        if code != 0:
            raise SystemExit(f"sfst {' '.join(argv)} failed with exit code {code}")
        (out / name).write_text(buf.getvalue(), encoding="utf-8", newline="\n")
        print(f"sfst {argv[0]:<12} -> {name}")
    same = (out / "approx.fst").read_bytes() == (out / "approx2.fst").read_bytes()
    print(f"approx equals count | normalize: {same}")
    for name in ("katz3.ppl", "greedy.ppl", "approx.ppl", "bound.ppl"):
        ppl = next(l for l in (out / name).read_text().splitlines() if l.startswith("perplexity"))
        print(f"{name:<11} {ppl.split()[1]}")


if __name__ == "__main__":
    main(*sys.argv[1:])
