"""Approximating a source that is not an automaton.

ToyCharModel stands in for a neural character model: its next-character
distribution depends on a hash of the whole prefix, so no finite n-gram
order captures it.  Counts on a character bigram topology are estimated from
N sampled strings, and the resulting automaton is scored on fresh samples
from the source.  By N=1000 the estimate has settled at what a character
bigram can capture; the remaining gap to the source is the topology's.
"""

import math

from sfst import approximate, build_kgram_topology, perplexity
from sfst.models import ToyCharModel, sample_many, score
from sfst.ngram import make_symbols


def main():
    symbols = make_symbols(list("abcdefgh"))
    source = ToyCharModel.random(symbols, seed=11, scale=1.5, terminator_bias=1.5)
    held_out = sample_many(source, 2000, seed=999)
    words = [[symbols.name(x) for x in s[:-1]] for s in sample_many(source, 2000, seed=5)]
    topology, topo_symbols = build_kgram_topology(words, 2, vocab=list("abcdefgh"))
    assert topo_symbols == symbols

    exact = -sum(score(source, s) for s in held_out) / sum(len(s) for s in held_out)
    print(f"source cross-entropy on its own samples: {exact:.4f} nats/char")
    for n in (100, 1000, 10000, 100000):
        model = approximate(source, topology, samples=n, seed=1)
        report = perplexity(model, held_out)
        print(f"N={n:>6}: approximation {math.log(report.perplexity):.4f} nats/char")


if __name__ == "__main__":
    main()
