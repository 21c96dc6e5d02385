"""KL-minimizing weights against greedy renormalization on pruned topologies.

The Katz trigram is the source.  The bigram topology is pruned at several
count thresholds; on each pruned topology two models are compared:

* greedy: the Katz bigram's surviving weights with backoff weights recomputed;
* approx: the weights minimizing KL divergence from the trigram.

The approximation is never worse in KL and usually better on held-out text.
"""

import math

from _common import encode, load, quietly
from sfst import approximate, count, katz_model, perplexity, threshold_prune_topology
from sfst.evaluation import kl_divergence
from sfst.ngram import count_ngrams


def main():
    train, test = load("toy_train.txt"), load("toy_test.txt")
    vocab = count_ngrams(train, 1).vocab
    source, symbols = quietly(katz_model, train, 3, vocab)
    bigram, _ = quietly(katz_model, train, 2, vocab)
    counts = count(bigram, bigram.topology())
    corpus = encode(test, symbols)

    print(f"{'theta':>7} {'arcs':>5} {'KL greedy':>10} {'KL approx':>10} "
          f"{'ppl greedy':>11} {'ppl approx':>11}")
    for theta in (0.0, 0.005, 0.02, 0.05, 0.2):
        greedy = threshold_prune_topology(bigram, counts, theta, keep_weights=True)
        topo = threshold_prune_topology(bigram.topology(), counts, theta)
        approx = approximate(source, topo)
        kl_g = kl_divergence(source, greedy)
        kl_a = kl_divergence(source, approx)
        pg = perplexity(greedy, corpus).perplexity
        pa = perplexity(approx, corpus).perplexity
        print(f"{theta:7.3f} {topo.num_arcs():5d} {kl_g:10.4f} {kl_a:10.4f} "
              f"{pg:11.3f} {pa:11.3f}")
        assert kl_a <= kl_g + 1e-9 or math.isinf(kl_g)


if __name__ == "__main__":
    main()
