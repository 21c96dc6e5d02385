"""How good can any model on a given topology get on the test set?

The empirical distribution of the test corpus is itself approximated onto
the topology; the result's test perplexity is a floor that every model
sharing the topology stays above (up to the solver reaching a stationary
point rather than a certified optimum).
"""

from _common import encode, load, quietly
from sfst import approximate, count, katz_model, perplexity, threshold_prune_topology
from sfst.evaluation import topology_lower_bound
from sfst.ngram import count_ngrams


def main():
    train, test = load("toy_train.txt"), load("toy_test.txt")
    vocab = count_ngrams(train, 1).vocab
    trigram, symbols = quietly(katz_model, train, 3, vocab)
    bigram, _ = quietly(katz_model, train, 2, vocab)
    corpus = encode(test, symbols)
    counts = count(bigram, bigram.topology())

    for name, topo in [("bigram", bigram.topology()),
                       ("pruned bigram (theta 0.02)",
                        threshold_prune_topology(bigram.topology(), counts, 0.02))]:
        bound = topology_lower_bound(corpus, topo).perplexity
        approx = perplexity(approximate(trigram, topo), corpus).perplexity
        print(f"{name}: {topo.num_arcs()} arcs")
        print(f"  floor for this topology:      {bound:9.3f}")
        print(f"  trigram approximated onto it: {approx:9.3f}")
    print(f"Katz bigram itself:               {perplexity(bigram, corpus).perplexity:9.3f}")


if __name__ == "__main__":
    main()
