"""Approximating a model onto its own topology gives the model back.

A Katz bigram is trained on the toy corpus, its counts on its own topology
are computed exactly, and the KL-minimizing weights are solved for.  The
largest per-state change and the test perplexities are printed.
"""

from _common import encode, load, quietly
from sfst import approximate, katz_model, perplexity
from sfst.evaluation import kl_divergence


def main():
    train, test = load("toy_train.txt"), load("toy_test.txt")
    model, symbols = quietly(katz_model, train, 2)
    again = approximate(model, model.topology())

    worst = 0.0
    for q in model.states():
        if q == model.final:
            continue
        before = {e.label: e.weight for e in model.e_star(q)}
        after = {e.label: e.weight for e in again.e_star(q)}
        worst = max(worst, max(abs(before[x] - after[x]) for x in before))
    corpus = encode(test, symbols)
    print(f"states: {model.num_states}, arcs: {model.num_arcs()}")
    print(f"largest change of any next-word probability: {worst:.2e}")
    print(f"KL(model || approximation): {kl_divergence(model, again):.2e} nats")
    print(f"test perplexity, Katz model:    {perplexity(model, corpus).perplexity:.6f}")
    print(f"test perplexity, approximation: {perplexity(again, corpus).perplexity:.6f}")


if __name__ == "__main__":
    main()
