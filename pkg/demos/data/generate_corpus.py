"""Regenerate the bundled toy corpus (run from this directory).

A small probabilistic grammar over a few dozen words; word choices follow
Zipf-like weights so that n-gram count-of-counts behave like real text.
"""

import numpy as np

DET = ["the", "a", "this", "every", "some"]
ADJ = ["old", "small", "red", "quiet", "happy", "strange", "green", "tall"]
NOUN = ["cat", "dog", "bird", "child", "farmer", "river", "house", "tree", "garden",
        "letter", "song", "boat", "stone", "window"]
VERB_T = ["sees", "likes", "finds", "follows", "paints", "hears", "builds", "carries"]
VERB_I = ["sleeps", "sings", "waits", "runs", "falls", "laughs"]
PREP = ["near", "under", "behind", "beside", "over"]
ADV = ["slowly", "again", "today", "quietly"]


def zipf_pick(rng, words, s=1.1):
    w = 1.0 / np.arange(1, len(words) + 1) ** s
    return words[rng.choice(len(words), p=w / w.sum())]


def noun_phrase(rng):
    out = [zipf_pick(rng, DET)]
    if rng.random() < 0.35:
        out.append(zipf_pick(rng, ADJ))
    out.append(zipf_pick(rng, NOUN))
    if rng.random() < 0.15:
        out += [zipf_pick(rng, PREP)] + noun_phrase(rng)
    return out


def sentence(rng):
    out = noun_phrase(rng)
    if rng.random() < 0.6:
        out += [zipf_pick(rng, VERB_T)] + noun_phrase(rng)
    else:
        out.append(zipf_pick(rng, VERB_I))
    if rng.random() < 0.25:
        out.append(zipf_pick(rng, ADV))
    return out


def main():
    rng = np.random.default_rng(20240611)
    for name, n in (("toy_train.txt", 200), ("toy_test.txt", 100)):
        with open(name, "w", encoding="utf-8") as fh:
            for _ in range(n):
                fh.write(" ".join(sentence(rng)) + "\n")


if __name__ == "__main__":
    main()
