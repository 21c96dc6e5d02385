"""Shared helpers for the demo scripts."""

import warnings
from pathlib import Path

from sfst.textio import encode_corpus, tokenize_corpus

DATA = Path(__file__).resolve().parent / "data"


def load(name):
    return tokenize_corpus((DATA / name).read_text(encoding="utf-8"))


def encode(corpus, symbols):
    return encode_corpus(corpus, symbols, unk="<unk>")[0]


def quietly(fn, *args, **kw):
    # small corpora make Good-Turing degenerate at some orders; the demos expect that
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return fn(*args, **kw)
