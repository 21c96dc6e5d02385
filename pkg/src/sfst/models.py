"""Sequence models: the source abstraction p(x | state), sampling and scoring.

Random streams come from :func:`make_rng`, a Philox4x64 counter-based
generator keyed through ``numpy.random.SeedSequence([seed, stream])``; the
same ``(seed, stream)`` gives the same draws on every platform.
"""

import math
from abc import ABC, abstractmethod

import numpy as np

from .automaton import Automaton, SymbolTable, is_stochastic
from .errors import AutomatonError, SampleTruncated

DEFAULT_MAX_LEN = 10000


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


class _Ended:
    """State handle after the terminator has been emitted."""

    def __repr__(self):
        return "<ended>"


ENDED = _Ended()


class SequenceModel(ABC):
    symbols: SymbolTable

    @property
    def terminator(self) -> int:
        return self.symbols.terminator_id

    @abstractmethod
    def start(self):
        ...

    @abstractmethod
    def next_distribution(self, state) -> dict:
        """Map symbol id -> probability for the next symbol."""

    @abstractmethod
    def advance(self, state, symbol):
        ...


class WfaBackedModel(SequenceModel):
    """Model whose state is an automaton state; distributions are E*[q] weights."""

    def __init__(self, automaton: Automaton, check=True, tol=1e-9):
        if check and not is_stochastic(automaton, tol):
            raise AutomatonError("source automaton is not stochastic")
        self.automaton = automaton
        self.symbols = automaton.symbols
        self._dist = {}

    def start(self):
        return self.automaton.initial

    def next_distribution(self, state):
        if state is ENDED or state == self.automaton.final:
            raise ValueError("no symbols follow the terminator")
        d = self._dist.get(state)
        if d is None:
            d = {e.label: e.weight for e in self.automaton.e_star(state)}
            self._dist[state] = d
        return d

    def advance(self, state, symbol):
        if symbol == self.terminator:
            return ENDED
        e = self.automaton.resolve(state, symbol)
        if e is None:
            raise ValueError(f"symbol {symbol} cannot be read at state {state}")
        return e.dst

    def dense_tables(self):
        """(prob, dst) arrays indexed [state, label]; dst is -1 where unreadable."""
        a = self.automaton
        width = max(a.symbols.ids()) + 1
        prob = np.zeros((a.num_states, width))
        dst = np.full((a.num_states, width), -1, dtype=np.int64)
        for q in a.states():
            if q == a.final:
                continue
            for e in a.e_star(q):
                prob[q, e.label] = e.weight
                dst[q, e.label] = e.dst
        return prob, dst


class ToyCharModel(SequenceModel):
    """Small recurrent scorer standing in for a neural source.

    The state is ``(previous symbol, context hash)``; the hash folds in every
    symbol read so far, so the model is not k-th order Markov for any k.
    Logits are ``bigram[prev] + bits(hash) @ hash_proj``.
    """

    MOD = 1 << 31

    def __init__(self, symbols: SymbolTable, bigram=None, hash_proj=None, n_bits=8):
        self.symbols = symbols
        self.emit = [i for i in symbols.ids() if i != symbols.phi_id]
        self._pos = {x: k for k, x in enumerate(self.emit)}
        v = len(self.emit)
        self.n_bits = n_bits
        self.bigram = np.zeros((v + 1, v)) if bigram is None else np.asarray(bigram, float)
        self.hash_proj = np.zeros((n_bits, v)) if hash_proj is None else np.asarray(hash_proj, float)
        if self.bigram.shape != (v + 1, v) or self.hash_proj.shape != (n_bits, v):
            raise ValueError("parameter shapes do not match the symbol table")

    @classmethod
    def random(cls, symbols, seed=0, scale=1.0, terminator_bias=0.0, n_bits=8):
        rng = make_rng(seed, 0)
        v = len([i for i in symbols.ids() if i != symbols.phi_id])
        model = cls(symbols, rng.normal(0, scale, (v + 1, v)),
                    rng.normal(0, scale, (n_bits, v)), n_bits)
        model.bigram[:, model._pos[symbols.terminator_id]] += terminator_bias
        return model

    def start(self):
        return (len(self.emit), 0)

    def next_distribution(self, state):
        if state is ENDED:
            raise ValueError("no symbols follow the terminator")
        prev, h = state
        bits = (h >> np.arange(self.n_bits)) & 1
        logits = self.bigram[prev] + bits @ self.hash_proj
        logits = logits - logits.max()
        p = np.exp(logits)
        p /= p.sum()
        return dict(zip(self.emit, p.tolist()))

    def advance(self, state, symbol):
        if symbol == self.terminator:
            return ENDED
        _, h = state
        return (self._pos[symbol], (h * 1000003 + symbol + 1) % self.MOD)


def draw(dist: dict, u: float):
    """Inverse-CDF pick from a symbol->probability map (ids in ascending order)."""
    labels = sorted(dist)
    acc = 0.0
    last = None
    for x in labels:
        p = dist[x]
        if p <= 0:
            continue
        acc += p
        last = x
        if u < acc:
            return x
    return last


def sample(m: SequenceModel, seed=None, max_len=DEFAULT_MAX_LEN, rng=None):
    """Draw one terminator-ended sequence of symbol ids."""
    if max_len <= 0:
        raise ValueError("max_len must be positive")
    if rng is None:
        rng = make_rng(0 if seed is None else seed)
    state = m.start()
    out = []
    while len(out) < max_len:
        x = draw(m.next_distribution(state), rng.random())
        out.append(x)
        if x == m.terminator:
            return tuple(out)
        state = m.advance(state, x)
    raise SampleTruncated(f"no terminator within {max_len} symbols", tuple(out))


def sample_many(m: SequenceModel, n: int, seed=0, max_len=DEFAULT_MAX_LEN, skip_truncated=True):
    rng = make_rng(seed)
    out = []
    for _ in range(n):
        try:
            out.append(sample(m, max_len=max_len, rng=rng))
        except SampleTruncated:
            if not skip_truncated:
                raise
    return out


def score(m: SequenceModel, x) -> float:
    """Natural-log probability of a terminator-ended sequence."""
    if not x or x[-1] != m.terminator:
        raise ValueError("sequence must end with the terminator")
    state = m.start()
    total = 0.0
    for i, sym in enumerate(x):
        if sym not in m.symbols or sym == m.symbols.phi_id:
            raise ValueError(f"unknown symbol {sym!r}")
        if sym == m.terminator and i != len(x) - 1:
            raise ValueError("terminator inside the sequence")
        p = m.next_distribution(state).get(sym, 0.0)
        if p <= 0.0:
            return -math.inf
        total += math.log(p)
        if i < len(x) - 1:
            state = m.advance(state, sym)
    return total
