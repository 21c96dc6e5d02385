"""k-gram backoff topologies, Katz models and count-threshold pruning.

Symbol ids for corpus-built tables: ``<phi>`` 0, ``$`` 1, ``<unk>`` 2, then
the vocabulary in sorted order.  Histories are tuples of words; ``<s>`` marks
the sentence start and never appears as a predicted word.
"""

import warnings
from collections import Counter
from dataclasses import dataclass, field

from .automaton import Automaton, SymbolTable, check_backoff_complete
from .errors import AutomatonError, FormatError
from .klmin import assign_failure_weights, drop_unplaceable_backoff

BOS = "<s>"
UNK = "<unk>"
END = "$"
KATZ_CUTOFF = 5


def make_symbols(vocab) -> SymbolTable:
    entries = [("<phi>", 0), (END, 1), (UNK, 2)]
    for k, w in enumerate(sorted(set(vocab) - {END, UNK, BOS, "<phi>"})):
        entries.append((w, k + 3))
    return SymbolTable(entries, 0, 1)


@dataclass
class NgramCounts:
    """Counts of every n-gram of length 1..order, histories padded with ``<s>``."""
    order: int
    counts: Counter = field(default_factory=Counter)
    vocab: set = field(default_factory=set)

    def add_sentence(self, words):
        toks = [BOS] + list(words) + [END]
        for i in range(1, len(toks)):
            for n in range(1, self.order + 1):
                if i - n + 1 < 0:
                    break
                self.counts[tuple(toks[i - n + 1:i + 1])] += 1
        self.vocab.update(words)

    def merge(self, other):
        if other.order != self.order:
            raise ValueError("cannot merge counts of different orders")
        self.counts.update(other.counts)
        self.vocab |= other.vocab

    def context_counts(self):
        """history -> {word: count}."""
        ctx = {}
        for gram, c in self.counts.items():
            ctx.setdefault(gram[:-1], {})[gram[-1]] = c
        return ctx

    def to_text(self):
        lines = [f"# order {self.order}\n"]
        for gram in sorted(self.counts, key=lambda g: (len(g), g)):
            lines.append(" ".join(gram) + "\t" + str(self.counts[gram]) + "\n")
        return "".join(lines)

    @classmethod
    def from_text(cls, text, source=None):
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        order = None
        counts = Counter()
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            if line.startswith("#"):
                toks = line[1:].split()
                if len(toks) == 2 and toks[0] == "order":
                    order = int(toks[1])
                continue
            try:
                gram, c = line.rsplit("\t", 1)
                counts[tuple(gram.split())] += int(c)
            except ValueError:
                raise FormatError("expected 'w1 ... wn<TAB>count'", lineno, source) from None
        if not counts:
            raise FormatError("no n-gram counts", None, source)
        if order is None:
            order = max(len(g) for g in counts)
        vocab = {g[0] for g in counts if len(g) == 1} - {END}
        return cls(order, counts, vocab)


def count_ngrams(corpus, order, vocab=None) -> NgramCounts:
    """Count a corpus of token lists; words outside ``vocab`` become ``<unk>``."""
    if order < 1:
        raise ValueError("order must be at least 1")
    if not corpus:
        raise ValueError("empty corpus")
    known = None if vocab is None else set(vocab)
    nc = NgramCounts(order)
    for words in corpus:
        if known is not None:
            words = [w if w in known else UNK for w in words]
        nc.add_sentence(words)
    if known is not None:
        nc.vocab |= known
    return nc


class _Layout:
    """States, arcs and backoff targets of the k-gram topology."""

    def __init__(self, nc: NgramCounts, symbols: SymbolTable):
        k = nc.order
        self.k = k
        ctx = nc.context_counts()
        self.ctx = ctx
        words = [symbols.name(i) for i in symbols.ids() if i != symbols.phi_id]
        self.unigram_words = sorted(words, key=symbols.find)
        states = {()}
        if k >= 2:
            states.add((BOS,))
            states.update(h for h in ctx if 0 < len(h) <= k - 1)
        self.histories = sorted(states, key=lambda h: (len(h), h))
        self.index = {h: i for i, h in enumerate(self.histories)}
        self.final = len(self.histories)
        self.initial = self.index[(BOS,)] if k >= 2 else 0

    def state_of(self, h):
        h = h[len(h) - (self.k - 1):] if self.k > 1 else ()
        while h not in self.index:
            h = h[1:]
        return self.index[h]

    def backoff(self, h):
        return self.state_of(h[1:]) if h else None

    def successors(self, h):
        """Words read directly at history ``h``."""
        if h == ():
            return self.unigram_words
        return sorted(self.ctx.get(h, {}))


def build_kgram_topology(corpus, k, vocab=None):
    """Unweighted backoff topology; returns ``(automaton, symbols)``.

    ``corpus`` is a list of token lists or an :class:`NgramCounts`.
    """
    nc = corpus if isinstance(corpus, NgramCounts) else count_ngrams(corpus, k, vocab)
    model, symbols = _assemble(nc, None)
    return model, symbols


def _assemble(nc: NgramCounts, companions):
    """Build the topology and, when ``companions`` is given, weight it."""
    symbols = make_symbols(nc.vocab)
    lay = _Layout(nc, symbols)
    rows = []
    phi = symbols.phi_id
    unigram_labels = set(lay.unigram_words)
    for h in lay.histories:
        row = []
        for w in lay.successors(h):
            dst = lay.final if w == END else lay.state_of(h + (w,))
            row.append((symbols.find(w), 1.0, dst))
        if h:
            # a history reading every unigram word cannot back off strictly
            if not (set(lay.successors(h)) >= unigram_labels):
                row.append((phi, 1.0, lay.backoff(h)))
        rows.append(row)
    rows.append([])
    a = Automaton(rows, lay.initial, lay.final, symbols)
    if companions is None:
        return a, symbols
    ys = companions(lay, a, symbols)
    return assign_failure_weights(ys, a), symbols


def good_turing_discounts(count_of_counts: Counter, cutoff=KATZ_CUTOFF):
    """Katz discounts d_r for 1 <= r <= cutoff.

    The cutoff drops until the count-of-counts support it (n_1, n_{K+1} > 0 and
    mu < 1).  An individual d_r outside (0, 1] is replaced by 1, i.e. that count
    is left undiscounted.  Returns ``{}`` when nothing ends up discounted.
    """
    n = count_of_counts
    for kk in range(cutoff, 1, -1):
        if n.get(1, 0) == 0 or n.get(kk + 1, 0) == 0:
            continue
        mu = (kk + 1) * n[kk + 1] / n[1]
        if mu >= 1:
            continue
        d = {}
        for r in range(1, kk + 1):
            dr = 1.0
            if n.get(r, 0) and n.get(r + 1, 0):
                dr = ((r + 1) * n[r + 1] / (r * n[r]) - mu) / (1 - mu)
            d[r] = dr if 0 < dr <= 1 else 1.0
        if any(v < 1 for v in d.values()):
            return d
    return {}


def katz_model(corpus, k, vocab=None, cutoff=KATZ_CUTOFF):
    """Katz backoff model on the k-gram topology; returns ``(automaton, symbols)``."""
    nc = corpus if isinstance(corpus, NgramCounts) else count_ngrams(corpus, k, vocab)
    by_order = {}
    for gram, c in nc.counts.items():
        by_order.setdefault(len(gram), Counter())[c] += 1
    discounts = {}
    for n, coc in by_order.items():
        d = good_turing_discounts(coc, cutoff)
        if not d:
            warnings.warn(f"Good-Turing discounting is degenerate for order {n}; "
                          "using relative frequencies", RuntimeWarning, stacklevel=2)
        discounts[n] = d

    def companions(lay, a, symbols):
        ys = {}
        phi = symbols.phi_id
        for h in lay.histories:
            q = lay.index[h]
            seen = lay.ctx.get(h, {})
            total = sum(seen.values())
            d = discounts.get(len(h) + 1, {})
            probs = {w: d.get(c, 1.0) * c / total for w, c in seen.items()} if total else {}
            if h == ():
                zero = [w for w in lay.unigram_words if w not in seen]
                left = 1.0 - sum(probs.values())
                if zero and left > 0:
                    for w in zero:
                        probs[w] = left / len(zero)
                else:
                    probs = {w: c / total for w, c in seen.items()}
                    for w in zero:
                        probs[w] = 0.0
            y = {symbols.find(w): p for w, p in probs.items()}
            if a.phi_arc(q) is not None:
                left = 1.0 - sum(probs.values())
                # rounding noise, not held-out mass
                y[phi] = left if left > 1e-12 else 0.0
            ys[q] = y
        # a backoff weight needs residual mass at the backoff state
        drop_unplaceable_backoff(ys, a, tol=1e-12)
        return ys

    return _assemble(nc, companions)


def threshold_prune_topology(a: Automaton, counts, theta: float, *, keep_weights=False):
    """Drop arcs with C(x, q) < theta where backoff-completeness allows.

    An arc (q, x) goes only if every state backing off into q has already
    dropped x; states without a phi arc keep all their arcs.  With
    ``keep_weights`` the surviving arcs keep their weights and backoff weights
    are recomputed so each state normalizes (the renormalized pruned model);
    otherwise the unweighted topology is returned.
    """
    report = check_backoff_complete(a)
    if not report.ok:
        raise AutomatonError("topology is not backoff-complete")
    phi = a.phi_label
    b1 = a.backoff_sources()
    kept = {q: set(a.sigma_labels(q)) for q in a.states()}
    for q in a.phi_topological_order():
        if a.phi_arc(q) is None:
            continue
        for x in list(kept[q]):
            if counts.get(q, x) < theta and all(x not in kept[q0] for q0 in b1[q]):
                kept[q].discard(x)
    if keep_weights:
        ys = {}
        for q in a.states():
            if not a.arcs(q):
                continue
            y = {x: a.arc(q, x).weight for x in kept[q]}
            if a.phi_arc(q) is not None:
                y[phi] = max(0.0, 1.0 - sum(y.values()))
            ys[q] = y
        rows = [[(arc.label, 1.0, arc.nextstate) for arc in a.arcs(q)
                 if arc.label == phi or arc.label in kept[q]] for q in a.states()]
        pruned = Automaton(rows, a.initial, a.final, a.symbols)
        drop_unplaceable_backoff(ys, pruned)
        out = assign_failure_weights(ys, pruned)
    else:
        rows = [[(arc.label, 1.0, arc.nextstate) for arc in a.arcs(q)
                 if arc.label == phi or arc.label in kept[q]] for q in a.states()]
        out = Automaton(rows, a.initial, a.final, a.symbols)
    out = _connect(out)
    report = check_backoff_complete(out)
    if not report.ok:
        raise AutomatonError(f"pruning broke backoff-completeness: {report.violations[:3]}")
    return out


def _connect(a: Automaton) -> Automaton:
    """Drop states not on some initial-to-final path, counting phi arcs as ordinary arcs.

    Unlike :func:`sfst.automaton.trim` this keeps arcs that are always
    shadowed, so a backoff-complete topology stays backoff-complete.
    """
    fwd, bwd = {a.initial}, {a.final}
    todo = [a.initial]
    while todo:
        q = todo.pop()
        for arc in a.arcs(q):
            if arc.nextstate not in fwd:
                fwd.add(arc.nextstate)
                todo.append(arc.nextstate)
    rev = {}
    for t in a.transitions():
        rev.setdefault(t.dst, []).append(t.src)
    todo = [a.final]
    while todo:
        q = todo.pop()
        for p in rev.get(q, ()):
            if p not in bwd:
                bwd.add(p)
                todo.append(p)
    live = fwd & bwd
    if a.initial not in live:
        raise AutomatonError("pruned topology accepts nothing")
    order = sorted(live)
    index = {q: k for k, q in enumerate(order)}
    rows = [[(arc.label, arc.weight, index[arc.nextstate]) for arc in a.arcs(q)
             if arc.nextstate in live] for q in order]
    out = Automaton(rows, index[a.initial], index[a.final], a.symbols)
    return out.renumbered(out.bfs_order())
