"""Perplexity, exact KL divergence and the per-topology perplexity floor."""

import math
import warnings
from collections import deque
from dataclasses import dataclass
from typing import Optional

from .automaton import Automaton, SymbolTable
from .errors import CoverageError
from .models import WfaBackedModel, score
from .shortest_distance import POSITIVE_REAL, automatic_queue, parse_queue, shortest_distance

LOWER_BOUND_CAVEAT = ("exact only if every per-state solve reached its global optimum; "
                      "the solver guarantees a stationary point")


@dataclass
class EvalReport:
    log_prob_total: float
    token_count: int
    sentence_count: int
    oov_count: int = 0
    zero_prob_line: Optional[int] = None
    note: Optional[str] = None

    @property
    def perplexity(self) -> float:
        if self.token_count == 0:
            return float("nan")
        return math.exp(-self.log_prob_total / self.token_count)

    @property
    def bits_per_symbol(self) -> float:
        if self.token_count == 0:
            return float("nan")
        return -self.log_prob_total / self.token_count / math.log(2)

    def lines(self, bits=False):
        rows = [("sentences", str(self.sentence_count)),
                ("tokens", str(self.token_count)),
                ("oov", str(self.oov_count)),
                ("log_prob", repr(self.log_prob_total))]
        main = [("perplexity", repr(self.perplexity)), ("bits_per_symbol", repr(self.bits_per_symbol))]
        rows += main[::-1] if bits else main
        if self.zero_prob_line is not None:
            rows.append(("zero_prob_line", str(self.zero_prob_line)))
        if self.note:
            rows.append(("note", self.note))
        width = max(len(k) for k, _ in rows)
        return [f"{k.ljust(width)}  {v}" for k, v in rows]


def perplexity(m, corpus, oov_count=0) -> EvalReport:
    """Evaluate ``m`` (model or automaton) on id sequences ending in the terminator.

    Sums are exactly rounded, so the report does not depend on line order.
    """
    if isinstance(m, Automaton):
        m = WfaBackedModel(m, check=False)
    terms = []
    tokens = 0
    zero = None
    for lineno, sentence in enumerate(corpus, 1):
        lp = score(m, sentence)
        tokens += len(sentence)
        if lp == -math.inf and zero is None:
            zero = lineno
        terms.append(lp)
    total = -math.inf if zero is not None else math.fsum(terms)
    return EvalReport(total, tokens, len(terms), oov_count, zero)


def _expanded_pairs(s: Automaton, t: Automaton):
    """BFS over pairs of states reading E* arcs on both sides."""
    start = (s.initial, t.initial)
    index = {start: 0}
    pairs = [start]
    edges, terms = [], []
    todo = deque([start])
    while todo:
        pair = todo.popleft()
        p = index[pair]
        qs, qt = pair
        if qs == s.final:
            continue
        et = t.e_star_map(qt) if qt != t.final else {}
        for e in s.e_star(qs):
            if e.weight <= 0:
                continue
            f = et.get(e.label)
            terms.append((p, e, f))
            if f is None or f.weight <= 0:
                continue
            dst = (e.dst, f.dst)
            if dst not in index:
                index[dst] = len(pairs)
                pairs.append(dst)
                todo.append(dst)
            edges.append((p, index[dst], e.weight, e.label))
    return pairs, edges, terms


def _witness(edges, p, x):
    out = {}
    for src, dst, _, lab in edges:
        out.setdefault(src, []).append((dst, lab))
    parent = {0: None}
    todo = deque([0])
    while todo:
        q = todo.popleft()
        for dst, lab in out.get(q, ()):
            if dst not in parent:
                parent[dst] = (q, lab)
                todo.append(dst)
    path = []
    q = p
    while parent.get(q) is not None:
        q, lab = parent[q]
        path.append(lab)
    return tuple(reversed(path)) + (x,)


def kl_divergence(s: Automaton, t: Automaton, queue=None) -> float:
    """D(p_s || p_t) in nats from expected pair visits under ``s``.

    Returns ``inf`` (with a warning naming a witness prefix) when ``s`` puts
    mass on something ``t`` cannot produce.
    """
    if not s.symbols.compatible(t.symbols):
        raise ValueError("symbol tables disagree")
    pairs, edges, terms = _expanded_pairs(s, t)
    graph = (len(pairs), 0, [e[:3] for e in edges])
    q = automatic_queue(graph) if queue is None else parse_queue(queue)
    gamma = shortest_distance(graph, q, POSITIVE_REAL).values
    parts = []
    for p, e, f in terms:
        g = gamma[p]
        if g <= 0:
            continue
        if f is None or f.weight <= 0:
            witness = _witness(edges, p, e.label)
            warnings.warn(f"KL divergence is infinite: prefix {list(witness)} has zero "
                          "probability under the second model", RuntimeWarning, stacklevel=2)
            return math.inf
        parts.append(g * e.weight * (math.log(e.weight) - math.log(f.weight)))
    return max(math.fsum(parts), 0.0)


def empirical_source(corpus, symbols: SymbolTable) -> Automaton:
    """Prefix-tree automaton giving each corpus string its relative frequency."""
    if not corpus:
        raise ValueError("empty corpus")
    children = [{}]
    hits = [0]
    FINAL = -1
    for sentence in corpus:
        q = 0
        hits[0] += 1
        for x in sentence:
            if x == symbols.terminator_id:
                children[q][x] = children[q].get(x, (FINAL, 0))
                children[q][x] = (FINAL, children[q][x][1] + 1)
                break
            nxt = children[q].get(x)
            if nxt is None:
                children.append({})
                hits.append(0)
                nxt = (len(children) - 1, 0)
            children[q][x] = (nxt[0], nxt[1] + 1)
            q = nxt[0]
            hits[q] += 1
    final = len(children)
    arcs = []
    for q, row in enumerate(children):
        arcs.append([(x, n / hits[q], final if d == FINAL else d) for x, (d, n) in row.items()])
    arcs.append([])
    return Automaton(arcs, 0, final, symbols)


def corpus_counts(corpus, a: Automaton):
    """C(x, q) and C(phi, q) of the corpus's empirical distribution on ``a``."""
    from .counting import AggCountTable, _empty_table

    counts, phis = _empty_table(a)
    n = len(corpus)
    for lineno, sentence in enumerate(corpus, 1):
        q = a.initial
        for x in sentence:
            e = a.resolve(q, x) if q != a.final else None
            if e is None:
                raise CoverageError(f"corpus line {lineno} is rejected by the topology",
                                    tuple(sentence))
            r = q
            while r != e.resolved_at:
                phis[r] += 1.0 / n
                r = a.phi_arc(r).nextstate
            counts[(e.resolved_at, x)] += 1.0 / n
            q = e.dst
        if q != a.final:
            raise CoverageError(f"corpus line {lineno} does not end in the final state",
                                tuple(sentence))
    return AggCountTable(counts, phis, {"method": "corpus", "sentences": n})


def topology_lower_bound(corpus, a: Automaton, **solver) -> EvalReport:
    """Best test perplexity reachable on topology ``a`` for this corpus.

    The corpus's own empirical distribution is approximated onto ``a`` and
    the result scored on the same corpus.
    """
    from .klmin import approximate

    source = empirical_source(corpus, a.symbols)
    model = approximate(source, a, **solver)
    report = perplexity(model, corpus)
    report.note = LOWER_BOUND_CAVEAT
    return report
