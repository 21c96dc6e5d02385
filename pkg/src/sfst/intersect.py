"""Product constructions and the phi-to-epsilon compensation transform."""

from collections import deque
from typing import NamedTuple

from .automaton import Automaton
from .errors import AutomatonError, CyclicError, EmptyLanguageError, SymbolTableMismatch

EPSILON = -1


class ProductAutomaton:
    """Reachable part of S ∩ A, keeping the pair behind every product state.

    ``resolved[(p, x)]`` is the A-side state at which the product arc
    labelled ``x`` leaving ``p`` reads ``x`` (A's first state on its failure
    chain with a direct ``x`` arc).
    """

    def __init__(self, machine: Automaton, pairs, resolved):
        self.machine = machine
        self.pairs = tuple(pairs)
        self.resolved = dict(resolved)
        self.index = {pair: p for p, pair in enumerate(self.pairs)}

    @property
    def num_states(self):
        return self.machine.num_states

    @property
    def initial(self):
        return self.machine.initial

    @property
    def final(self):
        return self.machine.final

    def source_state(self, p):
        return self.pairs[p][0]

    def target_state(self, p):
        return self.pairs[p][1]

    def __repr__(self):
        return f"<ProductAutomaton {self.num_states} states over {self.machine!r}>"


def _check_tables(s, a):
    if not s.symbols.compatible(a.symbols):
        raise SymbolTableMismatch("source and topology symbol tables disagree")


def _build(s, a, expand):
    start = (s.initial, a.initial)
    final_pair = (s.final, a.final)
    index = {start: 0}
    pairs = [start]
    rows = []
    resolved = {}
    todo = deque([start])

    def state(pair):
        if pair not in index:
            index[pair] = len(pairs)
            pairs.append(pair)
            todo.append(pair)
        return index[pair]

    while todo:
        pair = todo.popleft()
        p = index[pair]
        rows.append([])
        qs, qa = pair
        for label, w, dst, at in expand(qs, qa):
            d = state(dst)
            rows[p].append((label, w, d))
            if at is not None:
                resolved[(p, label)] = at
    if final_pair not in index:
        raise EmptyLanguageError("empty language: the product has no accepting path")
    try:
        machine = Automaton(rows, 0, index[final_pair], s.symbols.merged(a.symbols))
    except AutomatonError as exc:
        raise AutomatonError(f"ill-formed product: {exc}") from None
    return ProductAutomaton(machine, pairs, resolved)


def intersect_wfa(s: Automaton, a: Automaton) -> ProductAutomaton:
    """Plain intersection; weights come from ``s``.  Neither input may use phi."""
    _check_tables(s, a)
    if s.has_phi() or a.has_phi():
        raise AutomatonError("intersect_wfa needs phi-free inputs; use intersect_phi")

    def expand(qs, qa):
        for arc in s.arcs(qs):
            b = a.arc(qa, arc.label)
            if b is not None:
                yield arc.label, arc.weight, (arc.nextstate, b.nextstate), qa

    return _build(s, a, expand)


def intersect_phi(s: Automaton, a: Automaton) -> ProductAutomaton:
    """Intersection that keeps failure arcs where both machines back off together.

    At pair (qs, qa) a direct arc is emitted for each label read directly by
    either side (and readable by both after backing off); the pair's phi arc
    leads to the pair of backoff states and carries the source's phi weight.
    """
    _check_tables(s, a)

    def expand(qs, qa):
        if qs == s.final:
            return
        es = s.e_star_map(qs)
        ea = a.e_star_map(qa) if qa != a.final else {}
        labels = sorted(set(s.sigma_labels(qs)) | set(a.sigma_labels(qa)))
        for x in labels:
            if x in es and x in ea:
                e, f = es[x], ea[x]
                yield x, e.weight, (e.dst, f.dst), f.resolved_at
        bs, ba = s.phi_arc(qs), a.phi_arc(qa)
        if bs is not None and ba is not None:
            yield s.phi_label, bs.weight, (bs.nextstate, ba.nextstate), None

    return _build(s, a, expand)


def self_product(a: Automaton) -> ProductAutomaton:
    """View ``a`` as a product with its own topology (pairs ``(q, q)``)."""
    resolved = {(q, arc.label): q for q in a.states() for arc in a.arcs(q)
                if arc.label != a.phi_label}
    return ProductAutomaton(a, [(q, q) for q in a.states()], resolved)


class CompensatedArc(NamedTuple):
    src: int
    label: int  # EPSILON for a former phi arc
    tracked: int  # target-side state the symbol is attributed to; -1 on epsilon arcs
    weight: float
    dst: int


class CompensatedMachine:
    """Epsilon machine whose run sums equal the phi machine's string weights."""

    def __init__(self, num_states, initial, final, arcs, pairs=None):
        self.num_states = num_states
        self.initial = initial
        self.final = final
        self.arcs = tuple(arcs)
        self.pairs = pairs
        self._out = [[] for _ in range(num_states)]
        for arc in self.arcs:
            self._out[arc.src].append(arc)

    def out(self, q):
        return self._out[q]

    def weighted_edges(self):
        return ((arc.src, arc.dst, arc.weight) for arc in self.arcs)

    def negative_arcs(self):
        return [arc for arc in self.arcs if arc.weight < 0]

    def _closure(self, weights):
        # epsilon arcs are former phi arcs and so acyclic; relax in rounds
        total = dict(weights)
        frontier = dict(weights)
        while frontier:
            nxt = {}
            for q, w in frontier.items():
                for arc in self._out[q]:
                    if arc.label == EPSILON:
                        nxt[arc.dst] = nxt.get(arc.dst, 0.0) + w * arc.weight
            for q, w in nxt.items():
                total[q] = total.get(q, 0.0) + w
            frontier = nxt
        return total

    def string_weight(self, labels):
        """Sum over all runs (negative ones included) reading ``labels``."""
        cur = {self.initial: 1.0}
        for x in labels:
            cur = self._closure(cur)
            nxt = {}
            for q, w in cur.items():
                for arc in self._out[q]:
                    if arc.label == x:
                        nxt[arc.dst] = nxt.get(arc.dst, 0.0) + w * arc.weight
            cur = nxt
        return cur.get(self.final, 0.0)


def compensate_phi(sa, *, require_acyclic=True) -> CompensatedMachine:
    """Replace phi by epsilon and add one negative arc per shadowed reading.

    For a phi arc q -> q' with weight w and a label x read directly at q and
    also readable (possibly after further backoff) at q', the arc
    ``x / -w * W`` with ``W`` the phi-extended weight of x at q' cancels every
    epsilon-then-x run through q'.
    """
    if isinstance(sa, Automaton):
        sa = self_product(sa)
    m = sa.machine
    if require_acyclic and not m.is_acyclic():
        raise CyclicError("compensated counting needs an acyclic product; "
                          "use sampled counting for cyclic sources")
    phi = m.phi_label
    arcs = []
    for q in m.states():
        back = m.phi_arc(q)
        for arc in m.arcs(q):
            if arc.label == phi:
                arcs.append(CompensatedArc(q, EPSILON, -1, arc.weight, arc.nextstate))
            else:
                arcs.append(CompensatedArc(q, arc.label, sa.resolved[(q, arc.label)],
                                           arc.weight, arc.nextstate))
        if back is None:
            continue
        q2 = back.nextstate
        for x in m.sigma_labels(q):
            e = m.resolve(q2, x)
            if e is None:
                continue
            arcs.append(CompensatedArc(q, x, sa.resolved[(e.resolved_at, x)],
                                       -back.weight * e.weight, e.dst))
    return CompensatedMachine(m.num_states, m.initial, m.final, arcs, sa.pairs)
