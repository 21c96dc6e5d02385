"""Deterministic weighted automata with failure (phi) transitions.

An :class:`Automaton` has a single initial state and a single final sink
state.  Arcs carry an integer label from a :class:`SymbolTable`; the label
``symbols.phi_id`` marks a failure transition, which consumes no input and
may only be taken when the next symbol cannot be read at the current state.

Weights are plain probabilities (or expected counts), never negative logs.
"""

from collections import deque
from typing import Iterable, NamedTuple, Optional, Sequence

import math

from .errors import AutomatonError, EmptyLanguageError, SymbolTableMismatch

PHI_NAME = "<phi>"
TERMINATOR_NAME = "$"


class SymbolTable:
    """Bidirectional map between symbol strings and non-negative ids.

    ``phi_id`` is reserved for the failure label and never appears in corpus
    text; ``terminator_id`` is the end-of-string symbol.
    """

    def __init__(self, entries=(), phi_id=0, terminator_id=None):
        self._id = {}
        self._name = {}
        for name, i in entries:
            self.add(name, i)
        self.phi_id = int(phi_id)
        if self.phi_id not in self._name:
            self.add(PHI_NAME, self.phi_id)
        if terminator_id is None:
            if TERMINATOR_NAME not in self._id:
                raise SymbolTableMismatch("symbol table has no terminator '$'")
            terminator_id = self._id[TERMINATOR_NAME]
        if terminator_id not in self._name:
            raise SymbolTableMismatch(f"terminator id {terminator_id} not in table")
        self.terminator_id = int(terminator_id)
        if self.terminator_id == self.phi_id:
            raise SymbolTableMismatch("phi and terminator share an id")

    @classmethod
    def from_symbols(cls, symbols: Iterable[str], phi_id=0, terminator=TERMINATOR_NAME):
        """Assign ids in order: phi first, then the terminator, then ``symbols``."""
        entries = [(PHI_NAME, phi_id)]
        next_id = 0
        used = {phi_id}
        names = [terminator] + [s for s in symbols if s != terminator]
        seen = set()
        for name in names:
            if name in seen or name == PHI_NAME:
                continue
            seen.add(name)
            while next_id in used:
                next_id += 1
            entries.append((name, next_id))
            used.add(next_id)
        table = cls(entries, phi_id=phi_id, terminator_id=dict(entries)[terminator])
        return table

    @classmethod
    def numeric(cls, ids: Iterable[int], phi_id=0, terminator_id=None):
        """A table whose symbol strings are the decimal ids themselves."""
        ids = set(int(i) for i in ids) | {phi_id}
        if terminator_id is not None:
            ids.add(terminator_id)
        entries = [(str(i), i) for i in sorted(ids)]
        return cls(entries, phi_id=phi_id, terminator_id=terminator_id)

    def add(self, name, i=None):
        if i is None:
            i = max(self._name, default=-1) + 1
        i = int(i)
        if i < 0:
            raise SymbolTableMismatch(f"negative symbol id {i}")
        if name in self._id and self._id[name] != i:
            raise SymbolTableMismatch(f"symbol {name!r} has two ids")
        if i in self._name and self._name[i] != name:
            raise SymbolTableMismatch(f"id {i} assigned to {self._name[i]!r} and {name!r}")
        self._id[name] = i
        self._name[i] = name
        return i

    def find(self, name) -> int:
        return self._id[name]

    def get(self, name, default=None):
        return self._id.get(name, default)

    def name(self, i) -> str:
        return self._name[i]

    def ids(self):
        return sorted(self._name)

    def items(self):
        return [(self._name[i], i) for i in sorted(self._name)]

    def __contains__(self, i):
        return i in self._name

    def __len__(self):
        return len(self._name)

    def __eq__(self, other):
        if not isinstance(other, SymbolTable):
            return NotImplemented
        return (self._name == other._name and self.phi_id == other.phi_id
                and self.terminator_id == other.terminator_id)

    def __repr__(self):
        return f"SymbolTable({len(self)} symbols, phi={self.phi_id}, $={self.terminator_id})"

    def compatible(self, other) -> bool:
        """True when both tables agree on phi, terminator and shared ids."""
        if self is other:
            return True
        if self.phi_id != other.phi_id or self.terminator_id != other.terminator_id:
            return False
        for i, name in self._name.items():
            if i in other._name and other._name[i] != name:
                return False
        return True

    def merged(self, other):
        if not self.compatible(other):
            raise SymbolTableMismatch("symbol tables disagree")
        if self is other:
            return self
        entries = dict(self._name)
        entries.update(other._name)
        return SymbolTable([(n, i) for i, n in entries.items()], self.phi_id, self.terminator_id)


class Arc(NamedTuple):
    label: int
    weight: float
    nextstate: int


class Transition(NamedTuple):
    src: int
    label: int
    weight: float
    dst: int


class PhiExtendedArc(NamedTuple):
    """An effective arc of E*[src]: optional leading phi arcs, then ``label``."""
    src: int
    label: int
    weight: float
    dst: int
    resolved_at: int


class Automaton:
    """Immutable deterministic (phi-)WFA with one initial and one final state."""

    def __init__(self, arcs: Sequence[Iterable], initial: int, final: int,
                 symbols: SymbolTable, *, allow_negative=False):
        n = len(arcs)
        states = []
        for q, state_arcs in enumerate(arcs):
            row = tuple(sorted((Arc(int(a[0]), float(a[1]), int(a[2])) for a in state_arcs),
                               key=lambda a: a.label))
            states.append(row)
        self._arcs = tuple(states)
        self.initial = int(initial)
        self.final = int(final)
        self.symbols = symbols
        self._lookup = [None] * n
        self._estar = [None] * n
        self._validate(allow_negative)

    def _validate(self, allow_negative):
        n = self.num_states
        if not 0 <= self.initial < n or not 0 <= self.final < n:
            raise AutomatonError("initial/final state out of range")
        if self._arcs[self.final]:
            raise AutomatonError(f"final state {self.final} has outgoing transitions")
        for q, row in enumerate(self._arcs):
            prev = None
            for a in row:
                if a.label == prev:
                    label = self.symbols.name(a.label) if a.label in self.symbols else a.label
                    if a.label == self.phi_label:
                        raise AutomatonError(f"state {q} has more than one phi transition")
                    raise AutomatonError(f"state {q} has two transitions labelled {label!r}")
                prev = a.label
                if a.label not in self.symbols:
                    raise AutomatonError(f"unknown symbol id {a.label} at state {q}")
                if not 0 <= a.nextstate < n:
                    raise AutomatonError(f"transition {q} -> {a.nextstate} leaves the state range")
                if not math.isfinite(a.weight) or (a.weight < 0 and not allow_negative):
                    raise AutomatonError(f"bad weight {a.weight!r} at state {q}")
        self._check_phi_acyclic()

    def _check_phi_acyclic(self):
        n = self.num_states
        colour = [0] * n
        for start in range(n):
            path = []
            q = start
            while q is not None and colour[q] == 0:
                colour[q] = 1
                path.append(q)
                a = self.phi_arc(q)
                q = a.nextstate if a is not None else None
            if q is not None and colour[q] == 1:
                raise AutomatonError(f"phi cycle through state {q}")
            for p in path:
                colour[p] = 2

    # -- basic accessors -------------------------------------------------

    @property
    def num_states(self) -> int:
        return len(self._arcs)

    @property
    def phi_label(self) -> int:
        return self.symbols.phi_id

    @property
    def terminator(self) -> int:
        return self.symbols.terminator_id

    def states(self):
        return range(self.num_states)

    def arcs(self, q) -> tuple:
        return self._arcs[q]

    def _table(self, q):
        t = self._lookup[q]
        if t is None:
            t = {a.label: a for a in self._arcs[q]}
            self._lookup[q] = t
        return t

    def arc(self, q, label) -> Optional[Arc]:
        return self._table(q).get(label)

    def phi_arc(self, q) -> Optional[Arc]:
        return self._table(q).get(self.phi_label)

    def labels(self, q) -> tuple:
        """L[q] including phi."""
        return tuple(a.label for a in self._arcs[q])

    def sigma_labels(self, q) -> tuple:
        """L[q] minus phi."""
        phi = self.phi_label
        return tuple(a.label for a in self._arcs[q] if a.label != phi)

    def transitions(self):
        for q, row in enumerate(self._arcs):
            for a in row:
                yield Transition(q, a.label, a.weight, a.nextstate)

    def num_arcs(self) -> int:
        return sum(len(row) for row in self._arcs)

    def has_phi(self) -> bool:
        phi = self.phi_label
        return any(a.label == phi for row in self._arcs for a in row)

    def phi_chain(self, q) -> list:
        """States on the failure path starting at ``q`` (``q`` first)."""
        chain = [q]
        a = self.phi_arc(q)
        while a is not None:
            chain.append(a.nextstate)
            a = self.phi_arc(a.nextstate)
        return chain

    def backoff_sources(self):
        """B1: for every state, the states with a phi arc into it."""
        b1 = [[] for _ in self.states()]
        for q in self.states():
            a = self.phi_arc(q)
            if a is not None:
                b1[a.nextstate].append(q)
        return b1

    def phi_topological_order(self):
        """States ordered so every phi arc goes from an earlier to a later state."""
        indeg = [0] * self.num_states
        for q in self.states():
            a = self.phi_arc(q)
            if a is not None:
                indeg[a.nextstate] += 1
        order = [q for q in self.states() if indeg[q] == 0]
        i = 0
        while i < len(order):
            a = self.phi_arc(order[i])
            if a is not None:
                indeg[a.nextstate] -= 1
                if indeg[a.nextstate] == 0:
                    order.append(a.nextstate)
            i += 1
        return order

    # -- phi semantics ---------------------------------------------------

    def e_star(self, q) -> tuple:
        """The phi-extended transitions E*[q], one per label of L*[q]."""
        cached = self._estar[q]
        if cached is not None:
            return cached
        phi = self.phi_label
        seen = set()
        out = []
        mult = 1.0
        p = q
        while True:
            back = None
            for a in self._arcs[p]:
                if a.label == phi:
                    back = a
                elif a.label not in seen:
                    seen.add(a.label)
                    out.append(PhiExtendedArc(q, a.label, mult * a.weight, a.nextstate, p))
            if back is None:
                break
            mult *= back.weight
            p = back.nextstate
        out.sort(key=lambda e: e.label)
        result = tuple(out)
        self._estar[q] = result
        return result

    def e_star_map(self, q) -> dict:
        return {e.label: e for e in self.e_star(q)}

    def resolve(self, q, label) -> Optional[PhiExtendedArc]:
        """The E* arc reading ``label`` from ``q``, or None."""
        phi = self.phi_label
        mult = 1.0
        p = q
        while True:
            t = self._table(p)
            a = t.get(label)
            if a is not None:
                return PhiExtendedArc(q, label, mult * a.weight, a.nextstate, p)
            back = t.get(phi)
            if back is None:
                return None
            mult *= back.weight
            p = back.nextstate

    def string_weight(self, labels: Sequence[int]) -> float:
        """Weight of ``labels`` (which must end at the final state) under phi semantics."""
        q = self.initial
        w = 1.0
        for x in labels:
            e = self.resolve(q, x)
            if e is None:
                return 0.0
            w *= e.weight
            q = e.dst
        return w if q == self.final else 0.0

    def is_acyclic(self) -> bool:
        """True when the transition graph, phi arcs included, has no cycle."""
        n = self.num_states
        indeg = [0] * n
        for row in self._arcs:
            for a in row:
                indeg[a.nextstate] += 1
        stack = [q for q in range(n) if indeg[q] == 0]
        seen = 0
        while stack:
            q = stack.pop()
            seen += 1
            for a in self._arcs[q]:
                indeg[a.nextstate] -= 1
                if indeg[a.nextstate] == 0:
                    stack.append(a.nextstate)
        return seen == n

    # -- rebuilding ------------------------------------------------------

    def reweighted(self, weight_of, *, allow_negative=False):
        """Copy with ``weight_of(q, arc)`` as the new weight of every arc."""
        arcs = [[(a.label, weight_of(q, a), a.nextstate) for a in row]
                for q, row in enumerate(self._arcs)]
        return Automaton(arcs, self.initial, self.final, self.symbols,
                         allow_negative=allow_negative)

    def topology(self):
        """Unweighted copy (all weights 1)."""
        return self.reweighted(lambda q, a: 1.0)

    def renumbered(self, order):
        """Copy with state ``order[k]`` renamed to ``k``; states not listed are dropped."""
        new = {old: k for k, old in enumerate(order)}
        arcs = [[(a.label, a.weight, new[a.nextstate]) for a in self._arcs[old]]
                for old in order]
        return Automaton(arcs, new[self.initial], new[self.final], self.symbols,
                         allow_negative=any(a.weight < 0 for row in self._arcs for a in row))

    def bfs_order(self):
        """States in breadth-first order from the initial state, arcs by label.

        States unreachable from the initial state follow in id order.
        """
        n = self.num_states
        seen = [False] * n
        order = []
        for root in [self.initial] + list(range(n)):
            if seen[root]:
                continue
            seen[root] = True
            queue = deque([root])
            while queue:
                q = queue.popleft()
                order.append(q)
                for a in self._arcs[q]:
                    if not seen[a.nextstate]:
                        seen[a.nextstate] = True
                        queue.append(a.nextstate)
        return order

    def canonical(self):
        return self.renumbered(self.bfs_order())

    def __eq__(self, other):
        if not isinstance(other, Automaton):
            return NotImplemented
        return (self._arcs == other._arcs and self.initial == other.initial
                and self.final == other.final and self.symbols.compatible(other.symbols))

    def __hash__(self):
        return hash((self._arcs, self.initial, self.final))

    def __repr__(self):
        return (f"<Automaton {self.num_states} states, {self.num_arcs()} arcs, "
                f"initial={self.initial}, final={self.final}>")


class BackoffViolation(NamedTuple):
    state: int
    backoff_state: int
    label: Optional[int]  # None for a strictness violation
    kind: str  # "missing" | "not-strict"


class BackoffReport(NamedTuple):
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def check_backoff_complete(a: Automaton) -> BackoffReport:
    """Check L[q] ⊆ L[q'] for every phi arc q -> q', strictly when q' has no phi arc."""
    violations = []
    for q in a.states():
        back = a.phi_arc(q)
        if back is None:
            continue
        target = back.nextstate
        here = set(a.sigma_labels(q))
        there = set(a.sigma_labels(target))
        for x in sorted(here - there):
            violations.append(BackoffViolation(q, target, x, "missing"))
        if a.phi_arc(target) is None and here >= there:
            violations.append(BackoffViolation(q, target, None, "not-strict"))
    return BackoffReport(tuple(violations))


def phi_extended_transitions(a: Automaton, q: int) -> list:
    return list(a.e_star(q))


def is_stochastic(a: Automaton, tol: float = 1e-9) -> bool:
    for t in a.transitions():
        if t.weight < 0:
            return False
    for q in a.states():
        if q == a.final:
            continue
        total = math.fsum(e.weight for e in a.e_star(q))
        if not (1.0 - tol <= total <= 1.0 + tol):
            return False
    return True


def _trim_map(a: Automaton):
    n = a.num_states
    estar = [a.e_star(q) if q != a.final else () for q in range(n)]
    forward = [False] * n
    forward[a.initial] = True
    stack = [a.initial]
    while stack:
        q = stack.pop()
        for e in estar[q]:
            if not forward[e.dst]:
                forward[e.dst] = True
                stack.append(e.dst)
    reverse = [[] for _ in range(n)]
    for q in range(n):
        for e in estar[q]:
            reverse[e.dst].append(q)
    backward = [False] * n
    backward[a.final] = True
    stack = [a.final]
    while stack:
        q = stack.pop()
        for p in reverse[q]:
            if not backward[p]:
                backward[p] = True
                stack.append(p)
    if not (forward[a.final] and backward[a.initial]):
        raise EmptyLanguageError("empty language: no accepting path")

    keep = [False] * n
    keep[a.initial] = keep[a.final] = True
    used_sigma = set()
    used_phi = set()
    for q in range(n):
        if not forward[q]:
            continue
        for e in estar[q]:
            if not backward[e.dst]:
                continue
            keep[e.dst] = True
            used_sigma.add((e.resolved_at, e.label))
            p = q
            while p != e.resolved_at:
                keep[p] = True
                used_phi.add(p)
                p = a.phi_arc(p).nextstate
            keep[p] = True

    # A dead arc at a kept state still blocks the same label further down the
    # failure chain.  Where that label can actually be tried at the state and
    # is read usefully below it, dropping the arc would change the language,
    # so it is kept and pointed at a shared non-final sink.
    phi = a.phi_label
    everything = frozenset(a.symbols.ids())
    tried = [frozenset()] * n
    for q in range(n):
        if forward[q] and keep[q]:
            tried[q] = everything
    for q in a.phi_topological_order():
        back = a.phi_arc(q)
        if back is not None and tried[q]:
            rest = tried[q] - set(a.sigma_labels(q))
            tried[back.nextstate] = tried[back.nextstate] | rest
    new_arcs = {}
    need_sink = False
    for q in range(n):
        if not keep[q]:
            continue
        row = []
        below = set()
        if q in used_phi:
            for p in a.phi_chain(q)[1:]:
                below.update(x for x in a.sigma_labels(p) if (p, x) in used_sigma)
        for arc in a.arcs(q):
            if arc.label == phi:
                if q in used_phi:
                    row.append(arc)
            elif (q, arc.label) in used_sigma:
                row.append(arc)
            elif arc.label in below and arc.label in tried[q]:
                row.append(Arc(arc.label, arc.weight, -1))
                need_sink = True
        new_arcs[q] = row
    order = [q for q in range(n) if keep[q]]
    index = {old: k for k, old in enumerate(order)}
    sink = len(order)
    arcs = []
    for old in order:
        arcs.append([(x.label, x.weight, index[x.nextstate] if x.nextstate >= 0 else sink)
                     for x in new_arcs[old]])
    if need_sink:
        arcs.append([])
    out = Automaton(arcs, index[a.initial], index[a.final], a.symbols,
                    allow_negative=any(t.weight < 0 for t in a.transitions()))
    canon = out.bfs_order()
    mapping = {old: canon.index(index[old]) for old in order}
    return out.renumbered(canon), mapping


def trim(a: Automaton) -> Automaton:
    """Remove states and arcs that lie on no allowed accepting path."""
    return _trim_map(a)[0]
