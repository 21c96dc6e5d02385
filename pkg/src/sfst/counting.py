"""Expected transition counts of a source model on a target topology.

For a target ``a`` and source ``s``:

* ``c(x, q)`` is the expected number of times ``x`` is read while ``a`` is in
  state ``q`` (phi-free targets);
* ``C(x, q)`` buckets each reading by the state ``q`` at which ``a`` actually
  reads ``x`` after backing off, and ``C(phi, q)`` is the expected number of
  backoffs taken from ``q``.
"""

import math
import warnings
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .automaton import Automaton, check_backoff_complete
from .errors import (AutomatonError, CountError, CoverageError, CyclicError,
                     SymbolTableMismatch)
from .intersect import EPSILON, compensate_phi, intersect_phi, intersect_wfa
from .models import DEFAULT_MAX_LEN, WfaBackedModel, draw, make_rng
from .shortest_distance import (POSITIVE_REAL, REAL, TopologicalQueue,
                                automatic_queue, parse_queue, shortest_distance)

CLAMP_TOL = 1e-9
FLOW_TOL = 1e-6
SAMPLE_BLOCK = 16384


@dataclass
class CountTable:
    """``counts[(q, x)]`` for every non-phi arc of the target."""
    counts: dict

    def get(self, q, x):
        return self.counts.get((q, x), 0.0)

    def state_total(self, q):
        return math.fsum(v for (p, _), v in self.counts.items() if p == q)

    def by_state(self):
        out = {}
        for (q, x), v in self.counts.items():
            out.setdefault(q, {})[x] = v
        return out


@dataclass
class AggCountTable(CountTable):
    phi_counts: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)

    def phi(self, q):
        return float(self.phi_counts.get(q, 0.0))

    def total(self, q):
        """C(q): sum over every label of q, phi included."""
        return self.state_total(q) + self.phi(q)

    @property
    def totals(self):
        states = {q for q, _ in self.counts} | set(self.phi_counts)
        return {q: self.total(q) for q in sorted(states)}


def _empty_table(a: Automaton):
    phi = a.phi_label
    counts = {(q, arc.label): 0.0 for q in a.states() for arc in a.arcs(q) if arc.label != phi}
    phis = {q: 0.0 for q in a.states() if a.phi_arc(q) is not None}
    return counts, phis


def _clamp(values: dict, scale: float, what: str):
    tol = CLAMP_TOL * max(1.0, scale)
    worst = 0.0
    for k, v in values.items():
        if v < 0:
            if v < -tol:
                raise CountError(f"negative {what} {v:.3g} at {k}")
            worst = min(worst, v)
            values[k] = 0.0
    if worst < -1e-12:
        warnings.warn(f"clamped {what} as small as {worst:.3g} to zero", RuntimeWarning,
                      stacklevel=3)


def _witness(machine, p, x):
    """Label path from the initial state to product state ``p``, then ``x``."""
    parent = {machine.initial: None}
    todo = deque([machine.initial])
    while todo:
        q = todo.popleft()
        if q == p:
            break
        for e in machine.e_star(q) if q != machine.final else ():
            if e.dst not in parent:
                parent[e.dst] = (q, e.label)
                todo.append(e.dst)
    path = []
    q = p
    while parent.get(q) is not None:
        q, lab = parent[q]
        path.append(lab)
    return tuple(reversed(path)) + (x,)


def _check_coverage(s, a, product):
    """Every positive-weight source reading at a reachable pair must be readable by ``a``."""
    m = product.machine
    seen = {m.initial}
    todo = deque([m.initial])
    while todo:
        p = todo.popleft()
        if p == m.final:
            continue
        qs, qa = product.pairs[p]
        if qs != s.final:
            readable = a.e_star_map(qa) if qa != a.final else {}
            for e in s.e_star(qs):
                if e.weight > 0 and e.label not in readable:
                    witness = _witness(m, p, e.label)
                    raise CoverageError(f"source string prefix {list(witness)} is rejected "
                                        "by the topology", witness)
        for e in m.e_star(p):
            if e.weight > 0 and e.dst not in seen:
                seen.add(e.dst)
                todo.append(e.dst)


def _resolve_queue(g, queue):
    if queue is None:
        return automatic_queue(g)
    return parse_queue(queue)


def count_wfa(s: Automaton, a: Automaton, queue=None) -> CountTable:
    """c(x, q) for a phi-free target from the intersection and its shortest distance."""
    product = intersect_wfa(s, a)
    m = product.machine
    gamma = shortest_distance(m, _resolve_queue(m, queue), POSITIVE_REAL).values
    _check_coverage(s, a, product)
    counts, _ = _empty_table(a)
    for p in m.states():
        g = gamma[p]
        for arc in m.arcs(p):
            counts[(product.resolved[(p, arc.label)], arc.label)] += g * arc.weight
    return CountTable(counts)


def phi_count_from_flow(counts: dict, a: Automaton, *, tol=FLOW_TOL):
    """C(phi, q) as inflow minus direct readings, visiting states along phi arcs.

    ``counts`` maps (q, x) -> C(x, q) for non-phi labels.  The initial state
    receives one unit of source mass.
    """
    inflow = [0.0] * a.num_states
    inflow[a.initial] += 1.0
    out = [0.0] * a.num_states
    for (q, x), v in counts.items():
        arc = a.arc(q, x)
        if arc is None:
            raise CountError(f"count for label {x} at state {q} has no arc in the topology")
        inflow[arc.nextstate] += v
        out[q] += v
    phis = {}
    for q in a.phi_topological_order():
        back = a.phi_arc(q)
        if back is None:
            continue
        v = inflow[q] - out[q]
        if v < -tol * max(1.0, inflow[q]):
            raise CountError(f"negative backoff count {v:.3g} at state {q}")
        v = max(v, 0.0)
        phis[q] = v
        inflow[back.nextstate] += v
    return phis


def _expanded_counts(s, a, queue):
    """Counts on the E*-expansion of both machines (works for cyclic products)."""
    start = (s.initial, a.initial)
    index = {start: 0}
    pairs = [start]
    edges = []
    arcs = []
    todo = deque([start])
    while todo:
        pair = todo.popleft()
        p = index[pair]
        qs, qa = pair
        if qs == s.final:
            continue
        ea = a.e_star_map(qa) if qa != a.final else {}
        for e in s.e_star(qs):
            f = ea.get(e.label)
            if f is None:
                if e.weight > 0:
                    arcs.append((p, e.label, e.weight, None))
                continue
            dst = (e.dst, f.dst)
            if dst not in index:
                index[dst] = len(pairs)
                pairs.append(dst)
                todo.append(dst)
            edges.append((p, index[dst], e.weight))
            arcs.append((p, e.label, e.weight, f))
    graph = (len(pairs), 0, edges)
    gamma = shortest_distance(graph, _resolve_queue(graph, queue), POSITIVE_REAL).values
    counts, phis = _empty_table(a)
    for p, x, w, f in arcs:
        c = gamma[p] * w
        if f is None:
            if c > 0:
                raise CoverageError(f"source reads symbol {x} where the topology cannot "
                                    f"(topology state {pairs[p][1]})", (x,))
            continue
        counts[(f.resolved_at, x)] += c
        q = pairs[p][1]
        while q != f.resolved_at:
            phis[q] += c
            q = a.phi_arc(q).nextstate
    return counts, phis


def count_phi(s: Automaton, a: Automaton, queue=None, method="auto") -> AggCountTable:
    """C(x, q) and C(phi, q) for a backoff-complete phi target.

    ``method`` is ``compensated`` (negative-arc transform, acyclic products),
    ``expanded`` (phi-expanded product, any cycle structure) or ``auto``.
    """
    report = check_backoff_complete(a)
    if not report.ok:
        raise AutomatonError(f"topology is not backoff-complete: {report.violations[:3]}")
    if not s.symbols.compatible(a.symbols):
        raise SymbolTableMismatch("source and topology symbol tables disagree")
    product = intersect_phi(s, a)
    cyclic = not product.machine.is_acyclic()
    if method == "auto":
        method = "expanded" if cyclic else "compensated"
    if method == "expanded":
        counts, phis = _expanded_counts(s, a, queue)
        _clamp(counts, 1.0, "count")
        return AggCountTable(counts, phis, {"method": "expanded"})
    if method != "compensated":
        raise ValueError(f"unknown counting method {method!r}")
    if cyclic:
        raise CyclicError("the product is cyclic; compensated counting needs an acyclic "
                          "product (use method='expanded' or sampled counting)")
    t = compensate_phi(product)
    queue = TopologicalQueue() if queue is None else parse_queue(queue)
    gamma_t = shortest_distance(t, queue, REAL).values
    _check_coverage(s, a, product)
    counts, _ = _empty_table(a)
    for arc in t.arcs:
        if arc.label == EPSILON:
            continue
        counts[(arc.tracked, arc.label)] += gamma_t[arc.src] * arc.weight
    scale = max([abs(v) for v in counts.values()] + [1.0])
    _clamp(counts, scale, "count")
    phis = phi_count_from_flow(counts, a)
    return AggCountTable(counts, phis, {"method": "compensated"})


def count(s: Automaton, a: Automaton, queue=None) -> AggCountTable:
    """Exact counts for any target: c for phi-free targets, C otherwise."""
    if not a.has_phi() and not s.has_phi():
        return AggCountTable(count_wfa(s, a, queue).counts, {}, {"method": "product"})
    return count_phi(s, a, queue)


# -- sampling ------------------------------------------------------------

class _Resolver:
    """Per (topology state, symbol): reading state, destination and backoff chain."""

    def __init__(self, a: Automaton):
        self.a = a
        self.table = []
        for q in a.states():
            row = {}
            if q != a.final:
                for e in a.e_star(q):
                    chain = []
                    p = q
                    while p != e.resolved_at:
                        chain.append(p)
                        p = a.phi_arc(p).nextstate
                    row[e.label] = (e.resolved_at, e.dst, tuple(chain))
            self.table.append(row)


def _dense_block(args):
    prob, s_dst, a_dst, initial_pair, s_final, seed, block, size, max_len = args
    rng = make_rng(seed, block)
    cum = np.cumsum(prob, axis=1)
    # make the last positive column catch rounding at u close to 1
    for q in range(prob.shape[0]):
        nz = np.nonzero(prob[q])[0]
        if len(nz):
            cum[q, nz[-1]:] = 2.0
    n_a = a_dst.shape[0]
    qs = np.full(size, initial_pair[0], dtype=np.int64)
    qa = np.full(size, initial_pair[1], dtype=np.int64)
    alive = np.arange(size)
    visited_ids = []
    visited_pairs = []
    steps = 0
    while len(alive) and steps < max_len:
        visited_ids.append(alive)
        visited_pairs.append(qs * n_a + qa)
        u = rng.random(len(alive))
        x = (u[:, None] < cum[qs]).argmax(axis=1)
        nxt_a = a_dst[qa, x]
        bad = nxt_a < 0
        if bad.any():
            k = int(np.nonzero(bad)[0][0])
            return {"rejected": (int(qa[k]), int(x[k]))}
        nxt_s = s_dst[qs, x]
        keep = nxt_s != s_final
        alive, qs, qa = alive[keep], nxt_s[keep], nxt_a[keep]
        steps += 1
    truncated = np.zeros(size, dtype=bool)
    truncated[alive] = True
    ids = np.concatenate(visited_ids) if visited_ids else np.zeros(0, np.int64)
    pairs = np.concatenate(visited_pairs) if visited_pairs else np.zeros(0, np.int64)
    hist = np.bincount(pairs[~truncated[ids]], minlength=prob.shape[0] * n_a)
    return {"hist": hist, "accepted": int(size - truncated.sum()),
            "truncated": int(truncated.sum())}


def _generic_block(args):
    model, resolver, seed, block, size, max_len = args
    rng = make_rng(seed, block)
    a = resolver.a
    counts, phis = {}, {}
    accepted = truncated = 0
    for _ in range(size):
        local_c, local_phi = {}, {}
        state, qa = model.start(), a.initial
        ok = False
        for _ in range(max_len):
            dist = model.next_distribution(state)
            row = resolver.table[qa]
            for x in sorted(dist):
                p = dist[x]
                if p <= 0:
                    continue
                hit = row.get(x)
                if hit is None:
                    return {"rejected": (qa, x)}
                at, _, chain = hit
                local_c[(at, x)] = local_c.get((at, x), 0.0) + p
                for q in chain:
                    local_phi[q] = local_phi.get(q, 0.0) + p
            x = draw(dist, rng.random())
            if x == model.terminator:
                ok = True
                break
            state = model.advance(state, x)
            qa = row[x][1]
        if not ok:
            truncated += 1
            continue
        accepted += 1
        for k, v in local_c.items():
            counts[k] = counts.get(k, 0.0) + v
        for k, v in local_phi.items():
            phis[k] = phis.get(k, 0.0) + v
    return {"counts": counts, "phis": phis, "accepted": accepted, "truncated": truncated}


def _run_blocks(fn, jobs_args, jobs):
    if jobs is None or jobs <= 1 or len(jobs_args) <= 1:
        return [fn(x) for x in jobs_args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, jobs_args))


def count_sampled(model, a: Automaton, n: int, seed: int = 0, *, jobs=1,
                  max_len=DEFAULT_MAX_LEN, block_size=SAMPLE_BLOCK) -> AggCountTable:
    """Monte Carlo estimate of C and C(phi) from ``n`` sampled strings.

    At every position of every sample the full next-symbol distribution of
    the source is credited to the topology (a Rao-Blackwellised form of the
    visit-count estimator).  Samples are drawn in fixed-size blocks, block
    ``b`` using stream ``b`` of ``seed``, so results do not depend on ``jobs``.
    """
    if n <= 0:
        raise ValueError("number of samples must be positive")
    if isinstance(model, Automaton):
        model = WfaBackedModel(model)
    report = check_backoff_complete(a)
    if not report.ok:
        raise AutomatonError(f"topology is not backoff-complete: {report.violations[:3]}")
    if not model.symbols.compatible(a.symbols):
        raise SymbolTableMismatch("model and topology symbol tables disagree")
    sizes = [min(block_size, n - b) for b in range(0, n, block_size)]
    resolver = _Resolver(a)
    counts, phis = _empty_table(a)

    if isinstance(model, WfaBackedModel):
        s = model.automaton
        prob, s_dst = model.dense_tables()
        width = max(prob.shape[1], max(a.symbols.ids()) + 1)
        if width > prob.shape[1]:
            prob = np.pad(prob, ((0, 0), (0, width - prob.shape[1])))
            s_dst = np.pad(s_dst, ((0, 0), (0, width - s_dst.shape[1])), constant_values=-1)
        a_dst = np.full((a.num_states, width), -1, dtype=np.int64)
        for q in a.states():
            for x, (_, d, _) in resolver.table[q].items():
                a_dst[q, x] = d
        args = [(prob, s_dst, a_dst, (s.initial, a.initial), s.final, seed, b, size, max_len)
                for b, size in enumerate(sizes)]
        results = _run_blocks(_dense_block, args, jobs)
        hist = np.zeros(s.num_states * a.num_states, dtype=np.int64)
        accepted = truncated = 0
        for r in results:
            if "rejected" in r:
                raise CoverageError("sampled string rejected by the topology at state "
                                    f"{r['rejected'][0]} on symbol {r['rejected'][1]}",
                                    (r["rejected"][1],))
            hist += r["hist"]
            accepted += r["accepted"]
            truncated += r["truncated"]
        if accepted == 0:
            raise CountError("every sample was truncated")
        visits = hist.reshape(s.num_states, a.num_states)
        for qs, qa in zip(*np.nonzero(visits)):
            g = visits[qs, qa] / accepted
            row = resolver.table[qa]
            for e in s.e_star(qs):
                if e.weight <= 0:
                    continue
                hit = row.get(e.label)
                if hit is None:
                    raise CoverageError(f"source reads symbol {e.label} where the topology "
                                        f"cannot (topology state {qa})", (e.label,))
                at, _, chain = hit
                c = g * e.weight
                counts[(at, e.label)] += c
                for q in chain:
                    phis[q] += c
    else:
        args = [(model, resolver, seed, b, size, max_len) for b, size in enumerate(sizes)]
        results = _run_blocks(_generic_block, args, jobs)
        accepted = truncated = 0
        for r in results:
            if "rejected" in r:
                raise CoverageError("model emits symbol "
                                    f"{r['rejected'][1]} where the topology cannot "
                                    f"(topology state {r['rejected'][0]})", (r["rejected"][1],))
            for k, v in r["counts"].items():
                counts[k] += v
            for k, v in r["phis"].items():
                phis[k] += v
            accepted += r["accepted"]
            truncated += r["truncated"]
        if accepted == 0:
            raise CountError("every sample was truncated")
        counts = {k: v / accepted for k, v in counts.items()}
        phis = {k: v / accepted for k, v in phis.items()}
    if truncated:
        warnings.warn(f"discarded {truncated} of {n} samples that hit max_len={max_len}",
                      RuntimeWarning, stacklevel=2)
    return AggCountTable(counts, phis, {"method": "sampled", "n_samples": n,
                                        "n_accepted": accepted, "n_truncated": truncated})


# -- counts as automata --------------------------------------------------

def counts_to_automaton(table: CountTable, a: Automaton) -> Automaton:
    """The topology with C(x, q) on its arcs and C(phi, q) on its phi arcs."""
    phi = a.phi_label
    phis = getattr(table, "phi_counts", {})

    def weight(q, arc):
        if arc.label == phi:
            return phis.get(q, 0.0)
        return table.counts.get((q, arc.label), 0.0)

    return a.reweighted(weight)


def automaton_to_counts(c: Automaton) -> AggCountTable:
    phi = c.phi_label
    counts, phis = {}, {}
    for t in c.transitions():
        if t.label == phi:
            phis[t.src] = t.weight
        else:
            counts[(t.src, t.label)] = t.weight
    return AggCountTable(counts, phis)
