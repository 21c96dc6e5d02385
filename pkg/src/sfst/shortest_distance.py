"""Single-source shortest distance in the (positive) real semiring.

``d[q]`` is the sum over all paths from the initial state to ``q`` of the
product of arc weights, the empty path contributing 1 at the initial state.
Phi arcs, when present, are treated as ordinary (epsilon) edges.
"""

from dataclasses import dataclass
from collections import deque
from typing import NamedTuple, Union

import numpy as np

from .automaton import Automaton
from .errors import ConvergenceError, CyclicError

POSITIVE_REAL = "positive-real"
REAL = "real"


class TopologicalQueue(NamedTuple):
    name = "topo"


class FifoQueue(NamedTuple):
    convergence_delta: float = 1e-12
    max_sweeps: int = 10000
    name = "fifo"


class DirectSolve(NamedTuple):
    """Solve the linear system d = e_i + W^T d on the reachable part (dense, exact up to rounding)."""
    name = "direct"


QueueDiscipline = Union[TopologicalQueue, FifoQueue, DirectSolve]

# automatic choice uses the direct solve on cyclic graphs up to this many reachable states
DIRECT_MAX_STATES = 2500


@dataclass
class DistanceVector:
    values: np.ndarray
    semiring: str
    sweeps: float = 1.0  # queue pops divided by the number of states

    def __getitem__(self, q):
        return self.values[q]

    def __len__(self):
        return len(self.values)


class WeightedGraph(NamedTuple):
    """Minimal graph view: ``edges`` is a sequence of ``(src, dst, weight)``."""
    num_states: int
    initial: int
    edges: tuple


def graph_view(g) -> WeightedGraph:
    if isinstance(g, WeightedGraph):
        return g
    if isinstance(g, Automaton):
        return WeightedGraph(g.num_states, g.initial,
                             tuple((t.src, t.dst, t.weight) for t in g.transitions()))
    if hasattr(g, "weighted_edges"):
        return WeightedGraph(g.num_states, g.initial, tuple(g.weighted_edges()))
    n, initial, edges = g
    return WeightedGraph(n, initial, tuple(edges))


def parse_queue(queue, delta=None, max_sweeps=None):
    """Accept a queue object or the names ``topo``/``topological``/``fifo``/``direct``."""
    if isinstance(queue, (TopologicalQueue, FifoQueue, DirectSolve)):
        return queue
    if queue == "direct":
        return DirectSolve()
    if queue in ("topo", "topological"):
        return TopologicalQueue()
    if queue == "fifo":
        kw = {}
        if delta is not None:
            kw["convergence_delta"] = float(delta)
        if max_sweeps is not None:
            kw["max_sweeps"] = int(max_sweeps)
        return FifoQueue(**kw)
    raise ValueError(f"unknown queue discipline {queue!r}")


def _adjacency(g: WeightedGraph, semiring):
    adj = [[] for _ in range(g.num_states)]
    for src, dst, w in g.edges:
        if semiring == POSITIVE_REAL and w < 0:
            raise ValueError(f"negative weight {w} in the positive real semiring")
        adj[src].append((dst, w))
    return adj


def _reachable(adj, initial):
    seen = [False] * len(adj)
    seen[initial] = True
    stack = [initial]
    while stack:
        q = stack.pop()
        for dst, _ in adj[q]:
            if not seen[dst]:
                seen[dst] = True
                stack.append(dst)
    return seen


def topological_order(adj, initial):
    """Kahn order of the part reachable from ``initial``; CyclicError on a cycle."""
    live = _reachable(adj, initial)
    indeg = [0] * len(adj)
    for q, row in enumerate(adj):
        if live[q]:
            for dst, _ in row:
                indeg[dst] += 1
    order = []
    ready = deque([initial]) if indeg[initial] == 0 else deque()
    while ready:
        q = ready.popleft()
        order.append(q)
        for dst, _ in adj[q]:
            indeg[dst] -= 1
            if indeg[dst] == 0:
                ready.append(dst)
    if len(order) != sum(live):
        raise CyclicError("topological queue requested on a cyclic graph")
    return order


def shortest_distance(g, queue: QueueDiscipline = FifoQueue(), semiring=POSITIVE_REAL):
    if semiring not in (POSITIVE_REAL, REAL):
        raise ValueError(f"unknown semiring {semiring!r}")
    queue = parse_queue(queue)
    g = graph_view(g)
    adj = _adjacency(g, semiring)
    n = g.num_states
    d = [0.0] * n
    if isinstance(queue, TopologicalQueue):
        d[g.initial] = 1.0
        for q in topological_order(adj, g.initial):
            dq = d[q]
            if dq == 0.0:
                continue
            for dst, w in adj[q]:
                d[dst] += dq * w
        return DistanceVector(np.array(d), semiring, 1.0)
    if isinstance(queue, DirectSolve):
        return _direct(g, adj, semiring)

    delta = queue.convergence_delta
    r = [0.0] * n
    d[g.initial] = r[g.initial] = 1.0
    fifo = deque([g.initial])
    queued = [False] * n
    queued[g.initial] = True
    budget = queue.max_sweeps * max(n, 1)
    pops = 0
    while fifo:
        if pops >= budget:
            residual = max(abs(x) for x in r)
            raise ConvergenceError(
                f"shortest distance did not converge after {queue.max_sweeps} sweeps "
                f"(residual {residual:.3g})", residual)
        q = fifo.popleft()
        queued[q] = False
        pops += 1
        rq = r[q]
        r[q] = 0.0
        for dst, w in adj[q]:
            inc = rq * w
            d[dst] += inc
            r[dst] += inc
            if not queued[dst] and abs(r[dst]) > delta * max(1.0, abs(d[dst])):
                queued[dst] = True
                fifo.append(dst)
    return DistanceVector(np.array(d), semiring, pops / max(n, 1))


def _direct(g: WeightedGraph, adj, semiring):
    live = _reachable(adj, g.initial)
    reach = [q for q in range(len(live)) if live[q]]
    pos = {q: k for k, q in enumerate(reach)}
    m = np.eye(len(reach))
    for src, dst, w in g.edges:
        if src in pos:
            m[pos[dst], pos[src]] -= w
    rhs = np.zeros(len(reach))
    rhs[pos[g.initial]] = 1.0
    try:
        x = np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError:
        raise ConvergenceError("path sums diverge (singular system)", float("inf")) from None
    if not np.all(np.isfinite(x)) or (semiring == POSITIVE_REAL and np.any(x < -1e-9)):
        raise ConvergenceError("path sums diverge", float("inf"))
    d = np.zeros(g.num_states)
    d[reach] = np.maximum(x, 0.0) if semiring == POSITIVE_REAL else x
    return DistanceVector(d, semiring, 1.0)


def automatic_queue(g, delta=1e-12, max_sweeps=10000):
    """Topological order when the graph is acyclic; otherwise a direct solve for
    moderate sizes and FIFO beyond that."""
    g = graph_view(g)
    adj = _adjacency(g, REAL)
    try:
        topological_order(adj, g.initial)
        return TopologicalQueue()
    except CyclicError:
        if sum(_reachable(adj, g.initial)) <= DIRECT_MAX_STATES:
            return DirectSolve()
        return FifoQueue(delta, max_sweeps)
