"""Random fixtures and brute-force oracles shared by the tests."""

import itertools
import math

import numpy as np

from sfst.automaton import Automaton, SymbolTable
from sfst.klmin import assign_failure_weights

PHI, END = 0, 1


def table(n_letters):
    """phi=0, $=1, letters 'a', 'b', ... from id 2."""
    entries = [("<phi>", PHI), ("$", END)]
    entries += [(chr(ord("a") + i), i + 2) for i in range(n_letters)]
    return SymbolTable(entries, PHI, END)


def _companion(rng, labels, min_weight):
    k = len(labels)
    p = rng.dirichlet(np.ones(k))
    p = min_weight + (1 - k * min_weight) * p
    return dict(zip(labels, p.tolist()))


def _weighted(structure, initial, final, symbols, rng, min_weight):
    """Assign companion distributions to an unweighted backoff structure."""
    a = Automaton(structure, initial, final, symbols)
    ys = {q: _companion(rng, a.labels(q), min_weight) for q in a.states() if a.labels(q)}
    return assign_failure_weights(ys, a)


def random_phi_wfa(rng, n_states=8, n_letters=3, min_weight=0.01, phi_prob=0.7,
                   complete=False):
    """Stochastic backoff-complete phi-WFA, cycles allowed.

    State 0 is the root (every letter and $, no phi); the final state is last.
    Other states back off along a tree towards the root.  With ``complete``
    every state without phi reads every letter and $, so any string can be
    read from any state (and pruning keeps that true).
    """
    letters = list(range(2, 2 + n_letters))
    final = n_states - 1
    inner = list(range(final))
    labels = {0: letters + [END]}
    parent = {}
    for q in inner[1:]:
        if rng.random() < phi_prob:
            p = int(rng.integers(0, q))
            pool = labels[p]
            size = int(rng.integers(0, len(pool) + (1 if p in parent else 0)))
            labels[q] = sorted(rng.choice(pool, size=size, replace=False).tolist())
            parent[q] = p
        else:
            # no backoff: must be able to stop on its own
            chosen = [x for x in letters if complete or rng.random() < 0.5]
            labels[q] = sorted(chosen + [END])
    structure = [[] for _ in range(n_states)]
    for q in inner:
        for x in labels[q]:
            dst = final if x == END else int(rng.integers(0, final))
            structure[q].append((x, 1.0, dst))
        if q in parent:
            structure[q].append((PHI, 1.0, parent[q]))
    start = int(rng.integers(0, final))
    return _weighted(structure, start, final, table(n_letters), rng, min_weight)


def random_acyclic_phi_wfa(rng, n_states=7, n_letters=2, min_weight=0.01, phi_prob=0.5):
    """Stochastic backoff-complete phi-WFA whose arcs (phi included) all go forward."""
    letters = list(range(2, 2 + n_letters))
    final = n_states - 1
    labels, parent = {}, {}
    for q in range(final - 1, -1, -1):
        later = [p for p in range(q + 1, final)]
        if q < final - 1 and later and rng.random() < phi_prob:
            p = int(rng.choice(later))
            pool = labels[p]
            strict = p not in parent
            size = int(rng.integers(0, len(pool) + (0 if strict else 1)))
            labels[q] = sorted(rng.choice(pool, size=size, replace=False).tolist()) if size else []
            parent[q] = p
        else:
            pool = (letters if q < final - 1 else []) + [END]
            size = int(rng.integers(1, len(pool) + 1))
            chosen = rng.choice(pool, size=size, replace=False).tolist()
            labels[q] = sorted(chosen)
    structure = [[] for _ in range(n_states)]
    for q in range(final):
        for x in labels[q]:
            dst = final if x == END else int(rng.integers(q + 1, final))
            structure[q].append((x, 1.0, dst))
        if q in parent:
            structure[q].append((PHI, 1.0, parent[q]))
    return _weighted(structure, 0, final, table(n_letters), rng, min_weight)


def random_wfa(rng, n_states=5, n_letters=2, acyclic=False, min_weight=0.01):
    """Stochastic deterministic WFA without phi; every state can reach the final state."""
    letters = list(range(2, 2 + n_letters))
    final = n_states - 1
    structure = [[] for _ in range(n_states)]
    for q in range(final):
        hi = final
        lo = q + 1 if acyclic else 0
        pool = letters if lo < hi else []
        chosen = [x for x in pool if rng.random() < 0.7]
        if not chosen or rng.random() < 0.6 or lo >= hi or q == 0:
            chosen.append(END)
        exit_via = None
        if END not in chosen and not acyclic:
            # no stop here: one letter leads to a lower state, which can stop
            exit_via = chosen[0]
        for x in chosen:
            if x == END:
                dst = final
            elif x == exit_via:
                dst = int(rng.integers(0, q))
            else:
                dst = int(rng.integers(lo, hi))
            structure[q].append((x, 1.0, dst))
    return _weighted(structure, 0, final, table(n_letters), rng, min_weight)


def root_topology(rng, n_states=4, n_letters=2, phi_prob=0.8):
    """Unweighted backoff-complete topology whose root reads every letter and $."""
    letters = list(range(2, 2 + n_letters))
    final = n_states - 1
    structure = [[] for _ in range(n_states)]
    labels = {0: letters + [END]}
    parent = {}
    for q in range(1, final):
        p = int(rng.integers(0, q))
        pool = labels[p]
        strict = p == 0
        size = int(rng.integers(0, len(pool) + (0 if strict else 1)))
        labels[q] = sorted(rng.choice(pool, size=size, replace=False).tolist()) if size else []
        parent[q] = p
    for q in range(final):
        for x in labels[q]:
            dst = final if x == END else int(rng.integers(0, final))
            structure[q].append((x, 1.0, dst))
        if q in parent:
            structure[q].append((PHI, 1.0, parent[q]))
    start = int(rng.integers(0, final))
    return Automaton(structure, start, final, table(n_letters))


def enumerate_strings(a: Automaton, max_len):
    """Every string (ending in $) of length <= max_len with nonzero weight, via E*."""
    out = {}
    frontier = [((), a.initial, 1.0)]
    for _ in range(max_len):
        nxt = []
        for prefix, q, w in frontier:
            if q == a.final:
                continue
            for e in a.e_star(q):
                s = prefix + (e.label,)
                if e.dst == a.final:
                    out[s] = out.get(s, 0.0) + w * e.weight
                else:
                    nxt.append((s, e.dst, w * e.weight))
        frontier = nxt
    return out


def all_strings(symbols, max_len):
    """Every letter string of length < max_len followed by $."""
    letters = [i for i in symbols.ids() if i not in (symbols.phi_id, symbols.terminator_id)]
    for n in range(max_len):
        for body in itertools.product(letters, repeat=n):
            yield body + (symbols.terminator_id,)


def brute_counts(strings: dict, a: Automaton):
    """C(x, q) and C(phi, q) by walking each weighted string through ``a``."""
    counts, phis = {}, {}
    for s, p in strings.items():
        q = a.initial
        for x in s:
            e = a.resolve(q, x)
            assert e is not None, (s, x)
            r = q
            while r != e.resolved_at:
                phis[r] = phis.get(r, 0.0) + p
                r = a.phi_arc(r).nextstate
            counts[(e.resolved_at, x)] = counts.get((e.resolved_at, x), 0.0) + p
            q = e.dst
    return counts, phis


def tv(p: dict, q: dict):
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def brute_kl(s: Automaton, t: Automaton, max_len):
    total = 0.0
    for w, p in enumerate_strings(s, max_len).items():
        pt = t.string_weight(w)
        if pt == 0:
            return math.inf
        total += p * math.log(p / pt)
    return total


def visited_states(a: Automaton):
    """States reachable from the initial state through E* arcs of positive weight."""
    seen = {a.initial}
    todo = [a.initial]
    while todo:
        q = todo.pop()
        if q == a.final:
            continue
        for e in a.e_star(q):
            if e.weight > 0 and e.dst not in seen:
                seen.add(e.dst)
                todo.append(e.dst)
    return seen


def e_star_dist(a: Automaton, q):
    return {e.label: e.weight for e in a.e_star(q)}


def complete_dfa(rng, n_states=4, n_letters=2):
    """Unweighted phi-free topology reading every letter and $ at every state."""
    final = n_states - 1
    structure = [[] for _ in range(n_states)]
    for q in range(final):
        for x in range(2, 2 + n_letters):
            structure[q].append((x, 1.0, int(rng.integers(0, final))))
        structure[q].append((END, 1.0, final))
    return Automaton(structure, 0, final, table(n_letters))


def dc_objective(c, cphi, mask, y):
    """The per-state objective with a single backoff contributor (vectorized over rows of y)."""
    y = np.atleast_2d(y)
    with np.errstate(divide="ignore"):
        u = np.where(c > 0, c * np.log(y), 0.0).sum(axis=1)
        v = cphi * np.log(1.0 - y[:, mask].sum(axis=1))
    return u - v


def grid_argmax(c, cphi, mask, epsilon, step=1e-3, refine=(1e-5, 1e-7)):
    """Maximize the objective over the epsilon-floored simplex on a grid, then refine locally.

    Works for 2 or 3 labels.
    """
    c = np.asarray(c, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    k = len(c)

    def points(centre, half, h):
        if k == 2:
            y0 = np.arange(centre[0] - half, centre[0] + half + h / 2, h)
            ys = np.stack([y0, 1.0 - y0], axis=1)
        else:
            g = np.arange(-half, half + h / 2, h)
            y0, y1 = np.meshgrid(centre[0] + g, centre[1] + g, indexing="ij")
            y0, y1 = y0.ravel(), y1.ravel()
            ys = np.stack([y0, y1, 1.0 - y0 - y1], axis=1)
        return ys[np.all(ys >= epsilon, axis=1)]

    ys = points(np.full(k, 0.5), 0.5, step)
    best = ys[int(np.argmax(dc_objective(c, cphi, mask, ys)))]
    prev = step
    for h in refine:
        ys = points(best, 2 * prev, h)
        best = ys[int(np.argmax(dc_objective(c, cphi, mask, ys)))]
        prev = h
    return best


def forward_counts(s: Automaton, a: Automaton, max_len=400):
    """C(x, q) and C(phi, q) by pushing pair distributions forward one symbol at a time.

    Independent of the product construction: every step resolves the symbol on
    ``a`` directly.  Mass on strings longer than ``max_len`` is dropped.
    """
    counts, phis = {}, {}
    frontier = {(s.initial, a.initial): 1.0}
    for _ in range(max_len):
        nxt = {}
        for (qs, qa), w in frontier.items():
            for e in s.e_star(qs):
                p = w * e.weight
                if p == 0.0:
                    continue
                r = a.resolve(qa, e.label)
                assert r is not None, (qa, e.label)
                q = qa
                while q != r.resolved_at:
                    phis[q] = phis.get(q, 0.0) + p
                    q = a.phi_arc(q).nextstate
                counts[(r.resolved_at, e.label)] = counts.get((r.resolved_at, e.label), 0.0) + p
                if e.dst != s.final:
                    nxt[(e.dst, r.dst)] = nxt.get((e.dst, r.dst), 0.0) + p
        frontier = nxt
        if not frontier:
            break
    return counts, phis
