"""From expected counts to the KL-minimizing automaton on a fixed topology.

Phi-free topologies use relative frequencies.  For phi topologies each state
is solved on its own: with ``y`` the distribution over the state's labels
(phi included) we maximize

    J(y) = sum_x C(x,q) log y_x - sum_{q0 -phi-> q} C(phi,q0) log(1 - sum_{x in L[q0]} y_x)

over ``y_x >= eps``, ``sum y = 1`` by repeatedly linearizing the second
(concave) term, then turn ``y`` into failure weights with
``alpha(q, q') = y_phi / d(q, q')``.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .automaton import Automaton, check_backoff_complete
from .counting import AggCountTable, CountTable, automaton_to_counts
from .errors import AutomatonError, CountError

DEFAULT_EPSILON = 1e-6
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 1000
MAX_HALVINGS = 200
OBJECTIVE_SLACK = 1e-9


class BackoffIndex:
    """Per state: sorted labels (phi included) and the states backing off into it."""

    def __init__(self, a: Automaton):
        self.automaton = a
        self.labels = [a.labels(q) for q in a.states()]
        self.b1 = a.backoff_sources()
        self.position = [{x: k for k, x in enumerate(ls)} for ls in self.labels]

    def contributor_mask(self, q, q0):
        """Boolean mask over ``labels[q]`` marking L[q0] minus phi."""
        a = self.automaton
        mask = np.zeros(len(self.labels[q]), dtype=bool)
        pos = self.position[q]
        for x in a.sigma_labels(q0):
            if x not in pos:
                raise AutomatonError(f"state {q0} reads {x} but its backoff state {q} does not")
            mask[pos[x]] = True
        return mask


@dataclass
class DcResult:
    y: np.ndarray
    iterations: int = 0
    converged: bool = True
    objective: list = field(default_factory=list)
    lam: float = float("nan")


def _objective(c, y, contrib):
    pos = c > 0
    u = float(np.sum(c[pos] * np.log(y[pos])))
    if not contrib:
        return u
    v = np.sort([cphi * math.log(float(np.sum(y[~mask]))) for cphi, mask in contrib]).sum()
    return u - float(v)


def _factors(y, contrib, k):
    if not contrib:
        return np.zeros(k)
    rows = np.zeros((len(contrib), k))
    for r, (cphi, mask) in enumerate(contrib):
        rows[r, mask] = cphi / float(np.sum(y[~mask]))
    # sort each column so the sum does not depend on the order of contributors
    return np.sort(rows, axis=0).sum(axis=0)


def _solve_lambda(c, f, epsilon, total, k):
    lo = float(np.max(f + c))
    hi = float(np.max(f)) + total / (1.0 - k * epsilon)
    pos = c > 0

    def y_of(lam):
        y = np.full(k, epsilon)
        y[pos] = np.maximum(c[pos] / (lam - f[pos]), epsilon)
        return y

    # A zero-count label with the largest factor can pin lambda at lo.  The
    # surrogate is then linear in that label, and the leftover mass belongs on it
    # rather than on the epsilon floor.
    y = y_of(lo)
    if y.sum() < 1.0:
        top = ~pos & (f >= lo)
        if top.any():
            y[top] += (1.0 - y.sum()) / int(top.sum())
            return y, lo

    for _ in range(MAX_HALVINGS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if y_of(mid).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    y = y_of(hi)
    y[int(np.argmax(y))] += 1.0 - y.sum()
    return y, hi


def _project(y, epsilon):
    """Nearest-in-spirit point of the floored simplex: clip, then rescale the excess."""
    y = np.maximum(y, epsilon)
    excess = y - epsilon
    room = 1.0 - len(y) * epsilon
    total = float(excess.sum())
    if total <= 0.0:
        return np.full(len(y), 1.0 / len(y))
    return epsilon + excess * (room / total)


def solve_dc(c, contrib, epsilon=DEFAULT_EPSILON, tol=DEFAULT_TOL,
             max_iters=DEFAULT_MAX_ITERS, trace=False, accelerate=True) -> DcResult:
    """Solve one state.

    ``c`` holds C(x, q) over the state's labels (phi included); ``contrib``
    is a list of ``(C(phi, q0), mask)`` for states ``q0`` backing off into
    ``q``, ``mask`` marking the labels ``q0`` reads itself.

    Each iteration applies the linearize-and-maximize update.  With
    ``accelerate`` it applies two updates, tries a squared-extrapolation jump
    from them (SQUAREM) followed by one more update, and keeps whichever
    candidate scores higher, so the objective still never decreases.
    """
    c = np.asarray(c, dtype=float)
    k = len(c)
    if k == 0:
        return DcResult(np.zeros(0))
    if np.any(c < 0) or any(cphi < 0 for cphi, _ in contrib):
        raise CountError("negative counts")
    if not np.all(np.isfinite(c)):
        raise CountError("non-finite counts")
    if epsilon * k >= 1.0:
        raise ValueError(f"epsilon={epsilon} is too large for a state with {k} labels")
    total = float(c.sum())
    if total == 0.0:
        return DcResult(np.full(k, 1.0 / k))
    contrib = [(float(cphi), m) for cphi, m in contrib if cphi > 0]

    def update(y):
        return _solve_lambda(c, _factors(y, contrib, k), epsilon, total, k)

    y = c / total * (1.0 - k * epsilon) + epsilon
    history = [_objective(c, y, contrib)]
    lam = float("nan")
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        new, lam = update(y)
        obj = _objective(c, new, contrib)
        if accelerate and contrib:
            y2, lam2 = update(new)
            obj2 = _objective(c, y2, contrib)
            r = new - y
            v = y2 - 2.0 * new + y
            nv = float(np.linalg.norm(v))
            if nv > 0.0:
                alpha = min(-float(np.linalg.norm(r)) / nv, -1.0)
                jump = _project(y - 2.0 * alpha * r + alpha * alpha * v, epsilon)
                y3, lam3 = update(jump)
                obj3 = _objective(c, y3, contrib)
                if obj3 > obj2:
                    y2, lam2, obj2 = y3, lam3, obj3
            if obj2 >= obj:
                new, lam, obj = y2, lam2, obj2
        if obj < history[-1] - OBJECTIVE_SLACK * max(1.0, abs(history[-1])):
            raise ArithmeticError(f"DC objective decreased from {history[-1]!r} to {obj!r}")
        history.append(obj)
        step = float(np.max(np.abs(new - y)))
        y = new
        if step < tol:
            converged = True
            break
    return DcResult(y, it, converged, history if trace else [], lam)


def solve_state_dc(q, counts: AggCountTable, bi: BackoffIndex, epsilon=DEFAULT_EPSILON,
                   tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS, trace=False):
    """y over ``bi.labels[q]`` for state ``q``; returns a :class:`DcResult`."""
    a = bi.automaton
    phi = a.phi_label
    c = np.array([counts.phi(q) if x == phi else counts.get(q, x) for x in bi.labels[q]])
    contrib = [(counts.phi(q0), bi.contributor_mask(q, q0)) for q0 in bi.b1[q]]
    return solve_dc(c, contrib, epsilon, tol, max_iters, trace)


def normalize_closed_form(counts: CountTable, a: Automaton) -> Automaton:
    """Relative frequencies c(x,q)/c(q); states without counts become uniform."""
    if a.has_phi():
        raise AutomatonError("closed-form normalization needs a phi-free topology")
    weights = {}
    for q in a.states():
        labels = a.labels(q)
        if not labels:
            continue
        c = np.array([counts.get(q, x) for x in labels])
        if np.any(c < 0):
            raise CountError(f"negative counts at state {q}")
        total = c.sum()
        y = c / total if total > 0 else np.full(len(c), 1.0 / len(c))
        weights[q] = dict(zip(labels, y.tolist()))
    return a.reweighted(lambda q, arc: weights[q][arc.label])


def assign_failure_weights(ys: dict, a: Automaton) -> Automaton:
    """Build the phi automaton from per-state companion distributions.

    ``ys[q]`` maps each label of q (phi included) to its probability.  Non-phi
    arcs get ``y_x``; the phi arc q -> q' gets ``y_phi / d(q, q')`` where
    ``d(q, q')`` is the mass q' leaves to labels q does not read.
    """
    phi = a.phi_label
    alpha = {}
    for q in a.states():
        back = a.phi_arc(q)
        if back is None:
            continue
        y_phi = ys[q][phi]
        if y_phi == 0.0:
            alpha[q] = 0.0
            continue
        here = set(a.sigma_labels(q))
        target = ys[back.nextstate]
        d = float(sum(target[x] for x in sorted(target) if x not in here))
        if not d > 0.0:
            raise AutomatonError(f"no residual mass at backoff state {back.nextstate} "
                                 f"for state {q} (d={d!r})")
        alpha[q] = y_phi / d

    def weight(q, arc):
        if arc.label == phi:
            return alpha[q]
        return ys[q][arc.label]

    return a.reweighted(weight)


def drop_unplaceable_backoff(ys: dict, a: Automaton, tol=0.0):
    """Zero y_phi wherever the backoff target leaves at most ``tol`` residual mass.

    The state's own labels are rescaled to absorb the mass.  Backoff targets
    are handled before the states backing off into them, since rescaling a
    target changes the residual its sources see.  Modifies ``ys`` in place
    and returns the states changed.
    """
    phi = a.phi_label
    changed = []
    for q in reversed(a.phi_topological_order()):
        back = a.phi_arc(q)
        if back is None or ys[q][phi] == 0.0:
            continue
        here = set(a.sigma_labels(q))
        target = ys[back.nextstate]
        if sum(target[x] for x in sorted(target) if x not in here) > tol:
            continue
        rest = math.fsum(v for x, v in ys[q].items() if x != phi)
        if not rest > 0.0:
            raise AutomatonError(f"state {q} has all its mass on a backoff arc that "
                                 "cannot place it")
        ys[q] = {x: (0.0 if x == phi else v / rest) for x, v in ys[q].items()}
        changed.append(q)
    return changed


def _require_backoff_complete(a):
    report = check_backoff_complete(a)
    if not report.ok:
        raise AutomatonError(f"topology is not backoff-complete: {report.violations[:3]}")


def normalize_kl_min(counts: AggCountTable, a: Automaton, epsilon=DEFAULT_EPSILON,
                     tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS, stats=None) -> Automaton:
    """Per-state DC solve followed by failure-weight assignment."""
    _require_backoff_complete(a)
    bi = BackoffIndex(a)
    ys = {}
    for q in a.states():
        if not bi.labels[q]:
            continue
        res = solve_state_dc(q, counts, bi, epsilon, tol, max_iters)
        ys[q] = dict(zip(bi.labels[q], res.y.tolist()))
        if stats is not None:
            stats[q] = (res.iterations, res.converged)
    return assign_failure_weights(ys, a)


def normalize_local(counts: AggCountTable, a: Automaton) -> Automaton:
    """Relative frequencies over each state's labels, phi included."""
    _require_backoff_complete(a)
    phi = a.phi_label
    ys = {}
    for q in a.states():
        labels = a.labels(q)
        if not labels:
            continue
        c = np.array([counts.phi(q) if x == phi else counts.get(q, x) for x in labels])
        if np.any(c < 0):
            raise CountError(f"negative counts at state {q}")
        total = c.sum()
        y = c / total if total > 0 else np.full(len(c), 1.0 / len(c))
        ys[q] = dict(zip(labels, y.tolist()))
    dropped = drop_unplaceable_backoff(ys, a)
    if dropped:
        warnings.warn(f"{len(dropped)} backoff arcs lead to states with no residual mass; "
                      "their weight was moved onto the direct arcs", RuntimeWarning, stacklevel=2)
    return assign_failure_weights(ys, a)


def normalize_counts(counts_automaton: Automaton, method="kl_min", epsilon=DEFAULT_EPSILON,
                     tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS) -> Automaton:
    """Normalize a counts automaton (arc weights C(x,q), phi weights C(phi,q))."""
    counts = automaton_to_counts(counts_automaton)
    topology = counts_automaton.topology()
    if method == "kl_min":
        if not topology.has_phi():
            return normalize_closed_form(counts, topology)
        return normalize_kl_min(counts, topology, epsilon, tol, max_iters)
    if method == "local":
        if not topology.has_phi():
            return normalize_closed_form(counts, topology)
        return normalize_local(counts, topology)
    if method in ("global", "phi"):
        raise ValueError(f"normalization method {method!r} is not supported "
                         "(weight pushing is out of scope); use kl_min or local")
    raise ValueError(f"unknown normalization method {method!r}")


def approximate(source, topology: Automaton, *, epsilon=DEFAULT_EPSILON, tol=DEFAULT_TOL,
                max_iters=DEFAULT_MAX_ITERS, samples=None, seed=0, jobs=1, queue=None):
    """Stochastic automaton on ``topology`` closest in KL divergence to ``source``.

    ``source`` is an :class:`Automaton` (counted exactly unless ``samples`` is
    given) or any sequence model (always sampled).
    """
    from .counting import count, count_sampled, counts_to_automaton

    if isinstance(source, Automaton) and samples is None:
        counts = count(source, topology, queue)
    else:
        if samples is None:
            raise ValueError("a non-automaton source needs a sample count")
        counts = count_sampled(source, topology, samples, seed, jobs=jobs)
    c = counts_to_automaton(counts, topology)
    return normalize_counts(c, "kl_min", epsilon, tol, max_iters)
