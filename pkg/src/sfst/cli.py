"""``sfst`` command line: one executable, one subcommand per operation.

Exit status is 0 on success, 1 on a usage error and 2 when the input data
is rejected.
"""

import argparse
import math
import sys

from . import __version__
from .automaton import trim
from .counting import automaton_to_counts, count, count_sampled, counts_to_automaton
from .errors import SampleTruncated, SfstError
from .evaluation import perplexity, topology_lower_bound
from .intersect import intersect_phi, intersect_wfa
from .klmin import (DEFAULT_EPSILON, DEFAULT_MAX_ITERS, DEFAULT_TOL, normalize_counts)
from .models import DEFAULT_MAX_LEN, WfaBackedModel, make_rng, sample
from .ngram import NgramCounts, count_ngrams, katz_model, threshold_prune_topology
from .shortest_distance import parse_queue, shortest_distance
from .textio import (encode_corpus, format_weight, read_automaton, read_corpus, read_symbols,
                     serialize_automaton, serialize_symbols)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError("must be a positive number")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be a non-negative number")
    return v


def _common(p, symbols=True):
    p.add_argument("--phi-label", type=_nonneg_int, default=0, metavar="ID",
                   help="symbol id of failure transitions (default 0)")
    if symbols:
        p.add_argument("--symbols", metavar="FILE",
                       help="symbol table ('symbol id' lines); numeric ids otherwise")


def _solver(p):
    p.add_argument("--epsilon", type=_positive_float, default=DEFAULT_EPSILON)
    p.add_argument("--tol", type=_positive_float, default=DEFAULT_TOL)
    p.add_argument("--max-iters", type=_positive_int, default=DEFAULT_MAX_ITERS)


def _sampling(p):
    p.add_argument("--samples", type=_positive_int, metavar="N",
                   help="estimate counts from N sampled strings instead of exactly")
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--jobs", type=_positive_int, default=1, help="worker processes for sampling")


def _queue(p, default="auto"):
    p.add_argument("--queue", choices=["auto", "topo", "fifo", "direct"] if default == "auto"
                   else ["topo", "fifo", "direct"], default=default,
                   help="topo: acyclic only; fifo: iterative; direct: dense linear solve")
    p.add_argument("--delta", type=_positive_float, default=1e-12,
                   help="FIFO convergence threshold")


def build_parser():
    parser = _Parser(prog="sfst", description="Approximate sequence models by "
                     "weighted automata with failure transitions.")
    parser.add_argument("--version", action="version", version=f"sfst {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("approx", help="KL-minimizing weights for a topology")
    _common(p)
    _solver(p)
    _sampling(p)
    _queue(p)
    p.add_argument("source")
    p.add_argument("topology")

    p = sub.add_parser("count", help="expected counts of a source on a topology")
    _common(p)
    _sampling(p)
    _queue(p)
    p.add_argument("source")
    p.add_argument("topology")

    p = sub.add_parser("normalize", help="turn a counts automaton into a stochastic one")
    _common(p)
    _solver(p)
    p.add_argument("--method", choices=["kl_min", "local", "global", "phi"], default="kl_min")
    p.add_argument("counts")

    p = sub.add_parser("intersect", help="intersection of two automata")
    _common(p)
    p.add_argument("--phi", action="store_true", help="keep failure transitions")
    p.add_argument("first")
    p.add_argument("second")

    p = sub.add_parser("perplexity", help="evaluate a model on a corpus")
    _common(p)
    p.add_argument("--bits", action="store_true", help="lead with bits per symbol")
    p.add_argument("--unk", metavar="SYMBOL", help="map unknown words to SYMBOL")
    p.add_argument("--lower-bound", action="store_true",
                   help="report the best perplexity reachable on the model's topology")
    _solver(p)
    p.add_argument("model")
    p.add_argument("corpus")

    p = sub.add_parser("randgen", help="sample sentences from a model")
    _common(p)
    p.add_argument("--n", type=_positive_int, default=1)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--max-len", type=_positive_int, default=DEFAULT_MAX_LEN)
    p.add_argument("model")

    p = sub.add_parser("shortestdistance", help="expected visits of every state")
    _common(p, symbols=False)
    _queue(p, default="fifo")
    p.add_argument("--max-sweeps", type=_positive_int, default=10000)
    p.add_argument("fst")

    p = sub.add_parser("trim", help="remove useless states and transitions")
    _common(p, symbols=False)
    p.add_argument("fst")

    p = sub.add_parser("ngram-count", help="count n-grams of a corpus")
    p.add_argument("--order", type=_positive_int, default=3)
    p.add_argument("corpus")

    p = sub.add_parser("ngram-make", help="Katz backoff model from n-gram counts")
    p.add_argument("--method", choices=["katz"], default="katz")
    p.add_argument("--write-symbols", metavar="FILE", help="also write the symbol table")
    p.add_argument("counts")

    p = sub.add_parser("ngram-prune", help="count-threshold pruning of a backoff topology")
    _common(p)
    p.add_argument("--theta", type=_nonneg_float, required=True)
    p.add_argument("--renormalize", action="store_true",
                   help="keep surviving weights and recompute backoff weights")
    p.add_argument("model")
    p.add_argument("counts")
    return parser


def _table(args):
    if getattr(args, "symbols", None):
        return read_symbols(args.symbols, phi_id=args.phi_label)
    return None


def _read(path, args, table=None):
    return read_automaton(path, table, phi_id=args.phi_label)


def _counts(args, source, topology):
    if args.samples:
        return count_sampled(source, topology, args.samples, args.seed, jobs=args.jobs)
    queue = None if args.queue == "auto" else parse_queue(args.queue, args.delta)
    return count(source, topology, queue)


def cmd_approx(args, out):
    table = _table(args)
    source, topology = _read(args.source, args, table), _read(args.topology, args, table)
    c = counts_to_automaton(_counts(args, source, topology), topology)
    model = normalize_counts(c, "kl_min", args.epsilon, args.tol, args.max_iters)
    out.write(serialize_automaton(model))


def cmd_count(args, out):
    table = _table(args)
    source, topology = _read(args.source, args, table), _read(args.topology, args, table)
    out.write(serialize_automaton(counts_to_automaton(_counts(args, source, topology), topology)))


def cmd_normalize(args, out):
    if args.method in ("global", "phi"):
        raise UsageError(f"--method={args.method} is out of scope (weight pushing is not "
                         "provided); use kl_min or local")
    c = _read(args.counts, args, _table(args))
    out.write(serialize_automaton(normalize_counts(c, args.method, args.epsilon, args.tol,
                                                   args.max_iters)))


def cmd_intersect(args, out):
    table = _table(args)
    s, a = _read(args.first, args, table), _read(args.second, args, table)
    product = intersect_phi(s, a) if args.phi else intersect_wfa(s, a)
    out.write(serialize_automaton(trim(product.machine)))


def _model_and_table(args):
    table = _table(args)
    model = _read(args.model, args, table)
    return model, model.symbols


def cmd_perplexity(args, out):
    model, table = _model_and_table(args)
    corpus, oov = encode_corpus(read_corpus(args.corpus), table, unk=args.unk,
                                source=args.corpus)
    if args.lower_bound:
        report = topology_lower_bound(corpus, model.topology(), epsilon=args.epsilon,
                                      tol=args.tol, max_iters=args.max_iters)
        report.oov_count = oov
    else:
        report = perplexity(WfaBackedModel(model), corpus, oov)
    out.write("".join(line + "\n" for line in report.lines(bits=args.bits)))
    if report.zero_prob_line is not None:
        print(f"sfst: line {report.zero_prob_line} of {args.corpus} has zero probability",
              file=sys.stderr)


def cmd_randgen(args, out):
    model, table = _model_and_table(args)
    m = WfaBackedModel(model)
    rng = make_rng(args.seed)
    dropped = 0
    for _ in range(args.n):
        try:
            sent = sample(m, max_len=args.max_len, rng=rng)
        except SampleTruncated:
            dropped += 1
            continue
        out.write(" ".join(table.name(x) for x in sent[:-1]) + "\n")
    if dropped:
        print(f"sfst: dropped {dropped} samples longer than {args.max_len} symbols",
              file=sys.stderr)


def cmd_shortestdistance(args, out):
    a = _read(args.fst, args).canonical()
    edges = [(q, e.dst, e.weight) for q in a.states() if q != a.final for e in a.e_star(q)]
    queue = parse_queue(args.queue, args.delta, args.max_sweeps)
    d = shortest_distance((a.num_states, a.initial, edges), queue)
    out.write("".join(f"{q} {format_weight(float(v))}\n" for q, v in enumerate(d.values)))


def cmd_trim(args, out):
    out.write(serialize_automaton(trim(_read(args.fst, args))))


def cmd_ngram_count(args, out):
    corpus = read_corpus(args.corpus)
    if not corpus:
        raise SfstError(f"{args.corpus}: empty corpus")
    out.write(count_ngrams(corpus, args.order).to_text())


def cmd_ngram_make(args, out):
    with open(args.counts, "rb") as fh:
        nc = NgramCounts.from_text(fh.read(), source=args.counts)
    model, table = katz_model(nc, nc.order)
    if args.write_symbols:
        with open(args.write_symbols, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(serialize_symbols(table))
    out.write(serialize_automaton(model))


def cmd_ngram_prune(args, out):
    table = _table(args)
    model = _read(args.model, args, table).canonical()
    counts_fst = _read(args.counts, args, table).canonical()
    if counts_fst.topology() != model.topology():
        raise SfstError("the counts automaton does not share the model's topology")
    counts = automaton_to_counts(counts_fst)
    pruned = threshold_prune_topology(model, counts, args.theta, keep_weights=args.renormalize)
    out.write(serialize_automaton(pruned))


COMMANDS = {
    "approx": cmd_approx, "count": cmd_count, "normalize": cmd_normalize,
    "intersect": cmd_intersect, "perplexity": cmd_perplexity, "randgen": cmd_randgen,
    "shortestdistance": cmd_shortestdistance, "trim": cmd_trim,
    "ngram-count": cmd_ngram_count, "ngram-make": cmd_ngram_make,
    "ngram-prune": cmd_ngram_prune,
}


def run(argv=None, out=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = out if out is not None else sys.stdout
    try:
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"sfst {args.command}: {exc}", file=sys.stderr)
        return 1
    except (SfstError, ValueError, ArithmeticError, OSError) as exc:
        print(f"sfst {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None):
    if hasattr(sys.stdout, "reconfigure"):
        sys.stdout.reconfigure(encoding="utf-8", newline="\n")
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
