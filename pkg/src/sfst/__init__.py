"""Approximating sequence models by weighted automata with failure transitions."""

__version__ = "0.1.0"

from .automaton import (Arc, Automaton, PhiExtendedArc, SymbolTable, Transition,
                        check_backoff_complete, is_stochastic, phi_extended_transitions, trim)
from .counting import (AggCountTable, CountTable, count, count_phi, count_sampled, count_wfa,
                       phi_count_from_flow)
from .errors import (AutomatonError, ConvergenceError, CountError, CoverageError, CyclicError,
                     EmptyLanguageError, FormatError, SfstError, SymbolTableMismatch)
from .evaluation import EvalReport, kl_divergence, perplexity, topology_lower_bound
from .intersect import compensate_phi, intersect_phi, intersect_wfa
from .klmin import (approximate, assign_failure_weights, normalize_closed_form, normalize_counts,
                    solve_state_dc)
from .models import SequenceModel, ToyCharModel, WfaBackedModel, make_rng, sample, score
from .ngram import build_kgram_topology, katz_model, threshold_prune_topology
from .shortest_distance import DirectSolve, FifoQueue, TopologicalQueue, shortest_distance
from .textio import parse_automaton, parse_symbols, serialize_automaton

__all__ = [
    "Arc", "Automaton", "PhiExtendedArc", "SymbolTable", "Transition", "check_backoff_complete",
    "is_stochastic", "phi_extended_transitions", "trim",
    "AggCountTable", "CountTable", "count", "count_phi", "count_sampled", "count_wfa",
    "phi_count_from_flow",
    "AutomatonError", "ConvergenceError", "CountError", "CoverageError", "CyclicError",
    "EmptyLanguageError", "FormatError", "SfstError", "SymbolTableMismatch",
    "EvalReport", "kl_divergence", "perplexity", "topology_lower_bound",
    "compensate_phi", "intersect_phi", "intersect_wfa",
    "approximate", "assign_failure_weights", "normalize_closed_form", "normalize_counts",
    "solve_state_dc",
    "SequenceModel", "ToyCharModel", "WfaBackedModel", "make_rng", "sample", "score",
    "build_kgram_topology", "katz_model", "threshold_prune_topology",
    "DirectSolve", "FifoQueue", "TopologicalQueue", "shortest_distance",
    "parse_automaton", "parse_symbols", "serialize_automaton",
]
