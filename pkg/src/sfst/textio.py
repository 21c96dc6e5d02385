"""Text formats: automata, symbol tables and corpora.

Automaton lines are ``src dst label [weight]`` for arcs and a lone ``state``
for the final state.  The initial state is the source of the first arc.
"""

import math

from .automaton import PHI_NAME, TERMINATOR_NAME, Automaton, SymbolTable
from .errors import AutomatonError, FormatError


def _lines(text):
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    return text.splitlines()


def _int(tok, what, lineno, source):
    try:
        v = int(tok)
    except ValueError:
        raise FormatError(f"{what} {tok!r} is not an integer", lineno, source) from None
    if v < 0:
        raise FormatError(f"negative {what} {v}", lineno, source)
    return v


def parse_automaton(text, symbols=None, *, phi_id=0, source=None, allow_negative=False):
    """Parse the line format into an :class:`Automaton`.

    Without ``symbols`` a numeric table is inferred: ids name themselves and
    the terminator is the single label on arcs into the final state.
    """
    if symbols is not None:
        phi_id = symbols.phi_id
    index = {}

    def state(tok, lineno):
        raw = _int(tok, "state", lineno, source)
        if raw not in index:
            index[raw] = len(index)
        return index[raw]

    arcs = []
    seen = {}
    final = None
    initial = None
    for lineno, line in enumerate(_lines(text), 1):
        toks = line.split()
        if not toks:
            continue
        if len(toks) == 1:
            q = state(toks[0], lineno)
            if final is not None:
                raise FormatError("more than one final state", lineno, source)
            final = (q, lineno)
            continue
        if len(toks) not in (3, 4):
            raise FormatError(f"expected 'src dst label [weight]', got {len(toks)} fields",
                              lineno, source)
        src = state(toks[0], lineno)
        dst = state(toks[1], lineno)
        label = _int(toks[2], "label", lineno, source)
        if len(toks) == 4:
            try:
                w = float(toks[3])
            except ValueError:
                raise FormatError(f"weight {toks[3]!r} is not a number", lineno, source) from None
            if not math.isfinite(w) or (w < 0 and not allow_negative):
                raise FormatError(f"bad weight {toks[3]!r}", lineno, source)
        else:
            w = 1.0
        if initial is None:
            initial = src
        if symbols is not None and label not in symbols:
            raise FormatError(f"unknown symbol id {label}", lineno, source)
        key = (src, label)
        if key in seen:
            if label == phi_id:
                raise FormatError(f"state {toks[0]} has more than one phi transition",
                                  lineno, source)
            raise FormatError(f"duplicate transition from state {toks[0]} with label {label}"
                              f" (first on line {seen[key]})", lineno, source)
        seen[key] = lineno
        arcs.append((src, label, w, dst, lineno))
    if final is None:
        raise FormatError("no final state line", None, source)
    if initial is None:
        raise FormatError("no transitions", None, source)
    final_state, final_line = final
    for src, label, w, dst, lineno in arcs:
        if src == final_state:
            raise FormatError("transition leaves the final state", lineno, source)

    if symbols is None:
        into_final = {label for _, label, _, dst, _ in arcs if dst == final_state}
        if len(into_final) != 1:
            raise FormatError("cannot infer the terminator (arcs into the final state carry "
                              f"{len(into_final)} labels); supply a symbol table", None, source)
        term = into_final.pop()
        if term == phi_id:
            raise FormatError("phi transition into the final state", None, source)
        symbols = SymbolTable.numeric({a[1] for a in arcs}, phi_id=phi_id, terminator_id=term)

    table = [[] for _ in range(len(index))]
    for src, label, w, dst, _ in arcs:
        table[src].append((label, w, dst))
    try:
        return Automaton(table, initial, final_state, symbols, allow_negative=allow_negative)
    except AutomatonError as exc:
        raise FormatError(str(exc), None, source) from None


def format_weight(w: float) -> str:
    return format(w, ".17g")


def serialize_automaton(a: Automaton) -> str:
    """Canonical text: breadth-first state order, arcs sorted by label."""
    c = a.canonical()
    out = []
    for q in c.states():
        if q == c.final:
            out.append(f"{q}\n")
            continue
        for arc in c.arcs(q):
            out.append(f"{q} {arc.nextstate} {arc.label} {format_weight(arc.weight)}\n")
    return "".join(out)


def read_automaton(path, symbols=None, *, phi_id=0):
    with open(path, "rb") as fh:
        return parse_automaton(fh.read(), symbols, phi_id=phi_id, source=str(path))


def write_automaton(a: Automaton, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_automaton(a))


def parse_symbols(text, *, phi_id=0, terminator=TERMINATOR_NAME, source=None) -> SymbolTable:
    """Parse ``symbol id`` lines.  Whatever name id ``phi_id`` carries is the phi symbol."""
    entries = []
    for lineno, line in enumerate(_lines(text), 1):
        toks = line.split()
        if not toks:
            continue
        if len(toks) != 2:
            raise FormatError("expected 'symbol id'", lineno, source)
        entries.append((toks[0], _int(toks[1], "symbol id", lineno, source)))
    names = dict(entries)
    if terminator not in names:
        raise FormatError(f"symbol table lacks the terminator {terminator!r}", None, source)
    try:
        table = SymbolTable(entries, phi_id=phi_id, terminator_id=names[terminator])
    except ValueError as exc:
        raise FormatError(str(exc), None, source) from None
    return table


def serialize_symbols(symbols: SymbolTable) -> str:
    return "".join(f"{name} {i}\n" for name, i in symbols.items())


def read_symbols(path, *, phi_id=0):
    with open(path, "rb") as fh:
        return parse_symbols(fh.read(), phi_id=phi_id, source=str(path))


def tokenize_corpus(text):
    """Whitespace-split sentences, one per non-empty line."""
    return [line.split() for line in _lines(text) if line.strip()]


def encode_corpus(sentences, symbols: SymbolTable, *, unk=None, source=None):
    """Map token lists to id tuples ending in the terminator.

    Unknown tokens are an error unless ``unk`` names a symbol to map them to.
    Returns ``(encoded, oov_count)``.
    """
    unk_id = None
    if unk is not None:
        unk_id = symbols.get(unk)
        if unk_id is None:
            raise FormatError(f"unknown-word symbol {unk!r} not in the symbol table")
    reserved = {symbols.phi_id, symbols.terminator_id}
    encoded = []
    oov = 0
    for lineno, toks in enumerate(sentences, 1):
        ids = []
        for tok in toks:
            i = symbols.get(tok)
            if i is None or i in reserved:
                if i in reserved:
                    raise FormatError(f"reserved symbol {tok!r} inside a sentence", lineno, source)
                if unk_id is None:
                    raise FormatError(f"unknown symbol {tok!r}", lineno, source)
                oov += 1
                i = unk_id
            ids.append(i)
        ids.append(symbols.terminator_id)
        encoded.append(tuple(ids))
    return encoded, oov


def read_corpus(path):
    with open(path, "rb") as fh:
        return tokenize_corpus(fh.read())


__all__ = [
    "PHI_NAME", "TERMINATOR_NAME", "parse_automaton", "serialize_automaton",
    "read_automaton", "write_automaton", "parse_symbols", "serialize_symbols",
    "read_symbols", "tokenize_corpus", "encode_corpus", "read_corpus", "format_weight",
]
