"""Two-dimensional grammar and probabilistic parsing of the lattice.

The grammar is a context-free grammar whose binary rules carry a spatial
relation: ``A -> Rel(B, C)`` says an A is a B followed (in writing order)
by a C, attached via Rel.  Terminal rules ``A -> 'token'`` anchor
nonterminals to symbol labels.  Text format:

    # comments run to end of line
    start: Expr
    Expr -> Right(Expr, Term)
    Term -> 'x'

The ``start:`` header is optional; the first rule's left-hand side is the
default start symbol.

Parsing is CYK over contiguous segment spans.  A chart item is a partial
symbol relation tree (a fragment).  Composing ``A -> Rel(B, C)`` grafts
C's root onto B at an attachment point determined by B's shape:

- the attachment target starts at the end of B's baseline (the chain of
  Right children from the root);
- Sup and Sub descend into an existing script subtree so stacked scripts
  chain instead of colliding;
- Above and Below are only valid on fraction bars and big operators,
  Inside only on radicals.

A terminal scores P(label) from its segment's candidates; a composition
scores P(B) * P(C) * P(rel), where P(rel) is read from the boundary
decision when the two attachment segments are temporally adjacent and
from the caller's relation oracle otherwise.

Fragments that share a span, nonterminal, segment shape and dominance
pattern compete; only the best survive (label choices do not affect any
future factor, so this pruning is exact for the best parse).
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass
from typing import Callable

from .decode import CandidateLattice
from .srt import (
    BIG_OPERATORS,
    DOMINANT_LABELS,
    FRACTION_LABELS,
    RADICAL_LABEL,
    EmissionError,
    Relation,
    SRTNode,
    canonicalize,
    srt_to_latex,
)


class GrammarError(ValueError):
    """Raised for unparseable or inconsistent grammar files."""


@dataclass(frozen=True)
class TerminalRule:
    lhs: str
    token: str


@dataclass(frozen=True)
class BinaryRule:
    lhs: str
    relation: Relation
    first: str
    second: str


_HEADER = re.compile(r"^start\s*:\s*(\w+)$")
_TERMINAL = re.compile(r"^(\w+)\s*->\s*'([^']+)'$")
_BINARY = re.compile(r"^(\w+)\s*->\s*(\w+)\s*\(\s*(\w+)\s*,\s*(\w+)\s*\)$")


class Grammar:
    def __init__(self, start: str, terminals: list[TerminalRule], binaries: list[BinaryRule]):
        self.start = start
        self.terminals = tuple(terminals)
        self.binaries = tuple(binaries)
        self._by_token: dict[str, list[str]] = {}
        for rule in terminals:
            self._by_token.setdefault(rule.token, [])
            if rule.lhs not in self._by_token[rule.token]:
                self._by_token[rule.token].append(rule.lhs)
        defined = {r.lhs for r in terminals} | {r.lhs for r in binaries}
        used = {start} | {nt for r in binaries for nt in (r.first, r.second)}
        missing = used - defined
        if missing:
            raise GrammarError(f"nonterminals used but never defined: {sorted(missing)}")

    def nonterminals_for(self, token: str) -> list[str]:
        return self._by_token.get(token, [])


def parse_grammar(text: str) -> Grammar:
    declared_start: str | None = None
    first_lhs: str | None = None
    terminals: list[TerminalRule] = []
    binaries: list[BinaryRule] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if m := _HEADER.match(line):
            if declared_start is not None:
                raise GrammarError(f"line {lineno}: duplicate start declaration")
            declared_start = m.group(1)
            continue
        if m := _TERMINAL.match(line):
            terminals.append(TerminalRule(lhs=m.group(1), token=m.group(2)))
            lhs = m.group(1)
        elif m := _BINARY.match(line):
            try:
                rel = Relation(m.group(2))
            except ValueError:
                raise GrammarError(f"line {lineno}: unknown relation {m.group(2)!r}") from None
            if rel is Relation.NOREL:
                raise GrammarError(f"line {lineno}: NoRel cannot appear in a rule")
            binaries.append(BinaryRule(lhs=m.group(1), relation=rel, first=m.group(3), second=m.group(4)))
            lhs = m.group(1)
        else:
            raise GrammarError(f"line {lineno}: cannot parse rule: {raw.strip()!r}")
        if first_lhs is None:
            first_lhs = lhs
    if first_lhs is None:
        raise GrammarError("grammar has no rules")
    return Grammar(start=declared_start or first_lhs, terminals=terminals, binaries=binaries)


def load_grammar(path) -> Grammar:
    from pathlib import Path

    return parse_grammar(Path(path).read_text())


# --- fragments and attachment ----------------------------------------------


@dataclass(frozen=True)
class FragNode:
    """A symbol relation subtree whose leaves reference lattice segments."""

    seg: int
    label: str
    children: tuple[tuple[Relation, "FragNode"], ...] = ()

    def child(self, rel: Relation) -> "FragNode | None":
        for r, c in self.children:
            if r is rel:
                return c
        return None

    @functools.cached_property
    def signature(self):
        """Label-free shape: segments, dominance, and child structure.

        Fragments with equal signatures behave identically in every
        future composition, so they compete on probability alone.
        """
        kids = tuple(sorted((rel.value, c.signature) for rel, c in self.children))
        return (self.seg, self.label in DOMINANT_LABELS, kids)


def _baseline_tail(node: FragNode) -> FragNode:
    while (nxt := node.child(Relation.RIGHT)) is not None:
        node = nxt
    return node


def outbound_attachment(root: FragNode, rel: Relation) -> FragNode:
    """Which node of the fragment a new Rel edge should leave from."""
    node = _baseline_tail(root)
    if rel is Relation.SUP:
        while (script := node.child(Relation.SUP)) is not None:
            node = _baseline_tail(script)
    elif rel is Relation.SUB:
        while (script := node.child(Relation.SUB)) is not None:
            node = _baseline_tail(script)
    return node


def _attachment_valid(target: FragNode, rel: Relation) -> bool:
    if target.child(rel) is not None:
        return False
    if rel in (Relation.ABOVE, Relation.BELOW):
        return target.label in FRACTION_LABELS or target.label in BIG_OPERATORS
    if rel is Relation.INSIDE:
        return target.label == RADICAL_LABEL
    return True


def _graft(node: FragNode, target: FragNode, rel: Relation, child: FragNode) -> FragNode:
    """Persistent update: rebuild the path to ``target`` adding the edge."""
    if node is target:
        return FragNode(seg=node.seg, label=node.label, children=node.children + ((rel, child),))
    for i, (r, c) in enumerate(node.children):
        rebuilt = _graft(c, target, rel, child)
        if rebuilt is not c:
            children = node.children[:i] + ((r, rebuilt),) + node.children[i + 1 :]
            return FragNode(seg=node.seg, label=node.label, children=children)
    return node


def compose(first: FragNode, second: FragNode, rel: Relation) -> FragNode | None:
    """Attach ``second``'s root to ``first``; None when structurally invalid."""
    target = outbound_attachment(first, rel)
    if not _attachment_valid(target, rel):
        return None
    return _graft(first, target, rel, second)


def _signature(node: FragNode):
    return node.signature


# --- CYK over the segment sequence ------------------------------------------


@dataclass(frozen=True)
class ParseCandidate:
    tree: SRTNode
    probability: float
    latex: str


@dataclass(frozen=True)
class ParseOutcome:
    candidates: tuple[ParseCandidate, ...]

    @property
    def parsed(self) -> bool:
        return bool(self.candidates)

    @property
    def best(self) -> ParseCandidate:
        if not self.candidates:
            raise ValueError("no parse")
        return self.candidates[0]


RelationFn = Callable[[tuple[int, ...], tuple[int, ...]], dict[Relation, float]]


def parse_lattice(
    grammar: Grammar,
    lattice: CandidateLattice,
    relation_fn: RelationFn,
    beam: int | None = 5,
    topk: int = 5,
    cell_cap: int | None = 200,
) -> ParseOutcome:
    segments = lattice.segments
    M = len(segments)

    pair_cache: dict[tuple[int, int], dict[Relation, float]] = {}

    def rel_prob(out_seg: int, in_seg: int, rel: Relation) -> float:
        if in_seg == out_seg + 1:
            return lattice.adjacent_boundary(in_seg).relation_probs.get(rel, 0.0)
        key = (out_seg, in_seg)
        if key not in pair_cache:
            pair_cache[key] = relation_fn(segments[out_seg].strokes, segments[in_seg].strokes)
        return pair_cache[key].get(rel, 0.0)

    # chart[(i, j, NT)] maps fragment signature -> entries [(prob, frag)],
    # kept sorted descending and truncated to the beam
    chart: dict[tuple[int, int, str], dict] = {}

    def add(i: int, j: int, nt: str, prob: float, frag: FragNode) -> None:
        if prob <= 0.0:
            return
        cell = chart.setdefault((i, j, nt), {})
        entries = cell.setdefault(frag.signature, [])
        entries.append((prob, frag))
        entries.sort(key=lambda pf: -pf[0])
        if beam is not None and len(entries) > beam:
            del entries[beam:]

    # the span loop only ever reads cells of strictly smaller spans, so a
    # cell is complete by the time it is first flattened and can be cached
    flat_cache: dict[tuple[int, int, str], list] = {}

    def cell_entries(i: int, j: int, nt: str):
        key = (i, j, nt)
        cached = flat_cache.get(key)
        if cached is not None:
            return cached
        cell = chart.get(key)
        if not cell:
            entries = []
        else:
            entries = [pf for sig_entries in cell.values() for pf in sig_entries]
            # different shapes can multiply on wide inputs; keep cells bounded
            if cell_cap is not None and len(entries) > cell_cap:
                entries.sort(key=lambda pf: -pf[0])
                del entries[cell_cap:]
        flat_cache[key] = entries
        return entries

    for i, seg in enumerate(segments):
        for label, p in seg.symbol_scores:
            for nt in grammar.nonterminals_for(label):
                add(i, i + 1, nt, p, FragNode(seg=i, label=label))

    for span in range(2, M + 1):
        for i in range(0, M - span + 1):
            j = i + span
            for k in range(i + 1, j):
                for rule in grammar.binaries:
                    lefts = cell_entries(i, k, rule.first)
                    if not lefts:
                        continue
                    rights = cell_entries(k, j, rule.second)
                    if not rights:
                        continue
                    for pb, fb in lefts:
                        target = outbound_attachment(fb, rule.relation)
                        if not _attachment_valid(target, rule.relation):
                            continue
                        for pc, fc in rights:
                            pr = rel_prob(target.seg, fc.seg, rule.relation)
                            if pr <= 0.0:
                                continue
                            frag = _graft(fb, target, rule.relation, fc)
                            add(i, j, rule.lhs, pb * pc * pr, frag)

    def to_srt(frag: FragNode) -> SRTNode:
        return SRTNode(
            label=frag.label,
            strokes=segments[frag.seg].strokes,
            children=tuple((rel, to_srt(c)) for rel, c in frag.children),
        )

    # distinct trees may arise from several rule nestings; keep the best
    best_by_tree: dict[SRTNode, float] = {}
    for prob, frag in cell_entries(0, M, grammar.start):
        tree = canonicalize(to_srt(frag))
        if prob > best_by_tree.get(tree, 0.0):
            best_by_tree[tree] = prob

    candidates = []
    for tree, prob in best_by_tree.items():
        try:
            latex = srt_to_latex(tree)
        except EmissionError:
            continue
        candidates.append(ParseCandidate(tree=tree, probability=prob, latex=latex))
    candidates.sort(key=lambda c: (-c.probability, c.latex))
    return ParseOutcome(candidates=tuple(candidates[:topk]))
