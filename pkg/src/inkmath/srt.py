"""Symbol relation trees.

A recognized expression is a tree: nodes are symbols owning disjoint sets
of stroke indices, edges carry one of six spatial relations.  NoRel is the
seventh relation label the temporal classifier can output, meaning two
adjacent symbols in a path have no direct structural link; it never
appears as a tree edge.

Training pairs come from linearizing a tree into paths.  Three extractors
are provided: every root-to-leaf path, the writing-order traversal, and a
seeded random traversal that keeps each subtree contiguous.  A path of N
symbols yields an interleaved target of 2N-1 labels
(symbol, relation, symbol, ...).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum


class Relation(str, Enum):
    ABOVE = "Above"
    BELOW = "Below"
    SUB = "Sub"
    SUP = "Sup"
    RIGHT = "Right"
    INSIDE = "Inside"
    NOREL = "NoRel"


TREE_RELATIONS: tuple[Relation, ...] = (
    Relation.ABOVE,
    Relation.BELOW,
    Relation.SUB,
    Relation.SUP,
    Relation.RIGHT,
    Relation.INSIDE,
)

FRACTION_LABELS = {"-", "\\frac"}
BIG_OPERATORS = {"\\sum", "\\int", "\\lim"}
RADICAL_LABEL = "\\sqrt"

# Symbols that act as the structural anchor of a construct: when present,
# attachment of surrounding material is governed by them rather than by
# the horizontal baseline.
DOMINANT_LABELS = FRACTION_LABELS | BIG_OPERATORS | {RADICAL_LABEL}


class SRTError(ValueError):
    """Raised when a symbol relation tree is structurally invalid."""


class EmissionError(ValueError):
    """Raised when a tree has no LaTeX rendering."""


@dataclass(frozen=True)
class SRTNode:
    label: str
    strokes: tuple[int, ...]
    children: tuple[tuple[Relation, "SRTNode"], ...] = field(default_factory=tuple)

    def child(self, rel: Relation) -> "SRTNode | None":
        for r, node in self.children:
            if r is rel:
                return node
        return None

    @property
    def min_stroke(self) -> int:
        return min(self.strokes)


def collect_nodes(root: SRTNode) -> list[SRTNode]:
    out = [root]
    for _, child in root.children:
        out.extend(collect_nodes(child))
    return out


def parse_srt(obj: object) -> SRTNode:
    """Build a tree from ``{"label", "strokes", "children": [{"rel", "node"}]}``.

    Validates labels, relation names, per-node relation uniqueness, stroke
    disjointness, and that the stroke sets cover 0..n-1 with no gaps.
    """
    root = _parse_node(obj, path="root")
    seen: dict[int, str] = {}
    for node in collect_nodes(root):
        for s in node.strokes:
            if s in seen:
                raise SRTError(f"stroke {s} claimed by both {seen[s]!r} and {node.label!r}")
            seen[s] = node.label
    expected = set(range(len(seen)))
    if set(seen) != expected:
        missing = sorted(expected - set(seen))
        extras = sorted(set(seen) - expected)
        raise SRTError(f"stroke indices must cover 0..n-1 (missing {missing}, out of range {extras})")
    return root


def _parse_node(obj: object, path: str) -> SRTNode:
    if not isinstance(obj, dict):
        raise SRTError(f"{path}: node must be an object")
    label = obj.get("label")
    if not isinstance(label, str) or not label:
        raise SRTError(f"{path}: missing or empty label")
    strokes = obj.get("strokes")
    if not isinstance(strokes, list) or not strokes or not all(
        isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in strokes
    ):
        raise SRTError(f"{path}: strokes must be a non-empty list of non-negative ints")
    children_raw = obj.get("children", [])
    if not isinstance(children_raw, list):
        raise SRTError(f"{path}: children must be a list")
    children: list[tuple[Relation, SRTNode]] = []
    used: set[Relation] = set()
    for i, entry in enumerate(children_raw):
        if not isinstance(entry, dict) or "rel" not in entry or "node" not in entry:
            raise SRTError(f"{path}.children[{i}]: expected {{'rel', 'node'}}")
        try:
            rel = Relation(entry["rel"])
        except ValueError:
            raise SRTError(f"{path}.children[{i}]: unknown relation {entry['rel']!r}") from None
        if rel is Relation.NOREL:
            raise SRTError(f"{path}.children[{i}]: NoRel cannot be a tree edge")
        if rel in used:
            raise SRTError(f"{path}.children[{i}]: duplicate relation {rel.value}")
        used.add(rel)
        children.append((rel, _parse_node(entry["node"], f"{path}.children[{i}].node")))
    return SRTNode(label=label, strokes=tuple(strokes), children=tuple(children))


def srt_to_json(node: SRTNode) -> dict:
    out: dict = {"label": node.label, "strokes": list(node.strokes)}
    if node.children:
        out["children"] = [{"rel": rel.value, "node": srt_to_json(child)} for rel, child in node.children]
    return out


def canonicalize(node: SRTNode) -> SRTNode:
    """Sorted-strokes, relation-ordered form; equal trees compare equal."""
    order = {rel: i for i, rel in enumerate(TREE_RELATIONS)}
    children = tuple(
        sorted(
            ((rel, canonicalize(child)) for rel, child in node.children),
            key=lambda rc: order[rc[0]],
        )
    )
    return SRTNode(label=node.label, strokes=tuple(sorted(node.strokes)), children=children)


# --- path extraction -------------------------------------------------------

Path = tuple[tuple[SRTNode, ...], tuple[Relation, ...]]


def _adjacent_relation(a: SRTNode, b: SRTNode) -> Relation:
    for rel, child in a.children:
        if child is b:
            return rel
    return Relation.NOREL


def _relations_along(nodes: list[SRTNode]) -> tuple[Relation, ...]:
    return tuple(_adjacent_relation(a, b) for a, b in zip(nodes, nodes[1:]))


def extract_leaf_paths(root: SRTNode) -> list[Path]:
    """Every root-to-leaf path, with the edge relations between hops."""
    paths: list[Path] = []

    def walk(node: SRTNode, nodes: list[SRTNode], rels: list[Relation]) -> None:
        nodes = nodes + [node]
        if not node.children:
            paths.append((tuple(nodes), tuple(rels)))
            return
        for rel, child in node.children:
            walk(child, nodes, rels + [rel])

    walk(root, [], [])
    return paths


def extract_writing_order_path(root: SRTNode) -> Path:
    """All symbols sorted by first stroke; non-edges become NoRel."""
    nodes = sorted(collect_nodes(root), key=lambda n: n.min_stroke)
    return tuple(nodes), _relations_along(nodes)


def extract_random_path(root: SRTNode, rng: random.Random) -> Path:
    """Seeded random traversal: each node is shuffled among its own subtrees.

    The node and its child subtrees are visited in a random order, so every
    subtree stays contiguous in the result.
    """

    def visit(node: SRTNode) -> list[SRTNode]:
        slots: list[SRTNode | None] = [None] + [child for _, child in node.children]
        rng.shuffle(slots)
        ordered: list[SRTNode] = []
        for slot in slots:
            if slot is None:
                ordered.append(node)
            else:
                ordered.extend(visit(slot))
        return ordered

    nodes = visit(root)
    return tuple(nodes), _relations_along(nodes)


@dataclass(frozen=True)
class PathTargets:
    """Supervision derived from one path.

    ``labels`` interleaves symbols and relations (2N-1 entries).
    ``stroke_order`` lists original stroke indices in path order, defining
    the reordered ink the features are computed from.
    ``offstroke_relations`` has one entry per pen-up transition of the
    reordered ink: None inside a symbol, the path relation between symbols.
    """

    labels: tuple[str, ...]
    stroke_order: tuple[int, ...]
    offstroke_relations: tuple[Relation | None, ...]


def path_targets(path: Path) -> PathTargets:
    nodes, rels = path
    if len(rels) != len(nodes) - 1:
        raise ValueError("path has mismatched node and relation counts")
    labels: list[str] = []
    order: list[int] = []
    gaps: list[Relation | None] = []
    for i, node in enumerate(nodes):
        if i > 0:
            labels.append(rels[i - 1].value)
            gaps.append(rels[i - 1])
        labels.append(node.label)
        for j, s in enumerate(sorted(node.strokes)):
            if j > 0:
                gaps.append(None)
            order.append(s)
    return PathTargets(labels=tuple(labels), stroke_order=tuple(order), offstroke_relations=tuple(gaps))


# --- LaTeX emission --------------------------------------------------------


def srt_to_latex(root: SRTNode) -> str:
    return " ".join(_emit(root))


def _emit(node: SRTNode) -> list[str]:
    by_rel: dict[Relation, SRTNode] = {}
    for rel, child in node.children:
        if rel in by_rel:
            raise EmissionError(f"{node.label!r} has two {rel.value} children")
        by_rel[rel] = child
    above = by_rel.get(Relation.ABOVE)
    below = by_rel.get(Relation.BELOW)
    inside = by_rel.get(Relation.INSIDE)
    sub = by_rel.get(Relation.SUB)
    sup = by_rel.get(Relation.SUP)
    right = by_rel.get(Relation.RIGHT)
    label = node.label

    out: list[str]
    if label in FRACTION_LABELS and (above is not None or below is not None):
        if above is None or below is None:
            raise EmissionError("fraction bar needs both a numerator and a denominator")
        out = ["\\frac", "{", *_emit(above), "}", "{", *_emit(below), "}"]
    elif label in BIG_OPERATORS:
        if below is not None and sub is not None:
            raise EmissionError(f"{label} has both Below and Sub children")
        if above is not None and sup is not None:
            raise EmissionError(f"{label} has both Above and Sup children")
        lower = below if below is not None else sub
        upper = above if above is not None else sup
        sub = sup = None
        out = [label]
        if lower is not None:
            out += ["_", "{", *_emit(lower), "}"]
        if upper is not None:
            out += ["^", "{", *_emit(upper), "}"]
    else:
        if above is not None or below is not None:
            raise EmissionError(f"{label!r} cannot take Above or Below")
        out = [label]

    if inside is not None:
        if label != RADICAL_LABEL:
            raise EmissionError(f"{label!r} cannot contain anything")
        out += ["{", *_emit(inside), "}"]
    if sub is not None:
        out += ["_", "{", *_emit(sub), "}"]
    if sup is not None:
        out += ["^", "{", *_emit(sup), "}"]
    if right is not None:
        out += _emit(right)
    return out
