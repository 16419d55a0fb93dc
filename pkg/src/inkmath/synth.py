"""Synthetic handwritten expression generator.

Expressions are sampled as baseline chains (items joined by operators)
whose items may carry scripts or be fractions, then laid out box by box
and rendered from per-symbol glyph polylines with coordinate jitter.
Strokes are emitted parent-first in a fixed child order, so ground truth
stroke indices always follow writing order and fraction bars precede
their numerators and denominators.

The corpus spec is a JSON file declaring the symbol glyphs (polylines in
a unit box, y growing downward), per-relation layout offsets, the allowed
relations, size limits, jitter, and the structural sampling weights.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ink import Ink, ink_to_native, parse_native
from .srt import Relation, SRTNode, parse_srt, srt_to_json, srt_to_latex

# parent-first writing order for children of one node
CHILD_WRITE_ORDER: tuple[Relation, ...] = (
    Relation.ABOVE,
    Relation.BELOW,
    Relation.INSIDE,
    Relation.SUB,
    Relation.SUP,
    Relation.RIGHT,
)

DEFAULT_WEIGHTS = {"fraction": 0.22, "script": 0.3, "extend": 0.55}


class SynthSpecError(ValueError):
    """Raised when a corpus spec file is invalid."""


@dataclass(frozen=True)
class SymbolSpec:
    label: str
    strokes: tuple[np.ndarray, ...]
    roles: frozenset[str]


@dataclass(frozen=True)
class LayoutRule:
    dx: float
    dy: float
    scale: float


@dataclass(frozen=True)
class SynthSpec:
    symbols: dict[str, SymbolSpec]
    layout: dict[Relation, LayoutRule]
    relations: tuple[Relation, ...]
    max_symbols: int
    max_depth: int
    jitter: float
    weights: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))

    def with_roles(self, role: str) -> list[SymbolSpec]:
        return [s for s in self.symbols.values() if role in s.roles]


def parse_spec(obj: dict) -> SynthSpec:
    try:
        symbols: dict[str, SymbolSpec] = {}
        for entry in obj["symbols"]:
            strokes = tuple(np.asarray(s, dtype=np.float64) for s in entry["strokes"])
            for s in strokes:
                if s.ndim != 2 or s.shape[1] != 2 or len(s) < 2:
                    raise SynthSpecError(f"glyph {entry['label']!r} needs polylines of (n>=2, 2) points")
            symbols[entry["label"]] = SymbolSpec(
                label=entry["label"],
                strokes=strokes,
                roles=frozenset(entry["roles"]),
            )
        relations = tuple(Relation(r) for r in obj["relations"])
        layout = {Relation(r): LayoutRule(**rule) for r, rule in obj["layout"].items()}
        weights = dict(DEFAULT_WEIGHTS)
        weights.update(obj.get("weights", {}))
        spec = SynthSpec(
            symbols=symbols,
            layout=layout,
            relations=relations,
            max_symbols=int(obj["max_symbols"]),
            max_depth=int(obj["max_depth"]),
            jitter=float(obj.get("jitter", 0.0)),
            weights=weights,
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, SynthSpecError):
            raise
        raise SynthSpecError(f"invalid corpus spec: {e}") from e
    if not spec.with_roles("operand"):
        raise SynthSpecError("spec needs at least one operand symbol")
    for rel in spec.relations:
        if rel not in spec.layout:
            raise SynthSpecError(f"relation {rel.value} has no layout rule")
    if spec.max_symbols < 1 or spec.max_depth < 0:
        raise SynthSpecError("max_symbols must be >= 1 and max_depth >= 0")
    return spec


def load_spec(path: str | Path) -> SynthSpec:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise SynthSpecError(f"cannot read corpus spec: {e}") from e
    return parse_spec(obj)


class _Node:
    def __init__(self, label: str):
        self.label = label
        self.children: dict[Relation, "_Node"] = {}


def _gen_item(spec: SynthSpec, rng: random.Random, budget: int, depth: int) -> tuple[_Node, int]:
    """One item using at most ``budget`` symbols (at least 1)."""
    bars = spec.with_roles("bar")
    can_fraction = (
        depth < spec.max_depth
        and budget >= 3
        and bars
        and Relation.ABOVE in spec.relations
        and Relation.BELOW in spec.relations
    )
    if can_fraction and rng.random() < spec.weights["fraction"]:
        bar = _Node(rng.choice(sorted(b.label for b in bars)))
        remaining = budget - 1
        num_budget = rng.randint(1, remaining - 1)
        num, used_n = _gen_baseline(spec, rng, num_budget, depth + 1)
        den, used_d = _gen_baseline(spec, rng, remaining - used_n, depth + 1)
        bar.children[Relation.ABOVE] = num
        bar.children[Relation.BELOW] = den
        return bar, 1 + used_n + used_d

    operands = sorted(s.label for s in spec.with_roles("operand"))
    node = _Node(rng.choice(operands))
    used = 1
    scripts = [r for r in (Relation.SUP, Relation.SUB) if r in spec.relations]
    if budget - used >= 1 and depth < spec.max_depth and scripts and rng.random() < spec.weights["script"]:
        rel = rng.choice(scripts)
        child, used_c = _gen_baseline(spec, rng, budget - used, depth + 1)
        node.children[rel] = child
        used += used_c
    return node, used


def _gen_baseline(spec: SynthSpec, rng: random.Random, budget: int, depth: int) -> tuple[_Node, int]:
    """A chain item (op item)* using at most ``budget`` symbols."""
    head, used = _gen_item(spec, rng, budget, depth)
    tail = head
    operators = sorted(s.label for s in spec.with_roles("operator"))
    while (
        Relation.RIGHT in spec.relations
        and operators
        and budget - used >= 2
        and rng.random() < spec.weights["extend"]
    ):
        op = _Node(rng.choice(operators))
        used += 1
        item, used_i = _gen_item(spec, rng, budget - used, depth)
        used += used_i
        tail.children[Relation.RIGHT] = op
        op.children[Relation.RIGHT] = item
        tail = item
    return head, used


@dataclass(frozen=True)
class Box:
    x: float
    y: float
    w: float
    h: float

    def place(self, rel: Relation, rule: LayoutRule) -> "Box":
        return Box(
            x=self.x + rule.dx * self.w,
            y=self.y + rule.dy * self.h,
            w=self.w * rule.scale,
            h=self.h * rule.scale,
        )


def _emit(
    node: _Node,
    box: Box,
    spec: SynthSpec,
    rng: random.Random,
    strokes: list[np.ndarray],
) -> SRTNode:
    glyph = spec.symbols[node.label]
    own: list[int] = []
    for poly in glyph.strokes:
        pts = poly * np.array([box.w, box.h]) + np.array([box.x, box.y])
        if spec.jitter > 0.0:
            pts = pts + np.array(
                [[rng.uniform(-spec.jitter, spec.jitter) for _ in range(2)] for _ in range(len(pts))]
            )
        own.append(len(strokes))
        strokes.append(pts)
    children: list[tuple[Relation, SRTNode]] = []
    for rel in CHILD_WRITE_ORDER:
        child = node.children.get(rel)
        if child is None:
            continue
        child_box = box.place(rel, spec.layout[rel])
        children.append((rel, _emit(child, child_box, spec, rng, strokes)))
    return SRTNode(label=node.label, strokes=tuple(own), children=tuple(children))


@dataclass(frozen=True)
class Sample:
    ink: Ink
    srt: SRTNode
    latex: str


def generate_sample(spec: SynthSpec, rng: random.Random) -> Sample:
    target = rng.randint(1, spec.max_symbols)
    tree, _ = _gen_baseline(spec, rng, target, depth=0)
    strokes: list[np.ndarray] = []
    srt = _emit(tree, Box(0.0, 0.0, 1.0, 1.0), spec, rng, strokes)
    ink = Ink(strokes=tuple(strokes))
    return Sample(ink=ink, srt=srt, latex=srt_to_latex(srt))


def generate_corpus(spec: SynthSpec, count: int, seed: int) -> list[Sample]:
    rng = random.Random(seed)
    return [generate_sample(spec, rng) for _ in range(count)]


def write_corpus(samples: list[Sample], out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, sample in enumerate(samples):
        stem = f"sample_{i:04d}"
        (out / f"{stem}.ink.json").write_text(json.dumps(ink_to_native(sample.ink)))
        (out / f"{stem}.srt.json").write_text(json.dumps(srt_to_json(sample.srt)))


@dataclass(frozen=True)
class CorpusSample:
    name: str
    ink: Ink
    srt: SRTNode


def load_corpus(data_dir: str | Path) -> list[CorpusSample]:
    data = Path(data_dir)
    ink_files = sorted(data.glob("*.ink.json"))
    if not ink_files:
        raise FileNotFoundError(f"no *.ink.json files in {data}")
    samples = []
    for ink_file in ink_files:
        stem = re.sub(r"\.ink\.json$", "", ink_file.name)
        srt_file = data / f"{stem}.srt.json"
        if not srt_file.exists():
            raise FileNotFoundError(f"missing ground truth {srt_file.name}")
        ink = parse_native(json.loads(ink_file.read_text()))
        srt = parse_srt(json.loads(srt_file.read_text()))
        samples.append(CorpusSample(name=stem, ink=ink, srt=srt))
    return samples
