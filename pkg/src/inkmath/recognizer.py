"""End-to-end recognition: ink in, ranked LaTeX out.

The pipeline: normalize and simplify the ink, featurize, run the
temporal classifier, decode the candidate lattice, parse it with the
grammar (asking the classifier about non-adjacent segment pairs on
demand), then report the best trees.

Segments in the result always come from the decoder's segmentation with
their top-1 labels; relations come from the best parse tree when one
exists, otherwise from the raw boundary decisions, so a failed parse
still reports partial structure.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .decode import CandidateLattice, decode_lattice, pair_boundary
from .grammar import Grammar, ParseOutcome, load_grammar, parse_lattice
from .ink import FeatureSequence, Ink, featurize, prepare
from .net import Network, load_checkpoint
from .srt import Relation, SRTNode, collect_nodes


@dataclass(frozen=True)
class SegmentReport:
    strokes: tuple[int, ...]
    label: str
    probability: float


@dataclass(frozen=True)
class RelationReport:
    parent_strokes: tuple[int, ...]
    child_strokes: tuple[int, ...]
    relation: str


@dataclass(frozen=True)
class RecognitionResult:
    latex: str
    probability: float
    candidates: tuple[tuple[str, float], ...]
    segments: tuple[SegmentReport, ...]
    relations: tuple[RelationReport, ...]
    parsed: bool

    def to_json(self) -> dict:
        return {
            "latex": self.latex,
            "parsed": self.parsed,
            "probability": self.probability,
            "candidates": [{"latex": l, "probability": p} for l, p in self.candidates],
            "segments": [
                {"strokes": list(s.strokes), "label": s.label, "probability": s.probability}
                for s in self.segments
            ],
            "relations": [
                {
                    "parent_strokes": list(r.parent_strokes),
                    "child_strokes": list(r.child_strokes),
                    "relation": r.relation,
                }
                for r in self.relations
            ],
        }


@dataclass(frozen=True)
class Analysis:
    """Everything one recognition produced, for callers that need more."""

    result: RecognitionResult
    prepared: Ink
    sequence: FeatureSequence
    posteriors: np.ndarray
    lattice: CandidateLattice
    outcome: ParseOutcome


def tree_relations(root: SRTNode) -> tuple[RelationReport, ...]:
    out = []
    for node in collect_nodes(root):
        for rel, child in node.children:
            out.append(
                RelationReport(
                    parent_strokes=tuple(sorted(node.strokes)),
                    child_strokes=tuple(sorted(child.strokes)),
                    relation=rel.value,
                )
            )
    return tuple(out)


class Recognizer:
    def __init__(
        self,
        net: Network,
        grammar: Grammar,
        k_sym: int = 5,
        k_rel: int = 3,
        beam: int | None = 5,
        model_version: str = "unversioned",
    ):
        self.net = net
        self.grammar = grammar
        self.k_sym = k_sym
        self.k_rel = k_rel
        self.beam = beam
        self.model_version = model_version

    @classmethod
    def from_files(cls, model_path: str | Path, grammar_path: str | Path, **kwargs) -> "Recognizer":
        net = load_checkpoint(model_path)
        digest = hashlib.sha256(Path(model_path).read_bytes()).hexdigest()[:12]
        return cls(net, load_grammar(grammar_path), model_version=digest, **kwargs)

    def prepare(self, ink: Ink) -> Ink:
        return prepare(ink, self.net.config.epsilon)

    def analyze(self, ink: Ink, topk: int = 5) -> Analysis:
        prepared = self.prepare(ink)
        seq = featurize(prepared)
        posteriors = self.net.posteriors(seq.features)
        lattice = decode_lattice(posteriors, seq.spans, self.net.inventory, self.k_sym, self.k_rel)

        def relation_fn(a: tuple[int, ...], b: tuple[int, ...]):
            return pair_boundary(self.net, prepared, a, b, self.k_rel).relation_probs

        outcome = parse_lattice(self.grammar, lattice, relation_fn, beam=self.beam, topk=topk)

        segments = tuple(
            SegmentReport(strokes=s.strokes, label=s.best_label, probability=s.symbol_scores[0][1])
            for s in lattice.segments
        )
        if outcome.parsed:
            best = outcome.best
            result = RecognitionResult(
                latex=best.latex,
                probability=best.probability,
                candidates=tuple((c.latex, c.probability) for c in outcome.candidates),
                segments=segments,
                relations=tree_relations(best.tree),
                parsed=True,
            )
        else:
            relations = []
            for i in range(1, len(lattice.segments)):
                decided = lattice.adjacent_boundary(i).decided
                if decided is not None and decided is not Relation.NOREL:
                    relations.append(
                        RelationReport(
                            parent_strokes=lattice.segments[i - 1].strokes,
                            child_strokes=lattice.segments[i].strokes,
                            relation=decided.value,
                        )
                    )
            result = RecognitionResult(
                latex="",
                probability=0.0,
                candidates=(),
                segments=segments,
                relations=tuple(relations),
                parsed=False,
            )
        return Analysis(
            result=result,
            prepared=prepared,
            sequence=seq,
            posteriors=posteriors,
            lattice=lattice,
            outcome=outcome,
        )

    def recognize(self, ink: Ink, topk: int = 5) -> RecognitionResult:
        return self.analyze(ink, topk=topk).result
