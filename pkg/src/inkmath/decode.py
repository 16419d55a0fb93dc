"""Reading segmentation and relation decisions off the frame posteriors.

Every pen-up transition gets one frame, so the classifier's output at that
frame decides what the gap means: if some relation class beats blank, the
gap is a symbol boundary labelled with the winning relation (NoRel counts:
a boundary with no structural link); if blank wins or ties, the strokes on
both sides belong to the same symbol.

Consecutive strokes merged by blank gaps form segments.  A segment's
symbol candidates are scored by taking, per symbol class, the maximum
posterior over the segment's pen-down frames and renormalizing across
symbol classes.

Relations between segments that are not adjacent in writing order are
queried on demand: the two stroke groups are spliced into a miniature ink
whose single connecting pen-up frame is classified by the same network.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ink import FeatureSequence, Ink, Span, SpanKind, featurize
from .net import ClassInventory, Network, softmax
from .srt import Relation


@dataclass(frozen=True)
class BoundaryDecision:
    """What one pen-up frame says about the gap it spans.

    ``decided`` is None when blank wins (no symbol boundary).  Ties go to
    blank.  ``alternatives`` lists the top relation candidates by
    probability; ``relation_probs`` keeps the full map for downstream
    scoring.
    """

    source_index: int
    frame: int
    decided: Relation | None
    blank_prob: float
    relation_probs: dict[Relation, float]
    alternatives: tuple[tuple[Relation, float], ...]


@dataclass(frozen=True)
class Segment:
    """A maximal run of strokes the decoder believes form one symbol."""

    strokes: tuple[int, ...]
    frames: tuple[int, ...]
    symbol_scores: tuple[tuple[str, float], ...]

    @property
    def best_label(self) -> str:
        return self.symbol_scores[0][0]


@dataclass(frozen=True)
class CandidateLattice:
    """Segments plus the boundary decisions between consecutive strokes."""

    segments: tuple[Segment, ...]
    boundaries: tuple[BoundaryDecision, ...]

    def adjacent_boundary(self, right_segment: int) -> BoundaryDecision:
        """The decision for the gap entering ``segments[right_segment]``."""
        if right_segment <= 0 or right_segment >= len(self.segments):
            raise IndexError(f"segment {right_segment} has no left gap")
        first_stroke = self.segments[right_segment].strokes[0]
        return self.boundaries[first_stroke - 1]


def decide_boundary(
    posterior_row: np.ndarray,
    inventory: ClassInventory,
    k_rel: int,
    source_index: int,
    frame: int,
) -> BoundaryDecision:
    rel_probs = {
        Relation(inventory.label(k)): float(posterior_row[k]) for k in inventory.relation_indices
    }
    blank_prob = float(posterior_row[inventory.blank])
    ranked = sorted(rel_probs.items(), key=lambda rp: (-rp[1], list(Relation).index(rp[0])))
    best_rel, best_prob = ranked[0]
    decided = best_rel if best_prob > blank_prob else None
    return BoundaryDecision(
        source_index=source_index,
        frame=frame,
        decided=decided,
        blank_prob=blank_prob,
        relation_probs=rel_probs,
        alternatives=tuple(ranked[:k_rel]),
    )


def decode_boundaries(
    posteriors: np.ndarray,
    spans: tuple[Span, ...],
    inventory: ClassInventory,
    k_rel: int = 3,
) -> tuple[BoundaryDecision, ...]:
    out = []
    for span in spans:
        if span.kind is SpanKind.OFFSTROKE:
            out.append(
                decide_boundary(posteriors[span.start], inventory, k_rel, span.source_index, span.start)
            )
    return tuple(out)


def score_symbols(
    posteriors: np.ndarray,
    frames: tuple[int, ...],
    inventory: ClassInventory,
    k_sym: int = 5,
) -> tuple[tuple[str, float], ...]:
    """Per-class max over the segment's frames, renormalized over symbols."""
    rows = posteriors[list(frames)]
    sym_idx = list(inventory.symbol_indices)
    raw = rows[:, sym_idx].max(axis=0)
    total = raw.sum()
    if total <= 0.0:
        norm = np.full_like(raw, 1.0 / len(raw))
    else:
        norm = raw / total
    labeled = [(inventory.symbols[i], float(p)) for i, p in enumerate(norm)]
    labeled.sort(key=lambda lp: (-lp[1], lp[0]))
    return tuple(labeled[:k_sym])


def decode_lattice(
    posteriors: np.ndarray,
    spans: tuple[Span, ...],
    inventory: ClassInventory,
    k_sym: int = 5,
    k_rel: int = 3,
) -> CandidateLattice:
    boundaries = decode_boundaries(posteriors, spans, inventory, k_rel)
    stroke_frames: dict[int, list[int]] = {}
    for span in spans:
        if span.kind is SpanKind.STROKE:
            stroke_frames[span.source_index] = list(range(span.start, span.stop))
    n = len(stroke_frames)

    groups: list[list[int]] = [[0]]
    for boundary in boundaries:
        if boundary.decided is None:
            groups[-1].append(boundary.source_index)
        else:
            groups.append([boundary.source_index])

    segments = []
    for strokes in groups:
        frames = tuple(f for s in strokes for f in stroke_frames[s])
        segments.append(
            Segment(
                strokes=tuple(strokes),
                frames=frames,
                symbol_scores=score_symbols(posteriors, frames, inventory, k_sym),
            )
        )
    assert sum(len(s.strokes) for s in segments) == n
    return CandidateLattice(segments=tuple(segments), boundaries=boundaries)


def pair_features(ink: Ink, strokes_a: tuple[int, ...], strokes_b: tuple[int, ...]):
    """Splice two stroke groups into one ink, keeping original coordinates.

    Returns the feature sequence and the frame index of the single pen-up
    transition connecting the groups.
    """
    ordered = list(strokes_a) + list(strokes_b)
    mini = Ink(strokes=tuple(ink.strokes[i] for i in ordered))
    seq = featurize(mini)
    connector = None
    for span in seq.spans:
        if span.kind is SpanKind.OFFSTROKE and span.source_index == len(strokes_a):
            connector = span.start
            break
    assert connector is not None
    return seq, connector


def pair_boundary(
    net: Network,
    ink: Ink,
    strokes_a: tuple[int, ...],
    strokes_b: tuple[int, ...],
    k_rel: int = 3,
) -> BoundaryDecision:
    """Classify the gap between two arbitrary stroke groups."""
    seq, connector = pair_features(ink, strokes_a, strokes_b)
    logits, _ = net.forward(seq.features)
    row = softmax(logits[connector])
    return decide_boundary(row, net.inventory, k_rel, source_index=len(strokes_a), frame=connector)
