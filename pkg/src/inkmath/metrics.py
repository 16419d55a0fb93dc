"""Evaluation: segmentation, classification, relations, expression rate.

All metric functions are pure: they take ground truth and predictions as
plain data so they can be exercised with hand-built inputs.  The corpus
runner on top feeds them from a recognizer.

Segmentation counts a predicted segment as a hit when its stroke set
exactly equals a ground-truth symbol's stroke set; the classified variant
additionally requires the top-1 label to match.  Relation quality is
measured over seeded random linearizations of each ground-truth tree: the
classifier's decision at every pen-up gap is compared with the gap's true
meaning, an 8-way confusion over the seven relations plus NonSeg (the gap
inside one symbol; a blank decision predicts NonSeg).  Expression rate is
exact tree equality up to child order; structure rate ignores labels.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass

import numpy as np

from .decode import decode_boundaries
from .ink import Ink, featurize
from .srt import Relation, SRTNode, canonicalize, collect_nodes, extract_random_path, path_targets

CONFUSION_LABELS: tuple[str, ...] = (
    "Above",
    "Below",
    "Sub",
    "Sup",
    "Right",
    "Inside",
    "NoRel",
    "NonSeg",
)

PATH_SEED_STRIDE = 100003


def normalize_latex(s: str) -> str:
    """Token form: commands and single characters separated by one space."""
    return " ".join(re.findall(r"\\[A-Za-z]+|\S", s))


def symbol_sets(root: SRTNode) -> list[tuple[frozenset[int], str]]:
    return [(frozenset(n.strokes), n.label) for n in collect_nodes(root)]


@dataclass
class SegmentationCounts:
    num_gt: int = 0
    num_pred: int = 0
    seg_hits: int = 0
    cls_hits: int = 0

    def add(self, gt: list[tuple[frozenset[int], str]], pred: list[tuple[frozenset[int], str]]) -> None:
        self.num_gt += len(gt)
        self.num_pred += len(pred)
        pred_sets = {s for s, _ in pred}
        pred_labeled = set(pred)
        for item in gt:
            if item[0] in pred_sets:
                self.seg_hits += 1
            if item in pred_labeled:
                self.cls_hits += 1

    @property
    def seg_recall(self) -> float:
        return self.seg_hits / self.num_gt if self.num_gt else 0.0

    @property
    def seg_precision(self) -> float:
        return self.seg_hits / self.num_pred if self.num_pred else 0.0

    @property
    def cls_recall(self) -> float:
        return self.cls_hits / self.num_gt if self.num_gt else 0.0

    @property
    def cls_precision(self) -> float:
        return self.cls_hits / self.num_pred if self.num_pred else 0.0


def confusion_matrix(pairs: list[tuple[str, str]]) -> np.ndarray:
    """Counts[gt, pred] over the fixed label order."""
    index = {label: i for i, label in enumerate(CONFUSION_LABELS)}
    counts = np.zeros((len(CONFUSION_LABELS), len(CONFUSION_LABELS)), dtype=np.int64)
    for gt, pred in pairs:
        counts[index[gt], index[pred]] += 1
    return counts


def confusion_percent(counts: np.ndarray) -> np.ndarray:
    """Rows as percentages; an unobserved row stays zero."""
    out = np.zeros(counts.shape, dtype=np.float64)
    for i, row in enumerate(counts):
        total = row.sum()
        if total > 0:
            out[i] = row / total * 100.0
    return out


def expression_match(gt: SRTNode, pred: SRTNode) -> bool:
    return canonicalize(gt) == canonicalize(pred)


def _strip_labels(node: SRTNode) -> SRTNode:
    return SRTNode(
        label="",
        strokes=node.strokes,
        children=tuple((rel, _strip_labels(c)) for rel, c in node.children),
    )


def structure_match(gt: SRTNode, pred: SRTNode) -> bool:
    return _strip_labels(canonicalize(gt)) == _strip_labels(canonicalize(pred))


def relation_pairs_for_sample(
    recognizer,
    prepared: Ink,
    srt: SRTNode,
    rng: random.Random,
    num_paths: int = 10,
) -> list[tuple[str, str]]:
    """(gt, pred) gap decisions over random linearizations of one tree."""
    pairs: list[tuple[str, str]] = []
    for _ in range(num_paths):
        path = extract_random_path(srt, rng)
        targets = path_targets(path)
        if len(targets.stroke_order) < 2:
            continue
        reordered = Ink(strokes=tuple(prepared.strokes[i] for i in targets.stroke_order))
        seq = featurize(reordered)
        posteriors = recognizer.net.posteriors(seq.features)
        boundaries = decode_boundaries(posteriors, seq.spans, recognizer.net.inventory, recognizer.k_rel)
        assert len(boundaries) == len(targets.offstroke_relations)
        for decision, gt_rel in zip(boundaries, targets.offstroke_relations):
            gt_label = gt_rel.value if gt_rel is not None else "NonSeg"
            pred_label = decision.decided.value if decision.decided is not None else "NonSeg"
            pairs.append((gt_label, pred_label))
    return pairs


@dataclass(frozen=True)
class EvaluationReport:
    num_samples: int
    seg_recall: float
    seg_precision: float
    segcls_recall: float
    segcls_precision: float
    expression_rate: float
    structure_rate: float
    confusion_labels: tuple[str, ...]
    confusion_counts: tuple[tuple[int, ...], ...]
    confusion_percent: tuple[tuple[float, ...], ...]
    by_symbol_count: dict[int, dict]

    def to_json(self) -> dict:
        return {
            "num_samples": self.num_samples,
            "segmentation": {
                "recall": self.seg_recall,
                "precision": self.seg_precision,
                "classified_recall": self.segcls_recall,
                "classified_precision": self.segcls_precision,
            },
            "expression_rate": self.expression_rate,
            "structure_rate": self.structure_rate,
            "relation_confusion": {
                "labels": list(self.confusion_labels),
                "counts": [list(r) for r in self.confusion_counts],
                "percent": [list(r) for r in self.confusion_percent],
            },
            "by_symbol_count": {
                str(k): v for k, v in sorted(self.by_symbol_count.items())
            },
        }


def evaluate_corpus(recognizer, samples, seed: int = 0, paths_per_sample: int = 10) -> EvaluationReport:
    seg = SegmentationCounts()
    pairs: list[tuple[str, str]] = []
    expr_hits = 0
    struct_hits = 0
    by_count: dict[int, dict] = {}

    for idx, sample in enumerate(samples):
        analysis = recognizer.analyze(sample.ink)
        gt_sets = symbol_sets(sample.srt)
        pred_sets = [(frozenset(s.strokes), s.label) for s in analysis.result.segments]
        seg.add(gt_sets, pred_sets)

        expr_ok = False
        struct_ok = False
        if analysis.outcome.parsed:
            best_tree = analysis.outcome.best.tree
            expr_ok = expression_match(sample.srt, best_tree)
            struct_ok = structure_match(sample.srt, best_tree)
        expr_hits += expr_ok
        struct_hits += struct_ok

        n_symbols = len(gt_sets)
        slot = by_count.setdefault(n_symbols, {"total": 0, "correct": 0})
        slot["total"] += 1
        slot["correct"] += int(expr_ok)

        rng = random.Random(seed * PATH_SEED_STRIDE + idx)
        prepared = recognizer.prepare(sample.ink)
        pairs.extend(relation_pairs_for_sample(recognizer, prepared, sample.srt, rng, paths_per_sample))

    counts = confusion_matrix(pairs)
    percent = confusion_percent(counts)
    n = len(samples)
    for slot in by_count.values():
        slot["rate"] = slot["correct"] / slot["total"]
    return EvaluationReport(
        num_samples=n,
        seg_recall=seg.seg_recall,
        seg_precision=seg.seg_precision,
        segcls_recall=seg.cls_recall,
        segcls_precision=seg.cls_precision,
        expression_rate=expr_hits / n if n else 0.0,
        structure_rate=struct_hits / n if n else 0.0,
        confusion_labels=CONFUSION_LABELS,
        confusion_counts=tuple(tuple(int(c) for c in row) for row in counts),
        confusion_percent=tuple(tuple(float(p) for p in row) for row in percent),
        by_symbol_count=by_count,
    )
