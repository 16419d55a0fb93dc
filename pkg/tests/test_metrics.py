"""Metric computations checked against hand-counted values."""

import random

import numpy as np
import pytest

from inkmath.ink import ink_from_lists
from inkmath.metrics import (
    CONFUSION_LABELS,
    SegmentationCounts,
    confusion_matrix,
    confusion_percent,
    evaluate_corpus,
    expression_match,
    normalize_latex,
    relation_pairs_for_sample,
    structure_match,
    symbol_sets,
)
from inkmath.net import ClassInventory, NetConfig, Network
from inkmath.srt import Relation, SRTNode


def node(label, strokes, children=()):
    return SRTNode(label=label, strokes=tuple(strokes), children=tuple(children))


class TestNormalizeLatex:
    def test_braced_command_is_tokenized(self):
        assert normalize_latex("\\frac{a}{b}") == "\\frac { a } { b }"

    def test_already_spaced_text_is_unchanged(self):
        assert normalize_latex("x ^ { 2 }") == "x ^ { 2 }"

    def test_adjacent_characters_split(self):
        assert normalize_latex("x+2") == "x + 2"

    def test_command_names_stay_whole(self):
        assert normalize_latex("\\sum_{i}^{n}") == "\\sum _ { i } ^ { n }"


class TestSegmentationCounts:
    def test_hand_counted_hits(self):
        gt = [
            (frozenset({0}), "x"),
            (frozenset({1, 2}), "+"),
            (frozenset({3}), "2"),
        ]
        pred = [
            (frozenset({0}), "x"),
            (frozenset({1}), "+"),
            (frozenset({2}), "1"),
            (frozenset({3}), "a"),
        ]
        counts = SegmentationCounts()
        counts.add(gt, pred)
        # stroke-set hits: {0} and {3}; labeled hits: only ({0}, "x")
        assert counts.seg_hits == 2
        assert counts.cls_hits == 1
        assert counts.seg_recall == pytest.approx(2 / 3)
        assert counts.seg_precision == pytest.approx(2 / 4)
        assert counts.cls_recall == pytest.approx(1 / 3)
        assert counts.cls_precision == pytest.approx(1 / 4)

    def test_accumulates_across_samples(self):
        counts = SegmentationCounts()
        perfect = [(frozenset({0}), "x")]
        counts.add(perfect, perfect)
        counts.add([(frozenset({0}), "x")], [(frozenset({1}), "x")])
        assert counts.num_gt == 2 and counts.num_pred == 2
        assert counts.seg_hits == 1 and counts.cls_hits == 1

    def test_empty_counts_are_zero_not_nan(self):
        counts = SegmentationCounts()
        assert counts.seg_recall == 0.0
        assert counts.seg_precision == 0.0
        assert counts.cls_recall == 0.0
        assert counts.cls_precision == 0.0


class TestConfusion:
    def test_counts_are_exact(self):
        pairs = [
            ("Right", "Right"),
            ("Right", "Sub"),
            ("Sup", "Sup"),
            ("NonSeg", "NonSeg"),
            ("NonSeg", "Right"),
            ("NonSeg", "Right"),
        ]
        counts = confusion_matrix(pairs)
        idx = {label: i for i, label in enumerate(CONFUSION_LABELS)}
        assert counts[idx["Right"], idx["Right"]] == 1
        assert counts[idx["Right"], idx["Sub"]] == 1
        assert counts[idx["Sup"], idx["Sup"]] == 1
        assert counts[idx["NonSeg"], idx["NonSeg"]] == 1
        assert counts[idx["NonSeg"], idx["Right"]] == 2
        assert counts.sum() == len(pairs)

    def test_percent_rows_sum_to_hundred_or_zero(self):
        pairs = [("Right", "Right"), ("Right", "Sub"), ("Right", "Sub"), ("Sup", "Sup")]
        percent = confusion_percent(confusion_matrix(pairs))
        idx = {label: i for i, label in enumerate(CONFUSION_LABELS)}
        right = percent[idx["Right"]]
        assert right[idx["Right"]] == pytest.approx(100 / 3)
        assert right[idx["Sub"]] == pytest.approx(200 / 3)
        assert percent[idx["Sup"]].sum() == pytest.approx(100.0)
        assert percent[idx["Above"]].sum() == 0.0

    def test_unknown_label_rejected(self):
        with pytest.raises(KeyError):
            confusion_matrix([("Sideways", "Right")])


class TestTreeMatches:
    def test_expression_match_ignores_child_order(self):
        a = node("-", [1], [(Relation.ABOVE, node("x", [0])), (Relation.BELOW, node("2", [2]))])
        b = node("-", [1], [(Relation.BELOW, node("2", [2])), (Relation.ABOVE, node("x", [0]))])
        assert expression_match(a, b)

    def test_expression_match_sees_label_difference(self):
        a = node("x", [0])
        b = node("a", [0])
        assert not expression_match(a, b)
        assert structure_match(a, b)

    def test_structure_match_sees_shape_difference(self):
        a = node("x", [0], [(Relation.SUP, node("2", [1]))])
        b = node("x", [0], [(Relation.SUB, node("2", [1]))])
        assert not structure_match(a, b)

    def test_symbol_sets_lists_every_node(self):
        tree = node("x", [0], [(Relation.SUP, node("2", [1, 2]))])
        sets = symbol_sets(tree)
        assert (frozenset({0}), "x") in sets
        assert (frozenset({1, 2}), "2") in sets
        assert len(sets) == 2


def two_stroke_ink():
    return ink_from_lists(
        [
            [[0.0, 0.0], [0.0, 1.0], [0.3, 0.5]],
            [[1.0, 0.0], [1.3, 0.4], [1.0, 1.0]],
        ]
    )


class TestRelationPairs:
    def test_pair_count_and_alphabet(self):
        inv = ClassInventory.from_labels(["x", "2"])
        net = Network.initialize(NetConfig(hidden_size=4, num_layers=1), inv, seed=3)

        class Probe:
            def __init__(self):
                self.net = net
                self.k_rel = 3

        srt = node("x", [0], [(Relation.RIGHT, node("2", [1]))])
        pairs = relation_pairs_for_sample(Probe(), two_stroke_ink(), srt, random.Random(0), num_paths=4)
        # one inter-stroke gap per path
        assert len(pairs) == 4
        labels = set(CONFUSION_LABELS)
        assert all(gt in labels and pred in labels for gt, pred in pairs)
        # parent-first orders carry the edge label, child-first orders NoRel
        assert all(gt in {"Right", "NoRel"} for gt, _ in pairs)

    def test_single_stroke_sample_yields_no_pairs(self):
        inv = ClassInventory.from_labels(["x"])
        net = Network.initialize(NetConfig(hidden_size=4, num_layers=1), inv, seed=3)

        class Probe:
            def __init__(self):
                self.net = net
                self.k_rel = 3

        srt = node("x", [0])
        ink = ink_from_lists([[[0.0, 0.0], [1.0, 1.0]]])
        assert relation_pairs_for_sample(Probe(), ink, srt, random.Random(0)) == []


class TestEvaluateCorpus:
    def test_report_shape_on_tiny_corpus(self, tmp_path):
        from inkmath.grammar import load_grammar
        from inkmath.recognizer import Recognizer
        from inkmath.synth import CorpusSample, generate_corpus, load_spec

        spec = load_spec("specs/synth_default.json")
        raw = generate_corpus(spec, count=3, seed=11)
        samples = [CorpusSample(name=f"s{i}", ink=s.ink, srt=s.srt) for i, s in enumerate(raw)]
        inv = ClassInventory.from_labels({"x", "2", "a", "+", "-"})
        net = Network.initialize(NetConfig(hidden_size=6, num_layers=1), inv, seed=5)
        recognizer = Recognizer(net, load_grammar("grammars/toy.g"), beam=2)

        report = evaluate_corpus(recognizer, samples, seed=0, paths_per_sample=2)
        as_json = report.to_json()
        assert as_json["num_samples"] == 3
        for key in ("recall", "precision", "classified_recall", "classified_precision"):
            value = as_json["segmentation"][key]
            assert 0.0 <= value <= 1.0
        assert 0.0 <= as_json["expression_rate"] <= 1.0
        assert as_json["structure_rate"] >= as_json["expression_rate"] - 1e-12
        confusion = as_json["relation_confusion"]
        assert confusion["labels"] == list(CONFUSION_LABELS)
        counts = np.asarray(confusion["counts"])
        percent = np.asarray(confusion["percent"])
        assert counts.shape == percent.shape == (len(CONFUSION_LABELS),) * 2
        for row_counts, row_percent in zip(counts, percent):
            expected = 100.0 if row_counts.sum() else 0.0
            assert row_percent.sum() == pytest.approx(expected)
        totals = sum(slot["total"] for slot in as_json["by_symbol_count"].values())
        assert totals == 3

    def test_deterministic_for_fixed_seed(self):
        from inkmath.grammar import load_grammar
        from inkmath.recognizer import Recognizer
        from inkmath.synth import CorpusSample, generate_corpus, load_spec

        spec = load_spec("specs/synth_default.json")
        raw = generate_corpus(spec, count=2, seed=4)
        samples = [CorpusSample(name=f"s{i}", ink=s.ink, srt=s.srt) for i, s in enumerate(raw)]
        inv = ClassInventory.from_labels({"x", "2", "a", "+", "-"})
        net = Network.initialize(NetConfig(hidden_size=5, num_layers=1), inv, seed=6)
        recognizer = Recognizer(net, load_grammar("grammars/toy.g"), beam=2)

        first = evaluate_corpus(recognizer, samples, seed=9, paths_per_sample=3).to_json()
        second = evaluate_corpus(recognizer, samples, seed=9, paths_per_sample=3).to_json()
        assert first == second
