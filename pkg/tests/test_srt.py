import random

import pytest

from inkmath.srt import (
    EmissionError,
    PathTargets,
    Relation,
    SRTError,
    SRTNode,
    canonicalize,
    collect_nodes,
    extract_leaf_paths,
    extract_random_path,
    extract_writing_order_path,
    parse_srt,
    path_targets,
    srt_to_json,
    srt_to_latex,
)


def node(label, strokes, children=()):
    return SRTNode(label=label, strokes=tuple(strokes), children=tuple(children))


# 2 ^ x  written as strokes [0] and [1]
TWO_SUP_X = {
    "label": "2",
    "strokes": [0],
    "children": [{"rel": "Sup", "node": {"label": "x", "strokes": [1]}}],
}


def test_parse_and_serialize_roundtrip():
    root = parse_srt(TWO_SUP_X)
    assert root.label == "2"
    assert root.children[0][0] is Relation.SUP
    assert srt_to_json(root) == TWO_SUP_X


def test_parse_rejects_norel_edge():
    bad = {
        "label": "a",
        "strokes": [0],
        "children": [{"rel": "NoRel", "node": {"label": "b", "strokes": [1]}}],
    }
    with pytest.raises(SRTError, match="NoRel"):
        parse_srt(bad)


def test_parse_rejects_duplicate_relation():
    bad = {
        "label": "a",
        "strokes": [0],
        "children": [
            {"rel": "Right", "node": {"label": "b", "strokes": [1]}},
            {"rel": "Right", "node": {"label": "c", "strokes": [2]}},
        ],
    }
    with pytest.raises(SRTError, match="duplicate"):
        parse_srt(bad)


def test_parse_rejects_overlapping_strokes():
    bad = {
        "label": "a",
        "strokes": [0, 1],
        "children": [{"rel": "Right", "node": {"label": "b", "strokes": [1]}}],
    }
    with pytest.raises(SRTError, match="stroke 1"):
        parse_srt(bad)


def test_parse_rejects_gapped_coverage():
    bad = {
        "label": "a",
        "strokes": [0],
        "children": [{"rel": "Right", "node": {"label": "b", "strokes": [2]}}],
    }
    with pytest.raises(SRTError, match="cover"):
        parse_srt(bad)


def test_parse_rejects_unknown_relation_and_bad_shapes():
    with pytest.raises(SRTError, match="unknown relation"):
        parse_srt({"label": "a", "strokes": [0], "children": [{"rel": "Over", "node": {"label": "b", "strokes": [1]}}]})
    with pytest.raises(SRTError, match="label"):
        parse_srt({"strokes": [0]})
    with pytest.raises(SRTError, match="strokes"):
        parse_srt({"label": "a", "strokes": []})
    with pytest.raises(SRTError, match="node must be an object"):
        parse_srt([1, 2, 3])


def test_leaf_paths():
    # x with superscript 2 and a + x to the right: two root-to-leaf paths
    root = node(
        "x",
        [0, 1],
        [
            (Relation.SUP, node("2", [2])),
            (Relation.RIGHT, node("+", [3, 4], [(Relation.RIGHT, node("a", [5]))])),
        ],
    )
    paths = extract_leaf_paths(root)
    rendered = [([n.label for n in ns], [r.value for r in rs]) for ns, rs in paths]
    assert rendered == [
        (["x", "2"], ["Sup"]),
        (["x", "+", "a"], ["Right", "Right"]),
    ]


def test_writing_order_path_uses_norel_for_non_edges():
    # strokes: x=0, 2=1 (sup of x), +=2, a=3; writing order x,2,+,a
    plus = node("+", [2], [(Relation.RIGHT, node("a", [3]))])
    root = node("x", [0], [(Relation.SUP, node("2", [1])), (Relation.RIGHT, plus)])
    nodes, rels = extract_writing_order_path(root)
    assert [n.label for n in nodes] == ["x", "2", "+", "a"]
    # x->2 is a real edge; 2->+ is not (+ is a child of x, not of 2)
    assert list(rels) == [Relation.SUP, Relation.NOREL, Relation.RIGHT]


def test_random_path_keeps_subtrees_contiguous():
    left = node("b", [1], [(Relation.SUB, node("c", [2]))])
    root = node("a", [0], [(Relation.ABOVE, left), (Relation.RIGHT, node("d", [3]))])
    rng = random.Random(7)
    for _ in range(200):
        nodes, rels = extract_random_path(root, rng)
        labels = [n.label for n in nodes]
        assert sorted(labels) == ["a", "b", "c", "d"]
        i, j = labels.index("b"), labels.index("c")
        assert abs(i - j) == 1, "subtree {b,c} must stay contiguous"
        assert len(rels) == 3


def test_random_path_relations_follow_adjacency():
    root = node("a", [0], [(Relation.SUP, node("b", [1]))])
    rng = random.Random(3)
    seen = set()
    for _ in range(50):
        nodes, rels = extract_random_path(root, rng)
        labels = tuple(n.label for n in nodes)
        seen.add((labels, rels))
    assert (("a", "b"), (Relation.SUP,)) in seen
    assert (("b", "a"), (Relation.NOREL,)) in seen


def test_path_targets_interleaving_and_gaps():
    # two-stroke x, then sup 2: path (x, Sup, 2)
    root = node("x", [0, 1], [(Relation.SUP, node("2", [2]))])
    [path] = [p for p in extract_leaf_paths(root)]
    t = path_targets(path)
    assert t == PathTargets(
        labels=("x", "Sup", "2"),
        stroke_order=(0, 1, 2),
        offstroke_relations=(None, Relation.SUP),
    )


def test_path_targets_reorders_strokes():
    # writing order interleaved: root strokes (0, 3), child stroke (1, 2)
    root = node("y", [0, 3], [(Relation.RIGHT, node("z", [2, 1]))])
    nodes = tuple(collect_nodes(root))
    t = path_targets((nodes, (Relation.RIGHT,)))
    assert t.stroke_order == (0, 3, 1, 2)
    assert t.offstroke_relations == (None, Relation.RIGHT, None)
    assert t.labels == ("y", "Right", "z")


def test_canonicalize_orders_children_and_strokes():
    a = node("a", [2, 0], [(Relation.RIGHT, node("b", [1])), (Relation.ABOVE, node("c", [3]))])
    c = canonicalize(a)
    assert c.strokes == (0, 2)
    assert [r.value for r, _ in c.children] == ["Above", "Right"]
    # canonical forms of differently-ordered equal trees compare equal
    a2 = node("a", [0, 2], [(Relation.ABOVE, node("c", [3])), (Relation.RIGHT, node("b", [1]))])
    assert canonicalize(a2) == c


def test_latex_scripts():
    root = node("x", [0], [(Relation.SUP, node("2", [1])), (Relation.SUB, node("i", [2]))])
    assert srt_to_latex(root) == "x _ { i } ^ { 2 }"


def test_latex_fraction():
    bar = node(
        "-",
        [0],
        [
            (Relation.ABOVE, node("a", [1])),
            (Relation.BELOW, node("b", [2])),
            (Relation.RIGHT, node("c", [3])),
        ],
    )
    assert srt_to_latex(bar) == "\\frac { a } { b } c"


def test_latex_plain_minus():
    assert srt_to_latex(node("-", [0], [(Relation.RIGHT, node("1", [1]))])) == "- 1"


def test_latex_fraction_missing_side_fails():
    bar = node("-", [0], [(Relation.ABOVE, node("a", [1]))])
    with pytest.raises(EmissionError, match="numerator"):
        srt_to_latex(bar)


def test_latex_big_operator_limits():
    s = node(
        "\\sum",
        [0],
        [
            (Relation.ABOVE, node("n", [1])),
            (Relation.BELOW, node("i", [2])),
            (Relation.RIGHT, node("x", [3])),
        ],
    )
    assert srt_to_latex(s) == "\\sum _ { i } ^ { n } x"


def test_latex_sqrt():
    r = node("\\sqrt", [0], [(Relation.INSIDE, node("x", [1]))])
    assert srt_to_latex(r) == "\\sqrt { x }"


def test_latex_rejects_bad_attachments():
    with pytest.raises(EmissionError, match="Above"):
        srt_to_latex(node("x", [0], [(Relation.ABOVE, node("a", [1]))]))
    with pytest.raises(EmissionError, match="contain"):
        srt_to_latex(node("x", [0], [(Relation.INSIDE, node("a", [1]))]))


def test_latex_nested():
    inner = node("-", [2], [(Relation.ABOVE, node("x", [0])), (Relation.BELOW, node("2", [3]))])
    root = node("\\sqrt", [1], [(Relation.INSIDE, inner)])
    assert srt_to_latex(root) == "\\sqrt { \\frac { x } { 2 } }"
