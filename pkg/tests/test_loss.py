import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inkmath.ink import Span, SpanKind
from inkmath.loss import (
    InfeasibleTargetError,
    LossReport,
    combined_loss,
    constraint_loss,
    ctc_log_prob,
    ctc_loss,
    min_frames_required,
)
from inkmath.net import ClassInventory, softmax

from .oracles import collapse, ctc_brute_force


def random_probs(rng, T, K):
    p = rng.uniform(0.05, 1.0, size=(T, K))
    return p / p.sum(axis=1, keepdims=True)


def test_collapse_oracle_semantics():
    # merge adjacent repeats first, then drop blanks
    assert collapse([1, 1, 0, 1], blank=0) == (1, 1)
    assert collapse([1, 1, 1], blank=0) == (1,)
    assert collapse([0, 0, 0], blank=0) == ()
    assert collapse([0, 2, 2, 0, 0, 3], blank=0) == (2, 3)


def test_min_frames_required():
    assert min_frames_required([]) == 0
    assert min_frames_required([1, 2, 3]) == 3
    assert min_frames_required([1, 1]) == 3
    assert min_frames_required([1, 1, 1]) == 5
    assert min_frames_required([1, 2, 2, 1]) == 5


def test_ctc_single_frame():
    probs = np.array([[0.2, 0.5, 0.3]])
    loss, _ = ctc_loss(probs, [1])
    assert loss == pytest.approx(-math.log(0.5), abs=1e-12)


def test_ctc_two_frames_hand_computed():
    probs = np.array([[0.6, 0.3, 0.1], [0.2, 0.7, 0.1]])
    # paths collapsing to (1): (1,1), (1,0), (0,1)
    want = 0.3 * 0.7 + 0.3 * 0.2 + 0.6 * 0.7
    loss, _ = ctc_loss(probs, [1])
    assert loss == pytest.approx(-math.log(want), abs=1e-12)


def test_ctc_empty_target_is_all_blank():
    probs = np.array([[0.6, 0.4], [0.3, 0.7]])
    loss, grad = ctc_loss(probs, [])
    assert loss == pytest.approx(-math.log(0.6 * 0.3), abs=1e-12)
    assert grad.shape == probs.shape


def test_ctc_matches_enumeration_over_random_instances():
    rng = np.random.default_rng(42)
    for _ in range(60):
        T = int(rng.integers(1, 6))
        K = int(rng.integers(2, 4))
        L = int(rng.integers(0, 4))
        targets = rng.integers(1, K, size=L)
        if min_frames_required(targets) > T:
            continue
        probs = random_probs(rng, T, K)
        brute = ctc_brute_force(probs, targets)
        loss, _ = ctc_loss(probs, targets)
        assert loss == pytest.approx(-math.log(brute), abs=1e-9)
        assert ctc_log_prob(probs, targets) == pytest.approx(math.log(brute), abs=1e-9)


def test_ctc_repeated_labels_need_separating_blank():
    probs = np.full((2, 3), 1 / 3)
    with pytest.raises(InfeasibleTargetError, match="2 frames"):
        ctc_loss(probs, [1, 1])
    # 3 frames suffice: 1,0,1
    loss, _ = ctc_loss(np.full((3, 3), 1 / 3), [1, 1])
    assert loss == pytest.approx(-math.log((1 / 3) ** 3), abs=1e-12)


def test_ctc_rejects_bad_targets():
    probs = np.full((3, 3), 1 / 3)
    with pytest.raises(ValueError, match="blank"):
        ctc_loss(probs, [0])
    with pytest.raises(ValueError, match="range"):
        ctc_loss(probs, [5])


def _fd_logit_grad(loss_fn, logits, h=1e-5):
    g = np.zeros_like(logits)
    it = np.nditer(logits, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = logits[idx]
        logits[idx] = orig + h
        fp = loss_fn(logits)
        logits[idx] = orig - h
        fm = loss_fn(logits)
        logits[idx] = orig
        g[idx] = (fp - fm) / (2 * h)
    return g


def _max_rel_err(a, b):
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return float(np.max(np.abs(a - b) / denom))


def test_ctc_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    for _ in range(20):
        T = int(rng.integers(2, 6))
        K = int(rng.integers(2, 5))
        L = int(rng.integers(1, 4))
        targets = rng.integers(1, K, size=L)
        if min_frames_required(targets) > T:
            continue
        logits = rng.normal(size=(T, K))
        _, grad = ctc_loss(softmax(logits), targets)
        fd = _fd_logit_grad(lambda u: ctc_loss(softmax(u), targets)[0], logits)
        assert _max_rel_err(grad, fd) < 1e-6


SPANS_TWO_STROKES = (
    Span(SpanKind.STROKE, 0, 0, 2),
    Span(SpanKind.OFFSTROKE, 1, 2, 3),
    Span(SpanKind.STROKE, 1, 3, 4),
)


def test_constraint_loss_hand_computed():
    inv = ClassInventory.from_labels({"a"})  # K = 9: blank, a, 7 relations
    K = inv.num_classes
    probs = np.full((4, K), 0.0)
    # stroke frames carry relation mass 0.2, 0.5; the off-stroke frame is ignored
    for t, rel_mass in [(0, 0.2), (1, 0.5), (3, 0.0)]:
        probs[t, inv.index("a")] = 1.0 - rel_mass
        probs[t, inv.index("Right")] = rel_mass
    probs[2, inv.index("Above")] = 1.0
    loss, grad, clamped = constraint_loss(probs, SPANS_TWO_STROKES, inv)
    want = -(math.log(0.8) + math.log(0.5) + math.log(1.0))
    assert loss == pytest.approx(want, abs=1e-12)
    assert clamped == 0
    np.testing.assert_array_equal(grad[2], np.zeros(K))


def test_constraint_loss_zero_when_no_relation_mass():
    inv = ClassInventory.from_labels({"a", "b"})
    probs = np.zeros((4, inv.num_classes))
    probs[:, inv.index("a")] = 1.0
    loss, grad, clamped = constraint_loss(probs, SPANS_TWO_STROKES, inv)
    assert loss == 0.0
    np.testing.assert_array_equal(grad, 0.0)
    assert clamped == 0


def test_constraint_loss_clamps_saturated_frames():
    inv = ClassInventory.from_labels({"a"})
    probs = np.zeros((4, inv.num_classes))
    probs[:, inv.index("NoRel")] = 1.0
    loss, _, clamped = constraint_loss(probs, SPANS_TWO_STROKES, inv)
    assert clamped == 3  # three stroke frames fully saturated
    assert loss > 0 and np.isfinite(loss)


def test_constraint_loss_stroke_pooling_weights_by_length():
    inv = ClassInventory.from_labels({"a"})
    probs = np.zeros((4, inv.num_classes))
    probs[:, inv.index("a")] = 0.5
    probs[:, inv.index("Sup")] = 0.5
    per_frame, _, _ = constraint_loss(probs, SPANS_TWO_STROKES, inv, pool="frame")
    per_stroke, _, _ = constraint_loss(probs, SPANS_TWO_STROKES, inv, pool="stroke")
    assert per_frame == pytest.approx(3 * -math.log(0.5))
    # stroke 0 averages its two frames, stroke 1 has one frame
    assert per_stroke == pytest.approx(2 * -math.log(0.5))
    with pytest.raises(ValueError, match="pooling"):
        constraint_loss(probs, SPANS_TWO_STROKES, inv, pool="mean")


def test_constraint_gradient_matches_finite_differences():
    inv = ClassInventory.from_labels({"a", "b"})
    rng = np.random.default_rng(3)
    for pool in ("frame", "stroke"):
        logits = rng.normal(size=(4, inv.num_classes))
        _, grad, _ = constraint_loss(softmax(logits), SPANS_TWO_STROKES, inv, pool=pool)
        fd = _fd_logit_grad(
            lambda u: constraint_loss(softmax(u), SPANS_TWO_STROKES, inv, pool=pool)[0], logits
        )
        assert _max_rel_err(grad, fd) < 1e-6


def test_combined_loss_report_and_gradient():
    inv = ClassInventory.from_labels({"a", "b"})
    rng = np.random.default_rng(11)
    logits = rng.normal(size=(4, inv.num_classes))
    targets = [inv.index("a"), inv.index("Right"), inv.index("b")]
    lam = 0.25
    report, grad = combined_loss(logits, targets, SPANS_TWO_STROKES, inv, lam=lam)
    assert isinstance(report, LossReport)
    assert report.combined == report.ctc + lam * report.constraint
    assert report.lambda_ == lam
    assert report.to_json()["lambda"] == lam

    def full(u):
        r, _ = combined_loss(u, targets, SPANS_TWO_STROKES, inv, lam=lam)
        return r.combined

    fd = _fd_logit_grad(full, logits)
    assert _max_rel_err(grad, fd) < 1e-6


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_ctc_loss_nonnegative_and_finite(seed):
    rng = np.random.default_rng(seed)
    T = int(rng.integers(1, 7))
    K = int(rng.integers(2, 5))
    L = int(rng.integers(0, 4))
    targets = rng.integers(1, K, size=L)
    if min_frames_required(targets) > T:
        return
    probs = random_probs(rng, T, K)
    loss, grad = ctc_loss(probs, targets)
    assert loss >= -1e-12
    assert np.all(np.isfinite(grad))
    # occupancy sums to 1 per frame, so grad rows sum to ~0
    np.testing.assert_allclose(grad.sum(axis=1), 0.0, atol=1e-9)


SPANS_THREE_STROKES = (
    Span(SpanKind.STROKE, 0, 0, 2),
    Span(SpanKind.OFFSTROKE, 1, 2, 3),
    Span(SpanKind.STROKE, 1, 3, 5),
    Span(SpanKind.OFFSTROKE, 2, 5, 6),
    Span(SpanKind.STROKE, 2, 6, 8),
)


class TestGapAlignmentLoss:
    def test_hand_computed_on_intra_symbol_gap(self):
        from inkmath.loss import gap_alignment_loss
        from inkmath.srt import Relation

        inv = ClassInventory.from_labels({"a"})  # K = 9: blank, a, 7 relations
        rng = np.random.default_rng(0)
        probs = random_probs(rng, 8, inv.num_classes)
        # first gap is inside a symbol, second carries a relation
        gaps = (None, Relation.RIGHT)
        loss, grad, clamped = gap_alignment_loss(probs, SPANS_THREE_STROKES, gaps, inv)
        assert loss == pytest.approx(-math.log(probs[2, inv.blank]), abs=1e-12)
        assert clamped == 0
        # only the intra-symbol gap frame gets gradient: softmax CE form
        nonzero_rows = np.flatnonzero(np.abs(grad).sum(axis=1))
        assert nonzero_rows.tolist() == [2]
        want = probs[2].copy()
        want[inv.blank] -= 1.0
        assert grad[2] == pytest.approx(want, abs=1e-12)

    def test_no_intra_gaps_means_zero_loss(self):
        from inkmath.loss import gap_alignment_loss
        from inkmath.srt import Relation

        inv = ClassInventory.from_labels({"a"})
        rng = np.random.default_rng(1)
        probs = random_probs(rng, 8, inv.num_classes)
        gaps = (Relation.SUP, Relation.RIGHT)
        loss, grad, clamped = gap_alignment_loss(probs, SPANS_THREE_STROKES, gaps, inv)
        assert loss == 0.0
        assert not grad.any()
        assert clamped == 0

    def test_gap_count_mismatch_raises(self):
        from inkmath.loss import gap_alignment_loss

        inv = ClassInventory.from_labels({"a"})
        probs = random_probs(np.random.default_rng(2), 8, inv.num_classes)
        with pytest.raises(ValueError, match="gap"):
            gap_alignment_loss(probs, SPANS_THREE_STROKES, (None,), inv)

    def test_gradient_matches_finite_differences(self):
        from inkmath.loss import gap_alignment_loss

        inv = ClassInventory.from_labels({"a", "b"})
        rng = np.random.default_rng(3)
        logits = rng.normal(0.0, 1.0, size=(8, inv.num_classes))
        gaps = (None, None)

        def value(u):
            return gap_alignment_loss(softmax(u), SPANS_THREE_STROKES, gaps, inv)[0]

        # the returned gradient is already w.r.t. the logits
        _, grad, _ = gap_alignment_loss(softmax(logits), SPANS_THREE_STROKES, gaps, inv)
        fd = _fd_logit_grad(value, logits.copy())
        assert _max_rel_err(grad, fd) < 1e-6
