"""Training losses.

Two pieces.  The first is connectionist temporal classification: the
probability of a label sequence is the sum over all frame-level alignments
that collapse to it (merge adjacent repeats, then drop blanks), computed
with the usual blank-extended forward/backward recursions in log space.
Its gradient with respect to the logits is ``posteriors - occupancy``.

The second is a constraint term that penalizes relation probability mass
on pen-down frames: relations describe the gap between symbols, so they
should only ever win on off-stroke frames.  For a frame with relation mass
m the penalty is -log(1 - m).

The combined objective is ``ctc + lambda * constraint``.  A third term
is available for trainers: cross-entropy toward blank at pen-up gaps
that fall inside a multi-stroke symbol (``gap_alignment_loss``), which
pins relation emissions to true inter-symbol gaps and keeps symbols
from leaking across their own gaps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .ink import Span, SpanKind
from .net import ClassInventory, softmax

PROB_FLOOR = 1e-12


class InfeasibleTargetError(ValueError):
    """Raised when the target cannot be aligned to the frames (too short)."""


def _validate_targets(targets: np.ndarray, num_classes: int, blank: int) -> None:
    if targets.ndim != 1:
        raise ValueError("targets must be a 1-D index array")
    if targets.size and (targets.min() < 0 or targets.max() >= num_classes):
        raise ValueError("target index out of range")
    if np.any(targets == blank):
        raise ValueError("targets may not contain the blank class")


def min_frames_required(targets: np.ndarray | list[int]) -> int:
    t = np.asarray(targets)
    if t.size == 0:
        return 0
    return int(t.size + np.sum(t[:-1] == t[1:]))


def _extend_with_blanks(targets: np.ndarray, blank: int) -> np.ndarray:
    ext = np.full(2 * targets.size + 1, blank, dtype=np.int64)
    ext[1::2] = targets
    return ext


def _ctc_alpha_beta(log_y_ext: np.ndarray, ext: np.ndarray, blank: int):
    """Forward/backward over the blank-extended target lattice.

    ``log_y_ext[t, s]`` is the log probability of emitting ``ext[s]`` at
    frame t.  Both tables include the emission at their own frame.
    """
    T, S = log_y_ext.shape
    neg_inf = -np.inf

    # skip transitions s-2 -> s are allowed into non-blank positions that
    # differ from their predecessor symbol
    skip_ok = np.zeros(S, dtype=bool)
    if S > 2:
        skip_ok[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])

    alpha = np.full((T, S), neg_inf)
    alpha[0, 0] = log_y_ext[0, 0]
    if S > 1:
        alpha[0, 1] = log_y_ext[0, 1]
    for t in range(1, T):
        prev = alpha[t - 1]
        step = np.full(S, neg_inf)
        step[1:] = prev[:-1]
        acc = np.logaddexp(prev, step)
        skip = np.full(S, neg_inf)
        skip[2:] = prev[:-2]
        acc = np.where(skip_ok, np.logaddexp(acc, skip), acc)
        alpha[t] = acc + log_y_ext[t]

    beta = np.full((T, S), neg_inf)
    beta[T - 1, S - 1] = log_y_ext[T - 1, S - 1]
    if S > 1:
        beta[T - 1, S - 2] = log_y_ext[T - 1, S - 2]
    # the mirrored skip: leaving s by jumping to s+2
    skip_out = np.zeros(S, dtype=bool)
    if S > 2:
        skip_out[:-2] = skip_ok[2:]
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1]
        step = np.full(S, neg_inf)
        step[:-1] = nxt[1:]
        acc = np.logaddexp(nxt, step)
        skip = np.full(S, neg_inf)
        if S > 2:
            skip[:-2] = nxt[2:]
        acc = np.where(skip_out, np.logaddexp(acc, skip), acc)
        beta[t] = acc + log_y_ext[t]
    return alpha, beta


def ctc_loss(probs: np.ndarray, targets: np.ndarray | list[int], blank: int = 0):
    """Negative log probability of ``targets`` and its gradient w.r.t. logits.

    ``probs`` are per-frame class posteriors (T, K).  The returned gradient
    is ``probs - occupancy``, valid when ``probs`` came from a softmax.
    """
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    T, K = probs.shape
    _validate_targets(targets, K, blank)
    needed = min_frames_required(targets)
    if T < needed:
        raise InfeasibleTargetError(f"{T} frames cannot emit a target needing at least {needed}")

    y = np.clip(probs, PROB_FLOOR, 1.0 - PROB_FLOOR)
    ext = _extend_with_blanks(targets, blank)
    log_y_ext = np.log(y[:, ext])
    alpha, beta = _ctc_alpha_beta(log_y_ext, ext, blank)
    S = ext.size
    if S > 1:
        log_p = np.logaddexp(alpha[T - 1, S - 1], alpha[T - 1, S - 2])
    else:
        log_p = alpha[T - 1, 0]

    # occupancy: total posterior path probability assigned to class k at t
    log_contrib = alpha + beta - log_y_ext
    gamma = np.zeros((T, K))
    for k in np.unique(ext):
        cols = np.flatnonzero(ext == k)
        gamma[:, k] = np.exp(logsumexp(log_contrib[:, cols], axis=1) - log_p)
    grad = probs - gamma
    return float(-log_p), grad


def ctc_log_prob(probs: np.ndarray, targets: np.ndarray | list[int], blank: int = 0) -> float:
    loss, _ = ctc_loss(probs, targets, blank)
    return -loss


def _penalize_relation_mass(
    probs: np.ndarray,
    frame_weights: list[tuple[int, float]],
    inventory: ClassInventory,
):
    """-log(1 - m_t) summed over weighted frames, m_t = relation mass."""
    probs = np.asarray(probs, dtype=np.float64)
    T, K = probs.shape
    rel_idx = np.fromiter(inventory.relation_indices, dtype=np.int64)
    is_rel = np.zeros(K, dtype=np.float64)
    is_rel[rel_idx] = 1.0

    loss = 0.0
    grad = np.zeros((T, K))
    clamped = 0
    for t, weight in frame_weights:
        m = float(probs[t, rel_idx].sum())
        keep = 1.0 - m
        if keep < PROB_FLOOR:
            keep = PROB_FLOOR
            clamped += 1
        loss += -np.log(keep) * weight
        grad[t] += weight * probs[t] * (is_rel - m) / keep
    return float(loss), grad, clamped


def constraint_loss(
    probs: np.ndarray,
    spans: tuple[Span, ...],
    inventory: ClassInventory,
    pool: str = "frame",
):
    """Penalty on relation mass over pen-down frames.

    ``pool="frame"`` sums -log(1 - m_t) over every stroke frame;
    ``pool="stroke"`` averages within each stroke first, so long strokes do
    not dominate.  Returns (loss, grad w.r.t. logits, clamped frame count).
    """
    if pool not in ("frame", "stroke"):
        raise ValueError(f"unknown pooling {pool!r}")
    frame_weights: list[tuple[int, float]] = []
    for span in spans:
        if span.kind is not SpanKind.STROKE:
            continue
        weight = 1.0 if pool == "frame" else 1.0 / (span.stop - span.start)
        frame_weights.extend((t, weight) for t in range(span.start, span.stop))
    return _penalize_relation_mass(probs, frame_weights, inventory)


def gap_alignment_loss(
    probs: np.ndarray,
    spans: tuple[Span, ...],
    gap_relations: tuple,
    inventory: ClassInventory,
):
    """Cross-entropy toward blank at pen-up gaps inside a symbol.

    ``gap_relations`` labels each off-stroke gap with the relation it
    carries, or None for a gap between two strokes of the same symbol.
    A None gap must emit blank: a relation there would split the symbol
    at decode time, and a symbol emission there would duplicate it
    (collapse keeps repeats that straddle a blank).  With pen-down
    frames already penalized, ordering leaves each relation token
    exactly one legal gap.  Returns (loss, grad w.r.t. logits, clamped
    frame count).
    """
    offstroke = [span for span in spans if span.kind is SpanKind.OFFSTROKE]
    if len(offstroke) != len(gap_relations):
        raise ValueError(
            f"{len(gap_relations)} gap labels for {len(offstroke)} off-stroke gaps"
        )
    probs = np.asarray(probs, dtype=np.float64)
    blank = inventory.blank
    loss = 0.0
    grad = np.zeros_like(probs)
    clamped = 0
    for span, rel in zip(offstroke, gap_relations):
        if rel is not None:
            continue
        for t in range(span.start, span.stop):
            p = float(probs[t, blank])
            if p < PROB_FLOOR:
                p = PROB_FLOOR
                clamped += 1
            loss += -np.log(p)
            grad[t] += probs[t]
            grad[t, blank] -= 1.0
    return float(loss), grad, clamped


@dataclass(frozen=True)
class LossReport:
    ctc: float
    constraint: float
    combined: float
    lambda_: float
    clamped_frames: int

    def to_json(self) -> dict:
        return {
            "ctc": self.ctc,
            "constraint": self.constraint,
            "combined": self.combined,
            "lambda": self.lambda_,
            "clamped_frames": self.clamped_frames,
        }


def combined_loss(
    logits: np.ndarray,
    targets: np.ndarray | list[int],
    spans: tuple[Span, ...],
    inventory: ClassInventory,
    lam: float = 0.1,
    pool: str = "frame",
):
    """Full objective and its gradient w.r.t. the logits."""
    probs = softmax(np.asarray(logits, dtype=np.float64))
    ctc, dctc = ctc_loss(probs, targets, blank=inventory.blank)
    con, dcon, clamped = constraint_loss(probs, spans, inventory, pool=pool)
    report = LossReport(
        ctc=ctc,
        constraint=con,
        combined=ctc + lam * con,
        lambda_=lam,
        clamped_frames=clamped,
    )
    return report, dctc + lam * dcon
