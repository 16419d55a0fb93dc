"""Trainer: tree linearization, sequence building, and the epoch loop.

Each ground-truth tree is linearized into several paths (every
root-to-leaf path, the writing-order traversal, seeded random
traversals, and one two-symbol sequence per tree edge, matching the
splices the parser's relation oracle sees).  A path reorders the
prepared strokes and yields an interleaved symbol/relation target,
giving one training sequence per path.

The objective is CTC plus two relation-mass penalties: on pen-down
frames (relations only make sense between symbols) and on pen-up gaps
inside a multi-stroke symbol (pinning each relation emission to its
true gap).

Everything is seeded: sequence construction, parameter init, and the
per-epoch shuffle, so two runs with the same inputs produce identical
checkpoints.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .ink import FeatureSequence, Ink, featurize, prepare
from .loss import constraint_loss, ctc_loss, gap_alignment_loss, min_frames_required
from .metrics import expression_match
from .net import ClassInventory, MomentumSGD, NetConfig, Network, softmax
from .srt import collect_nodes, extract_leaf_paths, extract_random_path, extract_writing_order_path, path_targets
from .synth import CorpusSample


@dataclass(frozen=True)
class TrainConfig:
    hidden_size: int = 128
    num_layers: int = 3
    lr: float = 1e-4
    momentum: float = 0.9
    lam: float = 0.1
    gap_lam: float = 0.1
    epochs: int = 100
    seed: int = 0
    epsilon: float = 0.02
    pool: str = "frame"
    clip_norm: float | None = None
    random_paths: int = 2
    writing_order_paths: int = 1
    pair_paths: bool = True
    eval_every: int = 0
    target_rate: float | None = None


@dataclass(frozen=True)
class TrainingSequence:
    sample: str
    features: np.ndarray
    spans: tuple
    targets: tuple[int, ...]
    gap_relations: tuple


def corpus_inventory(samples: list[CorpusSample]) -> ClassInventory:
    labels = {n.label for s in samples for n in collect_nodes(s.srt)}
    return ClassInventory.from_labels(labels)


def build_sequences(
    samples: list[CorpusSample],
    inventory: ClassInventory,
    config: TrainConfig,
) -> tuple[list[TrainingSequence], int]:
    """All training sequences, plus how many paths were dropped as
    unalignable (targets longer than the frames can carry)."""
    rng = random.Random(config.seed * 7919 + 1)
    sequences: list[TrainingSequence] = []
    dropped = 0
    for idx, sample in enumerate(samples):
        tag = getattr(sample, "name", None) or f"sample-{idx:04d}"
        prepared = prepare(sample.ink, config.epsilon)
        paths = list(extract_leaf_paths(sample.srt))
        for _ in range(config.writing_order_paths):
            paths.append(extract_writing_order_path(sample.srt))
        for _ in range(config.random_paths):
            paths.append(extract_random_path(sample.srt, rng))
        if config.pair_paths:
            # two-symbol sequences for every tree edge: the same splices
            # the parser's relation oracle asks about at recognition time
            for node in collect_nodes(sample.srt):
                for rel, child in node.children:
                    paths.append(((node, child), (rel,)))

        seen: set[tuple] = set()
        feature_cache: dict[tuple[int, ...], FeatureSequence] = {}
        for path in paths:
            targets = path_targets(path)
            key = (targets.stroke_order, targets.labels)
            if key in seen:
                continue
            seen.add(key)
            seq = feature_cache.get(targets.stroke_order)
            if seq is None:
                reordered = Ink(strokes=tuple(prepared.strokes[i] for i in targets.stroke_order))
                seq = featurize(reordered)
                feature_cache[targets.stroke_order] = seq
            target_idx = tuple(inventory.index(label) for label in targets.labels)
            if min_frames_required(list(target_idx)) > seq.length:
                dropped += 1
                continue
            sequences.append(
                TrainingSequence(
                    sample=tag,
                    features=seq.features,
                    spans=seq.spans,
                    targets=target_idx,
                    gap_relations=targets.offstroke_relations,
                )
            )
    return sequences, dropped


@dataclass
class EpochStats:
    epoch: int
    mean_ctc: float
    mean_constraint: float
    mean_alignment: float
    mean_combined: float
    skipped_updates: int
    clamped_frames: int
    expression_rate: float | None = None


@dataclass
class TrainResult:
    net: Network
    history: list[EpochStats] = field(default_factory=list)
    dropped_sequences: int = 0
    stopped_early: bool = False


def training_expression_rate(net: Network, grammar, samples: list[CorpusSample], epsilon: float) -> float:
    """Share of samples whose best parse equals the ground truth tree."""
    from .recognizer import Recognizer

    recognizer = Recognizer(net, grammar)
    hits = 0
    for sample in samples:
        outcome = recognizer.analyze(sample.ink, topk=1).outcome
        if outcome.parsed and expression_match(sample.srt, outcome.best.tree):
            hits += 1
    return hits / len(samples) if samples else 0.0


def train(
    samples: list[CorpusSample],
    config: TrainConfig,
    grammar=None,
    progress=None,
) -> TrainResult:
    inventory = corpus_inventory(samples)
    net_config = NetConfig(
        hidden_size=config.hidden_size,
        num_layers=config.num_layers,
        epsilon=config.epsilon,
    )
    net = Network.initialize(net_config, inventory, seed=config.seed)
    sequences, dropped = build_sequences(samples, inventory, config)
    if not sequences:
        raise ValueError("no trainable sequences in the corpus")
    optimizer = MomentumSGD(net.params, lr=config.lr, momentum=config.momentum, clip_norm=config.clip_norm)
    shuffle_rng = random.Random(config.seed * 31337 + 7)
    result = TrainResult(net=net, dropped_sequences=dropped)

    order = list(range(len(sequences)))
    for epoch in range(config.epochs):
        shuffle_rng.shuffle(order)
        total_ctc = total_con = total_gap = total_combined = 0.0
        skipped = 0
        clamped = 0
        for i in order:
            seq = sequences[i]
            logits, cache = net.forward(seq.features)
            probs = softmax(logits)
            ctc, dctc = ctc_loss(probs, list(seq.targets), blank=inventory.blank)
            con, dcon, con_clamped = constraint_loss(probs, seq.spans, inventory, pool=config.pool)
            gap, dgap, gap_clamped = gap_alignment_loss(
                probs, seq.spans, seq.gap_relations, inventory
            )
            combined = ctc + config.lam * con + config.gap_lam * gap
            dlogits = dctc + config.lam * dcon + config.gap_lam * dgap
            grads = net.backward(cache, dlogits)
            if not optimizer.step(net.params, grads):
                skipped += 1
            total_ctc += ctc
            total_con += con
            total_gap += gap
            total_combined += combined
            clamped += con_clamped + gap_clamped

        n = len(sequences)
        stats = EpochStats(
            epoch=epoch,
            mean_ctc=total_ctc / n,
            mean_constraint=total_con / n,
            mean_alignment=total_gap / n,
            mean_combined=total_combined / n,
            skipped_updates=skipped,
            clamped_frames=clamped,
        )
        should_eval = (
            grammar is not None
            and config.eval_every > 0
            and ((epoch + 1) % config.eval_every == 0 or epoch + 1 == config.epochs)
        )
        if should_eval:
            stats.expression_rate = training_expression_rate(net, grammar, samples, config.epsilon)
        result.history.append(stats)
        if progress is not None:
            progress(stats)
        if (
            stats.expression_rate is not None
            and config.target_rate is not None
            and stats.expression_rate >= config.target_rate
        ):
            result.stopped_early = True
            break
    return result
