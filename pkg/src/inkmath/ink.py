"""Ink handling: parsing, normalization, simplification, featurization.

An expression arrives as a sequence of strokes (pen-down polylines in
writing order).  Before the network sees it, the ink is translated and
scaled to a canonical frame, each stroke is thinned with perpendicular-
distance simplification, and the retained points are encoded as frames of
four features: sine and cosine of the local writing direction, the
normalized distance between the preceding and succeeding retained points,
and the pen state.  Consecutive strokes are joined by exactly one
off-stroke frame describing the pen-up transition, so every inter-stroke
gap occupies a known frame index.
"""

from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from enum import Enum

import numpy as np

MAX_STROKES = 256
MAX_POINTS = 4096


class InkParseError(ValueError):
    """Raised when ink input is structurally invalid."""


class EmptyInkError(InkParseError):
    """Raised when ink contains no strokes or a stroke contains no points."""


@dataclass(frozen=True)
class Ink:
    """Strokes in writing order; each stroke is an (n, 2) float64 array."""

    strokes: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if not self.strokes:
            raise EmptyInkError("ink has no strokes")
        for i, s in enumerate(self.strokes):
            if s.ndim != 2 or s.shape[1] != 2 or s.shape[0] == 0:
                raise EmptyInkError(f"stroke {i} is not a non-empty (n, 2) array")

    @property
    def point_count(self) -> int:
        return sum(len(s) for s in self.strokes)

    def bounds(self) -> tuple[float, float, float, float]:
        """(min_x, min_y, max_x, max_y) over all points."""
        pts = np.concatenate(self.strokes, axis=0)
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])


def ink_from_lists(strokes: list[list[tuple[float, float]]] | list[list[list[float]]]) -> Ink:
    arrays = []
    for i, stroke in enumerate(strokes):
        arr = np.asarray(stroke, dtype=np.float64)
        if arr.size == 0:
            raise EmptyInkError(f"stroke {i} is empty")
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise InkParseError(f"stroke {i} is not a list of [x, y] points")
        if not np.all(np.isfinite(arr)):
            raise InkParseError(f"stroke {i} contains non-finite coordinates")
        arrays.append(arr)
    return Ink(strokes=tuple(arrays))


def parse_native(obj: object) -> Ink:
    """Parse the wire format ``{"strokes": [[[x, y], ...], ...]}``."""
    if not isinstance(obj, dict):
        raise InkParseError("native ink must be a JSON object")
    strokes = obj.get("strokes")
    if not isinstance(strokes, list):
        raise InkParseError('native ink must have a "strokes" list')
    if not strokes:
        raise EmptyInkError("ink has no strokes")
    for i, stroke in enumerate(strokes):
        if not isinstance(stroke, list):
            raise InkParseError(f"stroke {i} is not a list")
        for j, pt in enumerate(stroke):
            if not isinstance(pt, (list, tuple)) or len(pt) != 2:
                raise InkParseError(f"stroke {i} point {j} is not an [x, y] pair")
            for v in pt:
                if not isinstance(v, (int, float)) or isinstance(v, bool):
                    raise InkParseError(f"stroke {i} point {j} has a non-numeric coordinate")
    return ink_from_lists(strokes)


def ink_to_native(ink: Ink) -> dict:
    return {"strokes": [[[float(x), float(y)] for x, y in stroke] for stroke in ink.strokes]}


def parse_inkml(text: str) -> Ink:
    """Parse the InkML subset: ``<trace>`` elements of comma-separated points.

    Namespaces and unknown elements are ignored; only the first two channels
    of each point are used.
    """
    try:
        root = ET.fromstring(text)
    except ET.ParseError as e:
        raise InkParseError(f"invalid XML: {e}") from e
    strokes: list[list[list[float]]] = []
    for elem in root.iter():
        tag = elem.tag.rsplit("}", 1)[-1]
        if tag != "trace":
            continue
        points: list[list[float]] = []
        body = elem.text or ""
        for k, chunk in enumerate(body.split(",")):
            fields = chunk.split()
            if not fields:
                continue
            if len(fields) < 2:
                raise InkParseError(f"trace {len(strokes)} point {k} has fewer than two channels")
            try:
                x, y = float(fields[0]), float(fields[1])
            except ValueError as e:
                raise InkParseError(f"trace {len(strokes)} point {k}: bad coordinate {e}") from e
            points.append([x, y])
        if not points:
            raise EmptyInkError(f"trace {len(strokes)} has no points")
        strokes.append(points)
    if not strokes:
        raise EmptyInkError("no trace elements found")
    return ink_from_lists(strokes)


def parse_ink_text(text: str, fmt: str) -> Ink:
    if fmt == "inkml":
        return parse_inkml(text)
    if fmt == "native":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            raise InkParseError(f"invalid JSON: {e}") from e
        return parse_native(obj)
    raise ValueError(f"unknown ink format: {fmt!r}")


def normalize(ink: Ink) -> Ink:
    """Translate the bounding box to the origin and scale height to 1.

    A flat expression (zero height) falls back to width; a single dot keeps
    unit scale.
    """
    min_x, min_y, max_x, max_y = ink.bounds()
    height = max_y - min_y
    width = max_x - min_x
    if height > 0.0:
        scale = 1.0 / height
    elif width > 0.0:
        scale = 1.0 / width
    else:
        scale = 1.0
    offset = np.array([min_x, min_y])
    return Ink(strokes=tuple((s - offset) * scale for s in ink.strokes))


def ramer_simplify(points: np.ndarray, epsilon: float) -> np.ndarray:
    """Perpendicular-distance polyline simplification.

    Endpoints are always kept.  The segment is split at the first point of
    maximum perpendicular distance when that distance exceeds ``epsilon``;
    otherwise all interior points are dropped.  The result is a subsequence
    of the input and re-simplification is a fixed point.
    """
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) <= 2:
        return pts.copy()
    keep = _ramer_indices(pts, 0, len(pts) - 1, epsilon)
    return pts[sorted(keep)]


def _ramer_indices(pts: np.ndarray, lo: int, hi: int, epsilon: float) -> set[int]:
    keep = {lo, hi}
    if hi - lo < 2:
        return keep
    a = pts[lo]
    b = pts[hi]
    chord = b - a
    chord_len = math.hypot(chord[0], chord[1])
    rel = pts[lo + 1 : hi] - a
    if chord_len == 0.0:
        dists = np.hypot(rel[:, 0], rel[:, 1])
    else:
        dists = np.abs(rel[:, 0] * chord[1] - rel[:, 1] * chord[0]) / chord_len
    split = int(np.argmax(dists))
    if dists[split] > epsilon:
        mid = lo + 1 + split
        keep |= _ramer_indices(pts, lo, mid, epsilon)
        keep |= _ramer_indices(pts, mid, hi, epsilon)
    return keep


def simplify_ink(ink: Ink, epsilon: float) -> Ink:
    return Ink(strokes=tuple(ramer_simplify(s, epsilon) for s in ink.strokes))


class SpanKind(Enum):
    STROKE = "stroke"
    OFFSTROKE = "offstroke"


@dataclass(frozen=True)
class Span:
    """Half-open frame range [start, stop) attributed to one pen event.

    For STROKE spans ``source_index`` is the stroke index.  For OFFSTROKE
    spans it is the index of the stroke the pen is travelling toward.
    """

    kind: SpanKind
    source_index: int
    start: int
    stop: int


@dataclass(frozen=True)
class FeatureSequence:
    """Frame features (T, 4) with the spans that produced them."""

    features: np.ndarray
    spans: tuple[Span, ...]

    @property
    def length(self) -> int:
        return int(self.features.shape[0])

    def stroke_frame_mask(self) -> np.ndarray:
        """Boolean (T,) mask of frames belonging to pen-down spans."""
        mask = np.zeros(self.length, dtype=bool)
        for span in self.spans:
            if span.kind is SpanKind.STROKE:
                mask[span.start : span.stop] = True
        return mask


def _direction_features(vec: np.ndarray) -> tuple[float, float, float]:
    dist = math.hypot(vec[0], vec[1])
    if dist == 0.0:
        return 0.0, 1.0, 0.0
    return vec[1] / dist, vec[0] / dist, dist


def featurize(ink: Ink) -> FeatureSequence:
    """Encode ink as frames of (sin_dir, cos_dir, norm_dist, pen_state).

    One frame per retained point.  The direction at an interior point spans
    from its predecessor to its successor; endpoints use their single
    neighbor.  Exactly one pen-up frame joins consecutive strokes, carrying
    the displacement from the previous stroke's last point to the next
    stroke's first point.
    """
    frames: list[tuple[float, float, float, float]] = []
    spans: list[Span] = []
    for idx, stroke in enumerate(ink.strokes):
        if idx > 0:
            vec = stroke[0] - ink.strokes[idx - 1][-1]
            s, c, d = _direction_features(vec)
            spans.append(Span(SpanKind.OFFSTROKE, idx, len(frames), len(frames) + 1))
            frames.append((s, c, d, 0.0))
        start = len(frames)
        n = len(stroke)
        for i in range(n):
            if n == 1:
                vec = np.zeros(2)
            else:
                prev = stroke[max(i - 1, 0)]
                nxt = stroke[min(i + 1, n - 1)]
                vec = nxt - prev
            s, c, d = _direction_features(vec)
            frames.append((s, c, d, 1.0))
        spans.append(Span(SpanKind.STROKE, idx, start, len(frames)))
    return FeatureSequence(features=np.array(frames, dtype=np.float64), spans=tuple(spans))


def prepare(ink: Ink, epsilon: float) -> Ink:
    """Normalization followed by simplification, the canonical preprocessing."""
    return simplify_ink(normalize(ink), epsilon)
