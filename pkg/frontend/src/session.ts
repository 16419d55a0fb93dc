/** Pad state and its pure transition functions.
 *
 * The UI renders a pure function of this state. Recognition requests carry
 * a sequence number; only the newest open request may change the state, so
 * stale responses and failures are discarded without touching the strokes.
 */

import type { RecognitionResponse, Stroke } from "./wire.js";

export interface Settings {
  topk: number;
  autoDelayMs: number;
}

export const DEFAULT_SETTINGS: Settings = { topk: 5, autoDelayMs: 600 };

export interface PadSession {
  readonly strokes: readonly Stroke[];
  readonly settings: Settings;
  readonly response: RecognitionResponse | null;
  readonly error: string | null;
  /** Sequence number of the open request, or null when idle. */
  readonly inFlight: number | null;
  readonly nextSeq: number;
}

export function emptySession(settings: Settings = DEFAULT_SETTINGS): PadSession {
  return {
    strokes: [],
    settings,
    response: null,
    error: null,
    inFlight: null,
    nextSeq: 1,
  };
}

/** Append a finished stroke; single-point taps count, empty strokes do not. */
export function addStroke(session: PadSession, stroke: Stroke): PadSession {
  if (stroke.length === 0) {
    return session;
  }
  return { ...session, strokes: [...session.strokes, stroke] };
}

export function undoStroke(session: PadSession): PadSession {
  if (session.strokes.length === 0) {
    return session;
  }
  return { ...session, strokes: session.strokes.slice(0, -1) };
}

export function clearSession(session: PadSession): PadSession {
  return {
    ...session,
    strokes: [],
    response: null,
    error: null,
    inFlight: null,
  };
}

/** Open a recognition request; the returned seq tags its eventual outcome. */
export function beginRecognition(session: PadSession): { session: PadSession; seq: number } {
  if (session.strokes.length === 0) {
    throw new Error("nothing to recognize: no strokes captured");
  }
  const seq = session.nextSeq;
  return {
    session: { ...session, inFlight: seq, nextSeq: seq + 1 },
    seq,
  };
}

export function applyResponse(
  session: PadSession,
  seq: number,
  response: RecognitionResponse,
): PadSession {
  if (session.inFlight !== seq) {
    return session;
  }
  return { ...session, response, error: null, inFlight: null };
}

/** A failed request reports an error and leaves everything else intact. */
export function applyFailure(session: PadSession, seq: number, message: string): PadSession {
  if (session.inFlight !== seq) {
    return session;
  }
  return { ...session, error: message, inFlight: null };
}

export interface ViewState {
  readonly busy: boolean;
  readonly banner: string | null;
  readonly latex: string;
  readonly candidates: readonly { latex: string; probability: number }[];
  /** Per-segment symbols, shown when the expression did not parse. */
  readonly fallbackSegments: readonly { label: string; probability: number }[];
  readonly strokeCount: number;
  readonly timingMs: number | null;
}

/** What the page shows, derived from the session alone. */
export function viewState(session: PadSession): ViewState {
  const r = session.response;
  return {
    busy: session.inFlight !== null,
    banner: session.error,
    latex: r !== null && r.parsed ? r.latex : "",
    candidates: r !== null ? r.candidates : [],
    fallbackSegments:
      r !== null && !r.parsed
        ? r.segments.map((s) => ({ label: s.label, probability: s.probability }))
        : [],
    strokeCount: session.strokes.length,
    timingMs: r !== null ? r.timing_ms : null,
  };
}
