/** JSON contract of the recognition service, mirrored field for field. */

export type Point = readonly [number, number];
export type Stroke = readonly Point[];

export interface Candidate {
  latex: string;
  probability: number;
}

export interface SegmentReport {
  strokes: number[];
  label: string;
  probability: number;
}

export interface RelationReport {
  parent_strokes: number[];
  child_strokes: number[];
  relation: string;
}

export interface RecognitionResponse {
  latex: string;
  probability: number;
  parsed: boolean;
  candidates: Candidate[];
  segments: SegmentReport[];
  relations: RelationReport[];
  model_version: string;
  timing_ms: number;
}

export interface HealthResponse {
  status: string;
  model_version: string;
}

/** Native ink body: strokes in writing order, points in event order. */
export function serializeStrokes(strokes: readonly Stroke[]): { strokes: number[][][] } {
  return { strokes: strokes.map((stroke) => stroke.map((p) => [p[0], p[1]])) };
}

function isPoint(value: unknown): value is [number, number] {
  return (
    Array.isArray(value) &&
    value.length === 2 &&
    typeof value[0] === "number" &&
    typeof value[1] === "number" &&
    Number.isFinite(value[0]) &&
    Number.isFinite(value[1])
  );
}

/** Parse the native wire format back into strokes; throws on bad shapes. */
export function parseNative(obj: unknown): Stroke[] {
  if (typeof obj !== "object" || obj === null || !("strokes" in obj)) {
    throw new Error("ink must be an object with a strokes array");
  }
  const raw = (obj as { strokes: unknown }).strokes;
  if (!Array.isArray(raw) || raw.length === 0) {
    throw new Error("strokes must be a non-empty array");
  }
  return raw.map((stroke, i) => {
    if (!Array.isArray(stroke) || stroke.length === 0) {
      throw new Error(`stroke ${i} must be a non-empty array of points`);
    }
    return stroke.map((point, j) => {
      if (!isPoint(point)) {
        throw new Error(`stroke ${i} point ${j} must be [x, y] with finite numbers`);
      }
      return [point[0], point[1]] as Point;
    });
  });
}
